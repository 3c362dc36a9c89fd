//! Reusable smooth maps.

use super::lie::{lie_along_vec, ControlAffineSystem, Direction};
use super::{Real, ScalarField, Smooth, VectorField};
use crate::error::{check_dim, Error, Result};

/// `x ↦ A x + b` with `A` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    rows: usize,
    cols: usize,
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl Affine {
    pub fn new(rows: usize, cols: usize, matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        check_dim("affine matrix", rows * cols, matrix.len())?;
        check_dim("affine offset", rows, offset.len())?;
        Ok(Affine {
            rows,
            cols,
            matrix,
            offset,
        })
    }

    pub fn linear(rows: usize, cols: usize, matrix: Vec<f64>) -> Result<Self> {
        Affine::new(rows, cols, matrix, vec![0.0; rows])
    }

    /// `x ↦ weight · x[index] + offset` on `ℝ^dim`.
    pub fn coordinate(dim: usize, index: usize, weight: f64, offset: f64) -> Result<Self> {
        if index >= dim {
            return Err(Error::Contract(format!("coordinate {index} out of range {dim}")));
        }
        let mut row = vec![0.0; dim];
        row[index] = weight;
        Affine::new(1, dim, row, vec![offset])
    }
}

impl Smooth for Affine {
    fn dim_in(&self) -> usize {
        self.cols
    }
    fn dim_out(&self) -> usize {
        self.rows
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        Ok((0..self.rows)
            .map(|i| {
                let row = &self.matrix[i * self.cols..(i + 1) * self.cols];
                row.iter()
                    .zip(x)
                    .filter(|(a, _)| **a != 0.0)
                    .fold(T::cst(self.offset[i]), |acc, (&a, &xi)| acc + xi * a)
            })
            .collect())
    }
}

/// A map that ignores its input.
#[derive(Clone, Debug, PartialEq)]
pub struct Constant {
    dim_in: usize,
    value: Vec<f64>,
}

impl Constant {
    pub fn new(dim_in: usize, value: Vec<f64>) -> Self {
        Constant { dim_in, value }
    }
}

impl Smooth for Constant {
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.value.len()
    }
    fn eval<T: Real>(&self, _x: &[T]) -> Result<Vec<T>> {
        Ok(self.value.iter().map(|&v| T::cst(v)).collect())
    }
}

/// `x ↦ outer(inner(x))`.
#[derive(Clone, Debug)]
pub struct Compose {
    outer: VectorField,
    inner: VectorField,
}

impl Compose {
    pub fn new(outer: VectorField, inner: VectorField) -> Result<Self> {
        check_dim("composition", outer.dim_in(), inner.dim_out())?;
        Ok(Compose { outer, inner })
    }
}

impl Smooth for Compose {
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.outer.dim_out()
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        self.outer.eval(&self.inner.eval(x)?)
    }
}

/// Evaluates `inner` on the block `x[offset .. offset + inner.dim_in()]` of a
/// larger state of dimension `total`.
#[derive(Clone, Debug)]
pub struct Restrict {
    inner: VectorField,
    offset: usize,
    total: usize,
}

impl Restrict {
    pub fn new(inner: VectorField, offset: usize, total: usize) -> Result<Self> {
        if offset + inner.dim_in() > total {
            return Err(Error::Dimension {
                what: "restricted block",
                expected: total,
                got: offset + inner.dim_in(),
            });
        }
        Ok(Restrict {
            inner,
            offset,
            total,
        })
    }
}

impl Smooth for Restrict {
    fn dim_in(&self) -> usize {
        self.total
    }
    fn dim_out(&self) -> usize {
        self.inner.dim_out()
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        self.inner
            .eval(&x[self.offset..self.offset + self.inner.dim_in()])
    }
}

/// The scalar field `x ↦ L_dir L_f^{order-1} field(x)` (or `L_f^order` for the drift).
#[derive(Clone, Debug)]
pub struct LieField {
    field: ScalarField,
    sys: ControlAffineSystem,
    order: usize,
    along: Direction,
}

impl LieField {
    pub fn new(
        field: ScalarField,
        sys: ControlAffineSystem,
        order: usize,
        along: Direction,
    ) -> Result<Self> {
        check_dim("field input vs state", sys.n(), field.dim_in())?;
        if matches!(along, Direction::Input(_)) && order == 0 {
            return Err(Error::Contract(
                "input-direction Lie derivative needs order >= 1".into(),
            ));
        }
        Ok(LieField {
            field,
            sys,
            order,
            along,
        })
    }
}

impl Smooth for LieField {
    fn dim_in(&self) -> usize {
        self.sys.n()
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        lie_along_vec(&self.field, &self.sys, x, self.order, self.along)
    }
}
