//! Smooth fields over the state space and their Lie derivatives.
//!
//! Fields are written once against the [`Real`] trait and evaluated on plain
//! `f64` or on nested jets. Derivatives of any order up to the compiled
//! nesting depth come from forward-mode differentiation: a directional
//! derivative is one evaluation on a lifted point, and an iterated Lie
//! derivative is a stack of such lifts.

mod blocks;
mod jet;
mod lie;

use std::fmt;
use std::sync::Arc;

pub use blocks::{Affine, Compose, Constant, LieField, Restrict};
pub use jet::{Dual, Real, J1, J2, J3, J4, J5, J6, MAX_NESTING};
pub use lie::{central_difference, ControlAffineSystem, Direction, LieEngine, FD_STEP};

pub(crate) use jet::{ensure_headroom, lift_point};

use crate::error::{check_dim, Error, Result};

/// A smooth map `ℝ^dim_in → ℝ^dim_out` written generically over [`Real`].
///
/// Implementations must be total on finite inputs, or return
/// [`Error::Domain`] at documented singular points.
pub trait Smooth: Send + Sync + 'static {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>>;
}

/// Object-safe view of a [`Smooth`] map with one entry point per jet level.
pub trait DynField: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn eval0(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn eval1(&self, x: &[J1]) -> Result<Vec<J1>>;
    fn eval2(&self, x: &[J2]) -> Result<Vec<J2>>;
    fn eval3(&self, x: &[J3]) -> Result<Vec<J3>>;
    fn eval4(&self, x: &[J4]) -> Result<Vec<J4>>;
    fn eval5(&self, x: &[J5]) -> Result<Vec<J5>>;
    fn eval6(&self, x: &[J6]) -> Result<Vec<J6>>;
}

impl<S: Smooth> DynField for S {
    fn in_dim(&self) -> usize {
        self.dim_in()
    }
    fn out_dim(&self) -> usize {
        self.dim_out()
    }
    fn eval0(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval(x)
    }
    fn eval1(&self, x: &[J1]) -> Result<Vec<J1>> {
        self.eval(x)
    }
    fn eval2(&self, x: &[J2]) -> Result<Vec<J2>> {
        self.eval(x)
    }
    fn eval3(&self, x: &[J3]) -> Result<Vec<J3>> {
        self.eval(x)
    }
    fn eval4(&self, x: &[J4]) -> Result<Vec<J4>> {
        self.eval(x)
    }
    fn eval5(&self, x: &[J5]) -> Result<Vec<J5>> {
        self.eval(x)
    }
    fn eval6(&self, x: &[J6]) -> Result<Vec<J6>> {
        self.eval(x)
    }
}

/// Shared handle to a vector-valued smooth map.
#[derive(Clone)]
pub struct VectorField {
    inner: Arc<dyn DynField>,
}

impl VectorField {
    pub fn new<S: Smooth>(map: S) -> Self {
        VectorField {
            inner: Arc::new(map),
        }
    }

    pub fn dim_in(&self) -> usize {
        self.inner.in_dim()
    }

    pub fn dim_out(&self) -> usize {
        self.inner.out_dim()
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim("vector field input", self.dim_in(), x.len())?;
        let y = T::call(&*self.inner, x)?;
        check_dim("vector field output", self.dim_out(), y.len())?;
        Ok(y)
    }

    /// Value at a plain `f64` point.
    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval(x)
    }

    /// Row `i` of the Jacobian, via one jet pass per input coordinate.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.dim_in();
        check_dim("jacobian point", n, x.len())?;
        let mut jac = vec![vec![0.0; n]; self.dim_out()];
        for k in 0..n {
            let seeded: Vec<J1> = x
                .iter()
                .enumerate()
                .map(|(i, &v)| Dual::new(v, if i == k { 1.0 } else { 0.0 }))
                .collect();
            for (row, y) in jac.iter_mut().zip(self.eval(&seeded)?) {
                row[k] = y.eps;
            }
        }
        Ok(jac)
    }
}

impl Smooth for VectorField {
    fn dim_in(&self) -> usize {
        VectorField::dim_in(self)
    }
    fn dim_out(&self) -> usize {
        VectorField::dim_out(self)
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        VectorField::eval(self, x)
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField({} -> {})", self.dim_in(), self.dim_out())
    }
}

/// Shared handle to a real-valued smooth map.
#[derive(Clone)]
pub struct ScalarField {
    inner: Arc<dyn DynField>,
}

impl ScalarField {
    pub fn new<S: Smooth>(map: S) -> Result<Self> {
        if map.dim_out() != 1 {
            return Err(Error::Contract(format!(
                "scalar field must have one output, got {}",
                map.dim_out()
            )));
        }
        Ok(ScalarField {
            inner: Arc::new(map),
        })
    }

    pub fn dim_in(&self) -> usize {
        self.inner.in_dim()
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Result<T> {
        check_dim("scalar field input", self.dim_in(), x.len())?;
        let y = T::call(&*self.inner, x)?;
        check_dim("scalar field output", 1, y.len())?;
        Ok(y[0])
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }

    /// `∂field/∂x` at `x`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim_in();
        check_dim("gradient point", n, x.len())?;
        (0..n)
            .map(|k| {
                let seeded: Vec<J1> = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| Dual::new(v, if i == k { 1.0 } else { 0.0 }))
                    .collect();
                Ok(self.eval(&seeded)?.eps)
            })
            .collect()
    }

    /// Value and derivative along `dir` at the same point, from one jet pass.
    pub fn directional<T: Real>(&self, x: &[T], dir: &[T]) -> Result<(T, T)> {
        check_dim("direction", x.len(), dir.len())?;
        ensure_headroom::<T>(1)?;
        let lifted = lift_point(x, dir);
        Ok(T::split(self.eval(&lifted)?))
    }
}

impl Smooth for ScalarField {
    fn dim_in(&self) -> usize {
        ScalarField::dim_in(self)
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(vec![ScalarField::eval(self, x)?])
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({} -> 1)", self.dim_in())
    }
}
