use super::{ensure_headroom, lift_point, Real, ScalarField, VectorField, MAX_NESTING};
use crate::error::{check_dim, Error, Result};

/// Step used by every central finite-difference check in this crate.
pub const FD_STEP: f64 = 1e-5;

/// Central finite-difference gradient of `f` at `x`.
pub fn central_difference<F>(f: F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let hi = f(&probe)?;
        probe[i] = x[i] - step;
        let lo = f(&probe)?;
        probe[i] = x[i];
        grad.push((hi - lo) / (2.0 * step));
    }
    Ok(grad)
}

/// `ẋ = f(x) + g(x) u` with `f: ℝⁿ → ℝⁿ` and `g: ℝⁿ → ℝ^{n×m}` stored row-major.
#[derive(Clone, Debug)]
pub struct ControlAffineSystem {
    n: usize,
    m: usize,
    f: VectorField,
    g: VectorField,
}

impl ControlAffineSystem {
    pub fn new(f: VectorField, g: VectorField, m: usize) -> Result<Self> {
        let n = f.dim_in();
        check_dim("drift output", n, f.dim_out())?;
        check_dim("input matrix input", n, g.dim_in())?;
        check_dim("input matrix output", n * m, g.dim_out())?;
        if m == 0 {
            return Err(Error::Contract("input dimension must be positive".into()));
        }
        Ok(ControlAffineSystem { n, m, f, g })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn drift_field(&self) -> &VectorField {
        &self.f
    }

    pub fn input_field(&self) -> &VectorField {
        &self.g
    }

    pub fn drift<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        self.f.eval(x)
    }

    /// `g(x)` as a row-major `n × m` array.
    pub fn input_matrix<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        self.g.eval(x)
    }

    pub fn input_column<T: Real>(&self, x: &[T], k: usize) -> Result<Vec<T>> {
        if k >= self.m {
            return Err(Error::Contract(format!(
                "input column {k} out of range for m = {}",
                self.m
            )));
        }
        let g = self.g.eval(x)?;
        Ok((0..self.n).map(|i| g[i * self.m + k]).collect())
    }

    /// `f(x) + g(x) u`.
    pub fn xdot(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        check_dim("control", self.m, u.len())?;
        let mut dx = self.f.eval(x)?;
        let g = self.g.eval(x)?;
        for (i, d) in dx.iter_mut().enumerate() {
            for (k, uk) in u.iter().enumerate() {
                *d += g[i * self.m + k] * uk;
            }
        }
        Ok(dx)
    }
}

/// Which vector field the outermost derivative is taken along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Drift,
    /// Column `k` of the input matrix.
    Input(usize),
}

pub(crate) trait FieldLike {
    fn eval_vec<T: Real>(&self, x: &[T]) -> Result<Vec<T>>;
}

impl FieldLike for ScalarField {
    fn eval_vec<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(vec![self.eval(x)?])
    }
}

impl FieldLike for VectorField {
    fn eval_vec<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        self.eval(x)
    }
}

/// `L_f^order field(x)`, componentwise.
pub(crate) fn lie_drift_vec<F: FieldLike, T: Real>(
    field: &F,
    sys: &ControlAffineSystem,
    x: &[T],
    order: usize,
) -> Result<Vec<T>> {
    if order == 0 {
        return field.eval_vec(x);
    }
    ensure_headroom::<T>(order)?;
    let fx = sys.drift(x)?;
    let lifted = lift_point(x, &fx);
    let y = lie_drift_vec::<F, T::Lifted>(field, sys, &lifted, order - 1)?;
    Ok(y.into_iter().map(|v| T::split(v).1).collect())
}

/// `L_dir L_f^{order-1} field(x)`; for `Direction::Drift` this is `L_f^order field(x)`.
pub(crate) fn lie_along_vec<F: FieldLike, T: Real>(
    field: &F,
    sys: &ControlAffineSystem,
    x: &[T],
    order: usize,
    dir: Direction,
) -> Result<Vec<T>> {
    match dir {
        Direction::Drift => lie_drift_vec(field, sys, x, order),
        Direction::Input(k) => {
            if order == 0 {
                return Err(Error::Contract(
                    "input-direction Lie derivative needs order >= 1".into(),
                ));
            }
            ensure_headroom::<T>(order)?;
            let gk = sys.input_column(x, k)?;
            let lifted = lift_point(x, &gk);
            let y = lie_drift_vec::<F, T::Lifted>(field, sys, &lifted, order - 1)?;
            Ok(y.into_iter().map(|v| T::split(v).1).collect())
        }
    }
}

/// Iterated Lie derivatives with a configured order budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LieEngine {
    max_order: usize,
}

impl Default for LieEngine {
    fn default() -> Self {
        LieEngine { max_order: 4 }
    }
}

impl LieEngine {
    pub fn new(max_order: usize) -> Result<Self> {
        if max_order > MAX_NESTING {
            return Err(Error::NestingDepth {
                requested: max_order,
                max: MAX_NESTING,
            });
        }
        Ok(LieEngine { max_order })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    fn check(&self, order: usize, field_dim: usize, sys: &ControlAffineSystem) -> Result<()> {
        if order > self.max_order {
            return Err(Error::NestingDepth {
                requested: order,
                max: self.max_order,
            });
        }
        check_dim("field input vs state", sys.n(), field_dim)
    }

    /// `L_f^order field(x)` on any jet level.
    pub fn drift<T: Real>(
        &self,
        field: &ScalarField,
        sys: &ControlAffineSystem,
        x: &[T],
        order: usize,
    ) -> Result<T> {
        self.check(order, field.dim_in(), sys)?;
        Ok(lie_drift_vec(field, sys, x, order)?[0])
    }

    /// `L_dir L_f^{order-1} field(x)`.
    pub fn along<T: Real>(
        &self,
        field: &ScalarField,
        sys: &ControlAffineSystem,
        x: &[T],
        order: usize,
        dir: Direction,
    ) -> Result<T> {
        self.check(order, field.dim_in(), sys)?;
        Ok(lie_along_vec(field, sys, x, order, dir)?[0])
    }

    /// The row `L_g L_f^{order-1} field(x)` of length `m`.
    pub fn input_row(
        &self,
        field: &ScalarField,
        sys: &ControlAffineSystem,
        x: &[f64],
        order: usize,
    ) -> Result<Vec<f64>> {
        (0..sys.m())
            .map(|k| self.along(field, sys, x, order, Direction::Input(k)))
            .collect()
    }

    /// `L_f^order` of each component of a vector field.
    pub fn drift_vec<T: Real>(
        &self,
        field: &VectorField,
        sys: &ControlAffineSystem,
        x: &[T],
        order: usize,
    ) -> Result<Vec<T>> {
        self.check(order, field.dim_in(), sys)?;
        lie_drift_vec(field, sys, x, order)
    }

    /// `L_g L_f^{order-1}` of a vector field as a `dim_out × m` matrix (row-major).
    pub fn input_matrix_vec(
        &self,
        field: &VectorField,
        sys: &ControlAffineSystem,
        x: &[f64],
        order: usize,
    ) -> Result<Vec<f64>> {
        self.check(order, field.dim_in(), sys)?;
        let p = field.dim_out();
        let m = sys.m();
        let mut out = vec![0.0; p * m];
        for k in 0..m {
            let col = lie_along_vec(field, sys, x, order, Direction::Input(k))?;
            for (i, v) in col.into_iter().enumerate() {
                out[i * m + k] = v;
            }
        }
        Ok(out)
    }
}
