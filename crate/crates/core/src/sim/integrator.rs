//! Fixed-step classical Runge–Kutta.

use crate::error::{check_dim, Error, Result};
use crate::fields::ControlAffineSystem;

/// One RK4 step of `ẋ = rhs(x)`.
pub fn rk4<F>(mut rhs: F, x: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("step size must be positive, got {dt}")));
    }
    let n = x.len();
    let shifted = |k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    let k1 = rhs(x)?;
    check_dim("state derivative", n, k1.len())?;
    let k2 = rhs(&shifted(&k1, 0.5 * dt))?;
    let k3 = rhs(&shifted(&k2, 0.5 * dt))?;
    let k4 = rhs(&shifted(&k3, dt))?;
    Ok((0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// RK4 step of a control-affine system with `u` held over the step.
pub fn step_rk4(sys: &ControlAffineSystem, x: &[f64], u: &[f64], dt: f64) -> Result<Vec<f64>> {
    check_dim("state", sys.n(), x.len())?;
    check_dim("input", sys.m(), u.len())?;
    rk4(|y| sys.xdot(y, u), x, dt)
}
