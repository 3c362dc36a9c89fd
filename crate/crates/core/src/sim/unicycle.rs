//! Nonholonomic ground robot: dynamics, map barriers and the goal-seeking law.
//!
//! State `(q_x, q_y, v, θ)`, input `(v̇, θ̇)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Constant, ControlAffineSystem, Real, Smooth, VectorField};

/// Position, speed and heading indices of the plant state.
pub const QX: usize = 0;
pub const QY: usize = 1;
pub const V: usize = 2;
pub const THETA: usize = 3;

struct UnicycleDrift;

impl Smooth for UnicycleDrift {
    fn dim_in(&self) -> usize {
        4
    }
    fn dim_out(&self) -> usize {
        4
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let (v, th) = (x[V], x[THETA]);
        Ok(vec![v * th.cos(), v * th.sin(), T::cst(0.0), T::cst(0.0)])
    }
}

/// `f = (v cos θ, v sin θ, 0, 0)`, `g = [0 0; 0 0; 1 0; 0 1]`.
pub fn unicycle() -> ControlAffineSystem {
    let g = Constant::new(4, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    ControlAffineSystem::new(VectorField::new(UnicycleDrift), VectorField::new(g), 2)
        .expect("unicycle dimensions are consistent")
}

/// Axis-scaled p-norm obstacle: `‖(a_x(q_x − b_x), a_y(q_y − b_y))‖_p − c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleParams {
    pub b_x: f64,
    pub b_y: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub c: f64,
}

/// Wall interior: `c − ‖(a_x q_x, a_y q_y)‖_p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallParams {
    pub a_x: f64,
    pub a_y: f64,
    pub c: f64,
}

impl ObstacleParams {
    pub fn validate(&self, p: f64) -> Result<()> {
        if !(self.a_x > 0.0 && self.a_y > 0.0 && self.c > 0.0 && p > 0.0) {
            return Err(Error::Config(format!(
                "obstacle needs a_x, a_y, c, p > 0, got {self:?} with p = {p}"
            )));
        }
        Ok(())
    }
}

/// Which side of the p-norm level set is safe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Outside,
    Inside,
}

/// `±(‖(a_x(q_x − b_x), a_y(q_y − b_y))‖_p − c)` on a state whose first two
/// entries are the position.
///
/// Singular locus: the centre `(b_x, b_y)` for any derivative; for `p` that is
/// not an even integer also any point with a zero scaled component, and for
/// `p < 1` that set is rejected even for plain values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PNormBarrier {
    pub center: [f64; 2],
    pub scale: [f64; 2],
    pub c: f64,
    pub p: f64,
    pub side: Side,
    pub dim: usize,
}

impl PNormBarrier {
    pub fn obstacle(params: &ObstacleParams, p: f64, dim: usize) -> Result<Self> {
        params.validate(p)?;
        Ok(PNormBarrier {
            center: [params.b_x, params.b_y],
            scale: [params.a_x, params.a_y],
            c: params.c,
            p,
            side: Side::Outside,
            dim,
        })
    }

    pub fn wall(params: &WallParams, p: f64, dim: usize) -> Result<Self> {
        ObstacleParams {
            b_x: 0.0,
            b_y: 0.0,
            a_x: params.a_x,
            a_y: params.a_y,
            c: params.c,
        }
        .validate(p)?;
        Ok(PNormBarrier {
            center: [0.0, 0.0],
            scale: [params.a_x, params.a_y],
            c: params.c,
            p,
            side: Side::Inside,
            dim,
        })
    }

    fn even_power(&self) -> Option<i32> {
        let r = self.p.round();
        (r == self.p && r >= 2.0 && (r as i64) % 2 == 0 && r < 1e6).then_some(r as i32)
    }
}

impl Smooth for PNormBarrier {
    fn dim_in(&self) -> usize {
        self.dim
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let dx = (x[QX] - self.center[0]) * self.scale[0];
        let dy = (x[QY] - self.center[1]) * self.scale[1];
        let even = self.even_power();
        let zero_component = dx.re() == 0.0 || dy.re() == 0.0;
        if even.is_none() && zero_component && (self.p < 1.0 || T::DEPTH > 0) {
            return Err(Error::Domain(format!(
                "p-norm with p = {} is not differentiable on a coordinate axis",
                self.p
            )));
        }
        let term = |s: T| match even {
            Some(k) => s.powi(k),
            None => s.abs().powf(self.p),
        };
        let sum = term(dx) + term(dy);
        let norm = if sum.re() == 0.0 {
            if T::DEPTH > 0 {
                return Err(Error::Domain("p-norm is not differentiable at its centre".into()));
            }
            T::cst(0.0)
        } else {
            sum.powf(1.0 / self.p)
        };
        Ok(vec![match self.side {
            Side::Outside => norm - self.c,
            Side::Inside => -norm + self.c,
        }])
    }
}

/// Plain value of an obstacle barrier at a plant state.
pub fn obstacle_barrier(params: &ObstacleParams, p: f64, xhat: &[f64]) -> Result<f64> {
    Ok(PNormBarrier::obstacle(params, p, xhat.len())?.eval(xhat)?[0])
}

/// Gains `k_1, k_2, k_3 > 0` of the goal-seeking law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesiredControlGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl DesiredControlGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.k3 > 0.0) {
            return Err(Error::Config(format!("desired-control gains must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Goal-seeking control that ignores safety.
///
/// With `r = ‖q − q_d‖` and `ψ = atan2(q_y − q_dy, q_x − q_dx) − θ + π`:
/// `u_1 = −(k_1 + k_3)v + (1 + k_1k_3) r cos ψ + k_1(k_2 r + v) sin²ψ`,
/// `u_2 = (k_2 + v/r) sin ψ`. For `r ≤ capture_radius` (and always at `r = 0`)
/// it returns `(−(k_1 + k_3)v, 0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesiredControl {
    pub gains: DesiredControlGains,
    pub goal: [f64; 2],
    pub capture_radius: f64,
}

impl DesiredControl {
    pub fn new(gains: DesiredControlGains, goal: [f64; 2]) -> Self {
        DesiredControl {
            gains,
            goal,
            capture_radius: 0.0,
        }
    }
}

impl Smooth for DesiredControl {
    fn dim_in(&self) -> usize {
        4
    }
    fn dim_out(&self) -> usize {
        2
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let DesiredControlGains { k1, k2, k3 } = self.gains;
        let v = x[V];
        let dx = x[QX] - self.goal[0];
        let dy = x[QY] - self.goal[1];
        let damping = v * (-(k1 + k3));
        let (ex, ey) = (dx.re(), dy.re());
        if (ex == 0.0 && ey == 0.0) || ex.hypot(ey) <= self.capture_radius {
            return Ok(vec![damping, T::cst(0.0)]);
        }
        let r = (dx * dx + dy * dy).sqrt();
        let psi = dy.atan2(dx) - x[THETA] + std::f64::consts::PI;
        let (s, c) = (psi.sin(), psi.cos());
        let u1 = damping + r * c * (1.0 + k1 * k3) + (r * k2 + v) * s * s * k1;
        let u2 = (v / r + k2) * s;
        Ok(vec![u1, u2])
    }
}

pub fn desired_control_unicycle(
    gains: &DesiredControlGains,
    goal: [f64; 2],
    xhat: &[f64],
) -> Result<Vec<f64>> {
    crate::error::check_dim("plant state", 4, xhat.len())?;
    DesiredControl::new(*gains, goal).eval(xhat)
}
