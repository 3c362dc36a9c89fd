//! Relaxed barrier quadratic program with a single affine constraint.
//!
//! ```text
//! minimise   ½ uᵀQu + cᵀu + γ μ²
//! subject to a + bᵀu + h μ ≥ 0,   a = L_f h + α(h),  b = L_g hᵀ
//! ```
//!
//! The problem is strictly convex in `(u, μ)` with one inequality, so the
//! KKT system has a two-case closed form: either the unconstrained minimiser
//! is feasible, or the constraint is active with multiplier
//! `λ = (bᵀQ⁻¹c − a) / (bᵀQ⁻¹b + h²/(2γ))`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cbf_chain::AlphaFunction;
use crate::error::{check_dim, Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const DENOMINATOR_FLOOR: f64 = 1e-14;
const SLACK_UNDERFLOW: f64 = 1e-300;

/// One instance of the filter program.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterProblem {
    /// Row-major `m × m`, symmetric positive definite.
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub gamma: f64,
    pub alpha: AlphaFunction,
    pub h: f64,
    pub lf_h: f64,
    pub lg_h: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStatus {
    Unconstrained,
    Active,
    /// Active, but `L_g h = 0` so only the slack moves.
    SlackOnly,
}

impl FilterStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterStatus::Unconstrained => "unconstrained",
            FilterStatus::Active => "active",
            FilterStatus::SlackOnly => "slack_only",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterSolution {
    pub u: Vec<f64>,
    pub mu: f64,
    pub status: FilterStatus,
    /// KKT multiplier of the barrier constraint.
    pub lambda: f64,
}

impl FilterProblem {
    /// Minimum-intervention problem `‖u − u_des‖²` with `Q = I`, `c = −u_des`.
    pub fn min_intervention(
        u_des: &[f64],
        gamma: f64,
        alpha: AlphaFunction,
        h: f64,
        lf_h: f64,
        lg_h: Vec<f64>,
    ) -> Self {
        let m = u_des.len();
        let mut q = vec![0.0; m * m];
        for i in 0..m {
            q[i * m + i] = 1.0;
        }
        FilterProblem {
            q,
            c: u_des.iter().map(|v| -v).collect(),
            gamma,
            alpha,
            h,
            lf_h,
            lg_h,
        }
    }

    pub fn m(&self) -> usize {
        self.c.len()
    }

    /// `a = L_f h + α(h)`.
    pub fn drift_term(&self) -> f64 {
        self.lf_h + self.alpha.value(self.h)
    }

    /// `a + bᵀu + h μ`.
    pub fn residual(&self, u: &[f64], mu: f64) -> f64 {
        self.drift_term() + dot(&self.lg_h, u) + self.h * mu
    }

    pub fn objective(&self, u: &[f64], mu: f64) -> f64 {
        let m = self.m();
        let mut quad = 0.0;
        for i in 0..m {
            for j in 0..m {
                quad += u[i] * self.q[i * m + j] * u[j];
            }
        }
        0.5 * quad + dot(&self.c, u) + self.gamma * mu * mu
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if m == 0 {
            return Err(Error::Contract("filter input dimension must be positive".into()));
        }
        check_dim("filter Q", m * m, self.q.len())?;
        check_dim("filter L_g h", m, self.lg_h.len())?;
        if !(self.gamma > 0.0) {
            return Err(Error::Contract(format!("slack weight must be positive, got {}", self.gamma)));
        }
        for i in 0..m {
            for j in 0..i {
                if (self.q[i * m + j] - self.q[j * m + i]).abs() > SYMMETRY_TOL {
                    return Err(Error::Contract("filter Q is not symmetric".into()));
                }
            }
        }
        let finite = self.q.iter().chain(&self.c).chain(&self.lg_h).all(|v| v.is_finite())
            && self.h.is_finite()
            && self.lf_h.is_finite();
        if !finite {
            return Err(Error::Contract("filter problem has non-finite data".into()));
        }
        Ok(())
    }

    fn factor(&self) -> Result<QSolver> {
        self.validate()?;
        let m = self.m();
        let q = DMatrix::from_row_slice(m, m, &self.q);
        let chol = q
            .cholesky()
            .ok_or_else(|| Error::Singular("filter Q is not positive definite".into()))?;
        Ok(QSolver { chol })
    }
}

struct QSolver {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl QSolver {
    fn solve(&self, v: &[f64]) -> Vec<f64> {
        self.chol
            .solve(&DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact minimiser of the filter program.
///
/// Returns [`Error::Infeasible`] when `bᵀQ⁻¹b + h²/(2γ)` vanishes at a point
/// where the unconstrained minimiser violates the constraint.
pub fn solve_filter(p: &FilterProblem) -> Result<FilterSolution> {
    let solver = p.factor()?;
    let qinv_c = solver.solve(&p.c);
    let u0: Vec<f64> = qinv_c.iter().map(|v| -v).collect();
    let a = p.drift_term();
    let b = &p.lg_h;
    if a + dot(b, &u0) >= 0.0 {
        return Ok(FilterSolution {
            u: u0,
            mu: 0.0,
            status: FilterStatus::Unconstrained,
            lambda: 0.0,
        });
    }

    let qinv_b = solver.solve(b);
    let bqb = dot(b, &qinv_b);
    let mut slack = p.h * p.h / (2.0 * p.gamma);
    if slack < SLACK_UNDERFLOW {
        slack = 0.0;
    }
    let denom = bqb + slack;
    if !(denom >= DENOMINATOR_FLOOR) {
        return Err(Error::Infeasible(format!(
            "b'Q^-1 b + h^2/(2 gamma) = {denom:e} with constraint value {:e}; \
             L_g h vanishes where the barrier constraint is violated",
            a + dot(b, &u0)
        )));
    }
    let lambda = (dot(b, &qinv_c) - a) / denom;
    let u = qinv_b
        .iter()
        .zip(&qinv_c)
        .map(|(qb, qc)| lambda * qb - qc)
        .collect();
    let mu = lambda * p.h / (2.0 * p.gamma);
    let status = if b.iter().all(|&v| v == 0.0) {
        FilterStatus::SlackOnly
    } else {
        FilterStatus::Active
    };
    if mu < 0.0 {
        log::debug!("filter slack is negative: mu = {mu:e}");
    }
    Ok(FilterSolution {
        u,
        mu,
        status,
        lambda,
    })
}

/// Stationarity residuals `(‖Qu + c − λb‖, |2γμ − λh|)`.
pub fn kkt_residuals(p: &FilterProblem, s: &FilterSolution) -> (f64, f64) {
    let m = p.m();
    let mut norm2 = 0.0;
    for i in 0..m {
        let qu: f64 = (0..m).map(|j| p.q[i * m + j] * s.u[j]).sum();
        let r = qu + p.c[i] - s.lambda * p.lg_h[i];
        norm2 += r * r;
    }
    (norm2.sqrt(), (2.0 * p.gamma * s.mu - s.lambda * p.h).abs())
}

/// A point satisfying the barrier constraint with non-negative slack.
#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    FeasibleWith { u: Vec<f64>, mu: f64 },
    InfeasibleHint(String),
}

/// Constructs a feasible `(u, μ ≥ 0)` when one exists by the slack or
/// input-direction arguments; never fails.
pub fn feasibility_certificate(p: &FilterProblem) -> Certificate {
    let u0: Vec<f64> = match p.factor() {
        Ok(solver) => solver.solve(&p.c).iter().map(|v| -v).collect(),
        Err(e) => return Certificate::InfeasibleHint(e.to_string()),
    };
    let a = p.drift_term();
    let b = &p.lg_h;
    let r0 = a + dot(b, &u0);
    if p.h > 0.0 {
        return Certificate::FeasibleWith {
            mu: (-r0 / p.h).max(0.0),
            u: u0,
        };
    }
    let bb = dot(b, b);
    if bb > 0.0 {
        let t = (-r0).max(0.0) / bb;
        let u = u0.iter().zip(b).map(|(ui, bi)| ui + t * bi).collect();
        return Certificate::FeasibleWith { u, mu: 0.0 };
    }
    if a >= 0.0 {
        return Certificate::FeasibleWith { u: u0, mu: 0.0 };
    }
    Certificate::InfeasibleHint(format!(
        "L_g h = 0 and h = {} <= 0 with L_f h + alpha(h) = {a} < 0",
        p.h
    ))
}

/// Exhaustive grid search over `(u, μ)`, used to validate [`solve_filter`].
pub mod oracle {
    use super::*;

    /// Box and resolution for [`solve_filter_oracle`]; the last coordinate is `μ`.
    #[derive(Clone, Debug, PartialEq)]
    pub struct OracleGrid {
        pub lower: Vec<f64>,
        pub upper: Vec<f64>,
        /// Points per axis at every refinement level.
        pub resolution: usize,
        /// Number of zoom-ins around the incumbent after the first sweep.
        pub refinements: usize,
    }

    impl OracleGrid {
        pub fn cube(m: usize, half_width: f64, resolution: usize, refinements: usize) -> Self {
            OracleGrid {
                lower: vec![-half_width; m + 1],
                upper: vec![half_width; m + 1],
                resolution,
                refinements,
            }
        }
    }

    /// Best feasible grid point. Each refinement re-grids a box of two cells
    /// around the incumbent, clipped to the original box.
    pub fn solve_filter_oracle(p: &FilterProblem, grid: &OracleGrid) -> Result<FilterSolution> {
        p.validate()?;
        let m = p.m();
        if m > 2 {
            return Err(Error::Unsupported(format!("grid oracle supports m <= 2, got {m}")));
        }
        check_dim("oracle box", m + 1, grid.lower.len())?;
        check_dim("oracle box", m + 1, grid.upper.len())?;
        if grid.resolution < 2 {
            return Err(Error::Contract("oracle resolution must be >= 2".into()));
        }
        let dims = m + 1;
        let mut lo = grid.lower.clone();
        let mut hi = grid.upper.clone();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut point = vec![0.0; dims];
        for _level in 0..=grid.refinements {
            let steps: Vec<f64> = (0..dims)
                .map(|d| (hi[d] - lo[d]) / (grid.resolution - 1) as f64)
                .collect();
            let total = grid.resolution.pow(dims as u32);
            for idx in 0..total {
                let mut rem = idx;
                for d in 0..dims {
                    point[d] = lo[d] + steps[d] * (rem % grid.resolution) as f64;
                    rem /= grid.resolution;
                }
                let (u, mu) = (&point[..m], point[m]);
                if p.residual(u, mu) < 0.0 {
                    continue;
                }
                let obj = p.objective(u, mu);
                if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                    best = Some((obj, point.clone()));
                }
            }
            let Some((_, center)) = &best else { break };
            for d in 0..dims {
                lo[d] = (center[d] - 2.0 * steps[d]).max(grid.lower[d]);
                hi[d] = (center[d] + 2.0 * steps[d]).min(grid.upper[d]);
            }
        }
        let (_, point) = best.ok_or_else(|| {
            Error::Infeasible("no feasible grid point in the oracle box".into())
        })?;
        let u = point[..m].to_vec();
        let mu = point[m];
        let status = if p.residual(&u, mu) > 1e-6 && mu == 0.0 {
            FilterStatus::Unconstrained
        } else {
            FilterStatus::Active
        };
        Ok(FilterSolution {
            u,
            mu,
            status,
            lambda: f64::NAN,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::{solve_filter_oracle, OracleGrid};
    use super::*;

    fn one_d(lf_h: f64, lg: f64, h: f64, gamma: f64) -> FilterProblem {
        FilterProblem {
            q: vec![1.0],
            c: vec![0.0],
            gamma,
            alpha: AlphaFunction::zero(),
            h,
            lf_h,
            lg_h: vec![lg],
        }
    }

    #[test]
    fn inactive_constraint_returns_unconstrained_minimiser() {
        let p = FilterProblem {
            alpha: AlphaFunction::zero(),
            ..one_d(1.0, 1.0, 1.0, 1.0)
        };
        let s = solve_filter(&p).unwrap();
        assert_eq!(s.u, vec![0.0]);
        assert_eq!(s.mu, 0.0);
        assert_eq!(s.status, FilterStatus::Unconstrained);
    }

    #[test]
    fn active_one_dimensional_case() {
        let s = solve_filter(&one_d(-1.0, 1.0, 0.0, 3.0)).unwrap();
        assert_eq!(s.status, FilterStatus::Active);
        assert!((s.lambda - 1.0).abs() < 1e-15);
        assert!((s.u[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.mu, 0.0);
    }

    #[test]
    fn slack_only_when_input_has_no_authority() {
        let s = solve_filter(&one_d(-2.0, 0.0, 1.0, 0.5)).unwrap();
        assert_eq!(s.status, FilterStatus::SlackOnly);
        assert_eq!(s.u, vec![0.0]);
        // a + h μ = 0 → μ = 2
        assert!((s.mu - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_when_both_b_and_h_vanish() {
        let err = solve_filter(&one_d(-1.0, 0.0, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn huge_slack_weight_is_handled_exactly() {
        let p = FilterProblem {
            alpha: AlphaFunction::linear(0.5),
            ..one_d(-3.0, 2.0, 0.1, 1e24)
        };
        let s = solve_filter(&p).unwrap();
        assert!(p.residual(&s.u, s.mu).abs() < 1e-12);
        let (r1, r2) = kkt_residuals(&p, &s);
        assert!(r1 < 1e-12 && r2 < 1e-12);
    }

    #[test]
    fn rejects_bad_problems() {
        let mut p = one_d(0.0, 1.0, 1.0, 1.0);
        p.gamma = 0.0;
        assert!(solve_filter(&p).is_err());
        let p = FilterProblem {
            q: vec![1.0, 0.5, 0.4, 1.0],
            c: vec![0.0, 0.0],
            lg_h: vec![1.0, 0.0],
            ..one_d(0.0, 1.0, 1.0, 1.0)
        };
        assert!(matches!(solve_filter(&p), Err(Error::Contract(_))));
        let p = FilterProblem {
            q: vec![1.0, 2.0, 2.0, 1.0],
            c: vec![0.0, 0.0],
            lg_h: vec![1.0, 0.0],
            ..one_d(0.0, 1.0, 1.0, 1.0)
        };
        assert!(matches!(solve_filter(&p), Err(Error::Singular(_))));
    }

    #[test]
    fn certificates() {
        let mut p = one_d(-5.0, 1.0, 1.0, 1.0);
        p.q = vec![1.0, 0.0, 0.0, 1.0];
        p.c = vec![0.0, 0.0];
        p.lg_h = vec![3.0, -1.0];
        assert_eq!(
            feasibility_certificate(&p),
            Certificate::FeasibleWith {
                u: vec![-0.0, -0.0],
                mu: 5.0
            }
        );
        p.h = 0.0;
        p.lf_h = -3.0;
        p.lg_h = vec![0.0, 1.0];
        assert_eq!(
            feasibility_certificate(&p),
            Certificate::FeasibleWith {
                u: vec![0.0, 3.0],
                mu: 0.0
            }
        );
        p.lf_h = -1.0;
        p.lg_h = vec![0.0, 0.0];
        assert!(matches!(
            feasibility_certificate(&p),
            Certificate::InfeasibleHint(_)
        ));
    }

    #[test]
    fn oracle_reproduces_hand_cases() {
        let grid = OracleGrid::cube(1, 3.0, 31, 6);
        let p = one_d(1.0, 1.0, 1.0, 1.0);
        let s = solve_filter_oracle(&p, &grid).unwrap();
        assert!(s.u[0].abs() < 0.2 && s.mu.abs() < 0.2);
        let p = one_d(-1.0, 1.0, 0.0, 1.0);
        let s = solve_filter_oracle(&p, &grid).unwrap();
        assert!((s.u[0] - 1.0).abs() < 0.2);
        let exact = solve_filter(&p).unwrap();
        assert!(p.objective(&s.u, s.mu) >= p.objective(&exact.u, exact.mu) - 1e-12);
    }

    #[test]
    fn oracle_reports_empty_feasible_set() {
        let grid = OracleGrid::cube(1, 1.0, 11, 0);
        let p = one_d(-10.0, 1.0, 0.0, 1.0);
        assert!(matches!(
            solve_filter_oracle(&p, &grid),
            Err(Error::Infeasible(_))
        ));
    }
}
