//! Input constraints as barrier constraints on a controller-augmented system.
//!
//! The plant input `û = h_c(x_c)` is produced by controller dynamics
//! `ẋ_c = f_c(x_c) + g_c(x_c) u`, so bounds on `û` become state constraints
//! `φ_κ(h_c(x_c)) ≥ 0` of the cascade. The filter then acts on `u`, with a
//! tracking law `u_d` that drives `û` toward the minimiser `û_d` of the
//! plant-level cost.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cbf_chain::{AlphaFunction, BarrierSpec, DEGREE_TOL};
use crate::error::{check_dim, Error, Result};
use crate::fields::{
    Affine, Compose, Constant, ControlAffineSystem, LieEngine, Real, Restrict, ScalarField,
    Smooth, VectorField,
};
use crate::safety_filter::FilterProblem;

/// Largest condition number accepted for the decoupling matrix.
pub const DECOUPLING_COND_MAX: f64 = 1e8;

/// `ẋ_c = A_c x_c + B_c u`, `û = C_c x_c`, all row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LtiController {
    pub n_c: usize,
    pub m: usize,
    pub a_c: Vec<f64>,
    pub b_c: Vec<f64>,
    pub c_c: Vec<f64>,
}

impl LtiController {
    pub fn new(n_c: usize, m: usize, a_c: Vec<f64>, b_c: Vec<f64>, c_c: Vec<f64>) -> Result<Self> {
        check_dim("A_c", n_c * n_c, a_c.len())?;
        check_dim("B_c", n_c * m, b_c.len())?;
        check_dim("C_c", m * n_c, c_c.len())?;
        let ctrl = LtiController {
            n_c,
            m,
            a_c,
            b_c,
            c_c,
        };
        let cb = ctrl.cb();
        if !cb.is_invertible() || condition_number(&cb) > DECOUPLING_COND_MAX {
            return Err(Error::Config("C_c B_c must be nonsingular".into()));
        }
        Ok(ctrl)
    }

    fn cb(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.m, self.n_c, &self.c_c)
            * DMatrix::from_row_slice(self.n_c, self.m, &self.b_c)
    }

    /// Controller dynamics with `d_c = 1` and `ζ = 1`.
    pub fn dynamics(&self) -> Result<ControllerDynamics> {
        let f_c = VectorField::new(Affine::linear(self.n_c, self.n_c, self.a_c.clone())?);
        let g_c = VectorField::new(Constant::new(self.n_c, self.b_c.clone()));
        let h_c = VectorField::new(Affine::linear(self.m, self.n_c, self.c_c.clone())?);
        let mut dynamics = ControllerDynamics::new(f_c, g_c, h_c, self.m, 1, 1)?;
        dynamics.lti = Some(self.clone());
        Ok(dynamics)
    }
}

/// General controller dynamics `(f_c, g_c, h_c)` with degrees `d_c` and `ζ`.
#[derive(Clone, Debug)]
pub struct ControllerDynamics {
    n_c: usize,
    m: usize,
    f_c: VectorField,
    g_c: VectorField,
    h_c: VectorField,
    d_c: usize,
    zeta: usize,
    system: ControlAffineSystem,
    lti: Option<LtiController>,
}

impl ControllerDynamics {
    pub fn new(
        f_c: VectorField,
        g_c: VectorField,
        h_c: VectorField,
        m: usize,
        d_c: usize,
        zeta: usize,
    ) -> Result<Self> {
        let n_c = f_c.dim_in();
        check_dim("h_c input", n_c, h_c.dim_in())?;
        check_dim("h_c output", m, h_c.dim_out())?;
        if d_c == 0 || zeta == 0 {
            return Err(Error::Config("d_c and zeta must be positive".into()));
        }
        let system = ControlAffineSystem::new(f_c.clone(), g_c.clone(), m)?;
        Ok(ControllerDynamics {
            n_c,
            m,
            f_c,
            g_c,
            h_c,
            d_c,
            zeta,
            system,
            lti: None,
        })
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn d_c(&self) -> usize {
        self.d_c
    }
    pub fn zeta(&self) -> usize {
        self.zeta
    }
    pub fn output_map(&self) -> &VectorField {
        &self.h_c
    }
    pub fn system(&self) -> &ControlAffineSystem {
        &self.system
    }
    pub fn lti(&self) -> Option<&LtiController> {
        self.lti.as_ref()
    }

    /// `û = h_c(x_c)`.
    pub fn output(&self, x_c: &[f64]) -> Result<Vec<f64>> {
        self.h_c.eval(x_c)
    }

    /// `L_{g_c} L_{f_c}^{d_c−1} h_c(x_c)` as an `m × m` matrix.
    pub fn decoupling_matrix(&self, engine: &LieEngine, x_c: &[f64]) -> Result<DMatrix<f64>> {
        let d = engine.input_matrix_vec(&self.h_c, &self.system, x_c, self.d_c)?;
        Ok(DMatrix::from_row_slice(self.m, self.m, &d))
    }
}

/// Bounds on the plant input, `U = {û : φ_κ(û) ≥ 0}`.
#[derive(Clone, Debug)]
pub struct InputConstraintSpec {
    phis: Vec<ScalarField>,
    labels: Vec<String>,
}

impl InputConstraintSpec {
    pub fn new(phis: Vec<ScalarField>, labels: Vec<String>) -> Result<Self> {
        check_dim("input constraint labels", phis.len(), labels.len())?;
        if phis.is_empty() {
            return Err(Error::Config("input constraint set is empty".into()));
        }
        let m = phis[0].dim_in();
        for phi in &phis {
            check_dim("input constraint dimension", m, phi.dim_in())?;
        }
        Ok(InputConstraintSpec { phis, labels })
    }

    /// `upper_k − û_k ≥ 0` and `û_k − lower_k ≥ 0` for each component, in that order.
    pub fn boxed(lower: &[f64], upper: &[f64]) -> Result<Self> {
        check_dim("input bounds", lower.len(), upper.len())?;
        let m = lower.len();
        let mut phis = Vec::with_capacity(2 * m);
        let mut labels = Vec::with_capacity(2 * m);
        for k in 0..m {
            if !(lower[k] < upper[k]) {
                return Err(Error::Config(format!(
                    "input bound {k}: lower {} must be below upper {}",
                    lower[k], upper[k]
                )));
            }
            phis.push(ScalarField::new(Affine::coordinate(m, k, -1.0, upper[k])?)?);
            labels.push(format!("u{}_upper", k + 1));
            phis.push(ScalarField::new(Affine::coordinate(m, k, 1.0, -lower[k])?)?);
            labels.push(format!("u{}_lower", k + 1));
        }
        InputConstraintSpec::new(phis, labels)
    }

    pub fn m(&self) -> usize {
        self.phis[0].dim_in()
    }

    pub fn phis(&self) -> &[ScalarField] {
        &self.phis
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.phis.iter().map(|p| p.value(u)).collect()
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> Result<bool> {
        Ok(self.values(u)?.iter().all(|&v| v >= -tol))
    }

    /// Sampling check that `U ∩ box` is nonempty, that nothing in a shell
    /// around the box is admissible, and that `φ′_κ ≠ 0` on sampled points of `U`.
    pub fn validate(&self, lo: &[f64], hi: &[f64], samples: usize, seed: u64) -> Result<()> {
        let m = self.m();
        check_dim("input sampling box", m, lo.len())?;
        check_dim("input sampling box", m, hi.len())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inside = 0usize;
        for _ in 0..samples {
            let u: Vec<f64> = lo.iter().zip(hi).map(|(&a, &b)| rng.random_range(a..=b)).collect();
            if self.contains(&u, 0.0)? {
                inside += 1;
                for (phi, label) in self.phis.iter().zip(&self.labels) {
                    let g = phi.gradient(&u)?;
                    if g.iter().map(|v| v * v).sum::<f64>().sqrt() <= DEGREE_TOL {
                        return Err(Error::Config(format!(
                            "input constraint {label} has vanishing gradient at {u:?}"
                        )));
                    }
                }
            }
            let shell: Vec<f64> = lo
                .iter()
                .zip(hi)
                .map(|(&a, &b)| {
                    let w = b - a;
                    let s = rng.random_range(0.0..=w);
                    if rng.random_bool(0.5) {
                        b + s
                    } else {
                        a - s
                    }
                })
                .collect();
            if self.contains(&shell, 0.0)? {
                return Err(Error::Config(format!(
                    "admissible input set reaches {shell:?} outside the sampling box"
                )));
            }
        }
        if inside == 0 {
            return Err(Error::Config("admissible input set appears empty".into()));
        }
        Ok(())
    }
}

/// Coefficients `γ_0 … γ_{d_c−1}` of the error dynamics; `γ_{d_c} = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingLawConfig {
    gammas: Vec<f64>,
}

impl TrackingLawConfig {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() || gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::Config(format!(
                "tracking gains must be positive, got {gammas:?}"
            )));
        }
        let law = TrackingLawConfig { gammas };
        let worst = law.max_root_real_part();
        if !(worst < 0.0) {
            return Err(Error::Config(format!(
                "tracking polynomial is not Hurwitz (max real part {worst})"
            )));
        }
        Ok(law)
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// `γ_i` with the convention `γ_{d_c} = 1`.
    pub fn gamma(&self, i: usize) -> f64 {
        if i == self.gammas.len() {
            1.0
        } else {
            self.gammas[i]
        }
    }

    /// Largest real part among the roots of `s^d + γ_{d−1}s^{d−1} + … + γ_0`,
    /// from the companion-matrix eigenvalues.
    pub fn max_root_real_part(&self) -> f64 {
        let d = self.gammas.len();
        let mut comp = DMatrix::<f64>::zeros(d, d);
        for i in 1..d {
            comp[(i, i - 1)] = 1.0;
        }
        for (i, g) in self.gammas.iter().enumerate() {
            comp[(i, d - 1)] = -g;
        }
        comp.complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Plant-level quadratic cost `½ûᵀQ̂(x̂)û + ĉ(x̂)ᵀû`.
#[derive(Clone, Debug)]
pub struct CostSpec {
    qhat: VectorField,
    chat: VectorField,
}

impl CostSpec {
    pub fn new(qhat: VectorField, chat: VectorField) -> Result<Self> {
        let m = chat.dim_out();
        check_dim("Q̂ input", chat.dim_in(), qhat.dim_in())?;
        check_dim("Q̂ output", m * m, qhat.dim_out())?;
        Ok(CostSpec { qhat, chat })
    }

    /// `Q̂ = I`, `ĉ = −û_des(x̂)`, whose minimiser is `û_des`.
    pub fn min_intervention(u_des: VectorField) -> Result<Self> {
        let m = u_des.dim_out();
        let n = u_des.dim_in();
        let mut eye = vec![0.0; m * m];
        let mut neg = vec![0.0; m * m];
        for i in 0..m {
            eye[i * m + i] = 1.0;
            neg[i * m + i] = -1.0;
        }
        let chat = VectorField::new(Compose::new(
            VectorField::new(Affine::linear(m, m, neg)?),
            u_des,
        )?);
        CostSpec::new(VectorField::new(Constant::new(n, eye)), chat)
    }

    pub fn m(&self) -> usize {
        self.chat.dim_out()
    }

    pub fn n_hat(&self) -> usize {
        self.chat.dim_in()
    }

    pub fn q_matrix(&self, xhat: &[f64]) -> Result<Vec<f64>> {
        self.qhat.eval(xhat)
    }

    pub fn c_vector(&self, xhat: &[f64]) -> Result<Vec<f64>> {
        self.chat.eval(xhat)
    }

    /// `Ĵ(x̂, û)`.
    pub fn cost(&self, xhat: &[f64], u: &[f64]) -> Result<f64> {
        let q = self.q_matrix(xhat)?;
        let c = self.c_vector(xhat)?;
        let m = self.m();
        check_dim("cost input", m, u.len())?;
        let mut j = 0.0;
        for i in 0..m {
            for k in 0..m {
                j += 0.5 * u[i] * q[i * m + k] * u[k];
            }
            j += c[i] * u[i];
        }
        Ok(j)
    }
}

/// Solves `A y = b` for small dense `A` (row-major) by Gaussian elimination
/// with partial pivoting on the primal values.
fn solve_small<T: Real>(mut a: Vec<T>, mut b: Vec<T>, m: usize) -> Result<Vec<T>> {
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| {
                a[i * m + col]
                    .re()
                    .abs()
                    .total_cmp(&a[j * m + col].re().abs())
            })
            .expect("nonempty range");
        if a[pivot * m + col].re().abs() < 1e-300 {
            return Err(Error::Singular("cost matrix Q̂ is singular".into()));
        }
        if pivot != col {
            for k in 0..m {
                a.swap(col * m + k, pivot * m + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..m {
            let factor = a[row * m + col] / a[col * m + col];
            for k in col..m {
                a[row * m + k] = a[row * m + k] - factor * a[col * m + k];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut y = b;
    for row in (0..m).rev() {
        let mut acc = y[row];
        for k in row + 1..m {
            acc = acc - a[row * m + k] * y[k];
        }
        y[row] = acc / a[row * m + row];
    }
    Ok(y)
}

/// `x ↦ û_d(x̂) = −Q̂(x̂)⁻¹ĉ(x̂)` on a state whose first `n̂` entries are `x̂`.
#[derive(Clone, Debug)]
pub struct IdealControlField {
    cost: CostSpec,
    dim: usize,
}

impl IdealControlField {
    pub fn new(cost: CostSpec, dim: usize) -> Result<Self> {
        if dim < cost.n_hat() {
            return Err(Error::Dimension {
                what: "ideal control state",
                expected: cost.n_hat(),
                got: dim,
            });
        }
        Ok(IdealControlField { cost, dim })
    }
}

impl Smooth for IdealControlField {
    fn dim_in(&self) -> usize {
        self.dim
    }
    fn dim_out(&self) -> usize {
        self.cost.m()
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let xhat = &x[..self.cost.n_hat()];
        let q = self.cost.qhat.eval(xhat)?;
        let c = self.cost.chat.eval(xhat)?;
        let y = solve_small(q, c, self.cost.m())?;
        Ok(y.into_iter().map(|v| -v).collect())
    }
}

/// `û_d = −Q̂(x̂)⁻¹ĉ(x̂)`.
pub fn ideal_control(cost: &CostSpec, xhat: &[f64]) -> Result<Vec<f64>> {
    check_dim("plant state", cost.n_hat(), xhat.len())?;
    IdealControlField::new(cost.clone(), cost.n_hat())?.eval(xhat)
}

struct CascadeDrift {
    f_hat: VectorField,
    g_hat: VectorField,
    f_c: VectorField,
    h_c: VectorField,
    n_hat: usize,
    m: usize,
}

impl Smooth for CascadeDrift {
    fn dim_in(&self) -> usize {
        self.n_hat + self.f_c.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.dim_in()
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let (xh, xc) = x.split_at(self.n_hat);
        let mut out = self.f_hat.eval(xh)?;
        let g = self.g_hat.eval(xh)?;
        let u = self.h_c.eval(xc)?;
        for (i, o) in out.iter_mut().enumerate() {
            for (k, &uk) in u.iter().enumerate() {
                *o = *o + g[i * self.m + k] * uk;
            }
        }
        out.extend(self.f_c.eval(xc)?);
        Ok(out)
    }
}

struct CascadeInput {
    g_c: VectorField,
    n_hat: usize,
    m: usize,
}

impl Smooth for CascadeInput {
    fn dim_in(&self) -> usize {
        self.n_hat + self.g_c.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.dim_in() * self.m
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::cst(0.0); self.n_hat * self.m];
        out.extend(self.g_c.eval(&x[self.n_hat..])?);
        Ok(out)
    }
}

/// Cascade `f = (f̂ + ĝ h_c, f_c)`, `g = (0, g_c)` on `x = (x̂, x_c)`.
pub fn build_cascade(
    plant: &ControlAffineSystem,
    ctrl: &ControllerDynamics,
) -> Result<ControlAffineSystem> {
    check_dim("plant input vs controller output", plant.m(), ctrl.m)?;
    let n_hat = plant.n();
    let drift = CascadeDrift {
        f_hat: plant.drift_field().clone(),
        g_hat: plant.input_field().clone(),
        f_c: ctrl.f_c.clone(),
        h_c: ctrl.h_c.clone(),
        n_hat,
        m: ctrl.m,
    };
    let input = CascadeInput {
        g_c: ctrl.g_c.clone(),
        n_hat,
        m: ctrl.m,
    };
    ControlAffineSystem::new(VectorField::new(drift), VectorField::new(input), ctrl.m)
}

/// A plant barrier `ĥ_ν` with its plant relative degree `d̂_ν`.
#[derive(Clone, Debug)]
pub struct PlantBarrier {
    pub label: String,
    pub h: ScalarField,
    pub degree: usize,
}

/// Lifts plant barriers and input constraints onto the cascade state.
///
/// `chains[j]` holds the alpha functions of lifted barrier `j`: plant
/// barriers first (degree `d̂ + d_c`), then input barriers (degree `ζ`).
pub fn lift_barriers(
    plant: &[PlantBarrier],
    ics: &InputConstraintSpec,
    ctrl: &ControllerDynamics,
    n_hat: usize,
    chains: &[Vec<AlphaFunction>],
) -> Result<Vec<BarrierSpec>> {
    check_dim("lifted alpha chains", plant.len() + ics.phis.len(), chains.len())?;
    check_dim("input constraint dimension", ctrl.m, ics.m())?;
    let n = n_hat + ctrl.n_c;
    let mut out = Vec::with_capacity(chains.len());
    for (pb, chain) in plant.iter().zip(chains) {
        check_dim("plant barrier input", n_hat, pb.h.dim_in())?;
        let lifted = ScalarField::new(Restrict::new(VectorField::new(pb.h.clone()), 0, n)?)?;
        out.push(BarrierSpec::new(
            pb.label.clone(),
            lifted,
            pb.degree + ctrl.d_c,
            chain.clone(),
        )?);
    }
    for ((phi, label), chain) in ics
        .phis
        .iter()
        .zip(&ics.labels)
        .zip(&chains[plant.len()..])
    {
        let composed = Compose::new(VectorField::new(phi.clone()), ctrl.h_c.clone())?;
        let lifted = ScalarField::new(Restrict::new(VectorField::new(composed), n_hat, n)?)?;
        out.push(BarrierSpec::new(label.clone(), lifted, ctrl.zeta, chain.clone())?);
    }
    Ok(out)
}

/// Plant, controller, cost and tracking law bundled with the cascade they define.
#[derive(Clone, Debug)]
pub struct ControllerAugmentation {
    plant: ControlAffineSystem,
    ctrl: ControllerDynamics,
    cost: CostSpec,
    law: TrackingLawConfig,
    cascade: ControlAffineSystem,
    ideal: VectorField,
    engine: LieEngine,
}

impl ControllerAugmentation {
    pub fn new(
        plant: ControlAffineSystem,
        ctrl: ControllerDynamics,
        cost: CostSpec,
        law: TrackingLawConfig,
    ) -> Result<Self> {
        check_dim("tracking gains vs d_c", ctrl.d_c, law.gammas.len())?;
        check_dim("cost dimension", plant.n(), cost.n_hat())?;
        check_dim("cost input dimension", plant.m(), cost.m())?;
        let cascade = build_cascade(&plant, &ctrl)?;
        let ideal = VectorField::new(IdealControlField::new(cost.clone(), cascade.n())?);
        Ok(ControllerAugmentation {
            plant,
            ctrl,
            cost,
            law,
            cascade,
            ideal,
            engine: LieEngine::default(),
        })
    }

    pub fn plant(&self) -> &ControlAffineSystem {
        &self.plant
    }
    pub fn controller(&self) -> &ControllerDynamics {
        &self.ctrl
    }
    pub fn cost(&self) -> &CostSpec {
        &self.cost
    }
    pub fn law(&self) -> &TrackingLawConfig {
        &self.law
    }
    pub fn cascade(&self) -> &ControlAffineSystem {
        &self.cascade
    }
    pub fn n_hat(&self) -> usize {
        self.plant.n()
    }

    fn split<'a>(&self, x: &'a [f64]) -> Result<(&'a [f64], &'a [f64])> {
        check_dim("cascade state", self.cascade.n(), x.len())?;
        Ok(x.split_at(self.plant.n()))
    }

    /// `û_d(x̂)`.
    pub fn ideal_control(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.split(x)?;
        self.ideal.eval(x)
    }

    /// `u_d(x) = D(x_c)⁻¹ Σ_{i=0}^{d_c} γ_i (L_f^i û_d(x) − L_{f_c}^i h_c(x_c))`.
    pub fn tracking_control(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, xc) = self.split(x)?;
        let m = self.ctrl.m;
        let mut rhs = vec![0.0; m];
        for i in 0..=self.ctrl.d_c {
            let g = self.law.gamma(i);
            let ud = self.engine.drift_vec(&self.ideal, &self.cascade, x, i)?;
            let hc = self.engine.drift_vec(&self.ctrl.h_c, &self.ctrl.system, xc, i)?;
            for k in 0..m {
                rhs[k] += g * (ud[k] - hc[k]);
            }
        }
        let d = self.ctrl.decoupling_matrix(&self.engine, xc)?;
        let lu = d.lu();
        let sol = lu.solve(&nalgebra::DVector::from_column_slice(&rhs)).ok_or_else(|| {
            Error::Singular("decoupling matrix L_gc L_fc^(d_c-1) h_c is singular".into())
        })?;
        Ok(sol.iter().copied().collect())
    }

    /// `e = h_c(x_c) − û_d(x)`.
    pub fn error_signal(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, xc) = self.split(x)?;
        let u = self.ctrl.output(xc)?;
        let ud = self.ideal.eval(x)?;
        Ok(u.iter().zip(&ud).map(|(a, b)| a - b).collect())
    }

    /// `(Q, c) = (I_m, −u_d(x))`.
    pub fn surrogate_cost(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let ud = self.tracking_control(x)?;
        let m = ud.len();
        let mut q = vec![0.0; m * m];
        for i in 0..m {
            q[i * m + i] = 1.0;
        }
        Ok((q, ud.iter().map(|v| -v).collect()))
    }

    /// Filter problem with the surrogate cost filled in.
    pub fn filter_problem(
        &self,
        x: &[f64],
        gamma: f64,
        alpha: AlphaFunction,
        h: f64,
        lf_h: f64,
        lg_h: Vec<f64>,
    ) -> Result<FilterProblem> {
        let (q, c) = self.surrogate_cost(x)?;
        Ok(FilterProblem {
            q,
            c,
            gamma,
            alpha,
            h,
            lf_h,
            lg_h,
        })
    }

    /// `x_c0 = C_c⁻¹ û_d(x̂_0)`, which makes `e(0) = 0` for LTI controllers with `d_c = 1`.
    pub fn matched_initialization(&self, xhat0: &[f64]) -> Result<Vec<f64>> {
        check_dim("plant state", self.plant.n(), xhat0.len())?;
        if self.ctrl.d_c != 1 {
            return Err(Error::Unsupported(format!(
                "matched initialization needs d_c = 1, got {}",
                self.ctrl.d_c
            )));
        }
        let lti = self.ctrl.lti.as_ref().ok_or_else(|| {
            Error::Unsupported("matched initialization needs an LTI controller".into())
        })?;
        if lti.n_c != lti.m {
            return Err(Error::Unsupported("matched initialization needs a square C_c".into()));
        }
        let ud = ideal_control(&self.cost, xhat0)?;
        let c = DMatrix::from_row_slice(lti.m, lti.n_c, &lti.c_c);
        let sol = c
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&ud))
            .ok_or_else(|| Error::Singular("C_c is singular".into()))?;
        Ok(sol.iter().copied().collect())
    }
}

/// Worst-case residuals of the controller conditions over sampled states.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControllerAudit {
    /// `max |L_{g_c} L_{f_c}^i h_c|`, `i ≤ d_c − 2`.
    pub c1_worst_lower: f64,
    /// `max cond(L_{g_c} L_{f_c}^{d_c−1} h_c)`.
    pub c2_worst_condition: f64,
    /// `min ‖L_ĝ L_f̂^{d̂−1} ĥ · D‖` over plant barriers and samples.
    pub c3_min_cross: f64,
    /// `max |L_{g_c} L_{f_c}^i φ_κ∘h_c|`, `i ≤ ζ − 2`.
    pub c4_worst_lower: f64,
    /// `min ‖L_{g_c} L_{f_c}^{ζ−1} φ_κ∘h_c‖`.
    pub c5_min_decoupling: f64,
    pub passed: bool,
}

/// Numerical check of the controller conditions at `controller_states` (in `S_c`)
/// and `plant_states` (in the plant safe set).
pub fn audit_controller(
    aug: &ControllerAugmentation,
    ics: &InputConstraintSpec,
    plant_barriers: &[PlantBarrier],
    controller_states: &[Vec<f64>],
    plant_states: &[Vec<f64>],
) -> Result<ControllerAudit> {
    let engine = LieEngine::default();
    let ctrl = &aug.ctrl;
    let csys = &ctrl.system;
    let mut audit = ControllerAudit {
        c1_worst_lower: 0.0,
        c2_worst_condition: 0.0,
        c3_min_cross: f64::INFINITY,
        c4_worst_lower: 0.0,
        c5_min_decoupling: f64::INFINITY,
        passed: false,
    };
    let phi_fields = ics
        .phis
        .iter()
        .map(|phi| {
            ScalarField::new(Compose::new(VectorField::new(phi.clone()), ctrl.h_c.clone())?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut decouplings = Vec::with_capacity(controller_states.len());
    for xc in controller_states {
        for order in 1..ctrl.d_c {
            let low = engine.input_matrix_vec(&ctrl.h_c, csys, xc, order)?;
            audit.c1_worst_lower = low.iter().fold(audit.c1_worst_lower, |w, v| w.max(v.abs()));
        }
        let d = ctrl.decoupling_matrix(&engine, xc)?;
        audit.c2_worst_condition = audit.c2_worst_condition.max(condition_number(&d));
        for phi in &phi_fields {
            for order in 1..ctrl.zeta {
                let row = engine.input_row(phi, csys, xc, order)?;
                audit.c4_worst_lower = row.iter().fold(audit.c4_worst_lower, |w, v| w.max(v.abs()));
            }
            let row = engine.input_row(phi, csys, xc, ctrl.zeta)?;
            audit.c5_min_decoupling = audit.c5_min_decoupling.min(norm(&row));
        }
        decouplings.push(d);
    }
    for xh in plant_states {
        for pb in plant_barriers {
            let row = engine.input_row(&pb.h, &aug.plant, xh, pb.degree)?;
            let r = nalgebra::RowDVector::from_row_slice(&row);
            for d in &decouplings {
                let cross = &r * d;
                audit.c3_min_cross = audit.c3_min_cross.min(cross.norm());
            }
        }
    }
    audit.passed = !controller_states.is_empty()
        && !plant_states.is_empty()
        && audit.c1_worst_lower < DEGREE_TOL
        && audit.c2_worst_condition < DECOUPLING_COND_MAX
        && audit.c3_min_cross > DEGREE_TOL
        && audit.c4_worst_lower < DEGREE_TOL
        && audit.c5_min_decoupling > DEGREE_TOL;
    Ok(audit)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Samples controller states whose output lies in `U`, for LTI controllers with square `C_c`.
pub fn sample_controller_states(
    ctrl: &ControllerDynamics,
    ics: &InputConstraintSpec,
    lo: &[f64],
    hi: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_dim("controller sampling box", ctrl.n_c, lo.len())?;
    check_dim("controller sampling box", ctrl.n_c, hi.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(Error::Config("could not sample controller states in S_c".into()));
        }
        let xc: Vec<f64> = lo.iter().zip(hi).map(|(&a, &b)| rng.random_range(a..=b)).collect();
        if ics.contains(&ctrl.output(&xc)?, 0.0)? {
            out.push(xc);
        }
    }
    Ok(out)
}
