//! Higher-order barrier chains and the composite soft-minimum barrier.
//!
//! For a barrier `h_j` of relative degree `d_j` the chain is
//! `b_{j,0} = h_j`, `b_{j,i+1} = L_f b_{j,i} + α_{j,i}(b_{j,i})`, and the
//! composite barrier is `h = softmin_ρ(b_{1,d_1−1}, …, b_{ℓ,d_ℓ−1})`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fields::{
    ensure_headroom, lift_point, ControlAffineSystem, LieEngine, Real, ScalarField, Smooth,
};
use crate::softmin::SoftminParams;

/// Set-membership slack that absorbs integration round-off.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Threshold separating "vanishes" from "does not vanish" in the relative-degree audit.
pub const DEGREE_TOL: f64 = 1e-8;

/// Affine map `s ↦ a·s + b` with `a, b ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AlphaFunction {
    Linear { slope: f64 },
    Affine { slope: f64, offset: f64 },
    Constant { value: f64 },
}

impl AlphaFunction {
    pub fn linear(slope: f64) -> Self {
        AlphaFunction::Linear { slope }
    }

    pub fn zero() -> Self {
        AlphaFunction::Linear { slope: 0.0 }
    }

    pub fn slope(&self) -> f64 {
        match *self {
            AlphaFunction::Linear { slope } | AlphaFunction::Affine { slope, .. } => slope,
            AlphaFunction::Constant { .. } => 0.0,
        }
    }

    pub fn offset(&self) -> f64 {
        match *self {
            AlphaFunction::Linear { .. } => 0.0,
            AlphaFunction::Affine { offset, .. } => offset,
            AlphaFunction::Constant { value } => value,
        }
    }

    pub fn apply<T: Real>(&self, s: T) -> T {
        s * self.slope() + self.offset()
    }

    pub fn value(&self, s: f64) -> f64 {
        self.apply(s)
    }

    /// Strictly increasing through the origin.
    pub fn is_extended_class_k(&self) -> bool {
        matches!(self, AlphaFunction::Linear { slope } if *slope > 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.slope(), self.offset());
        if !(a.is_finite() && b.is_finite()) || a < 0.0 || b < 0.0 {
            return Err(Error::Config(format!(
                "alpha function needs finite slope >= 0 and offset >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// One barrier `h_j` with its relative degree and chain of alpha functions.
#[derive(Clone, Debug)]
pub struct BarrierSpec {
    label: String,
    h: ScalarField,
    degree: usize,
    alphas: Vec<AlphaFunction>,
}

impl BarrierSpec {
    pub fn new(
        label: impl Into<String>,
        h: ScalarField,
        degree: usize,
        alphas: Vec<AlphaFunction>,
    ) -> Result<Self> {
        let label = label.into();
        if degree == 0 {
            return Err(Error::Config(format!("barrier {label}: degree must be >= 1")));
        }
        if alphas.len() != degree - 1 {
            return Err(Error::Config(format!(
                "barrier {label}: degree {degree} needs {} alpha functions, got {}",
                degree - 1,
                alphas.len()
            )));
        }
        for a in &alphas {
            a.validate()?;
        }
        let spec = BarrierSpec {
            label,
            h,
            degree,
            alphas,
        };
        for w in spec.warnings() {
            log::warn!("{w}");
        }
        Ok(spec)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn field(&self) -> &ScalarField {
        &self.h
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn alphas(&self) -> &[AlphaFunction] {
        &self.alphas
    }

    /// Non-fatal findings, e.g. chain entries that are not extended class-K.
    pub fn warnings(&self) -> Vec<String> {
        self.alphas
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_extended_class_k())
            .map(|(i, a)| {
                format!(
                    "barrier {}: alpha[{i}] = {a:?} is not extended class-K",
                    self.label
                )
            })
            .collect()
    }

    /// `[b_{j,0}(x), …, b_{j,level}(x)]` from a single nested pass.
    pub fn levels<T: Real>(
        &self,
        sys: &ControlAffineSystem,
        x: &[T],
        level: usize,
    ) -> Result<Vec<T>> {
        if level == 0 {
            return Ok(vec![self.h.eval(x)?]);
        }
        ensure_headroom::<T>(level)?;
        let fx = sys.drift(x)?;
        let lifted = lift_point(x, &fx);
        let lower = self.levels::<T::Lifted>(sys, &lifted, level - 1)?;
        let mut out = Vec::with_capacity(level + 1);
        let mut top = None;
        for b in lower {
            let (value, lie) = T::split(b);
            out.push(value);
            top = Some((value, lie));
        }
        let (prev, lf_prev) = top.expect("at least one lower level");
        out.push(lf_prev + self.alphas[level - 1].apply(prev));
        Ok(out)
    }
}

/// `b_{j,level}` as a smooth field, so its gradient and Lie derivatives are available.
#[derive(Clone, Debug)]
pub struct ChainField {
    spec: BarrierSpec,
    sys: ControlAffineSystem,
    level: usize,
}

impl ChainField {
    pub fn new(spec: BarrierSpec, sys: ControlAffineSystem, level: usize) -> Result<Self> {
        if level >= spec.degree {
            return Err(Error::Contract(format!(
                "chain level {level} out of range for degree {}",
                spec.degree
            )));
        }
        check_dim("barrier input vs state", sys.n(), spec.h.dim_in())?;
        Ok(ChainField { spec, sys, level })
    }
}

impl Smooth for ChainField {
    fn dim_in(&self) -> usize {
        self.sys.n()
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let mut levels = self.spec.levels(&self.sys, x, self.level)?;
        Ok(vec![levels.pop().expect("nonempty")])
    }
}

/// `b_{j,level}(x)`.
pub fn chain_value(
    spec: &BarrierSpec,
    sys: &ControlAffineSystem,
    x: &[f64],
    level: usize,
) -> Result<f64> {
    if level >= spec.degree {
        return Err(Error::Contract(format!(
            "chain level {level} out of range for degree {}",
            spec.degree
        )));
    }
    check_dim("state", sys.n(), x.len())?;
    Ok(*spec.levels(sys, x, level)?.last().expect("nonempty"))
}

/// Ordered barrier specs combined through a soft minimum.
#[derive(Clone, Debug)]
pub struct CompositeCBF {
    specs: Vec<BarrierSpec>,
    softmin: SoftminParams,
}

/// Everything the filter and the logger need at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct CbfEvaluation {
    /// `levels[j][i] = b_{j,i}(x)` for `i < d_j`.
    pub levels: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub h: f64,
    pub lf_h: f64,
    pub lg_h: Vec<f64>,
}

impl CbfEvaluation {
    /// `min_j h_j(x)`.
    pub fn min_hj(&self) -> f64 {
        self.levels.iter().map(|l| l[0]).fold(f64::INFINITY, f64::min)
    }

    /// `min_{j,i} b_{j,i}(x)` over every stored level.
    pub fn min_b(&self) -> f64 {
        self.levels
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Set memberships at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct Membership {
    pub in_ss: bool,
    pub in_s: bool,
    pub in_c: bool,
    pub h: f64,
    pub per_level: Vec<Vec<f64>>,
}

impl CompositeCBF {
    pub fn new(specs: Vec<BarrierSpec>, rho: f64) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Contract("composite barrier needs at least one spec".into()));
        }
        let n = specs[0].h.dim_in();
        for s in &specs {
            check_dim("barrier state dimension", n, s.h.dim_in())?;
        }
        Ok(CompositeCBF {
            specs,
            softmin: SoftminParams::new(rho)?,
        })
    }

    pub fn specs(&self) -> &[BarrierSpec] {
        &self.specs
    }

    pub fn rho(&self) -> f64 {
        self.softmin.rho()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.specs.iter().map(|s| s.degree).collect()
    }

    fn check_state(&self, sys: &ControlAffineSystem, x: &[f64]) -> Result<()> {
        check_dim("barrier state dimension", sys.n(), self.specs[0].h.dim_in())?;
        check_dim("state", sys.n(), x.len())
    }

    /// `b_{j,i}(x)` for every barrier and level.
    pub fn levels(&self, sys: &ControlAffineSystem, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_state(sys, x)?;
        self.specs
            .iter()
            .map(|s| s.levels(sys, x, s.degree - 1))
            .collect()
    }

    /// Values, Lie derivatives along `f` and each input column, and weights.
    pub fn evaluate(&self, sys: &ControlAffineSystem, x: &[f64]) -> Result<CbfEvaluation> {
        self.check_state(sys, x)?;
        let m = sys.m();
        let fx = sys.drift(x)?;
        let g = sys.input_matrix(x)?;
        let columns: Vec<Vec<f64>> = (0..m)
            .map(|k| (0..sys.n()).map(|i| g[i * m + k]).collect())
            .collect();

        let mut levels = Vec::with_capacity(self.specs.len());
        let mut tops = Vec::with_capacity(self.specs.len());
        let mut lf_b = Vec::with_capacity(self.specs.len());
        let mut lg_b = Vec::with_capacity(self.specs.len());
        for spec in &self.specs {
            let top = spec.degree - 1;
            let along_f = spec.levels(sys, &lift_point(x, &fx), top)?;
            let (b, lf) = f64::split(along_f[top]);
            levels.push(along_f.iter().map(|v| v.re).collect::<Vec<_>>());
            tops.push(b);
            lf_b.push(lf);
            let row = columns
                .iter()
                .map(|col| Ok(spec.levels(sys, &lift_point(x, col), top)?[top].eps))
                .collect::<Result<Vec<f64>>>()?;
            lg_b.push(row);
        }

        let h = self.softmin.value(&tops)?;
        let weights = self.softmin.weights(&tops)?;
        let lf_h = weights.iter().zip(&lf_b).map(|(w, l)| w * l).sum();
        let lg_h = (0..m)
            .map(|k| weights.iter().zip(&lg_b).map(|(w, row)| w * row[k]).sum())
            .collect();
        Ok(CbfEvaluation {
            levels,
            weights,
            h,
            lf_h,
            lg_h,
        })
    }
}

/// `h(x) = softmin_ρ(b_1(x), …, b_ℓ(x))`.
pub fn composite_value(cbf: &CompositeCBF, sys: &ControlAffineSystem, x: &[f64]) -> Result<f64> {
    let tops: Vec<f64> = cbf
        .levels(sys, x)?
        .into_iter()
        .map(|l| *l.last().expect("nonempty"))
        .collect();
    cbf.softmin.value(&tops)
}

/// `(h, L_f h, L_g h)` at `x`.
pub fn composite_lie_derivatives(
    cbf: &CompositeCBF,
    sys: &ControlAffineSystem,
    x: &[f64],
) -> Result<(f64, f64, Vec<f64>)> {
    let e = cbf.evaluate(sys, x)?;
    Ok((e.h, e.lf_h, e.lg_h))
}

/// `∇h = Σ_j w_j ∇b_j`, each `∇b_j` from one jet pass per coordinate.
pub fn composite_gradient(
    cbf: &CompositeCBF,
    sys: &ControlAffineSystem,
    x: &[f64],
) -> Result<Vec<f64>> {
    let e = cbf.evaluate(sys, x)?;
    let mut grad = vec![0.0; sys.n()];
    for (spec, w) in cbf.specs.iter().zip(&e.weights) {
        let field = ScalarField::new(ChainField::new(spec.clone(), sys.clone(), spec.degree - 1)?)?;
        for (gi, dbi) in grad.iter_mut().zip(field.gradient(x)?) {
            *gi += w * dbi;
        }
    }
    Ok(grad)
}

/// Memberships in `S_s`, `S` and `C` with [`MEMBERSHIP_TOL`] slack.
pub fn membership(cbf: &CompositeCBF, sys: &ControlAffineSystem, x: &[f64]) -> Result<Membership> {
    let per_level = cbf.levels(sys, x)?;
    let tops: Vec<f64> = per_level.iter().map(|l| *l.last().expect("nonempty")).collect();
    let h = cbf.softmin.value(&tops)?;
    let in_ss = per_level.iter().all(|l| l[0] >= -MEMBERSHIP_TOL);
    let in_s = h >= -MEMBERSHIP_TOL;
    let in_c = per_level
        .iter()
        .all(|l| l[..l.len() - 1].iter().all(|&b| b >= -MEMBERSHIP_TOL));
    Ok(Membership {
        in_ss,
        in_s,
        in_c,
        h,
        per_level,
    })
}

/// Worst-case residuals of the relative-degree conditions for one barrier.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeAudit {
    pub label: String,
    pub degree: usize,
    /// `max |L_g L_f^i h|` over sampled states and `i ≤ d − 2` (0 when `d = 1`).
    pub worst_lower: f64,
    /// `min ‖L_g L_f^{d−1} h‖` over sampled states.
    pub min_decoupling: f64,
    pub passed: bool,
}

/// Checks that lower-order input Lie derivatives vanish and the decoupling term does not.
pub fn audit_relative_degree(
    spec: &BarrierSpec,
    sys: &ControlAffineSystem,
    engine: &LieEngine,
    states: &[Vec<f64>],
) -> Result<DegreeAudit> {
    let mut worst_lower: f64 = 0.0;
    let mut min_decoupling = f64::INFINITY;
    for x in states {
        for order in 1..spec.degree {
            let row = engine.input_row(&spec.h, sys, x, order)?;
            worst_lower = row.iter().fold(worst_lower, |w, v| w.max(v.abs()));
        }
        let row = engine.input_row(&spec.h, sys, x, spec.degree)?;
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        min_decoupling = min_decoupling.min(norm);
    }
    Ok(DegreeAudit {
        label: spec.label.clone(),
        degree: spec.degree,
        worst_lower,
        min_decoupling,
        passed: !states.is_empty() && worst_lower < DEGREE_TOL && min_decoupling > DEGREE_TOL,
    })
}

/// Which set a sampled state must belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleRegion {
    /// `S_s`: every `h_j ≥ 0`.
    SafeSet,
    /// `S ∩ C`.
    Viable,
}

/// Rejection-samples `count` states from the box `[lo, hi]` lying in `region`.
pub fn sample_states(
    cbf: &CompositeCBF,
    sys: &ControlAffineSystem,
    lo: &[f64],
    hi: &[f64],
    count: usize,
    seed: u64,
    region: SampleRegion,
) -> Result<Vec<Vec<f64>>> {
    check_dim("sampling box", sys.n(), lo.len())?;
    check_dim("sampling box", sys.n(), hi.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let max_attempts = 2_000_000usize;
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Config(format!(
                "could not sample {count} states from the requested region ({} found)",
                out.len()
            )));
        }
        let x: Vec<f64> = lo
            .iter()
            .zip(hi)
            .map(|(&a, &b)| rng.random_range(a..=b))
            .collect();
        let mem = match membership(cbf, sys, &x) {
            Ok(m) => m,
            Err(Error::Domain(_)) => continue,
            Err(e) => return Err(e),
        };
        let keep = match region {
            SampleRegion::SafeSet => mem.in_ss,
            SampleRegion::Viable => mem.in_s && mem.in_c,
        };
        if keep {
            out.push(x);
        }
    }
    Ok(out)
}
