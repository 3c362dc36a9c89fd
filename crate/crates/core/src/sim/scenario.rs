//! Turns a [`ScenarioConfig`] into systems, barriers and a control law.

use super::config::{ControlHold, ScenarioConfig};
use super::unicycle::{unicycle, DesiredControl, PNormBarrier, V};
use crate::cbf_chain::{membership, BarrierSpec, CbfEvaluation, CompositeCBF, Membership};
use crate::error::{Error, Result};
use crate::fields::{Affine, ControlAffineSystem, ScalarField, VectorField};
use crate::input_aug::{
    lift_barriers, ControllerAugmentation, CostSpec, InputConstraintSpec, LtiController,
    PlantBarrier, TrackingLawConfig,
};
use crate::safety_filter::{solve_filter, FilterProblem, FilterSolution};

/// Everything computed at one control update.
#[derive(Clone, Debug)]
pub struct ControlSample {
    pub u: Vec<f64>,
    pub eval: CbfEvaluation,
    /// `None` when the filter is bypassed.
    pub solution: Option<FilterSolution>,
    /// Plant input `û = h_c(x_c)`, desired `û_d` and error `e`, with a controller.
    pub uhat: Option<Vec<f64>>,
    pub ud_hat: Option<Vec<f64>>,
    pub error: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
enum Mode {
    Direct {
        desired: VectorField,
    },
    Augmented {
        aug: Box<ControllerAugmentation>,
        ics: InputConstraintSpec,
        xc0: Vec<f64>,
        bypass: bool,
    },
}

/// A built scenario: the simulated system, its composite barrier and control law.
#[derive(Clone, Debug)]
pub struct Scenario {
    cfg: ScenarioConfig,
    plant: ControlAffineSystem,
    plant_barriers: Vec<PlantBarrier>,
    cbf: CompositeCBF,
    mode: Mode,
}

/// Obstacles, wall and speed barriers of the plant, in config order.
pub fn plant_barrier_fields(cfg: &ScenarioConfig) -> Result<Vec<(String, ScalarField)>> {
    let map = &cfg.map;
    let mut out = Vec::with_capacity(map.obstacles.len() + 3);
    for (j, o) in map.obstacles.iter().enumerate() {
        out.push((
            format!("obstacle{}", j + 1),
            ScalarField::new(PNormBarrier::obstacle(o, map.p, 4)?)?,
        ));
    }
    out.push(("wall".into(), ScalarField::new(PNormBarrier::wall(&map.wall, map.p, 4)?)?));
    if !(map.speed.min < map.speed.max) {
        return Err(Error::Config(format!(
            "speed band [{}, {}] is empty",
            map.speed.min, map.speed.max
        )));
    }
    out.push((
        "speed_max".into(),
        ScalarField::new(Affine::coordinate(4, V, -1.0, map.speed.max)?)?,
    ));
    out.push((
        "speed_min".into(),
        ScalarField::new(Affine::coordinate(4, V, 1.0, -map.speed.min)?)?,
    ));
    Ok(out)
}

fn flatten(rows: &[Vec<f64>], what: &str, cols: usize) -> Result<Vec<f64>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("{what} rows must all have {cols} entries")));
    }
    Ok(rows.concat())
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let plant = unicycle();
        let fields = plant_barrier_fields(cfg)?;
        let barriers = &cfg.filter.barriers;
        let desired = VectorField::new(DesiredControl {
            gains: cfg.gains,
            goal: cfg.goal,
            capture_radius: cfg.capture_radius,
        });
        match (&cfg.controller, &cfg.input_bounds) {
            (None, _) => {
                let mut specs = Vec::with_capacity(fields.len());
                let mut plant_barriers = Vec::with_capacity(fields.len());
                for ((label, h), b) in fields.into_iter().zip(barriers) {
                    specs.push(BarrierSpec::new(
                        b.label.clone(),
                        h.clone(),
                        b.degree,
                        b.alphas.clone(),
                    )?);
                    plant_barriers.push(PlantBarrier {
                        label,
                        h,
                        degree: b.degree,
                    });
                }
                Ok(Scenario {
                    cfg: cfg.clone(),
                    plant,
                    plant_barriers,
                    cbf: CompositeCBF::new(specs, cfg.filter.rho)?,
                    mode: Mode::Direct { desired },
                })
            }
            (Some(c), Some(bounds)) => {
                let n_c = c.a_c.len();
                let m = plant.m();
                if c.b_c.len() != n_c || c.c_c.len() != m {
                    return Err(Error::Config(format!(
                        "controller matrices need A_c {n_c}×{n_c}, B_c {n_c}×{m}, C_c {m}×{n_c}"
                    )));
                }
                let lti = LtiController::new(
                    n_c,
                    m,
                    flatten(&c.a_c, "a_c", n_c)?,
                    flatten(&c.b_c, "b_c", m)?,
                    flatten(&c.c_c, "c_c", n_c)?,
                )?;
                let ctrl = lti.dynamics()?;
                let ics = InputConstraintSpec::boxed(&bounds.lower, &bounds.upper)?;
                let cost = CostSpec::min_intervention(desired)?;
                let law = TrackingLawConfig::new(c.gammas.clone())?;
                let aug = ControllerAugmentation::new(plant.clone(), ctrl.clone(), cost, law)?;
                let n_plant = fields.len();
                let mut plant_barriers = Vec::with_capacity(n_plant);
                for ((label, h), b) in fields.into_iter().zip(barriers) {
                    if b.degree <= ctrl.d_c() {
                        return Err(Error::Config(format!(
                            "barrier {} declares degree {} but the controller adds {}",
                            b.label,
                            b.degree,
                            ctrl.d_c()
                        )));
                    }
                    plant_barriers.push(PlantBarrier {
                        label,
                        h,
                        degree: b.degree - ctrl.d_c(),
                    });
                }
                for b in &barriers[n_plant..] {
                    if b.degree != ctrl.zeta() {
                        return Err(Error::Config(format!(
                            "input barrier {} declares degree {}, the controller gives {}",
                            b.label,
                            b.degree,
                            ctrl.zeta()
                        )));
                    }
                }
                let chains: Vec<_> = barriers.iter().map(|b| b.alphas.clone()).collect();
                let mut specs = lift_barriers(&plant_barriers, &ics, &ctrl, plant.n(), &chains)?;
                for (s, b) in specs.iter_mut().zip(barriers) {
                    *s = BarrierSpec::new(
                        b.label.clone(),
                        s.field().clone(),
                        s.degree(),
                        s.alphas().to_vec(),
                    )?;
                }
                let xc0 = if c.matched_init {
                    aug.matched_initialization(&cfg.x0)?
                } else {
                    if c.xc0.len() != n_c {
                        return Err(Error::Config(format!("xc0 needs {n_c} entries")));
                    }
                    c.xc0.clone()
                };
                Ok(Scenario {
                    cfg: cfg.clone(),
                    plant,
                    plant_barriers,
                    cbf: CompositeCBF::new(specs, cfg.filter.rho)?,
                    mode: Mode::Augmented {
                        aug: Box::new(aug),
                        ics,
                        xc0,
                        bypass: c.bypass_filter,
                    },
                })
            }
            (Some(_), None) => Err(Error::Config("controller needs input_bounds".into())),
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn plant(&self) -> &ControlAffineSystem {
        &self.plant
    }

    pub fn plant_barriers(&self) -> &[PlantBarrier] {
        &self.plant_barriers
    }

    pub fn cbf(&self) -> &CompositeCBF {
        &self.cbf
    }

    pub fn augmentation(&self) -> Option<&ControllerAugmentation> {
        match &self.mode {
            Mode::Augmented { aug, .. } => Some(aug),
            Mode::Direct { .. } => None,
        }
    }

    pub fn input_constraints(&self) -> Option<&InputConstraintSpec> {
        match &self.mode {
            Mode::Augmented { ics, .. } => Some(ics),
            Mode::Direct { .. } => None,
        }
    }

    /// The plant, or the plant–controller cascade.
    pub fn system(&self) -> &ControlAffineSystem {
        match &self.mode {
            Mode::Augmented { aug, .. } => aug.cascade(),
            Mode::Direct { .. } => &self.plant,
        }
    }

    pub fn hold(&self) -> ControlHold {
        self.cfg.hold
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let mut x = self.cfg.x0.clone();
        if let Mode::Augmented { xc0, .. } = &self.mode {
            x.extend_from_slice(xc0);
        }
        x
    }

    pub fn membership(&self, x: &[f64]) -> Result<Membership> {
        membership(&self.cbf, self.system(), x)
    }

    /// Filter problem at `x` together with the barrier evaluation it was built from.
    pub fn filter_problem(&self, x: &[f64]) -> Result<(FilterProblem, CbfEvaluation)> {
        let eval = self.cbf.evaluate(self.system(), x)?;
        let f = &self.cfg.filter;
        let problem = match &self.mode {
            Mode::Direct { desired } => FilterProblem::min_intervention(
                &desired.value(x)?,
                f.gamma,
                f.outer_alpha,
                eval.h,
                eval.lf_h,
                eval.lg_h.clone(),
            ),
            Mode::Augmented { aug, .. } => aug.filter_problem(
                x,
                f.gamma,
                f.outer_alpha,
                eval.h,
                eval.lf_h,
                eval.lg_h.clone(),
            )?,
        };
        Ok((problem, eval))
    }

    /// Control at `x`.
    pub fn control(&self, x: &[f64]) -> Result<ControlSample> {
        let (problem, eval) = self.filter_problem(x)?;
        let bypass = matches!(self.mode, Mode::Augmented { bypass: true, .. });
        let (u, solution) = if bypass {
            (problem.c.iter().map(|v| -v).collect(), None)
        } else {
            let s = solve_filter(&problem)?;
            (s.u.clone(), Some(s))
        };
        let (uhat, ud_hat, error) = match &self.mode {
            Mode::Direct { .. } => (None, None, None),
            Mode::Augmented { aug, .. } => {
                let xc = &x[self.plant.n()..];
                (
                    Some(aug.controller().output(xc)?),
                    Some(aug.ideal_control(x)?),
                    Some(aug.error_signal(x)?),
                )
            }
        };
        Ok(ControlSample {
            u,
            eval,
            solution,
            uhat,
            ud_hat,
            error,
        })
    }

    /// Input applied inside an integrator stage under continuous hold.
    pub fn stage_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let Mode::Augmented { aug, bypass: true, .. } = &self.mode {
            return aug.tracking_control(x);
        }
        let (problem, _) = self.filter_problem(x)?;
        Ok(solve_filter(&problem)?.u)
    }

    /// Distance from the plant position to the goal.
    pub fn goal_distance(&self, x: &[f64]) -> f64 {
        (x[0] - self.cfg.goal[0]).hypot(x[1] - self.cfg.goal[1])
    }
}
