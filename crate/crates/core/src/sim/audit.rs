//! Sampled checks of the relative-degree and controller conditions of a scenario.

use serde::Serialize;

use super::scenario::Scenario;
use crate::cbf_chain::{audit_relative_degree, sample_states, CompositeCBF, DegreeAudit, SampleRegion};
use crate::error::Result;
use crate::fields::LieEngine;
use crate::input_aug::{audit_controller, sample_controller_states, ControllerAudit};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioAudit {
    pub seed: u64,
    pub samples: usize,
    pub degrees: Vec<DegreeAudit>,
    pub controller: Option<ControllerAudit>,
    pub passed: bool,
}

/// Sampling box `(lo, hi)` for the simulated state.
pub fn state_box(sc: &Scenario) -> (Vec<f64>, Vec<f64>) {
    let cfg = sc.config();
    let pi = std::f64::consts::PI;
    let half = |a: f64, c: f64| c / a;
    let (wx, wy) = (half(cfg.map.wall.a_x, cfg.map.wall.c), half(cfg.map.wall.a_y, cfg.map.wall.c));
    let mut lo = vec![-wx, -wy, cfg.map.speed.min, -pi];
    let mut hi = vec![wx, wy, cfg.map.speed.max, pi];
    if let (Some(aug), Some(b)) = (sc.augmentation(), &cfg.input_bounds) {
        let n_c = aug.controller().n_c();
        if n_c == b.lower.len() {
            lo.extend_from_slice(&b.lower);
            hi.extend_from_slice(&b.upper);
        } else {
            lo.extend(std::iter::repeat_n(-1.0, n_c));
            hi.extend(std::iter::repeat_n(1.0, n_c));
        }
    }
    (lo, hi)
}

/// Audits every barrier at `samples` states of the safe set, plus the controller
/// conditions when the scenario has controller dynamics.
pub fn audit_scenario(sc: &Scenario, samples: usize, seed: u64) -> Result<ScenarioAudit> {
    let (lo, hi) = state_box(sc);
    let sys = sc.system();
    let states = sample_states(sc.cbf(), sys, &lo, &hi, samples, seed, SampleRegion::SafeSet)?;
    let engine = LieEngine::default();
    let degrees = sc
        .cbf()
        .specs()
        .iter()
        .map(|spec| audit_relative_degree(spec, sys, &engine, &states))
        .collect::<Result<Vec<_>>>()?;
    let controller = match (sc.augmentation(), sc.input_constraints()) {
        (Some(aug), Some(ics)) => {
            let n_hat = sc.plant().n();
            let (clo, chi) = (&lo[n_hat..], &hi[n_hat..]);
            let ctrl_states =
                sample_controller_states(aug.controller(), ics, clo, chi, samples, seed ^ 0x5eed)?;
            let plant_cbf = CompositeCBF::new(
                sc.plant_barriers()
                    .iter()
                    .map(|pb| {
                        crate::cbf_chain::BarrierSpec::new(
                            pb.label.clone(),
                            pb.h.clone(),
                            1,
                            Vec::new(),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?,
                sc.cbf().rho(),
            )?;
            let plant_states = sample_states(
                &plant_cbf,
                sc.plant(),
                &lo[..n_hat],
                &hi[..n_hat],
                samples,
                seed,
                SampleRegion::SafeSet,
            )?;
            Some(audit_controller(aug, ics, sc.plant_barriers(), &ctrl_states, &plant_states)?)
        }
        _ => None,
    };
    let passed = degrees.iter().all(|d| d.passed) && controller.as_ref().is_none_or(|c| c.passed);
    Ok(ScenarioAudit {
        seed,
        samples,
        degrees,
        controller,
        passed,
    })
}
