//! The closed-loop episode loop.

use super::config::{ControlHold, ScenarioConfig};
use super::integrator::{rk4, step_rk4};
use super::log::{AbortReason, InitialCheck, LogRow, Outcome, RowStatus, TrajectoryLog};
use super::scenario::{ControlSample, Scenario};
use crate::error::{Error, Result};

fn row_from_sample(sc: &Scenario, t: f64, x: &[f64], s: &ControlSample) -> Result<LogRow> {
    let (mu, status) = match &s.solution {
        Some(sol) => (sol.mu, sol.status.into()),
        None => (0.0, RowStatus::Bypassed),
    };
    let min_phi = match (sc.input_constraints(), &s.uhat) {
        (Some(ics), Some(u)) => Some(ics.values(u)?.into_iter().fold(f64::INFINITY, f64::min)),
        _ => None,
    };
    Ok(LogRow {
        t,
        x: x.to_vec(),
        u: s.u.clone(),
        uhat: s.uhat.clone(),
        ud_hat: s.ud_hat.clone(),
        error: s.error.clone(),
        h: s.eval.h,
        min_b: s.eval.min_b(),
        min_hj: s.eval.min_hj(),
        mu,
        status,
        goal_dist: sc.goal_distance(x),
        min_phi,
    })
}

fn diagnostic_row(sc: &Scenario, t: f64, x: &[f64], status: RowStatus) -> LogRow {
    let m = sc.system().m();
    let levels = sc.cbf().levels(sc.system(), x).ok();
    let min_b = levels
        .as_ref()
        .map_or(f64::NAN, |l| l.iter().flatten().copied().fold(f64::INFINITY, f64::min));
    let min_hj = levels
        .as_ref()
        .map_or(f64::NAN, |l| l.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min));
    let h = sc.membership(x).map_or(f64::NAN, |mem| mem.h);
    let with_ctrl = sc.augmentation().is_some();
    let nan = || Some(vec![f64::NAN; m]);
    LogRow {
        t,
        x: x.to_vec(),
        u: vec![f64::NAN; m],
        uhat: if with_ctrl { nan() } else { None },
        ud_hat: if with_ctrl { nan() } else { None },
        error: if with_ctrl { nan() } else { None },
        h,
        min_b,
        min_hj,
        mu: f64::NAN,
        status,
        goal_dist: sc.goal_distance(x),
        min_phi: None,
    }
}

fn classify(e: &Error) -> (AbortReason, RowStatus) {
    match e {
        Error::Infeasible(_) => (AbortReason::Infeasible, RowStatus::Infeasible),
        _ => (AbortReason::Evaluation, RowStatus::Failed),
    }
}

/// Runs a built scenario from its initial state.
pub fn simulate(sc: &Scenario) -> Result<TrajectoryLog> {
    let cfg = sc.config();
    let sys = sc.system();
    let mut x = sc.initial_state();
    let mem = sc.membership(&x)?;
    let initial = InitialCheck {
        in_s: mem.in_s,
        in_c: mem.in_c,
        h: mem.h,
    };
    if !(initial.in_s && initial.in_c) {
        log::warn!(
            "{}: initial state is outside S ∩ C (h = {}); running anyway",
            cfg.id,
            initial.h
        );
    }
    let ticks = cfg.ticks();
    let period = 1.0 / cfg.control_rate;
    let substeps = cfg.substeps();
    let dt = period / substeps as f64;
    let mut log = TrajectoryLog {
        scenario_id: cfg.id.clone(),
        goal: cfg.goal,
        n_plant: sc.plant().n(),
        n_controller: sys.n() - sc.plant().n(),
        rows: Vec::with_capacity(ticks + 1),
        outcome: Outcome::Completed,
        initial,
    };
    for k in 0..=ticks {
        let t = k as f64 / cfg.control_rate;
        let sample = match sc.control(&x) {
            Ok(s) => s,
            Err(e) => {
                let (reason, status) = classify(&e);
                log.rows.push(diagnostic_row(sc, t, &x, status));
                log.outcome = Outcome::Aborted {
                    reason,
                    t,
                    message: e.to_string(),
                };
                return Ok(log);
            }
        };
        log.rows.push(row_from_sample(sc, t, &x, &sample)?);
        if k == ticks {
            break;
        }
        let mut next = x.clone();
        let mut failure = None;
        for _ in 0..substeps {
            let stepped = match cfg.hold {
                ControlHold::ZeroOrder => step_rk4(sys, &next, &sample.u, dt),
                ControlHold::Continuous => rk4(
                    |y| {
                        let u = sc.stage_input(y)?;
                        sys.xdot(y, &u)
                    },
                    &next,
                    dt,
                ),
            };
            match stepped {
                Ok(y) => next = y,
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        let t_next = (k + 1) as f64 / cfg.control_rate;
        if let Some(e) = failure {
            let (reason, status) = classify(&e);
            log.rows.push(diagnostic_row(sc, t_next, &next, status));
            log.outcome = Outcome::Aborted {
                reason,
                t: t_next,
                message: e.to_string(),
            };
            return Ok(log);
        }
        if next.iter().any(|v| !v.is_finite()) {
            log.rows.push(diagnostic_row(sc, t_next, &next, RowStatus::NonFinite));
            log.outcome = Outcome::Aborted {
                reason: AbortReason::NonFiniteState,
                t: t_next,
                message: "state became non-finite".into(),
            };
            return Ok(log);
        }
        x = next;
    }
    Ok(log)
}

/// Builds and runs one episode.
pub fn run_episode(cfg: &ScenarioConfig) -> Result<TrajectoryLog> {
    simulate(&Scenario::build(cfg)?)
}
