use serde::Serialize;
use softcbf::sim::{InitialCheck, Monitors, Outcome, ScenarioConfig, TrajectoryLog};

/// Exit status for a clean pass.
pub const EXIT_PASS: i32 = 0;
/// Some monitor failed.
pub const EXIT_MONITOR: i32 = 1;
/// The configuration could not be read, parsed or built.
pub const EXIT_CONFIG: i32 = 2;
/// The episode stopped early.
pub const EXIT_ABORT: i32 = 3;

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scenario_id: String,
    pub goal: [f64; 2],
    pub seed: u64,
    pub passed: bool,
    pub monitors: Monitors,
    pub min_h: f64,
    pub min_b: f64,
    pub min_hj: f64,
    pub min_phi: Option<f64>,
    pub v_min: f64,
    pub v_max: f64,
    pub max_abs_uhat: Option<Vec<f64>>,
    pub final_goal_dist: f64,
    pub rows: usize,
    pub initial: InitialCheck,
    pub outcome: Outcome,
    pub wall_clock_s: f64,
    pub exit_code: i32,
}

impl RunReport {
    pub fn new(cfg: &ScenarioConfig, log: &TrajectoryLog, seed: u64, wall_clock_s: f64) -> Self {
        let s = log.summary();
        let monitors = log.monitors((cfg.map.speed.min, cfg.map.speed.max), cfg.goal_tolerance);
        let passed = monitors.all_pass();
        let mut report = RunReport {
            scenario_id: cfg.id.clone(),
            goal: cfg.goal,
            seed,
            passed,
            monitors,
            min_h: s.min_h,
            min_b: s.min_b,
            min_hj: s.min_hj,
            min_phi: s.min_phi,
            v_min: s.v_min,
            v_max: s.v_max,
            max_abs_uhat: s.max_abs_uhat,
            final_goal_dist: s.final_goal_dist,
            rows: s.rows,
            initial: log.initial,
            outcome: log.outcome.clone(),
            wall_clock_s,
            exit_code: 0,
        };
        report.exit_code = report.status();
        report
    }

    /// Exit status implied by the outcome and monitors.
    pub fn status(&self) -> i32 {
        match self.outcome {
            Outcome::Aborted { .. } => EXIT_ABORT,
            Outcome::Completed if self.passed => EXIT_PASS,
            Outcome::Completed => EXIT_MONITOR,
        }
    }
}

/// Worst status among several reports; an empty set passes.
pub fn combined_status(codes: impl IntoIterator<Item = i32>) -> i32 {
    codes.into_iter().fold(EXIT_PASS, |acc, c| {
        let rank = |c: i32| match c {
            EXIT_PASS => 0,
            EXIT_MONITOR => 1,
            EXIT_ABORT => 2,
            _ => 3,
        };
        if rank(c) > rank(acc) {
            c
        } else {
            acc
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combined_status_prefers_worst() {
        assert_eq!(combined_status([]), EXIT_PASS);
        assert_eq!(combined_status([0, 1, 0]), EXIT_MONITOR);
        assert_eq!(combined_status([1, 3, 0]), EXIT_ABORT);
        assert_eq!(combined_status([3, 2]), EXIT_CONFIG);
    }
}
