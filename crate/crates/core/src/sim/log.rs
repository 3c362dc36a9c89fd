//! Per-tick trajectory records, summaries and safety monitors.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::safety_filter::FilterStatus;

/// Slack allowed on every safety monitor.
pub const MONITOR_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Unconstrained,
    Active,
    SlackOnly,
    Bypassed,
    Infeasible,
    NonFinite,
    Failed,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Unconstrained => "unconstrained",
            RowStatus::Active => "active",
            RowStatus::SlackOnly => "slack_only",
            RowStatus::Bypassed => "bypassed",
            RowStatus::Infeasible => "infeasible",
            RowStatus::NonFinite => "non_finite",
            RowStatus::Failed => "failed",
        }
    }
}

impl From<FilterStatus> for RowStatus {
    fn from(s: FilterStatus) -> Self {
        match s {
            FilterStatus::Unconstrained => RowStatus::Unconstrained,
            FilterStatus::Active => RowStatus::Active,
            FilterStatus::SlackOnly => RowStatus::SlackOnly,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogRow {
    pub t: f64,
    /// Plant state followed by the controller state, if any.
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub uhat: Option<Vec<f64>>,
    pub ud_hat: Option<Vec<f64>>,
    pub error: Option<Vec<f64>>,
    pub h: f64,
    pub min_b: f64,
    pub min_hj: f64,
    pub mu: f64,
    pub status: RowStatus,
    pub goal_dist: f64,
    /// `min_κ φ_κ(û)`; not written to the CSV.
    pub min_phi: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    Infeasible,
    NonFiniteState,
    Evaluation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Aborted {
        reason: AbortReason,
        t: f64,
        message: String,
    },
}

/// Set membership of the initial state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InitialCheck {
    pub in_s: bool,
    pub in_c: bool,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryLog {
    pub scenario_id: String,
    pub goal: [f64; 2],
    pub n_plant: usize,
    pub n_controller: usize,
    pub rows: Vec<LogRow>,
    pub outcome: Outcome,
    pub initial: InitialCheck,
}

/// Extremes over the whole log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogSummary {
    pub rows: usize,
    pub duration: f64,
    pub min_h: f64,
    pub min_b: f64,
    pub min_hj: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub max_abs_uhat: Option<Vec<f64>>,
    pub min_phi: Option<f64>,
    pub max_mu: f64,
    pub final_goal_dist: f64,
}

/// Pass flags derived from a [`LogSummary`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Monitors {
    pub completed: bool,
    pub safety: bool,
    pub speed: bool,
    /// `None` without input constraints.
    pub input_bounds: Option<bool>,
    pub convergence: bool,
}

impl Monitors {
    pub fn safe(&self) -> bool {
        self.completed && self.safety && self.speed && self.input_bounds.unwrap_or(true)
    }

    pub fn all_pass(&self) -> bool {
        self.safe() && self.convergence
    }
}

/// Minimum that propagates NaN.
fn nan_min(acc: f64, v: f64) -> f64 {
    if acc.is_nan() || v.is_nan() {
        f64::NAN
    } else {
        acc.min(v)
    }
}

fn nan_max(acc: f64, v: f64) -> f64 {
    -nan_min(-acc, -v)
}

impl TrajectoryLog {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["t", "qx", "qy", "v", "theta"].map(String::from).to_vec();
        h.extend((1..=self.n_controller).map(|i| format!("xc{i}")));
        let m = self.rows.first().map_or(2, |r| r.u.len());
        h.extend((1..=m).map(|i| format!("u{i}")));
        if self.n_controller > 0 {
            h.extend((1..=m).map(|i| format!("uhat{i}")));
            h.extend((1..=m).map(|i| format!("ud{i}hat")));
            h.extend((1..=m).map(|i| format!("e{i}")));
        }
        h.extend(["h", "min_b", "min_hj", "mu", "status", "goal_dist"].map(String::from));
        h
    }

    fn record(&self, row: &LogRow) -> Vec<String> {
        let f = |v: &f64| format!("{v:?}");
        let mut rec = vec![f(&row.t)];
        rec.extend(row.x.iter().map(f));
        rec.extend(row.u.iter().map(f));
        if self.n_controller > 0 {
            let m = row.u.len();
            for part in [&row.uhat, &row.ud_hat, &row.error] {
                match part {
                    Some(v) => rec.extend(v.iter().map(f)),
                    None => rec.extend(std::iter::repeat_n("NaN".to_string(), m)),
                }
            }
        }
        rec.extend([row.h, row.min_b, row.min_hj, row.mu].iter().map(f));
        rec.push(row.status.as_str().to_string());
        rec.push(f(&row.goal_dist));
        rec
    }

    /// Writes every `every`-th row, always including the last.
    pub fn write_csv_decimated<W: Write>(&self, out: W, every: usize) -> Result<()> {
        let every = every.max(1);
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Config(format!("writing trace: {e}"));
        w.write_record(self.header()).map_err(io)?;
        let last = self.rows.len().saturating_sub(1);
        for (k, row) in self.rows.iter().enumerate() {
            if k % every == 0 || k == last {
                w.write_record(self.record(row)).map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::Config(format!("writing trace: {e}")))?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_csv_decimated(out, 1)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Writes selected columns of the trace, by header name.
    pub fn write_columns<W: Write>(&self, out: W, columns: &[&str]) -> Result<()> {
        let header = self.header();
        let idx = columns
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| Error::Config(format!("no trace column named {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Config(format!("writing trace: {e}"));
        w.write_record(columns).map_err(io)?;
        for row in &self.rows {
            let rec = self.record(row);
            w.write_record(idx.iter().map(|&i| &rec[i])).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Config(format!("writing trace: {e}")))?;
        Ok(())
    }

    pub fn summary(&self) -> LogSummary {
        let mut s = LogSummary {
            rows: self.rows.len(),
            duration: self.rows.last().map_or(0.0, |r| r.t),
            min_h: f64::INFINITY,
            min_b: f64::INFINITY,
            min_hj: f64::INFINITY,
            v_min: f64::INFINITY,
            v_max: f64::NEG_INFINITY,
            max_abs_uhat: None,
            min_phi: None,
            max_mu: 0.0,
            final_goal_dist: self.rows.last().map_or(f64::NAN, |r| r.goal_dist),
        };
        for r in &self.rows {
            s.min_h = nan_min(s.min_h, r.h);
            s.min_b = nan_min(s.min_b, r.min_b);
            s.min_hj = nan_min(s.min_hj, r.min_hj);
            s.v_min = nan_min(s.v_min, r.x[2]);
            s.v_max = nan_max(s.v_max, r.x[2]);
            s.max_mu = nan_max(s.max_mu, r.mu.abs());
            if let Some(u) = &r.uhat {
                let acc = s.max_abs_uhat.get_or_insert_with(|| vec![0.0; u.len()]);
                for (a, v) in acc.iter_mut().zip(u) {
                    *a = nan_max(*a, v.abs());
                }
            }
            if let Some(p) = r.min_phi {
                s.min_phi = Some(nan_min(s.min_phi.unwrap_or(f64::INFINITY), p));
            }
        }
        s
    }

    /// Monitor flags for a speed band and goal tolerance. Convergence holds
    /// vacuously for a completed episode of zero length.
    pub fn monitors(&self, speed: (f64, f64), goal_tolerance: f64) -> Monitors {
        let s = self.summary();
        let ok = |v: f64| v >= -MONITOR_TOL;
        Monitors {
            completed: self.outcome == Outcome::Completed,
            safety: ok(s.min_h) && ok(s.min_b) && ok(s.min_hj),
            speed: s.v_min >= speed.0 - MONITOR_TOL && s.v_max <= speed.1 + MONITOR_TOL,
            input_bounds: s.min_phi.map(ok),
            convergence: s.final_goal_dist < goal_tolerance
                || (s.duration == 0.0 && self.outcome == Outcome::Completed),
        }
    }
}
