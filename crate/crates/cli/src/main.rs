//! `softcbf`: run, validate and sweep composite-CBF scenarios.

mod report;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use softcbf::sim::{apply_overrides, audit_scenario, simulate, Scenario, ScenarioConfig, TrajectoryLog, GOALS};

use report::{combined_status, RunReport, EXIT_ABORT, EXIT_CONFIG, EXIT_MONITOR, EXIT_PASS};

#[derive(Parser)]
#[command(name = "softcbf", version, about = "Composite soft-minimum CBF scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path override, e.g. `filter.rho=10`; repeatable, last wins.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for sampled checks; recorded in every report.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one episode and write the trace, report and plot data.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, env = "SOFTCBF_OUT_DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Check relative degrees and controller conditions at sampled states.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Number of sampled states.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Also write the audit to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one episode per goal and aggregate the reports.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Goals as `x,y;x,y;…`; defaults to the four standard goals.
        #[arg(long)]
        goals: Option<String>,
        #[arg(long, env = "SOFTCBF_OUT_DIR", default_value = "out")]
        out: PathBuf,
    },
}

struct Failure(i32, String);

fn load(common: &Common) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(&common.config).map_err(|e| {
        Failure(EXIT_CONFIG, format!("{}: {e}", common.config.display()))
    })?;
    let cfg = ScenarioConfig::from_json(&text)
        .map_err(|e| Failure(EXIT_CONFIG, format!("{}: {e}", common.config.display())))?;
    let cfg = apply_overrides(&cfg, &common.overrides)
        .map_err(|e| Failure(EXIT_CONFIG, e.to_string()))?;
    cfg.validate().map_err(|e| Failure(EXIT_CONFIG, e.to_string()))?;
    Ok(cfg)
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_CONFIG, format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("report serialises");
    fs::write(path, text + "\n").map_err(|e| io_fail(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_fail(path, e))
}

fn write_outputs(dir: &Path, log: &TrajectoryLog, report: &RunReport) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
    let trace = dir.join("trace.csv");
    log.write_csv(create(&trace)?).map_err(|e| io_fail(&trace, e))?;
    let header = log.header();
    let indexed = |h: &str, prefix: &str, suffix: &str| {
        h.strip_prefix(prefix)
            .and_then(|r| r.strip_suffix(suffix))
            .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
    };
    let pick = |keep: &dyn Fn(&str) -> bool| -> Vec<String> {
        header.iter().filter(|h| *h == "t" || keep(h)).cloned().collect()
    };
    let groups = [
        (
            "states.csv",
            pick(&|h| matches!(h, "qx" | "qy" | "v" | "theta") || indexed(h, "xc", "")),
        ),
        (
            "inputs.csv",
            pick(&|h| {
                ["u", "uhat", "e"].iter().any(|p| indexed(h, p, "")) || indexed(h, "ud", "hat")
            }),
        ),
        (
            "barriers.csv",
            pick(&|h| matches!(h, "h" | "min_b" | "min_hj" | "mu" | "status" | "goal_dist")),
        ),
    ];
    for (name, cols) in groups {
        let path = dir.join(name);
        let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
        log.write_columns(create(&path)?, &cols).map_err(|e| io_fail(&path, e))?;
    }
    write_json(&dir.join("report.json"), report)
}

fn episode(cfg: &ScenarioConfig, seed: u64, dir: &Path) -> Result<RunReport, Failure> {
    let scenario = Scenario::build(cfg).map_err(|e| Failure(EXIT_CONFIG, e.to_string()))?;
    let start = Instant::now();
    let log = simulate(&scenario).map_err(|e| Failure(EXIT_ABORT, e.to_string()))?;
    let report = RunReport::new(cfg, &log, seed, start.elapsed().as_secs_f64());
    write_outputs(dir, &log, &report)?;
    Ok(report)
}

fn parse_goals(text: &str) -> Result<Vec<[f64; 2]>, Failure> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let parts: Vec<&str> = pair.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [x, y] => match (x.parse(), y.parse()) {
                    (Ok(x), Ok(y)) => Ok([x, y]),
                    _ => Err(Failure(EXIT_CONFIG, format!("bad goal '{pair}'"))),
                },
                _ => Err(Failure(EXIT_CONFIG, format!("goal '{pair}' must be x,y"))),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct SweepSummary {
    config: String,
    seed: u64,
    reports: Vec<RunReport>,
    exit_code: i32,
}

fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::Run { common, out } => {
            let cfg = load(&common)?;
            let report = episode(&cfg, common.seed, &out)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
            Ok(report.exit_code)
        }
        Command::Validate {
            common,
            samples,
            out,
        } => {
            let cfg = load(&common)?;
            let scenario = Scenario::build(&cfg).map_err(|e| Failure(EXIT_CONFIG, e.to_string()))?;
            let audit = audit_scenario(&scenario, samples, common.seed)
                .map_err(|e| Failure(EXIT_CONFIG, e.to_string()))?;
            for d in &audit.degrees {
                println!(
                    "{:<12} d={} lower={:.3e} decoupling={:.3e} {}",
                    d.label,
                    d.degree,
                    d.worst_lower,
                    d.min_decoupling,
                    if d.passed { "ok" } else { "FAIL" }
                );
            }
            if let Some(c) = &audit.controller {
                println!(
                    "controller   C1={:.3e} C2={:.3e} C3={:.3e} C4={:.3e} C5={:.3e} {}",
                    c.c1_worst_lower,
                    c.c2_worst_condition,
                    c.c3_min_cross,
                    c.c4_worst_lower,
                    c.c5_min_decoupling,
                    if c.passed { "ok" } else { "FAIL" }
                );
            }
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(|e| io_fail(&dir, e))?;
                write_json(&dir.join("validate.json"), &audit)?;
            }
            Ok(if audit.passed { EXIT_PASS } else { EXIT_MONITOR })
        }
        Command::Sweep { common, goals, out } => {
            let cfg = load(&common)?;
            let goals = match goals {
                Some(text) => parse_goals(&text)?,
                None => GOALS.to_vec(),
            };
            let results: Vec<Result<RunReport, Failure>> = goals
                .par_iter()
                .map(|&g| {
                    let mut c = cfg.clone();
                    c.goal = g;
                    let dir = out.join(format!("goal_{}_{}", g[0], g[1]));
                    episode(&c, common.seed, &dir)
                })
                .collect();
            let mut reports = Vec::with_capacity(results.len());
            let mut codes = Vec::with_capacity(results.len());
            for r in results {
                match r {
                    Ok(rep) => {
                        codes.push(rep.exit_code);
                        reports.push(rep);
                    }
                    Err(Failure(code, msg)) => {
                        eprintln!("error: {msg}");
                        codes.push(code);
                    }
                }
            }
            reports.sort_by(|a, b| a.goal.partial_cmp(&b.goal).expect("finite goals"));
            let summary = SweepSummary {
                config: common.config.display().to_string(),
                seed: common.seed,
                reports,
                exit_code: combined_status(codes),
            };
            fs::create_dir_all(&out).map_err(|e| io_fail(&out, e))?;
            write_json(&out.join("sweep.json"), &summary)?;
            for r in &summary.reports {
                println!(
                    "goal ({}, {}): {} min_h={:.4} min_hj={:.4} final_dist={:.3e}",
                    r.goal[0],
                    r.goal[1],
                    if r.passed { "pass" } else { "FAIL" },
                    r.min_h,
                    r.min_hj,
                    r.final_goal_dist
                );
            }
            Ok(summary.exit_code)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    };
    if code == EXIT_MONITOR {
        eprintln!("one or more monitors failed");
    }
    ExitCode::from(code as u8)
}
