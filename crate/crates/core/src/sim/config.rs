//! Scenario configuration and its JSON form.

use serde::{Deserialize, Serialize};

use super::unicycle::{DesiredControlGains, ObstacleParams, WallParams};
use crate::cbf_chain::AlphaFunction;
use crate::error::{Error, Result};

/// Obstacles, wall and speed band. All barriers share the norm exponent `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub p: f64,
    pub obstacles: Vec<ObstacleParams>,
    pub wall: WallParams,
    /// Speed band `[min, max]` in m/s, giving `max − v ≥ 0` and `v − min ≥ 0`.
    pub speed: SpeedBounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedBounds {
    pub min: f64,
    pub max: f64,
}

/// Box on the plant input `û`, one entry per input channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Declared relative degree and alpha chain of one barrier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    pub label: String,
    /// Relative degree with respect to the simulated system (the cascade when a
    /// controller is configured).
    pub degree: usize,
    #[serde(default)]
    pub alphas: Vec<AlphaFunction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub rho: f64,
    pub gamma: f64,
    pub outer_alpha: AlphaFunction,
    /// Obstacles in map order, then wall, speed upper, speed lower, then input
    /// bounds (`u1_upper, u1_lower, u2_upper, …`) when a controller is configured.
    pub barriers: Vec<BarrierConfig>,
}

/// LTI controller dynamics; matrices are given as lists of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub a_c: Vec<Vec<f64>>,
    pub b_c: Vec<Vec<f64>>,
    pub c_c: Vec<Vec<f64>>,
    /// Initial controller state; ignored when `matched_init` is set.
    pub xc0: Vec<f64>,
    /// `γ_0 … γ_{d_c−1}` of the tracking law.
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub matched_init: bool,
    /// Bypass the filter and apply the tracking law directly.
    #[serde(default)]
    pub bypass_filter: bool,
}

/// Complete description of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub map: MapConfig,
    #[serde(default)]
    pub input_bounds: Option<InputBounds>,
    pub gains: DesiredControlGains,
    pub goal: [f64; 2],
    /// Plant initial state `(q_x, q_y, v, θ)`.
    pub x0: Vec<f64>,
    pub filter: FilterConfig,
    #[serde(default)]
    pub controller: Option<ControllerConfig>,
    /// Integrator step in seconds.
    pub dt_integrator: f64,
    /// Control update rate in Hz.
    pub control_rate: f64,
    /// Episode length in seconds.
    pub duration: f64,
    /// Goal distance (m) counted as converged.
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
    /// Goal distance (m) below which the desired control only damps the speed.
    #[serde(default = "default_capture_radius")]
    pub capture_radius: f64,
    #[serde(default)]
    pub hold: ControlHold,
}

/// How the control acts between updates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlHold {
    /// Computed at each update and held until the next.
    #[default]
    ZeroOrder,
    /// Re-evaluated at every integrator stage.
    Continuous,
}

fn default_goal_tolerance() -> f64 {
    0.1
}

fn default_capture_radius() -> f64 {
    0.05
}

/// Start and goals shared by both examples.
pub const START: [f64; 4] = [-1.0, -8.5, 0.0, std::f64::consts::FRAC_PI_2];
pub const GOALS: [[f64; 2]; 4] = [[3.0, 4.5], [-7.0, 0.0], [7.0, 1.5], [-1.0, 7.0]];

/// The fixed map used for regression: six `p = 4` obstacles inside a 10 × 10
/// half-width wall. These positions are a choice of this crate.
pub fn default_map() -> MapConfig {
    let obstacle = |b_x: f64, b_y: f64, half_x: f64, half_y: f64| ObstacleParams {
        b_x,
        b_y,
        a_x: 1.0 / half_x,
        a_y: 1.0 / half_y,
        c: 1.0,
    };
    MapConfig {
        p: 4.0,
        obstacles: vec![
            obstacle(-5.0, -6.0, 1.0, 1.0),
            obstacle(4.0, -6.0, 1.0, 1.0),
            obstacle(1.5, 0.0, 1.0, 1.0),
            obstacle(6.5, 6.5, 1.0, 1.0),
            obstacle(-6.0, 6.0, 1.0, 1.0),
            obstacle(-4.0, 1.0, 1.0, 1.0),
        ],
        wall: WallParams {
            a_x: 0.1,
            a_y: 0.1,
            c: 1.0,
        },
        speed: SpeedBounds { min: -1.0, max: 9.0 },
    }
}

impl ScenarioConfig {
    /// Safety constraints only, with the direct minimum-intervention cost.
    pub fn example1(goal: [f64; 2]) -> Self {
        let map = default_map();
        let mut barriers: Vec<BarrierConfig> = (0..map.obstacles.len())
            .map(|j| BarrierConfig {
                label: format!("obstacle{}", j + 1),
                degree: 2,
                alphas: vec![AlphaFunction::linear(7.0)],
            })
            .collect();
        barriers.push(BarrierConfig {
            label: "wall".into(),
            degree: 2,
            alphas: vec![AlphaFunction::linear(7.0)],
        });
        for label in ["speed_max", "speed_min"] {
            barriers.push(BarrierConfig {
                label: label.into(),
                degree: 1,
                alphas: vec![],
            });
        }
        ScenarioConfig {
            id: "example1".into(),
            map,
            input_bounds: None,
            gains: DesiredControlGains {
                k1: 0.2,
                k2: 1.0,
                k3: 2.0,
            },
            goal,
            x0: START.to_vec(),
            filter: FilterConfig {
                rho: 10.0,
                gamma: 1e24,
                outer_alpha: AlphaFunction::linear(0.5),
                barriers,
            },
            controller: None,
            dt_integrator: 1e-3,
            control_rate: 1000.0,
            duration: 60.0,
            goal_tolerance: default_goal_tolerance(),
            capture_radius: default_capture_radius(),
            hold: ControlHold::ZeroOrder,
        }
    }

    /// Safety and input constraints through LTI controller dynamics.
    pub fn example3(goal: [f64; 2]) -> Self {
        let mut cfg = ScenarioConfig::example1(goal);
        cfg.id = "example3".into();
        let n_obstacles = cfg.map.obstacles.len();
        for (j, b) in cfg.filter.barriers.iter_mut().enumerate() {
            if j < n_obstacles {
                b.degree = 3;
                b.alphas = vec![
                    AlphaFunction::Constant { value: 1.0 },
                    AlphaFunction::linear(2.5),
                ];
            } else if j == n_obstacles {
                b.degree = 3;
                b.alphas = vec![
                    AlphaFunction::Constant { value: 6.0 },
                    AlphaFunction::Constant { value: 1.0 },
                ];
            } else {
                b.degree = 2;
                b.alphas = vec![AlphaFunction::linear(10.0)];
            }
        }
        for label in ["u1_upper", "u1_lower", "u2_upper", "u2_lower"] {
            cfg.filter.barriers.push(BarrierConfig {
                label: label.into(),
                degree: 1,
                alphas: vec![],
            });
        }
        cfg.filter.gamma = 100.0;
        cfg.filter.outer_alpha = AlphaFunction::zero();
        cfg.input_bounds = Some(InputBounds {
            lower: vec![-4.0, -1.0],
            upper: vec![4.0, 1.0],
        });
        cfg.controller = Some(ControllerConfig {
            a_c: vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
            b_c: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            c_c: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            xc0: vec![0.0, 0.0],
            gammas: vec![1.0],
            matched_init: false,
            bypass_filter: false,
        });
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Number of control ticks after the initial one.
    pub fn ticks(&self) -> usize {
        (self.duration * self.control_rate).round() as usize
    }

    /// Integrator steps per control period.
    pub fn substeps(&self) -> usize {
        ((1.0 / self.control_rate) / self.dt_integrator).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.dt_integrator,
            self.control_rate,
            self.duration,
            self.filter.rho,
            self.filter.gamma,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("timing and filter parameters must be finite".into()));
        }
        if !(self.control_rate > 0.0 && self.dt_integrator > 0.0) {
            return Err(Error::Config("control_rate and dt_integrator must be positive".into()));
        }
        if self.dt_integrator > 1.0 / self.control_rate * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt_integrator {} exceeds the control period {}",
                self.dt_integrator,
                1.0 / self.control_rate
            )));
        }
        let period = 1.0 / self.control_rate;
        let n = self.substeps() as f64;
        if (n * self.dt_integrator - period).abs() > 1e-9 * period {
            return Err(Error::Config(format!(
                "control period {period} is not a whole number of integrator steps {}",
                self.dt_integrator
            )));
        }
        if !(self.capture_radius >= 0.0 && self.capture_radius < self.goal_tolerance) {
            return Err(Error::Config(
                "capture_radius must lie in [0, goal_tolerance)".into(),
            ));
        }
        if self.duration < 0.0 {
            return Err(Error::Config("duration must be non-negative".into()));
        }
        if !(self.filter.rho > 0.0 && self.filter.gamma > 0.0) {
            return Err(Error::Config("rho and gamma must be positive".into()));
        }
        if self.x0.len() != 4 || self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("x0 must be four finite numbers".into()));
        }
        self.gains.validate()?;
        self.filter.outer_alpha.validate()?;
        if self.filter.outer_alpha.offset() != 0.0 {
            return Err(Error::Config("outer alpha must vanish at zero".into()));
        }
        let expected = self.map.obstacles.len()
            + 3
            + self
                .input_bounds
                .as_ref()
                .filter(|_| self.controller.is_some())
                .map_or(0, |b| 2 * b.lower.len());
        if self.filter.barriers.len() != expected {
            return Err(Error::Config(format!(
                "filter.barriers lists {} entries, the map and input bounds define {expected}",
                self.filter.barriers.len()
            )));
        }
        if self.controller.is_some() != self.input_bounds.is_some() {
            return Err(Error::Config(
                "controller and input_bounds must be given together".into(),
            ));
        }
        Ok(())
    }
}
