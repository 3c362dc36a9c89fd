//! Closed-loop simulation of the unicycle scenarios.

pub mod audit;
pub mod config;
pub mod episode;
pub mod integrator;
pub mod log;
pub mod overrides;
pub mod scenario;
pub mod unicycle;

pub use audit::{audit_scenario, state_box, ScenarioAudit};
pub use config::{
    default_map, BarrierConfig, ControlHold, ControllerConfig, FilterConfig, InputBounds,
    MapConfig, ScenarioConfig, SpeedBounds, GOALS, START,
};
pub use episode::{run_episode, simulate};
pub use integrator::{rk4, step_rk4};
pub use log::{
    AbortReason, InitialCheck, LogRow, LogSummary, Monitors, Outcome, RowStatus, TrajectoryLog,
    MONITOR_TOL,
};
pub use overrides::apply_overrides;
pub use scenario::{plant_barrier_fields, ControlSample, Scenario};
pub use unicycle::{
    desired_control_unicycle, obstacle_barrier, unicycle, DesiredControl, DesiredControlGains,
    ObstacleParams, PNormBarrier, WallParams,
};
