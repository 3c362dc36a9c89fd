//! Composite soft-minimum control barrier functions.
//!
//! Barriers of arbitrary relative degree are reduced through higher-order
//! chains, merged with a log-sum-exp soft minimum and enforced by a
//! closed-form single-constraint quadratic program. Input bounds are handled
//! by appending controller dynamics and lifting them to state constraints.

pub mod cbf_chain;
pub mod error;
pub mod fields;
pub mod input_aug;
pub mod safety_filter;
pub mod sim;
pub mod softmin;

pub use cbf_chain::{
    audit_relative_degree, composite_gradient, composite_lie_derivatives, composite_value,
    membership, sample_states, AlphaFunction, BarrierSpec, CbfEvaluation, CompositeCBF,
    DegreeAudit, Membership, SampleRegion,
};
pub use error::{Error, Result};
pub use fields::{ControlAffineSystem, Direction, LieEngine, Real, ScalarField, Smooth, VectorField};
pub use input_aug::{
    audit_controller, ControllerAudit, ControllerAugmentation, ControllerDynamics, CostSpec,
    InputConstraintSpec, LtiController, PlantBarrier, TrackingLawConfig,
};
pub use safety_filter::{solve_filter, FilterProblem, FilterSolution, FilterStatus};
pub use sim::{run_episode, Scenario, ScenarioConfig, TrajectoryLog};
pub use softmin::{softmin, softmin_weights, SoftminParams};
