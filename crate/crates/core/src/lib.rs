//! Learning shared autonomy from repeated interactions.
//!
//! The crate recognizes an operator's current task from their recent
//! commands, replicates previously demonstrated behaviour, and hands control
//! back when the current interaction looks unfamiliar. It also carries the
//! kinematic simulator, scripted operators, comparison baselines and the
//! experiment harness used to evaluate all of that.
//!
//! The numerical core is generic over [`Scalar`] (`f32`/`f64`); the aliases
//! below fix it to `f64`, which is what the harness and the service use.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod human;
pub mod intent;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar used by the harness, the CLI and the teleop service.
pub type Real = f64;

pub type RobotState = sim::RobotState<Real>;
pub type ControlAction = sim::ControlAction<Real>;
pub type SimConfig = sim::SimConfig<Real>;
pub type TaskSpec = sim::TaskSpec<Real>;
pub type Network = nn::Mlp<Real>;
pub type Network32 = nn::Mlp<f32>;
pub type InteractionRecord = intent::InteractionRecord<Real>;
pub type ModelBundle = intent::ModelBundle<Real>;
pub type ArbitrationConfig = intent::ArbitrationConfig<Real>;
pub type HumanModel = human::HumanModel<Real>;
pub type EffortReport = human::EffortReport<Real>;
