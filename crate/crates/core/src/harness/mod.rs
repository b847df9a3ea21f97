//! Experiment harness: scenes, the shared control loop, simulated runs,
//! continual retraining, scenario files and reports.

mod continual;
mod controller;
mod dataset;
mod experiment;
mod report;
mod run;
mod scenario;
mod scenes;

pub use continual::{train_assistant, BayesConfig, ContinualLearner, MethodConfig, RetrainEvent, TrainingJob};
pub use controller::{Assistant, Controller, Method, TickOutput};
pub use dataset::Dataset;
pub use experiment::{evaluate, generate_demos, run_scenario, ScenarioOutput};
pub use report::{metrics_csv, read_metrics_csv, summarize, Report, SummaryRow, Trace, TrialRow};
pub use run::{
    calibrate, demonstrations, operator, run_interaction, run_scored, Normalizer, Operator, Outcome, PrefixOperator,
    ScriptedOperator,
};
pub use scenario::{AutonomyPrefix, DemoSpec, FinalEval, Scenario, ScheduleEntry};
pub use scenes::{Prop, Scene};
