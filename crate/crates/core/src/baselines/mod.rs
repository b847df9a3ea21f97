//! Comparison methods: behavior cloning, dropout self-confidence gating and
//! Bayesian goal inference.

mod bayes;
mod bc;
mod dropout;

pub use bayes::{bayes_assist, bayes_update, GoalPrior};
pub use bc::{bc_act, bc_train, bc_train_on, BcConfig, BcPolicy};
pub use dropout::{beta_from_variance, dropout_beta, sample_variance, train_dropout_gate, DropoutConfig, DropoutGate};
