//! Small dense feed-forward networks with exact reverse-mode gradients and
//! adaptive-moment / plain gradient-descent optimizers.

mod checkpoint;
mod mlp;
mod optim;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use mlp::{Activation, DropoutMode, ForwardCache, Gradients, Layer, LayerSpec, Mlp};
pub use optim::{OptimizerKind, OptimizerState, StepOutcome};
