//! Trainable PSHGCN model: `Z = f′_θ(gᵀg · f_θ(X W_proj))`.
//!
//! Input features use a block-padded layout: a node of type `t` stores its
//! own features in the column block reserved for `t`, zeros elsewhere, and a
//! trailing one-hot type indicator. A single projection matrix over that
//! layout is exactly a per-type linear map with per-type bias, and because it
//! is linear it commutes with propagation, which the decoupled path uses.

mod gradcheck;
mod metrics;
mod model;
mod optim;
pub mod tape;
mod train;

pub use gradcheck::{gradient_check, relative_error, GradientCheck};
pub use metrics::{evaluate, evaluate_predictions, F1Scores};
pub use model::{
    filter_init_bound, forward, init_model, loss_and_grads, uniform_filter_weights, DecoupledPlan, ForwardMode,
    Model, ModelConfig, ParamGroup,
};
pub use optim::Adam;
pub use train::{train, BatchMode, EpochMetrics, TrainConfig, TrainData, TrainFailure, TrainOutcome};
