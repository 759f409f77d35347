//! The self-representation autoencoder and its training objective.

mod loss;
mod model;
mod train;

pub use loss::{
    column_differences, difference_matrix, reconstruction_loss, selfrep_residual_loss,
    smoothness_penalty, sparsity_penalty,
};
pub use model::{
    total_loss, ArchConfig, LossBreakdown, LossWeights, ModelForward, ModelGrad, SelfRepModel,
};
pub use train::{train, train_with_clock, Adam, LrSchedule, TrainConfig, TrainReport};
