//! Dense volumetric CNN over interleaved froxel grids, its losses and the
//! training loop. Gradients are derived by hand.

mod conv;
pub mod gradcheck;
mod loss;
mod model;
mod train;

pub use conv::{Activation, Conv3d, ConvGrad, LayerSpec};
pub use loss::{combined_loss, dice_loss, rvl_loss, rvl_parts, ConfusionCounts, Loss, RvlParts};
pub use model::{
    predict_probabilities, predict_pvs, ModelConfig, Network, Trace, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use train::{
    evaluate, samples_from_pairs, train, train_step, EpochLog, Optimizer, OptimizerState, Sample, StepStats,
    TrainConfig, TrainReport,
};
