//! The monitor network: a small residual CNN mapping three stacked speckle
//! frames to a removal estimate plus material logits, with its loss, training
//! loop and evaluation.

mod eval;
mod loss;
mod network;
mod train;

pub use eval::{
    bench_latency, evaluate, evaluate_with_latency, hardware_description, logit_lp, predict, predict_batch,
    EvalRecord, EvalReport, LatencyStats, Prediction, PROB_CLAMP,
};
pub use loss::{joint_loss, make_batch, Batch, JointLoss};
pub use network::{
    build_network, ConvLayerSpec, LayerShape, NetOutput, Network, NetworkSpec, HEAD_LAYERS, RESIDUAL_BLOCKS,
    STEM_LAYERS,
};
pub use train::{dataset_loss, train, EpochLog, LossBreakdown, ModelMeta, TrainConfig, Trainer};
