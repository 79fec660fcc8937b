//! Second-stage learner: RBM pretraining and supervised fine-tuning.

pub mod loss;
mod network;
mod rbm;
mod train;

pub use network::{DbnModel, DenseLayer, ForwardMode, HeadKind};
pub use rbm::{Rbm, RbmGradient};
pub use train::{
    fine_tune, head_loss, objective_and_gradient, pretrain_stack, score, FineTuneConfig, Gradients, PretrainConfig,
    Pretrained, TrainReport,
};
