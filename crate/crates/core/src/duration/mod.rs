//! Phone duration prediction with a self-attention encoder whose heads carry
//! a learnable local Gaussian bias.

mod attention;
mod checkpoint;
mod config;
mod net;
mod params;
mod train;

pub use attention::{attention, attention_weights, gaussian_bias};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use config::DurationNetConfig;
pub use net::{backward_from_cache, forward, forward_masked, positional_encoding, ForwardCache, Mode};
pub use params::{BlockParams, DurationNetParams, SpeedNorm};
pub use train::{
    backward, evaluate_mae, l1_loss, noam_lr, predict_durations, train, Adam, DurationSample,
    EpochLog, TrainingLog, ADAM_BETA1, ADAM_BETA2, ADAM_EPS,
};
