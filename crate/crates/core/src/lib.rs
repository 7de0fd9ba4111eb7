//! Pronunciation scoring from frame-level phone posteriorgrams.
//!
//! The crate aligns reference phones to a posteriorgram, scores each segment
//! with GOP and an entropy-weighted transition-aware score, predicts phone
//! durations with a local-Gaussian self-attention network, and fuses the
//! duration mismatch into a context-aware score used for mispronunciation
//! detection.

pub mod align;
pub mod balance;
pub mod cli;
pub mod detector;
pub mod duration;
pub mod error;
pub mod gop;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
