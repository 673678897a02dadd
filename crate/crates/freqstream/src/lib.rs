//! Frequency-aware LSTM: wavelet dual-stream sequence models with
//! attention-driven soft-threshold anti-noise blocks, plus the synthetic
//! well-log benchmark harness used to evaluate them.

pub mod blocks;
pub mod data;
pub mod error;
pub mod eval;
pub mod layers;
pub mod noise;
pub mod numerics;
pub mod report;
pub mod wavelet;

pub use error::{Error, Result};
