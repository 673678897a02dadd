//! Gaussian and impulse noise injection into input channels for
//! robustness benchmarking.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::SeriesFrame;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NoiseKind {
    Gaussian,
    Impulse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub alpha: f64,
    /// Impulse gate period T in samples; firing probability is 1/T.
    #[serde(default = "default_period")]
    pub period_samples: usize,
    pub seed: u64,
    /// Channels to corrupt; empty means every non-target channel.
    #[serde(default)]
    pub target_channels: Vec<String>,
}

fn default_period() -> usize {
    5
}

impl NoiseSpec {
    pub fn gaussian(alpha: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Gaussian,
            alpha,
            period_samples: default_period(),
            seed,
            target_channels: Vec::new(),
        }
    }

    pub fn impulse(alpha: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Impulse,
            ..NoiseSpec::gaussian(alpha, seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if self.kind == NoiseKind::Impulse && self.period_samples == 0 {
            return Err(Error::InvalidArgument(
                "impulse noise requires period_samples >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Injection result: the corrupted frame plus names of channels skipped
/// because their standard deviation was zero.
#[derive(Debug, Clone)]
pub struct NoisyFrame {
    pub frame: SeriesFrame,
    pub skipped_channels: Vec<String>,
}

/// `L' = L + alpha * e`, `e ~ Normal(0, sigma_channel)`; deterministic per seed.
pub fn inject_gaussian(frame: &SeriesFrame, spec: &NoiseSpec) -> Result<NoisyFrame> {
    if spec.kind != NoiseKind::Gaussian {
        return Err(Error::InvalidArgument("inject_gaussian requires kind GAUSSIAN".into()));
    }
    inject(frame, spec)
}

/// Per row, fire with probability 1/T; fired rows get `alpha * e`,
/// `e ~ Normal(0, sigma_channel)`; other rows are untouched.
pub fn inject_impulse(frame: &SeriesFrame, spec: &NoiseSpec) -> Result<NoisyFrame> {
    if spec.kind != NoiseKind::Impulse {
        return Err(Error::InvalidArgument("inject_impulse requires kind IMPULSE".into()));
    }
    inject(frame, spec)
}

/// Kind-dispatching entry point.
pub fn inject(frame: &SeriesFrame, spec: &NoiseSpec) -> Result<NoisyFrame> {
    spec.validate()?;
    let selected: Vec<String> = if spec.target_channels.is_empty() {
        frame.feature_names()
    } else {
        spec.target_channels.clone()
    };
    let mut out = frame.clone();
    let mut skipped = Vec::new();
    for name in &selected {
        if Some(name.as_str()) == frame.target_name.as_deref() {
            return Err(Error::InvalidArgument(format!(
                "refusing to corrupt target channel `{name}`"
            )));
        }
        let clean = frame.channel(name)?;
        let n = clean.values.len() as f64;
        let mean = clean.values.iter().sum::<f64>() / n;
        let sigma = (clean.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        if sigma == 0.0 {
            skipped.push(name.clone());
            continue;
        }
        // one stream per channel keyed by name, so the draw for a channel
        // does not depend on which other channels are selected
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ channel_key(name));
        let noisy = out.channel_mut(name)?;
        for v in &mut noisy.values {
            // gate and perturbation are drawn for every row regardless of
            // alpha so corruption is monotone in alpha at fixed seed
            let fire = match spec.kind {
                NoiseKind::Gaussian => true,
                NoiseKind::Impulse => {
                    let z: f64 = rng.gen();
                    z <= 1.0 / spec.period_samples as f64
                }
            };
            let e: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
            if fire {
                *v += spec.alpha * e;
            }
        }
    }
    Ok(NoisyFrame {
        frame: out,
        skipped_channels: skipped,
    })
}

fn channel_key(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
