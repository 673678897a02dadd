//! Synthetic well-log generation, granularity alignment, standardization,
//! sliding-window sequencing, depth-ordered splitting, and
//! overlapping-window prediction averaging.

use std::ops::Range;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

/// Depth-indexed multichannel log table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFrame {
    pub depth_start: f64,
    pub depth_step: f64,
    pub channels: Vec<Channel>,
    pub target_name: Option<String>,
}

impl SeriesFrame {
    pub fn rows(&self) -> usize {
        self.channels.first().map_or(0, |c| c.values.len())
    }

    pub fn channel(&self, name: &str) -> Result<&Channel> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown channel `{name}`")))
    }

    pub fn channel_mut(&mut self, name: &str) -> Result<&mut Channel> {
        self.channels
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown channel `{name}`")))
    }

    pub fn depth_of(&self, row: usize) -> f64 {
        self.depth_start + row as f64 * self.depth_step
    }

    pub fn feature_names(&self) -> Vec<String> {
        let target = self.target_name.as_deref();
        self.channels
            .iter()
            .filter(|c| Some(c.name.as_str()) != target)
            .map(|c| c.name.clone())
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let n = self.rows();
        if self.channels.iter().any(|c| c.values.len() != n) {
            return Err(Error::InvalidArgument("channels have unequal lengths".into()));
        }
        let mut names: Vec<&str> = self.channels.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.channels.len() {
            return Err(Error::InvalidArgument("duplicate channel names".into()));
        }
        if self.depth_step <= 0.0 {
            return Err(Error::InvalidArgument("depth_step must be positive".into()));
        }
        Ok(())
    }
}

/// Redundant TEM channels are generated in groups of this size sharing a
/// common latent mixture.
pub const TEM_GROUP_SIZE: usize = 5;

/// Deterministic synthetic well generator standing in for the proprietary
/// three-well dataset.
///
/// Each well is built from latent factors: a piecewise-constant layer
/// sequence (formation boundaries from a seeded renewal process), a smooth
/// low-frequency trend, and a high-frequency texture. The target RT is a
/// positive nonlinear function of the latents; input channels are noisy
/// linear mixtures with deliberately redundant groups and varied SNR.
pub fn generate_synthetic_wells(
    seed: u64,
    n_wells: usize,
    depth_m: f64,
    step_m: f64,
    n_tem_channels: usize,
    n_conv_channels: usize,
) -> Result<Vec<SeriesFrame>> {
    if n_wells == 0 || depth_m <= 0.0 || step_m <= 0.0 || n_tem_channels == 0 {
        return Err(Error::InvalidArgument(
            "generator requires positive well count, depth, step, and channel counts".into(),
        ));
    }
    let rows = (depth_m / step_m).round() as usize;
    if rows == 0 {
        return Err(Error::InvalidArgument("depth too short for one row".into()));
    }
    let mut wells = Vec::with_capacity(n_wells);
    for w in 0..n_wells {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(w as u64 + 1)));
        wells.push(generate_one_well(&mut rng, w, rows, step_m, n_tem_channels, n_conv_channels)?);
    }
    Ok(wells)
}

fn generate_one_well(
    rng: &mut ChaCha8Rng,
    well_index: usize,
    rows: usize,
    step_m: f64,
    n_tem: usize,
    n_conv: usize,
) -> Result<SeriesFrame> {
    // latent 1: piecewise-constant layer values via a renewal process
    let mut layer = vec![0.0; rows];
    let mut t = 0usize;
    while t < rows {
        let thickness = rng.gen_range(20..=60).min(rows - t);
        let value: f64 = rng.sample(StandardNormal);
        for v in &mut layer[t..t + thickness] {
            *v = value;
        }
        t += thickness;
    }
    // latent 2: smooth low-frequency trend
    let l1 = rng.gen_range(150.0..300.0);
    let l2 = rng.gen_range(60.0..120.0);
    let (p1, p2) = (rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..std::f64::consts::TAU));
    let low: Vec<f64> = (0..rows)
        .map(|i| {
            let x = i as f64;
            0.7 * (std::f64::consts::TAU * x / l1 + p1).sin()
                + 0.4 * (std::f64::consts::TAU * x / l2 + p2).sin()
        })
        .collect();
    // latent 3: high-frequency texture
    let h1 = rng.gen_range(4.0..6.0);
    let h2 = rng.gen_range(7.0..10.0);
    let (q1, q2) = (rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..std::f64::consts::TAU));
    let high: Vec<f64> = (0..rows)
        .map(|i| {
            let x = i as f64;
            0.6 * (std::f64::consts::TAU * x / h1 + q1).sin()
                + 0.35 * (std::f64::consts::TAU * x / h2 + q2).sin()
        })
        .collect();

    // strictly positive target
    let rt: Vec<f64> = (0..rows)
        .map(|i| (0.3 + 0.35 * layer[i] + 0.3 * low[i] + 0.5 * high[i]).exp())
        .collect();

    let mut channels = Vec::new();
    let conv_names = ["AC", "GR", "CON", "SP"];
    for c in 0..n_conv {
        let name = conv_names
            .get(c)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("CONV{:02}", c + 1));
        let (a, b, g) = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-0.6..0.6),
        );
        let values = (0..rows)
            .map(|i| {
                let noise: f64 = rng.sample(StandardNormal);
                a * layer[i] + b * low[i] + g * high[i] + 0.1 * noise
            })
            .collect();
        channels.push(Channel { name, values });
    }
    let n_groups = n_tem.div_ceil(TEM_GROUP_SIZE);
    let mut produced = 0usize;
    for grp in 0..n_groups {
        let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        // alternate groups emphasize the high-frequency latent so the
        // texture is recoverable from several redundant views
        let g = if grp % 2 == 0 {
            rng.gen_range(0.6..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
        } else {
            rng.gen_range(-0.3..0.3)
        };
        let base: Vec<f64> = (0..rows)
            .map(|i| a * layer[i] + b * low[i] + g * high[i])
            .collect();
        let members = TEM_GROUP_SIZE.min(n_tem - produced);
        for m in 0..members {
            produced += 1;
            let gain = rng.gen_range(0.8..1.2);
            // first two members of each group are low-noise so the designed
            // redundancy shows up as > 0.9 correlation
            let sigma = if m < 2 { 0.1 } else { rng.gen_range(0.25..0.6) };
            let values = base
                .iter()
                .map(|&v| {
                    let noise: f64 = rng.sample(StandardNormal);
                    gain * v + sigma * noise
                })
                .collect();
            channels.push(Channel {
                name: format!("STEMUB{:02}", produced),
                values,
            });
        }
    }
    channels.push(Channel {
        name: "RT".into(),
        values: rt,
    });
    let frame = SeriesFrame {
        depth_start: 1000.0 + 500.0 * well_index as f64,
        depth_step: step_m,
        channels,
        target_name: Some("RT".into()),
    };
    frame.validate()?;
    Ok(frame)
}

/// Sparse nearest-index alignment of a fine-grained frame onto a coarser
/// step: output row `i` takes fine row `round(i * target_step / fine_step)`.
pub fn align_granularity(fine: &SeriesFrame, target_step: f64) -> Result<SeriesFrame> {
    if fine.rows() == 0 {
        return Err(Error::InvalidArgument("align_granularity: empty frame".into()));
    }
    if target_step <= 0.0 {
        return Err(Error::InvalidArgument("target_step must be positive".into()));
    }
    let ratio = target_step / fine.depth_step;
    let n_fine = fine.rows();
    let mut indices = Vec::new();
    let mut i = 0usize;
    loop {
        let j = (i as f64 * ratio).round() as usize;
        if j >= n_fine {
            break;
        }
        indices.push(j);
        i += 1;
    }
    let channels = fine
        .channels
        .iter()
        .map(|c| Channel {
            name: c.name.clone(),
            values: indices.iter().map(|&j| c.values[j]).collect(),
        })
        .collect();
    Ok(SeriesFrame {
        depth_start: fine.depth_start,
        depth_step: target_step,
        channels,
        target_name: fine.target_name.clone(),
    })
}

/// Per-channel mean and population standard deviation, fitted on training
/// rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerStats {
    pub channels: Vec<ChannelStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

impl StandardizerStats {
    pub fn get(&self, name: &str) -> Result<&ChannelStats> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no stats for channel `{name}`")))
    }
}

/// Fit per-channel statistics on the given row range.
pub fn fit_stats(frame: &SeriesFrame, rows: Range<usize>) -> Result<StandardizerStats> {
    if rows.is_empty() || rows.end > frame.rows() {
        return Err(Error::InvalidArgument(format!(
            "invalid fit range {:?} for {} rows",
            rows,
            frame.rows()
        )));
    }
    let n = rows.len() as f64;
    let mut channels = Vec::with_capacity(frame.channels.len());
    for c in &frame.channels {
        let slice = &c.values[rows.clone()];
        let mean = slice.iter().sum::<f64>() / n;
        let var = slice.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std == 0.0 {
            return Err(Error::ConstantChannel(c.name.clone()));
        }
        channels.push(ChannelStats {
            name: c.name.clone(),
            mean,
            std,
        });
    }
    Ok(StandardizerStats { channels })
}

/// `(X - u) / sigma` per channel.
pub fn standardize(frame: &SeriesFrame, stats: &StandardizerStats) -> Result<SeriesFrame> {
    let mut out = frame.clone();
    for c in &mut out.channels {
        let s = stats.get(&c.name)?;
        for v in &mut c.values {
            *v = (*v - s.mean) / s.std;
        }
    }
    Ok(out)
}

/// Inverse of [`standardize`] for one channel's series.
pub fn inverse_standardize(values: &[f64], stats: &StandardizerStats, channel: &str) -> Result<Vec<f64>> {
    let s = stats.get(channel)?;
    Ok(values.iter().map(|v| v * s.std + s.mean).collect())
}

/// One sliding-window sample: `[S, F]` inputs and the `[S]` target track.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub origin_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    pub seq_len: usize,
    pub stride: usize,
    pub feature_names: Vec<String>,
}

/// Sequence-to-sequence sliding windows over a row range of the frame.
pub fn make_windows(frame: &SeriesFrame, rows: Range<usize>, seq_len: usize, stride: usize) -> Result<WindowSet> {
    frame.validate()?;
    if stride == 0 || seq_len == 0 {
        return Err(Error::InvalidArgument("seq_len and stride must be positive".into()));
    }
    let n = rows.len();
    if n < seq_len {
        return Err(Error::InvalidArgument(format!(
            "range of {} rows shorter than window length {}",
            n, seq_len
        )));
    }
    let target_name = frame
        .target_name
        .clone()
        .ok_or_else(|| Error::InvalidArgument("frame has no target channel".into()))?;
    let feature_names = frame.feature_names();
    let features: Vec<&Channel> = feature_names
        .iter()
        .map(|n| frame.channel(n))
        .collect::<Result<_>>()?;
    let target = frame.channel(&target_name)?;
    let f = features.len();
    let mut windows = Vec::new();
    let mut start = rows.start;
    while start + seq_len <= rows.end {
        let mut input = Vec::with_capacity(seq_len * f);
        for t in start..start + seq_len {
            for ch in &features {
                input.push(ch.values[t]);
            }
        }
        windows.push(Window {
            input,
            target: target.values[start..start + seq_len].to_vec(),
            origin_index: start,
        });
        start += stride;
    }
    Ok(WindowSet {
        windows,
        seq_len,
        stride,
        feature_names,
    })
}

/// Contiguous depth-ordered 0.7 / 0.1 / 0.2 partition of the frame's rows.
pub fn split_by_depth(frame: &SeriesFrame, seq_len: usize) -> Result<(Range<usize>, Range<usize>, Range<usize>)> {
    let n = frame.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("split_by_depth: empty frame".into()));
    }
    let train_end = (n as f64 * 0.7).floor() as usize;
    let val_end = train_end + (n as f64 * 0.1).floor() as usize;
    let (train, val, test) = (0..train_end, train_end..val_end, val_end..n);
    for (name, r) in [("train", &train), ("validation", &val), ("test", &test)] {
        if r.len() < seq_len {
            return Err(Error::InvalidArgument(format!(
                "{} partition of {} rows cannot hold one window of length {}",
                name,
                r.len(),
                seq_len
            )));
        }
    }
    Ok((train, val, test))
}

/// Resolve overlapping per-window predictions into one series by averaging
/// every window output covering each depth row of `rows`.
pub fn depth_average(
    predictions: &[(usize, Vec<f64>)],
    rows: Range<usize>,
) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; rows.len()];
    let mut counts = vec![0usize; rows.len()];
    for (origin, seq) in predictions {
        for (k, v) in seq.iter().enumerate() {
            let row = origin + k;
            if rows.contains(&row) {
                sums[row - rows.start] += v;
                counts[row - rows.start] += 1;
            }
        }
    }
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::InvalidArgument(format!(
                "depth_average: row {} not covered by any window",
                rows.start + i
            )));
        }
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect())
}

/// Write a frame as CSV with a leading DEPT column.
pub fn write_csv(frame: &SeriesFrame, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["DEPT".to_string()];
    header.extend(frame.channels.iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    for i in 0..frame.rows() {
        let mut rec = vec![format!("{}", frame.depth_of(i))];
        rec.extend(frame.channels.iter().map(|c| format!("{}", c.values[i])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a frame from CSV written by [`write_csv`].
pub fn read_csv(path: &Path, target_name: Option<&str>) -> Result<SeriesFrame> {
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(|s| s.to_string()).collect();
    if headers.first().map(String::as_str) != Some("DEPT") {
        return Err(Error::InvalidArgument("CSV must start with a DEPT column".into()));
    }
    let mut depths = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len() - 1];
    for rec in r.records() {
        let rec = rec?;
        depths.push(
            rec[0]
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad DEPT value: {e}")))?,
        );
        for (i, col) in columns.iter_mut().enumerate() {
            col.push(
                rec[i + 1]
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad value in {}: {e}", headers[i + 1])))?,
            );
        }
    }
    if depths.is_empty() {
        return Err(Error::InvalidArgument("empty CSV".into()));
    }
    let step = if depths.len() > 1 {
        depths[1] - depths[0]
    } else {
        1.0
    };
    let channels = headers[1..]
        .iter()
        .zip(columns)
        .map(|(name, values)| Channel {
            name: name.clone(),
            values,
        })
        .collect();
    let frame = SeriesFrame {
        depth_start: depths[0],
        depth_step: step,
        channels,
        target_name: target_name.map(String::from),
    };
    frame.validate()?;
    Ok(frame)
}
