//! Composite architectures: the anti-noise block, TAL, the dual-stream
//! frequency-aware assemblies (FAF, FAL), and the ablation baselines.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{self, LstmNodes, MhaNodes};
use crate::numerics::{Graph, NodeId, Tensor};
use crate::wavelet::{self, FilterBank};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    Lstm,
    AttentionLstm,
    ResLstm,
    Faf,
    Tal,
    Fal,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Lstm,
        Variant::AttentionLstm,
        Variant::ResLstm,
        Variant::Faf,
        Variant::Tal,
        Variant::Fal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Lstm => "LSTM",
            Variant::AttentionLstm => "Attention-LSTM",
            Variant::ResLstm => "Res-LSTM",
            Variant::Faf => "FAF",
            Variant::Tal => "TAL",
            Variant::Fal => "FAL",
        }
    }
}

/// Architecture choice plus everything needed to rebuild its parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub input_features: usize,
    pub hidden_size: usize,
    pub num_heads: usize,
    pub wavelet_levels: usize,
    pub wavelet_bank: String,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(variant: Variant, input_features: usize, hidden_size: usize, seed: u64) -> Self {
        ModelSpec {
            variant,
            input_features,
            hidden_size,
            num_heads: 4,
            wavelet_levels: 2,
            wavelet_bank: "db4".into(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden_size % self.num_heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "hidden_size {} not divisible by num_heads {}",
                self.hidden_size, self.num_heads
            )));
        }
        FilterBank::by_name(&self.wavelet_bank)?;
        Ok(())
    }

    fn uses_band_split(&self) -> bool {
        matches!(self.variant, Variant::Faf | Variant::Fal)
    }
}

/// Named flat parameter arrays, keyed by dotted path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub entries: BTreeMap<String, Tensor>,
}

impl ModelParams {
    pub fn get(&self, path: &str) -> Result<&Tensor> {
        self.entries
            .get(path)
            .ok_or_else(|| Error::InventoryMismatch(path.into(), "missing parameter".into()))
    }

    pub fn parameter_count(&self) -> usize {
        self.entries.values().map(|t| t.numel()).sum()
    }
}

/// Shape inventory implied by a spec: path -> shape.
fn inventory(spec: &ModelSpec) -> Vec<(String, Vec<usize>)> {
    let f = spec.input_features;
    let h = spec.hidden_size;
    let lstm = |prefix: &str, input: usize| -> Vec<(String, Vec<usize>)> {
        let mut v = Vec::new();
        for gate in ["input", "forget", "cell", "output"] {
            v.push((format!("{prefix}.w_{gate}"), vec![input + h, h]));
            v.push((format!("{prefix}.b_{gate}"), vec![1, h]));
        }
        v
    };
    let head = |prefix: &str| -> Vec<(String, Vec<usize>)> {
        vec![
            (format!("{prefix}.w"), vec![h, 1]),
            (format!("{prefix}.b"), vec![1, 1]),
        ]
    };
    let block = |prefix: &str| -> Vec<(String, Vec<usize>)> {
        let mut v = Vec::new();
        for proj in ["query", "key", "value", "out"] {
            v.push((format!("{prefix}.attn.w_{proj}"), vec![h, h]));
        }
        v.push((format!("{prefix}.scale.w"), vec![h, h]));
        v.push((format!("{prefix}.scale.b"), vec![1, h]));
        v.push((format!("{prefix}.out.w"), vec![h, h]));
        v.push((format!("{prefix}.out.b"), vec![1, h]));
        v
    };
    let mut inv = Vec::new();
    match spec.variant {
        Variant::Lstm => {
            inv.extend(lstm("lstm", f));
            inv.extend(head("head"));
        }
        Variant::AttentionLstm => {
            inv.extend(lstm("lstm", f));
            for proj in ["query", "key", "value", "out"] {
                inv.push((format!("attn.w_{proj}"), vec![h, h]));
            }
            inv.extend(head("head"));
        }
        Variant::ResLstm => {
            inv.extend(lstm("lstm", f));
            inv.push(("proj.w".into(), vec![f, h]));
            inv.push(("proj.b".into(), vec![1, h]));
            inv.extend(head("head"));
        }
        Variant::Tal => {
            inv.extend(lstm("lstm", f));
            inv.extend(block("block"));
            inv.extend(head("head"));
        }
        Variant::Faf => {
            for stream in ["low", "high"] {
                inv.extend(lstm(&format!("{stream}.lstm"), f));
                inv.extend(head(&format!("{stream}.head")));
            }
        }
        Variant::Fal => {
            for stream in ["low", "high"] {
                inv.extend(lstm(&format!("{stream}.lstm"), f));
                inv.extend(block(&format!("{stream}.block")));
                inv.extend(head(&format!("{stream}.head")));
            }
        }
    }
    inv.sort_by(|a, b| a.0.cmp(&b.0));
    inv
}

/// Deterministic seeded initialization: weights uniform in
/// `+/- 1/sqrt(fan_in)`, biases zero except LSTM forget-gate biases (1).
pub fn init_params(spec: &ModelSpec) -> Result<ModelParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut entries = BTreeMap::new();
    for (path, shape) in inventory(spec) {
        let numel: usize = shape.iter().product();
        let is_bias = shape[0] == 1 && shape.len() == 2 && path.contains(".b");
        let data = if is_bias {
            let fill = if path.ends_with("b_forget") { 1.0 } else { 0.0 };
            vec![fill; numel]
        } else {
            let fan_in = shape[0] as f64;
            let bound = 1.0 / fan_in.sqrt();
            (0..numel).map(|_| rng.gen_range(-bound..bound)).collect()
        };
        entries.insert(path, Tensor::new(shape, data)?);
    }
    Ok(ModelParams { entries })
}

/// Parameter leaves bound into one graph for a forward/backward pass.
pub struct BoundParams {
    pub nodes: BTreeMap<String, NodeId>,
}

/// Bind every parameter as a differentiable leaf.
pub fn bind_params(g: &mut Graph, params: &ModelParams) -> Result<BoundParams> {
    let mut nodes = BTreeMap::new();
    for (path, t) in &params.entries {
        nodes.insert(path.clone(), g.leaf(t)?);
    }
    Ok(BoundParams { nodes })
}

impl BoundParams {
    fn id(&self, path: &str) -> Result<NodeId> {
        self.nodes
            .get(path)
            .copied()
            .ok_or_else(|| Error::InventoryMismatch(path.into(), "missing parameter".into()))
    }

    fn lstm(&self, prefix: &str, input_size: usize, hidden_size: usize) -> Result<LstmNodes> {
        Ok(LstmNodes {
            input_size,
            hidden_size,
            w_input: self.id(&format!("{prefix}.w_input"))?,
            w_forget: self.id(&format!("{prefix}.w_forget"))?,
            w_cell: self.id(&format!("{prefix}.w_cell"))?,
            w_output: self.id(&format!("{prefix}.w_output"))?,
            b_input: self.id(&format!("{prefix}.b_input"))?,
            b_forget: self.id(&format!("{prefix}.b_forget"))?,
            b_cell: self.id(&format!("{prefix}.b_cell"))?,
            b_output: self.id(&format!("{prefix}.b_output"))?,
        })
    }

    fn mha(&self, prefix: &str, model_dim: usize, num_heads: usize) -> Result<MhaNodes> {
        Ok(MhaNodes {
            model_dim,
            num_heads,
            w_query: self.id(&format!("{prefix}.w_query"))?,
            w_key: self.id(&format!("{prefix}.w_key"))?,
            w_value: self.id(&format!("{prefix}.w_value"))?,
            w_out: self.id(&format!("{prefix}.w_out"))?,
        })
    }
}

/// Debug switches for equivalence tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOpts {
    /// Skip anti-noise blocks entirely (identity), so FAL reduces to FAF.
    pub bypass_anti_noise: bool,
    /// Force the learned thresholds to zero inside anti-noise blocks.
    pub force_zero_threshold: bool,
}

/// Residual unit + threshold learning unit + soft-threshold processing.
///
/// Thresholds are `sigmoid(attention(GAP(|x|))) * GAP(|x|)` per batch
/// element and feature, constant over the sequence axis.
pub fn anti_noise_block(
    g: &mut Graph,
    x_seq: &[NodeId],
    bound: &BoundParams,
    prefix: &str,
    hidden_size: usize,
    num_heads: usize,
    opts: ForwardOpts,
) -> Result<Vec<NodeId>> {
    if opts.bypass_anti_noise {
        return Ok(x_seq.to_vec());
    }
    let abs_seq: Vec<NodeId> = x_seq.iter().map(|&x| g.abs(x)).collect();
    let pooled = layers::global_avg_pool(g, &abs_seq)?; // [B, F]
    let attn = bound.mha(&format!("{prefix}.attn"), hidden_size, num_heads)?;
    let attended = layers::mha_forward(g, &[pooled], &[pooled], &[pooled], &attn)?[0];
    let scale_w = bound.id(&format!("{prefix}.scale.w"))?;
    let scale_b = bound.id(&format!("{prefix}.scale.b"))?;
    let scale_pre = layers::dense(g, attended, scale_w, scale_b)?;
    let scale = g.sigmoid(scale_pre);
    let tau = if opts.force_zero_threshold {
        let (b, f) = g.shape(pooled);
        g.constant_from(b, f, vec![0.0; b * f])?
    } else {
        g.mul(scale, pooled)?
    };
    let out_w = bound.id(&format!("{prefix}.out.w"))?;
    let out_b = bound.id(&format!("{prefix}.out.b"))?;
    let mut out = Vec::with_capacity(x_seq.len());
    for &x_t in x_seq {
        let shrunk = g.soft_threshold(x_t, tau)?;
        let residual = g.add(shrunk, x_t)?;
        out.push(layers::dense(g, residual, out_w, out_b)?);
    }
    Ok(out)
}

fn dense_head(
    g: &mut Graph,
    seq: &[NodeId],
    bound: &BoundParams,
    prefix: &str,
) -> Result<Vec<NodeId>> {
    let w = bound.id(&format!("{prefix}.w"))?;
    let b = bound.id(&format!("{prefix}.b"))?;
    seq.iter().map(|&x| layers::dense(g, x, w, b)).collect()
}

fn zero_state(g: &mut Graph, batch: usize, hidden: usize) -> Result<(NodeId, NodeId)> {
    let h0 = g.constant(&Tensor::zeros(vec![batch, hidden]))?;
    let c0 = g.constant(&Tensor::zeros(vec![batch, hidden]))?;
    Ok((h0, c0))
}

/// LSTM -> anti-noise block -> dense head, one output channel per step.
fn tal_stream(
    g: &mut Graph,
    x_seq: &[NodeId],
    bound: &BoundParams,
    lstm_prefix: &str,
    block_prefix: &str,
    head_prefix: &str,
    spec: &ModelSpec,
    opts: ForwardOpts,
) -> Result<Vec<NodeId>> {
    let (batch, _) = g.shape(x_seq[0]);
    let p = bound.lstm(lstm_prefix, spec.input_features, spec.hidden_size)?;
    let (h0, c0) = zero_state(g, batch, spec.hidden_size)?;
    let (hidden_seq, _, _) = layers::lstm_forward(g, x_seq, &p, h0, c0)?;
    let denoised = anti_noise_block(
        g,
        &hidden_seq,
        bound,
        block_prefix,
        spec.hidden_size,
        spec.num_heads,
        opts,
    )?;
    dense_head(g, &denoised, bound, head_prefix)
}

/// Plain LSTM -> dense head stream.
fn lstm_stream(
    g: &mut Graph,
    x_seq: &[NodeId],
    bound: &BoundParams,
    lstm_prefix: &str,
    head_prefix: &str,
    spec: &ModelSpec,
) -> Result<Vec<NodeId>> {
    let (batch, _) = g.shape(x_seq[0]);
    let p = bound.lstm(lstm_prefix, spec.input_features, spec.hidden_size)?;
    let (h0, c0) = zero_state(g, batch, spec.hidden_size)?;
    let (hidden_seq, _, _) = layers::lstm_forward(g, x_seq, &p, h0, c0)?;
    dense_head(g, &hidden_seq, bound, head_prefix)
}

/// Split a `[B, S, F]` input tensor into per-timestep `[B, F]` constants.
fn input_to_seq(g: &mut Graph, x: &Tensor) -> Result<Vec<NodeId>> {
    if x.shape.len() != 3 {
        return Err(Error::ShapeMismatch {
            op: "model_forward".into(),
            detail: format!("expected [B, S, F] input, got {:?}", x.shape),
        });
    }
    let (b, s, f) = (x.shape[0], x.shape[1], x.shape[2]);
    let mut seq = Vec::with_capacity(s);
    for t in 0..s {
        let mut data = Vec::with_capacity(b * f);
        for bi in 0..b {
            let base = bi * s * f + t * f;
            data.extend_from_slice(&x.data[base..base + f]);
        }
        seq.push(g.constant_from(b, f, data)?);
    }
    Ok(seq)
}

/// Band-split a `[B, S, F]` tensor along the sequence axis, per batch
/// element and feature channel.
pub fn band_split_input(x: &Tensor, bank: &FilterBank, levels: usize) -> Result<(Tensor, Tensor)> {
    let (b, s, f) = (x.shape[0], x.shape[1], x.shape[2]);
    let admissible = wavelet::max_levels(s);
    if levels > admissible {
        return Err(Error::SignalTooShort {
            len: s,
            requested: levels,
            max_levels: admissible,
        });
    }
    let mut low = x.clone();
    let mut high = x.clone();
    let mut series = vec![0.0; s];
    for bi in 0..b {
        for fi in 0..f {
            for t in 0..s {
                series[t] = x.data[bi * s * f + t * f + fi];
            }
            let (lo, hi) = wavelet::band_split(&series, bank, levels)?;
            for t in 0..s {
                low.data[bi * s * f + t * f + fi] = lo[t];
                high.data[bi * s * f + t * f + fi] = hi[t];
            }
        }
    }
    Ok((low, high))
}

/// Run one model variant forward. Returns per-timestep `[B, 1]` outputs.
pub fn model_forward_opts(
    g: &mut Graph,
    spec: &ModelSpec,
    bound: &BoundParams,
    x: &Tensor,
    opts: ForwardOpts,
) -> Result<Vec<NodeId>> {
    spec.validate()?;
    if x.shape.len() != 3 || x.shape[2] != spec.input_features {
        return Err(Error::ShapeMismatch {
            op: "model_forward".into(),
            detail: format!(
                "expected [B, S, {}], got {:?}",
                spec.input_features, x.shape
            ),
        });
    }
    match spec.variant {
        Variant::Lstm => {
            let x_seq = input_to_seq(g, x)?;
            lstm_stream(g, &x_seq, bound, "lstm", "head", spec)
        }
        Variant::AttentionLstm => {
            let x_seq = input_to_seq(g, x)?;
            let (batch, _) = g.shape(x_seq[0]);
            let p = bound.lstm("lstm", spec.input_features, spec.hidden_size)?;
            let (h0, c0) = zero_state(g, batch, spec.hidden_size)?;
            let (hidden_seq, _, _) = layers::lstm_forward(g, &x_seq, &p, h0, c0)?;
            // "conventional attention": single-head self-attention over the
            // hidden sequence
            let attn = bound.mha("attn", spec.hidden_size, 1)?;
            let attended = layers::mha_forward(g, &hidden_seq, &hidden_seq, &hidden_seq, &attn)?;
            dense_head(g, &attended, bound, "head")
        }
        Variant::ResLstm => {
            let x_seq = input_to_seq(g, x)?;
            let (batch, _) = g.shape(x_seq[0]);
            let p = bound.lstm("lstm", spec.input_features, spec.hidden_size)?;
            let (h0, c0) = zero_state(g, batch, spec.hidden_size)?;
            let (hidden_seq, _, _) = layers::lstm_forward(g, &x_seq, &p, h0, c0)?;
            let proj_w = bound.id("proj.w")?;
            let proj_b = bound.id("proj.b")?;
            let skipped: Vec<NodeId> = x_seq
                .iter()
                .zip(&hidden_seq)
                .map(|(&x_t, &h_t)| {
                    let p_t = layers::dense(g, x_t, proj_w, proj_b)?;
                    g.add(h_t, p_t)
                })
                .collect::<Result<_>>()?;
            dense_head(g, &skipped, bound, "head")
        }
        Variant::Tal => {
            let x_seq = input_to_seq(g, x)?;
            tal_stream(g, &x_seq, bound, "lstm", "block", "head", spec, opts)
        }
        Variant::Faf | Variant::Fal => {
            let bank = FilterBank::by_name(&spec.wavelet_bank)?;
            let (low, high) = band_split_input(x, &bank, spec.wavelet_levels)?;
            let low_seq = input_to_seq(g, &low)?;
            let high_seq = input_to_seq(g, &high)?;
            let (y_low, y_high) = if spec.variant == Variant::Faf {
                (
                    lstm_stream(g, &low_seq, bound, "low.lstm", "low.head", spec)?,
                    lstm_stream(g, &high_seq, bound, "high.lstm", "high.head", spec)?,
                )
            } else {
                (
                    tal_stream(g, &low_seq, bound, "low.lstm", "low.block", "low.head", spec, opts)?,
                    tal_stream(
                        g, &high_seq, bound, "high.lstm", "high.block", "high.head", spec, opts,
                    )?,
                )
            };
            // wavelet decoder: complementary band streams recombine by sum
            y_low
                .iter()
                .zip(&y_high)
                .map(|(&a, &b)| g.add(a, b))
                .collect()
        }
    }
}

pub fn model_forward(
    g: &mut Graph,
    spec: &ModelSpec,
    bound: &BoundParams,
    x: &Tensor,
) -> Result<Vec<NodeId>> {
    model_forward_opts(g, spec, bound, x, ForwardOpts::default())
}

/// Checkpoint document: spec plus the full parameter inventory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub params: BTreeMap<String, CheckpointEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Checkpoint {
    pub fn from_params(spec: &ModelSpec, params: &ModelParams) -> Self {
        Checkpoint {
            spec: spec.clone(),
            params: params
                .entries
                .iter()
                .map(|(k, t)| {
                    (
                        k.clone(),
                        CheckpointEntry {
                            shape: t.shape.clone(),
                            values: t.data.clone(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Rebuild parameters, rejecting any inventory mismatch and naming
    /// the first offending path.
    pub fn into_params(self) -> Result<(ModelSpec, ModelParams)> {
        let expected = inventory(&self.spec);
        for (path, shape) in &expected {
            match self.params.get(path) {
                None => {
                    return Err(Error::InventoryMismatch(path.clone(), "missing".into()));
                }
                Some(e) if &e.shape != shape => {
                    return Err(Error::InventoryMismatch(
                        path.clone(),
                        format!("shape {:?}, expected {:?}", e.shape, shape),
                    ));
                }
                _ => {}
            }
        }
        let expected_paths: std::collections::BTreeSet<&String> =
            expected.iter().map(|(p, _)| p).collect();
        if let Some(extra) = self.params.keys().find(|k| !expected_paths.contains(k)) {
            return Err(Error::InventoryMismatch(extra.clone(), "unexpected parameter".into()));
        }
        let mut entries = BTreeMap::new();
        for (path, e) in self.params {
            entries.insert(path, Tensor::new(e.shape, e.values)?);
        }
        Ok((self.spec, ModelParams { entries }))
    }
}

/// Admissible sequence lengths for a spec's wavelet configuration.
pub fn admissible_seq_len(spec: &ModelSpec, s: usize) -> bool {
    !spec.uses_band_split() || wavelet::max_levels(s) >= spec.wavelet_levels
}
