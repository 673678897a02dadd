//! Training loop, metric computation, frequency-band evaluation, and the
//! ablation / noise-robustness benchmark runners.

use std::ops::Range;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blocks::{bind_params, init_params, model_forward, ModelParams, ModelSpec, Variant};
use crate::data::{
    depth_average, fit_stats, inverse_standardize, make_windows, split_by_depth, standardize,
    SeriesFrame, StandardizerStats, WindowSet,
};
use crate::error::{Error, Result};
use crate::noise::{inject, NoiseKind, NoiseSpec};
use crate::numerics::{AdamState, Graph, NodeId, Tensor};
use crate::wavelet::{band_split, FilterBank};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LossKind {
    Mae,
}

/// Training hyperparameters; defaults mirror the benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub sequence_length: usize,
    /// Stride between training windows; 1 = fully overlapping.
    pub window_stride: usize,
    pub max_epochs: usize,
    pub stop_delta: f64,
    /// Seed for minibatch shuffling (combined with the model seed).
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Mae,
            learning_rate: 0.001,
            batch_size: 64,
            sequence_length: 40,
            window_stride: 1,
            max_epochs: 200,
            stop_delta: 0.001,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Band {
    Full,
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Condition {
    Clean,
    Gaussian { alpha: f64 },
    Impulse { alpha: f64 },
}

impl Condition {
    pub fn label(&self) -> String {
        match self {
            Condition::Clean => "CLEAN".into(),
            Condition::Gaussian { alpha } => format!("GAUSSIAN_{alpha}"),
            Condition::Impulse { alpha } => format!("IMPULSE_{alpha}"),
        }
    }

    pub fn from_noise(spec: &NoiseSpec) -> Self {
        match spec.kind {
            NoiseKind::Gaussian => Condition::Gaussian { alpha: spec.alpha },
            NoiseKind::Impulse => Condition::Impulse { alpha: spec.alpha },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub band: Band,
    pub condition: Condition,
    #[serde(flatten)]
    pub metrics: Metrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training_loss_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction_seconds: Option<f64>,
}

/// `R^2 = 1 - SS_res / SS_tot`; rejects constant targets.
pub fn metrics(pred: &[f64], target: &[f64]) -> Result<Metrics> {
    if pred.len() != target.len() || pred.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "metrics: need equal lengths >= 2, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.iter().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metrics input".into()));
    }
    let n = pred.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let ss_tot: f64 = target.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidArgument(
            "metrics: constant target, R^2 undefined".into(),
        ));
    }
    let ss_res: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    let mae = pred
        .iter()
        .zip(target)
        .map(|(p, y)| (p - y).abs())
        .sum::<f64>()
        / n;
    let mse = ss_res / n;
    Ok(Metrics {
        r2: 1.0 - ss_res / ss_tot,
        mae,
        rmse: mse.sqrt(),
        mse,
    })
}

/// Metrics per frequency band: both series are band-split with identical
/// settings and scored per band.
pub fn band_metrics(
    pred: &[f64],
    target: &[f64],
    bank: &FilterBank,
    levels: usize,
) -> Result<(Metrics, Metrics)> {
    let (pl, ph) = band_split(pred, bank, levels)?;
    let (tl, th) = band_split(target, bank, levels)?;
    Ok((metrics(&pl, &tl)?, metrics(&ph, &th)?))
}

/// One well prepared for the benchmark: standardized frame, the stats that
/// produced it (fitted on training rows only), and the depth-ordered split.
#[derive(Debug, Clone)]
pub struct PreparedWell {
    pub name: String,
    pub frame_std: SeriesFrame,
    pub stats: StandardizerStats,
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkData {
    pub wells: Vec<PreparedWell>,
    pub feature_count: usize,
}

/// Split each well by depth, fit standardizer stats on its training rows,
/// and standardize the whole well with them.
pub fn prepare_wells(frames: &[SeriesFrame], seq_len: usize) -> Result<BenchmarkData> {
    if frames.is_empty() {
        return Err(Error::InvalidArgument("prepare_wells: no wells".into()));
    }
    let feature_count = frames[0].feature_names().len();
    let mut wells = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        if frame.feature_names().len() != feature_count {
            return Err(Error::InvalidArgument(
                "wells disagree on feature channels".into(),
            ));
        }
        let (train, val, test) = split_by_depth(frame, seq_len)?;
        let stats = fit_stats(frame, train.clone())?;
        let frame_std = standardize(frame, &stats)?;
        wells.push(PreparedWell {
            name: format!("well-{:02}", i + 1),
            frame_std,
            stats,
            train,
            val,
            test,
        });
    }
    Ok(BenchmarkData {
        wells,
        feature_count,
    })
}

fn batch_tensor(ws: &WindowSet, idx: &[usize]) -> Result<(Tensor, Tensor)> {
    let b = idx.len();
    let s = ws.seq_len;
    let f = ws.feature_names.len();
    let mut x = Vec::with_capacity(b * s * f);
    let mut y = Vec::with_capacity(b * s);
    for &i in idx {
        x.extend_from_slice(&ws.windows[i].input);
        y.extend_from_slice(&ws.windows[i].target);
    }
    Ok((
        Tensor::new(vec![b, s, f], x)?,
        Tensor::new(vec![b, s], y)?,
    ))
}

/// Mean absolute error between per-timestep `[B,1]` predictions and a
/// `[B,S]` target tensor, as a scalar graph node.
fn mae_loss(g: &mut Graph, preds: &[NodeId], targets: &Tensor) -> Result<NodeId> {
    let (b, s) = targets.dims2()?;
    if preds.len() != s {
        return Err(Error::ShapeMismatch {
            op: "mae_loss".into(),
            detail: format!("{} prediction steps vs {} target steps", preds.len(), s),
        });
    }
    let mut acc: Option<NodeId> = None;
    for (t, &p) in preds.iter().enumerate() {
        let col: Vec<f64> = (0..b).map(|bi| targets.data[bi * s + t]).collect();
        let y = g.constant_from(b, 1, col)?;
        let d = g.sub(p, y)?;
        let a = g.abs(d);
        let m = g.mean_all(a);
        acc = Some(match acc {
            None => m,
            Some(prev) => g.add(prev, m)?,
        });
    }
    Ok(g.mul_scalar(acc.unwrap(), 1.0 / s as f64))
}

fn forward_predictions(
    spec: &ModelSpec,
    params: &ModelParams,
    x: &Tensor,
) -> Result<Vec<Vec<f64>>> {
    let mut g = Graph::new();
    let bound = bind_params(&mut g, params)?;
    let preds = model_forward(&mut g, spec, &bound, x)?;
    let b = x.shape[0];
    let s = x.shape[1];
    let mut out = vec![Vec::with_capacity(s); b];
    for &p in &preds {
        let v = g.value(p);
        for (bi, seq) in out.iter_mut().enumerate() {
            seq.push(v[bi]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_r2: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub trace: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub training_loss_final: f64,
    pub training_seconds: f64,
}

fn r2_only(pred: &[f64], target: &[f64]) -> Result<f64> {
    Ok(metrics(pred, target)?.r2)
}

/// Minibatch Adam on MAE with the stop rule
/// `|loss_t - loss_{t-1}| < stop_delta`; parameters from the epoch with the
/// best validation R^2 are returned.
pub fn train(spec: &ModelSpec, cfg: &TrainConfig, data: &BenchmarkData) -> Result<TrainOutcome> {
    let start = Instant::now();
    let s = cfg.sequence_length;
    let mut train_ws: Option<WindowSet> = None;
    let mut val_ws: Option<WindowSet> = None;
    for w in &data.wells {
        let tr = make_windows(&w.frame_std, w.train.clone(), s, cfg.window_stride)?;
        let va = make_windows(&w.frame_std, w.val.clone(), s, 1)?;
        match (&mut train_ws, &mut val_ws) {
            (None, None) => {
                train_ws = Some(tr);
                val_ws = Some(va);
            }
            (Some(t), Some(v)) => {
                t.windows.extend(tr.windows);
                v.windows.extend(va.windows);
            }
            _ => unreachable!(),
        }
    }
    let train_ws = train_ws.unwrap();
    let val_ws = val_ws.unwrap();
    let (val_x, val_y) = batch_tensor(&val_ws, &(0..val_ws.windows.len()).collect::<Vec<_>>())?;

    let mut params = init_params(spec)?;
    let paths: Vec<String> = params.entries.keys().cloned().collect();
    let tensor_vec = |p: &ModelParams| -> Vec<Tensor> { p.entries.values().cloned().collect() };
    let mut adam = AdamState::new(&tensor_vec(&params), cfg.learning_rate);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ spec.seed.rotate_left(17));
    let mut order: Vec<usize> = (0..train_ws.windows.len()).collect();

    let mut trace = Vec::new();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut prev_loss: Option<f64> = None;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_samples = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = batch_tensor(&train_ws, chunk)?;
            let mut g = Graph::new();
            let bound = bind_params(&mut g, &params)?;
            let preds = model_forward(&mut g, spec, &bound, &x)?;
            let loss = mae_loss(&mut g, &preds, &y)?;
            let loss_val = g.value(loss)[0];
            if !loss_val.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_idx,
                });
            }
            // weight by batch size so the epoch loss is the plain mean
            // over samples, independent of shuffle grouping
            epoch_loss += loss_val * chunk.len() as f64;
            epoch_samples += chunk.len();
            if cfg.learning_rate != 0.0 {
                g.backward(loss)?;
                let mut tensors = tensor_vec(&params);
                for (tensor, path) in tensors.iter_mut().zip(&paths) {
                    g.write_grad(bound.nodes[path], tensor);
                }
                adam.step(&mut tensors)?;
                for (path, tensor) in paths.iter().zip(tensors) {
                    params.entries.insert(path.clone(), tensor);
                }
            }
        }
        let epoch_loss = epoch_loss / epoch_samples as f64;

        let val_pred = forward_predictions(spec, &params, &val_x)?;
        let flat_pred: Vec<f64> = val_pred.into_iter().flatten().collect();
        let val_r2 = r2_only(&flat_pred, &val_y.data)?;
        trace.push(EpochRecord {
            epoch,
            train_loss: epoch_loss,
            val_r2,
        });
        if best.as_ref().map_or(true, |(r, _, _)| val_r2 > *r) {
            best = Some((val_r2, epoch, params.clone()));
        }
        if let Some(prev) = prev_loss {
            if (epoch_loss - prev).abs() < cfg.stop_delta {
                break;
            }
        }
        prev_loss = Some(epoch_loss);
    }
    let (_, best_epoch, best_params) = best.unwrap();
    Ok(TrainOutcome {
        params: best_params,
        training_loss_final: trace.last().unwrap().train_loss,
        best_epoch,
        trace,
        training_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Depth-averaged standardized predictions over a row range of one well,
/// optionally with noise injected into the input channels first.
pub fn predict_series(
    spec: &ModelSpec,
    params: &ModelParams,
    well: &PreparedWell,
    rows: Range<usize>,
    seq_len: usize,
    batch_size: usize,
    noise: Option<&NoiseSpec>,
) -> Result<Vec<f64>> {
    let frame = match noise {
        None => well.frame_std.clone(),
        Some(nspec) => inject(&well.frame_std, nspec)?.frame,
    };
    let ws = make_windows(&frame, rows.clone(), seq_len, 1)?;
    let mut preds = Vec::with_capacity(ws.windows.len());
    let indices: Vec<usize> = (0..ws.windows.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let (x, _) = batch_tensor(&ws, chunk)?;
        let out = forward_predictions(spec, params, &x)?;
        for (&i, seq) in chunk.iter().zip(out) {
            preds.push((ws.windows[i].origin_index, seq));
        }
    }
    depth_average(&preds, rows)
}

/// Full evaluation of a trained model on the pooled test split:
/// depth-averaged, inverse-standardized predictions scored FULL plus
/// per-band. Test ranges are trimmed to a multiple of `2^levels` so the
/// same rows feed all three bands.
pub fn evaluate(
    spec: &ModelSpec,
    params: &ModelParams,
    data: &BenchmarkData,
    cfg: &TrainConfig,
    condition: Condition,
    noise: Option<&NoiseSpec>,
    bank: &FilterBank,
    levels: usize,
) -> Result<Vec<MetricsReport>> {
    let start = Instant::now();
    let block = 1usize << levels;
    let mut pred_all = Vec::new();
    let mut truth_all = Vec::new();
    let mut pred_low = Vec::new();
    let mut truth_low = Vec::new();
    let mut pred_high = Vec::new();
    let mut truth_high = Vec::new();
    for well in &data.wells {
        let len = well.test.len() / block * block;
        if len < cfg.sequence_length {
            return Err(Error::InvalidArgument(format!(
                "test split of {} ({} usable rows) cannot hold a window of {}",
                well.name,
                len,
                cfg.sequence_length
            )));
        }
        let rows = well.test.start..well.test.start + len;
        let pred_std = predict_series(
            spec,
            params,
            well,
            rows.clone(),
            cfg.sequence_length,
            cfg.batch_size,
            noise,
        )?;
        let target_name = well
            .frame_std
            .target_name
            .clone()
            .ok_or_else(|| Error::InvalidArgument("well has no target".into()))?;
        let truth_std = &well.frame_std.channel(&target_name)?.values[rows.clone()];
        let pred = inverse_standardize(&pred_std, &well.stats, &target_name)?;
        let truth = inverse_standardize(truth_std, &well.stats, &target_name)?;
        let (pl, ph) = band_split(&pred, bank, levels)?;
        let (tl, th) = band_split(&truth, bank, levels)?;
        pred_all.extend(pred);
        truth_all.extend(truth);
        pred_low.extend(pl);
        truth_low.extend(tl);
        pred_high.extend(ph);
        truth_high.extend(th);
    }
    let secs = start.elapsed().as_secs_f64();
    let report = |band, m: Metrics| MetricsReport {
        band,
        condition,
        metrics: m,
        training_loss_final: None,
        training_seconds: None,
        prediction_seconds: Some(secs),
    };
    Ok(vec![
        report(Band::Full, metrics(&pred_all, &truth_all)?),
        report(Band::Low, metrics(&pred_low, &truth_low)?),
        report(Band::High, metrics(&pred_high, &truth_high)?),
    ])
}

/// One benchmark arm: a model variant trained from one seed.
#[derive(Debug, Clone)]
pub struct BenchArm {
    pub spec: ModelSpec,
    pub outcome: std::result::Result<TrainOutcome, String>,
}

/// Benchmark-wide model settings applied to every variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub hidden_size: usize,
    pub num_heads: usize,
    pub wavelet_levels: usize,
    pub wavelet_bank: String,
    pub seeds: Vec<u64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            hidden_size: 12,
            num_heads: 4,
            wavelet_levels: 2,
            wavelet_bank: "db4".into(),
            seeds: vec![1, 2, 3],
        }
    }
}

impl BenchConfig {
    pub fn spec(&self, variant: Variant, features: usize, seed: u64) -> ModelSpec {
        let mut spec = ModelSpec::new(variant, features, self.hidden_size, seed);
        spec.num_heads = self.num_heads;
        spec.wavelet_levels = self.wavelet_levels;
        spec.wavelet_bank = self.wavelet_bank.clone();
        spec
    }
}

fn worker_count() -> usize {
    std::env::var("FREQSTREAM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Train every (variant, seed) arm; per-arm failures are recorded, not
/// propagated. Arms run on up to FREQSTREAM_THREADS workers.
pub fn train_arms(
    data: &BenchmarkData,
    cfg: &TrainConfig,
    bench: &BenchConfig,
    variants: &[Variant],
) -> Result<Vec<BenchArm>> {
    let specs: Vec<ModelSpec> = variants
        .iter()
        .flat_map(|&v| {
            bench
                .seeds
                .iter()
                .map(move |&s| bench.spec(v, data.feature_count, s))
        })
        .collect();
    let workers = worker_count().min(specs.len().max(1));
    if workers <= 1 {
        return Ok(specs
            .into_iter()
            .map(|spec| run_arm(spec, cfg, data))
            .collect());
    }
    let mut results: Vec<Option<BenchArm>> = (0..specs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (w, chunk) in assign_round_robin(specs.len(), workers).into_iter().enumerate() {
            let specs = &specs;
            handles.push((
                w,
                scope.spawn(move || {
                    chunk
                        .into_iter()
                        .map(|i| (i, run_arm(specs[i].clone(), cfg, data)))
                        .collect::<Vec<_>>()
                }),
            ));
        }
        for (_, h) in handles {
            for (i, arm) in h.join().expect("benchmark worker panicked") {
                results[i] = Some(arm);
            }
        }
    });
    Ok(results.into_iter().map(|a| a.unwrap()).collect())
}

fn assign_round_robin(n: usize, workers: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); workers];
    for i in 0..n {
        out[i % workers].push(i);
    }
    out
}

fn run_arm(spec: ModelSpec, cfg: &TrainConfig, data: &BenchmarkData) -> BenchArm {
    let outcome = train(&spec, cfg, data).map_err(|e| e.to_string());
    BenchArm { spec, outcome }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub reports: Vec<MetricsReport>,
}

/// Score already-trained arms on the clean test split, FULL/LOW/HIGH.
pub fn ablation_from_arms(
    arms: &[BenchArm],
    data: &BenchmarkData,
    cfg: &TrainConfig,
    bank: &FilterBank,
    levels: usize,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(arms.len());
    for arm in arms {
        let row = match &arm.outcome {
            Err(e) => AblationRow {
                model: arm.spec.variant.name().into(),
                seed: arm.spec.seed,
                error: Some(e.clone()),
                reports: Vec::new(),
            },
            Ok(out) => {
                let mut reports =
                    evaluate(&arm.spec, &out.params, data, cfg, Condition::Clean, None, bank, levels)?;
                for r in &mut reports {
                    r.training_loss_final = Some(out.training_loss_final);
                    r.training_seconds = Some(out.training_seconds);
                }
                AblationRow {
                    model: arm.spec.variant.name().into(),
                    seed: arm.spec.seed,
                    error: None,
                    reports,
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Train all six variants over the configured seeds and score them.
pub fn run_ablation(
    data: &BenchmarkData,
    cfg: &TrainConfig,
    bench: &BenchConfig,
) -> Result<Vec<AblationRow>> {
    let arms = train_arms(data, cfg, bench, &Variant::ALL)?;
    let bank = FilterBank::by_name(&bench.wavelet_bank)?;
    ablation_from_arms(&arms, data, cfg, &bank, bench.wavelet_levels)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseRow {
    pub model: String,
    pub seed: u64,
    pub condition: Condition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub reports: Vec<MetricsReport>,
    /// Clean full-band R^2 minus this condition's full-band R^2.
    pub delta_r2: f64,
}

/// Score trained arms under CLEAN plus each noise condition; noise goes
/// into test inputs only, labels stay clean.
pub fn noise_bench_from_arms(
    arms: &[BenchArm],
    data: &BenchmarkData,
    cfg: &TrainConfig,
    bench: &BenchConfig,
    specs: &[NoiseSpec],
) -> Result<Vec<NoiseRow>> {
    let bank = FilterBank::by_name(&bench.wavelet_bank)?;
    let levels = bench.wavelet_levels;
    let mut rows = Vec::new();
    for arm in arms {
        let model = arm.spec.variant.name().to_string();
        let seed = arm.spec.seed;
        let out = match &arm.outcome {
            Err(e) => {
                rows.push(NoiseRow {
                    model,
                    seed,
                    condition: Condition::Clean,
                    error: Some(e.clone()),
                    reports: Vec::new(),
                    delta_r2: f64::NAN,
                });
                continue;
            }
            Ok(out) => out,
        };
        let clean =
            evaluate(&arm.spec, &out.params, data, cfg, Condition::Clean, None, &bank, levels)?;
        let clean_r2 = clean[0].metrics.r2;
        rows.push(NoiseRow {
            model: model.clone(),
            seed,
            condition: Condition::Clean,
            error: None,
            reports: clean,
            delta_r2: 0.0,
        });
        for nspec in specs {
            let condition = Condition::from_noise(nspec);
            let reports = evaluate(
                &arm.spec,
                &out.params,
                data,
                cfg,
                condition,
                Some(nspec),
                &bank,
                levels,
            )?;
            let delta_r2 = clean_r2 - reports[0].metrics.r2;
            rows.push(NoiseRow {
                model: model.clone(),
                seed,
                condition,
                error: None,
                reports,
                delta_r2,
            });
        }
    }
    Ok(rows)
}

/// Train the six variants and run the noise ladder on them.
pub fn run_noise_bench(
    data: &BenchmarkData,
    cfg: &TrainConfig,
    bench: &BenchConfig,
    specs: &[NoiseSpec],
) -> Result<Vec<NoiseRow>> {
    let arms = train_arms(data, cfg, bench, &Variant::ALL)?;
    noise_bench_from_arms(&arms, data, cfg, bench, specs)
}
