//! Batch benchmark CLI: dataset generation, training, prediction,
//! evaluation, ablation, and noise-robustness tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use freqstream::blocks::Checkpoint;
use freqstream::data::{
    generate_synthetic_wells, inverse_standardize, read_csv, write_csv, SeriesFrame,
};
use freqstream::eval::{
    ablation_from_arms, band_metrics, metrics, noise_bench_from_arms, predict_series,
    prepare_wells, train, train_arms, Band, BenchArm, BenchmarkData, Condition, MetricsReport,
};
use freqstream::report::{
    ablation_csv, config_hash, noise_csv, svg_line_plot, wrap_report, EmitFormat,
    ExperimentConfig,
};
use freqstream::wavelet::FilterBank;

#[derive(Parser)]
#[command(name = "freqstream", version, about = "Frequency-aware LSTM well-log benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic well dataset as CSVs plus a JSON manifest.
    GenData(GenDataArgs),
    /// Train the configured model variants; write checkpoints and loss traces.
    Train(ConfigArgs),
    /// Predict a target track with a trained checkpoint.
    Predict(PredictArgs),
    /// Score a prediction CSV against a truth CSV.
    Evaluate(EvaluateArgs),
    /// Run the six-variant ablation benchmark.
    Ablate(ConfigArgs),
    /// Run the noise-robustness benchmark.
    NoiseBench(ConfigArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    wells: usize,
    /// Rows per well.
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    /// Depth step in metres.
    #[arg(long, default_value_t = 0.125)]
    step: f64,
    #[arg(long, default_value_t = 35)]
    tem_channels: usize,
    #[arg(long, default_value_t = 4)]
    conv_channels: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config JSON; omit for the built-in default.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Checkpoint JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Input well CSV (DEPT first, target column last).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 40)]
    seq_len: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// Output prediction CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Prediction CSV (DEPT + one value column).
    #[arg(long)]
    pred: PathBuf,
    /// Truth CSV (DEPT + one value column, or a full well CSV with RT).
    #[arg(long)]
    truth: PathBuf,
    /// Also emit LOW/HIGH band rows.
    #[arg(long)]
    bands: bool,
    #[arg(long, default_value = "db4")]
    bank: String,
    #[arg(long, default_value_t = 2)]
    levels: usize,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

// exit codes: 0 success, 1 runtime failure, 2 usage/config error
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<freqstream::Error> for CliError {
    fn from(e: freqstream::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("bad JSON: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::NoiseBench(a) => cmd_noise_bench(a),
    }
}

fn gen_data(a: GenDataArgs) -> Result<(), CliError> {
    if a.rows == 0 {
        return Err(CliError::Usage("--rows must be at least 1".into()));
    }
    if a.wells == 0 {
        return Err(CliError::Usage("--wells must be at least 1".into()));
    }
    std::fs::create_dir_all(&a.out)?;
    let depth_m = a.rows as f64 * a.step;
    let wells = generate_synthetic_wells(a.seed, a.wells, depth_m, a.step, a.tem_channels, a.conv_channels)?;
    let mut manifest_wells = Vec::new();
    for (i, w) in wells.iter().enumerate() {
        let file = format!("well-{:02}.csv", i + 1);
        write_csv(w, &a.out.join(&file))?;
        manifest_wells.push(serde_json::json!({
            "name": format!("well-{:02}", i + 1),
            "file": file,
            "rows": w.rows(),
            "depth_start": w.depth_start,
            "depth_step": w.depth_step,
        }));
    }
    let manifest = serde_json::json!({
        "seed": a.seed,
        "wells": manifest_wells,
        "channels": wells[0].channels.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
        "target": "RT",
    });
    std::fs::write(
        a.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    println!("wrote {} wells to {}", wells.len(), a.out.display());
    Ok(())
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = match path {
        None => ExperimentConfig::default(),
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn build_dataset(cfg: &ExperimentConfig) -> Result<(Vec<SeriesFrame>, BenchmarkData), CliError> {
    let d = &cfg.dataset;
    let frames = generate_synthetic_wells(
        d.seed,
        d.wells,
        d.depth_m(),
        d.step_m,
        d.tem_channels,
        d.conv_channels,
    )?;
    let data = prepare_wells(&frames, cfg.train.sequence_length)?;
    Ok((frames, data))
}

fn cmd_train(a: ConfigArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    std::fs::create_dir_all(&a.out)?;
    let (_, data) = build_dataset(&cfg)?;
    for &variant in &cfg.variants {
        for &seed in &cfg.bench.seeds {
            let spec = cfg.bench.spec(variant, data.feature_count, seed);
            let outcome = train(&spec, &cfg.train, &data)?;
            let ckpt = Checkpoint::from_params(&spec, &outcome.params);
            let stem = format!("{}-seed{}", variant.name(), seed);
            std::fs::write(
                a.out.join(format!("checkpoint-{stem}.json")),
                serde_json::to_string(&ckpt)? + "\n",
            )?;
            let mut trace = String::from("epoch,train_loss,val_r2\n");
            for r in &outcome.trace {
                trace.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_r2));
            }
            std::fs::write(a.out.join(format!("trace-{stem}.csv")), trace)?;
            println!(
                "{stem}: best epoch {} of {}, final loss {:.6}",
                outcome.best_epoch,
                outcome.trace.len(),
                outcome.training_loss_final
            );
        }
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<(), CliError> {
    if a.seq_len == 0 {
        return Err(CliError::Usage("--seq-len must be at least 1".into()));
    }
    let ckpt: Checkpoint = serde_json::from_str(&std::fs::read_to_string(&a.model)?)?;
    let (spec, params) = ckpt.into_params()?;
    let frame = read_csv(&a.data, Some("RT"))?;
    let n = frame.rows();
    if n < a.seq_len {
        return Err(CliError::Usage(format!(
            "input has {n} rows, fewer than --seq-len {}",
            a.seq_len
        )));
    }
    // standalone prediction: standardize with stats over the whole frame
    let stats = freqstream::data::fit_stats(&frame, 0..n)?;
    let well = freqstream::eval::PreparedWell {
        name: "input".into(),
        frame_std: freqstream::data::standardize(&frame, &stats)?,
        stats,
        train: 0..n,
        val: 0..n,
        test: 0..n,
    };
    let well = &well;
    if spec.input_features != frame.feature_names().len() {
        return Err(CliError::Usage(format!(
            "checkpoint expects {} input channels, data has {}",
            spec.input_features,
            frame.feature_names().len()
        )));
    }
    let rows = 0..n;
    let pred_std = predict_series(&spec, &params, well, rows.clone(), a.seq_len, a.batch_size, None)?;
    let pred = inverse_standardize(&pred_std, &well.stats, "RT")?;
    let mut out = String::from("DEPT,RT_PRED\n");
    for (i, v) in rows.zip(&pred) {
        out.push_str(&format!("{},{}\n", frame.depth_of(i), v));
    }
    std::fs::write(&a.out, out)?;
    println!("wrote {} predicted rows to {}", pred.len(), a.out.display());
    Ok(())
}

fn read_value_column(path: &Path) -> Result<Vec<f64>, CliError> {
    let frame = read_csv(path, None)?;
    let channel = frame
        .channel("RT_PRED")
        .or_else(|_| frame.channel("RT"))
        .or_else(|_| {
            frame
                .channels
                .last()
                .ok_or_else(|| freqstream::Error::InvalidArgument("empty CSV".into()))
        })?;
    Ok(channel.values.clone())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let pred = read_value_column(&a.pred)?;
    let truth = read_value_column(&a.truth)?;
    let mut reports = vec![MetricsReport {
        band: Band::Full,
        condition: Condition::Clean,
        metrics: metrics(&pred, &truth)?,
        training_loss_final: None,
        training_seconds: None,
        prediction_seconds: None,
    }];
    if a.bands {
        let bank = FilterBank::by_name(&a.bank)?;
        let (lo, hi) = band_metrics(&pred, &truth, &bank, a.levels)?;
        for (band, m) in [(Band::Low, lo), (Band::High, hi)] {
            reports.push(MetricsReport {
                band,
                condition: Condition::Clean,
                metrics: m,
                training_loss_final: None,
                training_seconds: None,
                prediction_seconds: None,
            });
        }
    }
    let json = serde_json::to_string_pretty(&reports)? + "\n";
    match &a.out {
        None => print!("{json}"),
        Some(p) => std::fs::write(p, json)?,
    }
    Ok(())
}

fn emit_prediction_plots(
    cfg: &ExperimentConfig,
    arms: &[BenchArm],
    data: &BenchmarkData,
    out: &Path,
) -> Result<(), CliError> {
    // one figure per well: truth vs each variant's first-seed prediction
    // on the test split
    let first_seed = cfg.bench.seeds[0];
    for well in &data.wells {
        let rows = well.test.clone();
        let truth_std = &well.frame_std.channel("RT")?.values[rows.clone()];
        let truth = inverse_standardize(truth_std, &well.stats, "RT")?;
        let mut named: Vec<(String, Vec<f64>)> = vec![("truth".into(), truth)];
        for arm in arms.iter().filter(|a| a.spec.seed == first_seed) {
            if let Ok(outcome) = &arm.outcome {
                let pred_std = predict_series(
                    &arm.spec,
                    &outcome.params,
                    well,
                    rows.clone(),
                    cfg.train.sequence_length,
                    cfg.train.batch_size,
                    None,
                )?;
                named.push((
                    arm.spec.variant.name().into(),
                    inverse_standardize(&pred_std, &well.stats, "RT")?,
                ));
            }
        }
        let series: Vec<(&str, &[f64])> = named
            .iter()
            .map(|(n, s)| (n.as_str(), s.as_slice()))
            .collect();
        let svg = svg_line_plot(&format!("{} test-split prediction", well.name), &series)?;
        std::fs::write(out.join(format!("predictions-{}.svg", well.name)), svg)?;
    }
    Ok(())
}

fn cmd_ablate(a: ConfigArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    std::fs::create_dir_all(&a.out)?;
    let (_, data) = build_dataset(&cfg)?;
    let arms = train_arms(&data, &cfg.train, &cfg.bench, &cfg.variants)?;
    let bank = FilterBank::by_name(&cfg.bench.wavelet_bank)?;
    let rows = ablation_from_arms(&arms, &data, &cfg.train, &bank, cfg.bench.wavelet_levels)?;
    let any_failed = rows.iter().any(|r| r.error.is_some());
    if cfg.emit.contains(&EmitFormat::Json) {
        let doc = wrap_report(&cfg, &rows);
        std::fs::write(a.out.join("ablation.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    }
    if cfg.emit.contains(&EmitFormat::Csv) {
        std::fs::write(a.out.join("ablation.csv"), ablation_csv(&rows))?;
    }
    if cfg.emit.contains(&EmitFormat::Svg) {
        emit_prediction_plots(&cfg, &arms, &data, &a.out)?;
    }
    println!(
        "ablation: {} arms, config {}",
        rows.len(),
        &config_hash(&cfg)[..12]
    );
    if any_failed {
        return Err(CliError::Runtime("one or more ablation arms failed; see table".into()));
    }
    Ok(())
}

fn cmd_noise_bench(a: ConfigArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    if cfg.noise.is_empty() {
        return Err(CliError::Usage("noise-bench needs at least one noise spec".into()));
    }
    std::fs::create_dir_all(&a.out)?;
    let (_, data) = build_dataset(&cfg)?;
    let arms = train_arms(&data, &cfg.train, &cfg.bench, &cfg.variants)?;
    let rows = noise_bench_from_arms(&arms, &data, &cfg.train, &cfg.bench, &cfg.noise)?;
    let any_failed = rows.iter().any(|r| r.error.is_some());
    if cfg.emit.contains(&EmitFormat::Json) {
        let doc = wrap_report(&cfg, &rows);
        std::fs::write(
            a.out.join("noise_bench.json"),
            serde_json::to_string_pretty(&doc)? + "\n",
        )?;
    }
    if cfg.emit.contains(&EmitFormat::Csv) {
        std::fs::write(a.out.join("noise_bench.csv"), noise_csv(&rows))?;
    }
    if cfg.emit.contains(&EmitFormat::Svg) {
        emit_prediction_plots(&cfg, &arms, &data, &a.out)?;
    }
    println!(
        "noise-bench: {} rows, config {}",
        rows.len(),
        &config_hash(&cfg)[..12]
    );
    if any_failed {
        return Err(CliError::Runtime("one or more arms failed; see table".into()));
    }
    Ok(())
}
