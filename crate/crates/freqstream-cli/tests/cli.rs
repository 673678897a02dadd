use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_freqstream"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

const TINY_CONFIG: &str = r#"{
  "dataset": {"seed": 5, "wells": 1, "rows_per_well": 240, "step_m": 0.125, "tem_channels": 6, "conv_channels": 2},
  "variants": ["LSTM", "FAL"],
  "train": {"loss": "MAE", "learning_rate": 0.003, "batch_size": 16, "sequence_length": 16, "window_stride": 8, "max_epochs": 3, "stop_delta": 0.0, "seed": 0},
  "bench": {"hidden_size": 8, "num_heads": 2, "wavelet_levels": 2, "wavelet_bank": "db4", "seeds": [1]},
  "noise": [{"kind": "GAUSSIAN", "alpha": 0.2, "seed": 9}],
  "emit": ["json", "csv", "svg"]
}"#;

#[test]
fn gen_data_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = bin()
            .args(["gen-data", "--seed", "7", "--wells", "2", "--rows", "60"])
            .arg("--out")
            .arg(dir.path().join(sub))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["well-01.csv", "well-02.csv", "manifest.json"] {
        assert_eq!(
            read(&dir.path().join("a").join(f)),
            read(&dir.path().join("b").join(f)),
            "{f} not byte-identical"
        );
    }
    let out = bin()
        .args(["gen-data", "--seed", "8", "--wells", "2", "--rows", "60"])
        .arg("--out")
        .arg(dir.path().join("c"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_ne!(
        read(&dir.path().join("a/well-01.csv")),
        read(&dir.path().join("c/well-01.csv"))
    );
}

#[test]
fn gen_data_zero_rows_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["gen-data", "--rows", "0"])
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--rows"));
}

#[test]
fn train_predict_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, TINY_CONFIG).unwrap();

    let ckpt_dir = dir.path().join("ckpt");
    let out = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&ckpt_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ckpt_dir.join("checkpoint-LSTM-seed1.json").exists());
    assert!(ckpt_dir.join("trace-FAL-seed1.csv").exists());

    // matching data for prediction
    let data_dir = dir.path().join("data");
    assert!(bin()
        .args([
            "gen-data", "--seed", "5", "--wells", "1", "--rows", "240",
            "--tem-channels", "6", "--conv-channels", "2",
        ])
        .arg("--out")
        .arg(&data_dir)
        .status()
        .unwrap()
        .success());

    let pred = dir.path().join("pred.csv");
    let out = bin()
        .args(["predict", "--seq-len", "16", "--model"])
        .arg(ckpt_dir.join("checkpoint-LSTM-seed1.json"))
        .arg("--data")
        .arg(data_dir.join("well-01.csv"))
        .arg("--out")
        .arg(&pred)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read(&pred).starts_with("DEPT,RT_PRED\n"));

    // scoring the truth against itself gives R^2 = 1
    let metrics_json = dir.path().join("metrics.json");
    let out = bin()
        .args(["evaluate", "--bands", "--pred"])
        .arg(data_dir.join("well-01.csv"))
        .arg("--truth")
        .arg(data_dir.join("well-01.csv"))
        .arg("--out")
        .arg(&metrics_json)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&read(&metrics_json)).unwrap();
    let rows = doc.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let bands: Vec<&str> = rows.iter().map(|r| r["band"].as_str().unwrap()).collect();
    assert_eq!(bands, ["FULL", "LOW", "HIGH"]);
    for r in rows {
        assert!((r["r2"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }

    // real predictions also score without error
    let out = bin()
        .args(["evaluate", "--pred"])
        .arg(&pred)
        .arg("--truth")
        .arg(data_dir.join("well-01.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc[0]["r2"].as_f64().unwrap() <= 1.0);
}

#[test]
fn corrupted_checkpoint_names_offending_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, TINY_CONFIG).unwrap();
    let ckpt_dir = dir.path().join("ckpt");
    assert!(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&ckpt_dir)
        .status()
        .unwrap()
        .success());
    let path = ckpt_dir.join("checkpoint-LSTM-seed1.json");
    let mut ckpt: serde_json::Value = serde_json::from_str(&read(&path)).unwrap();
    ckpt["params"].as_object_mut().unwrap().remove("lstm.w_forget");
    std::fs::write(&path, serde_json::to_string(&ckpt).unwrap()).unwrap();
    let data_dir = dir.path().join("data");
    assert!(bin()
        .args([
            "gen-data", "--seed", "5", "--wells", "1", "--rows", "240",
            "--tem-channels", "6", "--conv-channels", "2",
        ])
        .arg("--out")
        .arg(&data_dir)
        .status()
        .unwrap()
        .success());
    let out = bin()
        .args(["predict", "--seq-len", "16", "--model"])
        .arg(&path)
        .arg("--data")
        .arg(data_dir.join("well-01.csv"))
        .arg("--out")
        .arg(dir.path().join("pred.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("lstm.w_forget"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn strip_wall_times(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            map.remove("training_seconds");
            map.remove("prediction_seconds");
            for (_, child) in map.iter_mut() {
                strip_wall_times(child);
            }
        }
        serde_json::Value::Array(items) => {
            for item in items {
                strip_wall_times(item);
            }
        }
        _ => {}
    }
}

#[test]
fn ablate_and_noise_bench_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, TINY_CONFIG).unwrap();
    let mut docs = Vec::new();
    for sub in ["r1", "r2"] {
        let out_dir = dir.path().join(sub);
        let out = bin()
            .args(["ablate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join("ablation.csv").exists());
        assert!(out_dir.join("predictions-well-01.svg").exists());
        let mut doc: serde_json::Value =
            serde_json::from_str(&read(&out_dir.join("ablation.json"))).unwrap();
        strip_wall_times(&mut doc);
        docs.push(doc);
    }
    assert_eq!(docs[0], docs[1], "ablation JSON differs across identical runs");
    let rows = docs[0]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2); // two variants x one seed
    assert!(docs[0]["config_hash"].as_str().unwrap().len() == 64);

    let nb = dir.path().join("nb");
    let out = bin()
        .args(["noise-bench", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&nb)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&read(&nb.join("noise_bench.json"))).unwrap();
    // 2 variants x (clean + 1 condition)
    assert_eq!(doc["rows"].as_array().unwrap().len(), 4);
}
