//! Experiment configuration documents, provenance hashing, and result
//! emission as JSON, CSV flat tables, and static SVG plots.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blocks::Variant;
use crate::error::{Error, Result};
use crate::eval::{AblationRow, BenchConfig, NoiseRow, TrainConfig};
use crate::noise::NoiseSpec;

/// Synthetic dataset parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub seed: u64,
    pub wells: usize,
    pub rows_per_well: usize,
    pub step_m: f64,
    pub tem_channels: usize,
    pub conv_channels: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            seed: 42,
            wells: 3,
            rows_per_well: 1000,
            step_m: 0.125,
            tem_channels: 35,
            conv_channels: 4,
        }
    }
}

impl DatasetSpec {
    pub fn depth_m(&self) -> f64 {
        self.rows_per_well as f64 * self.step_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitFormat {
    Json,
    Csv,
    Svg,
}

/// Top-level experiment document driving the benchmark commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub variants: Vec<Variant>,
    pub train: TrainConfig,
    pub bench: BenchConfig,
    #[serde(default)]
    pub noise: Vec<NoiseSpec>,
    #[serde(default = "default_emit")]
    pub emit: Vec<EmitFormat>,
}

fn default_emit() -> Vec<EmitFormat> {
    vec![EmitFormat::Json, EmitFormat::Csv, EmitFormat::Svg]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::default(),
            variants: Variant::ALL.to_vec(),
            train: TrainConfig::default(),
            bench: BenchConfig::default(),
            noise: vec![
                NoiseSpec::gaussian(0.1, 1000),
                NoiseSpec::gaussian(0.2, 1000),
                NoiseSpec::impulse(0.1, 1000),
                NoiseSpec::impulse(0.2, 1000),
            ],
            emit: default_emit(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::InvalidArgument("no model variants configured".into()));
        }
        if self.bench.seeds.is_empty() {
            return Err(Error::InvalidArgument("no seeds configured".into()));
        }
        if self.dataset.rows_per_well == 0 || self.dataset.wells == 0 {
            return Err(Error::InvalidArgument(
                "dataset needs at least one well and one row".into(),
            ));
        }
        Ok(())
    }
}

/// Hex SHA-256 of the config's canonical JSON, embedded in every output
/// document for provenance.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Wrapper giving every emitted JSON document the same provenance header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportDoc<T> {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub rows: T,
}

pub fn wrap_report<T>(cfg: &ExperimentConfig, rows: T) -> ReportDoc<T> {
    ReportDoc {
        config_hash: config_hash(cfg),
        seeds: cfg.bench.seeds.clone(),
        rows,
    }
}

/// Flat CSV rendering of the ablation table.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("model,seed,band,r2,mae,rmse,mse,training_seconds,error\n");
    for row in rows {
        if let Some(e) = &row.error {
            out.push_str(&format!(
                "{},{},,,,,,,\"{}\"\n",
                row.model,
                row.seed,
                e.replace('"', "'")
            ));
            continue;
        }
        for r in &row.reports {
            out.push_str(&format!(
                "{},{},{:?},{},{},{},{},{},\n",
                row.model,
                row.seed,
                r.band,
                r.metrics.r2,
                r.metrics.mae,
                r.metrics.rmse,
                r.metrics.mse,
                r.training_seconds.unwrap_or(f64::NAN),
            ));
        }
    }
    out
}

/// Flat CSV rendering of the noise-bench table.
pub fn noise_csv(rows: &[NoiseRow]) -> String {
    let mut out = String::from("model,seed,condition,band,r2,mae,rmse,mse,delta_r2,error\n");
    for row in rows {
        if let Some(e) = &row.error {
            out.push_str(&format!(
                "{},{},{},,,,,,,\"{}\"\n",
                row.model,
                row.seed,
                row.condition.label(),
                e.replace('"', "'")
            ));
            continue;
        }
        for r in &row.reports {
            out.push_str(&format!(
                "{},{},{},{:?},{},{},{},{},{},\n",
                row.model,
                row.seed,
                row.condition.label(),
                r.band,
                r.metrics.r2,
                r.metrics.mae,
                r.metrics.rmse,
                r.metrics.mse,
                row.delta_r2,
            ));
        }
    }
    out
}

/// Minimal static SVG line plot of one or more equally-long series.
pub fn svg_line_plot(title: &str, series: &[(&str, &[f64])]) -> Result<String> {
    if series.is_empty() || series.iter().any(|(_, s)| s.len() < 2) {
        return Err(Error::InvalidArgument(
            "svg_line_plot: need at least one series of length >= 2".into(),
        ));
    }
    let n = series[0].1.len();
    if series.iter().any(|(_, s)| s.len() != n) {
        return Err(Error::InvalidArgument("svg_line_plot: unequal series lengths".into()));
    }
    let (w, h, pad) = (900.0f64, 360.0f64, 45.0f64);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, s) in series {
        for &v in *s {
            if !v.is_finite() {
                return Err(Error::NonFinite("svg_line_plot input".into()));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi == lo {
        hi = lo + 1.0;
    }
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n\
         <line x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{}\" stroke=\"black\"/>\n",
        w / 2.0,
        xml_escape(title),
        h - pad,
        w - pad,
        h - pad,
        h - pad,
    );
    for (k, (name, s)) in series.iter().enumerate() {
        let color = colors[k % colors.len()];
        let points: Vec<String> = s
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let x = pad + (w - 2.0 * pad) * i as f64 / (n - 1) as f64;
                let y = h - pad - (h - 2.0 * pad) * (v - lo) / (hi - lo);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            points.join(" "),
            w - pad + 4.0,
            pad + 16.0 * k as f64,
            xml_escape(name),
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_roundtrip() {
        let cfg = ExperimentConfig::default();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn config_hash_stable_and_sensitive() {
        let cfg = ExperimentConfig::default();
        assert_eq!(config_hash(&cfg), config_hash(&cfg));
        assert_eq!(config_hash(&cfg).len(), 64);
        let mut other = cfg.clone();
        other.dataset.seed += 1;
        assert_ne!(config_hash(&cfg), config_hash(&other));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        cfg.variants.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.rows_per_well = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn svg_plot_structure() {
        let a: Vec<f64> = (0..50).map(|i| (i as f64 * 0.2).sin()).collect();
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.2).cos()).collect();
        let svg = svg_line_plot("demo", &[("truth", &a), ("pred", &b)]).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("truth") && svg.contains("pred"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn svg_rejects_bad_input() {
        assert!(svg_line_plot("x", &[]).is_err());
        assert!(svg_line_plot("x", &[("s", &[1.0])]).is_err());
        assert!(svg_line_plot("x", &[("s", &[1.0, f64::NAN])]).is_err());
    }
}
