//! Decimated Mallat wavelet analysis/synthesis with periodic boundary
//! handling, and the time-domain low/high band split used by the
//! frequency-aware models.
//!
//! Analysis correlates the signal with the analysis filters and keeps
//! every second output; synthesis is the transpose. For orthogonal banks
//! the transform matrix is orthogonal, so reconstruction is exact and
//! energy is preserved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-channel analysis/synthesis filter bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub h_plus: Vec<f64>,
    pub g_plus: Vec<f64>,
    pub name: String,
}

impl FilterBank {
    /// Build an orthogonal bank from its low-pass analysis filter via the
    /// quadrature-mirror relation `g(k) = (-1)^k h(L-1-k)`; synthesis
    /// filters equal the analysis filters (transpose reconstruction).
    fn orthogonal(name: &str, h: Vec<f64>) -> Self {
        let l = h.len();
        let g: Vec<f64> = (0..l)
            .map(|k| if k % 2 == 0 { h[l - 1 - k] } else { -h[l - 1 - k] })
            .collect();
        FilterBank {
            h_plus: h.clone(),
            g_plus: g.clone(),
            h,
            g,
            name: name.into(),
        }
    }

    pub fn haar() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::orthogonal("haar", vec![s, s])
    }

    /// Four-tap Daubechies bank.
    pub fn daubechies4() -> Self {
        let s3 = 3.0f64.sqrt();
        let norm = 4.0 * 2.0f64.sqrt();
        Self::orthogonal(
            "db4",
            vec![
                (1.0 + s3) / norm,
                (3.0 + s3) / norm,
                (3.0 - s3) / norm,
                (1.0 - s3) / norm,
            ],
        )
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "haar" => Ok(Self::haar()),
            "db4" | "daubechies4" => Ok(Self::daubechies4()),
            other => Err(Error::InvalidArgument(format!("unknown wavelet bank `{other}`"))),
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Per-level coefficients from cascaded analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletCoeffs {
    pub levels: usize,
    /// Approximation coefficients after the deepest stage.
    pub approx: Vec<f64>,
    /// Detail coefficients, level 1 (finest) first.
    pub details: Vec<Vec<f64>>,
    pub original_length: usize,
}

/// Largest decomposition depth admissible for a signal of length `n`
/// under periodic boundary handling (each stage needs an even length).
pub fn max_levels(n: usize) -> usize {
    let mut levels = 0;
    let mut len = n;
    while len >= 2 && len % 2 == 0 {
        levels += 1;
        len /= 2;
    }
    levels
}

/// One analysis stage: periodic correlation with `h`/`g`, downsampled by 2.
fn analyze_stage(x: &[f64], bank: &FilterBank) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let l = bank.len();
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for m in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for t in 0..l {
            let k = (2 * m + t) % n;
            a += x[k] * bank.h[t];
            d += x[k] * bank.g[t];
        }
        approx[m] = a;
        detail[m] = d;
    }
    (approx, detail)
}

/// One synthesis stage: transpose of [`analyze_stage`].
fn synthesize_stage(approx: &[f64], detail: &[f64], bank: &FilterBank) -> Vec<f64> {
    let half = approx.len();
    let n = half * 2;
    let l = bank.len();
    let mut x = vec![0.0; n];
    for m in 0..half {
        for t in 0..l {
            let k = (2 * m + t) % n;
            x[k] += approx[m] * bank.h_plus[t] + detail[m] * bank.g_plus[t];
        }
    }
    x
}

/// Cascaded Mallat analysis: `levels` stages of convolve-and-decimate
/// applied along the approximation path.
pub fn dwt_analyze(x: &[f64], bank: &FilterBank, levels: usize) -> Result<WaveletCoeffs> {
    if levels == 0 {
        return Err(Error::InvalidArgument("dwt_analyze: levels must be >= 1".into()));
    }
    let admissible = max_levels(x.len());
    if levels > admissible {
        return Err(Error::SignalTooShort {
            len: x.len(),
            requested: levels,
            max_levels: admissible,
        });
    }
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d) = analyze_stage(&approx, bank);
        details.push(d);
        approx = a;
    }
    Ok(WaveletCoeffs {
        levels,
        approx,
        details,
        original_length: x.len(),
    })
}

/// Cascaded synthesis: upsample-and-filter from the deepest level back to
/// the original signal length.
pub fn dwt_synthesize(c: &WaveletCoeffs, bank: &FilterBank) -> Result<Vec<f64>> {
    if c.details.len() != c.levels {
        return Err(Error::ShapeMismatch {
            op: "dwt_synthesize".into(),
            detail: format!("{} detail arrays for {} levels", c.details.len(), c.levels),
        });
    }
    let mut approx = c.approx.clone();
    for d in c.details.iter().rev() {
        if d.len() != approx.len() {
            return Err(Error::ShapeMismatch {
                op: "dwt_synthesize".into(),
                detail: format!(
                    "detail length {} does not match approximation length {}",
                    d.len(),
                    approx.len()
                ),
            });
        }
        approx = synthesize_stage(&approx, d, bank);
    }
    if approx.len() != c.original_length {
        return Err(Error::ShapeMismatch {
            op: "dwt_synthesize".into(),
            detail: format!(
                "reconstructed length {} vs recorded original length {}",
                approx.len(),
                c.original_length
            ),
        });
    }
    Ok(approx)
}

/// Split a series into complementary time-domain bands: `low` is the
/// detail-zeroed reconstruction, `high` the exact residual, so
/// `low + high == x` always.
pub fn band_split(x: &[f64], bank: &FilterBank, levels: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut coeffs = dwt_analyze(x, bank, levels)?;
    for d in &mut coeffs.details {
        d.iter_mut().for_each(|v| *v = 0.0);
    }
    let low = dwt_synthesize(&coeffs, bank)?;
    let high: Vec<f64> = x.iter().zip(&low).map(|(a, b)| a - b).collect();
    Ok((low, high))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_signal(n: usize, seed: u64) -> Vec<f64> {
        use rand::Rng as _;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Naive O(N*L) one-stage oracle: build the full analysis matrix rows
    /// h((k - 2n) mod N) explicitly and apply it.
    fn oracle_stage(x: &[f64], filt: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n / 2)
            .map(|row| {
                let mut acc = 0.0;
                for k in 0..n {
                    // filter index (k - 2*row) mod n, nonzero only within taps
                    let idx = ((k + n) - 2 * row) % n;
                    if idx < filt.len() {
                        acc += x[k] * filt[idx];
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn haar_single_spike() {
        let bank = FilterBank::haar();
        let c = dwt_analyze(&[1.0, 0.0, 0.0, 0.0], &bank, 1).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c.approx[0] - s).abs() < 1e-15);
        assert!(c.approx[1].abs() < 1e-15);
        assert!((c.details[0][0] - s).abs() < 1e-15);
        assert!(c.details[0][1].abs() < 1e-15);
    }

    #[test]
    fn constant_signal_has_zero_details() {
        for bank in [FilterBank::haar(), FilterBank::daubechies4()] {
            let x = vec![3.7; 32];
            let c = dwt_analyze(&x, &bank, 1).unwrap();
            for d in &c.details[0] {
                assert!(d.abs() < 1e-12, "{}: detail {}", bank.name, d);
            }
        }
    }

    #[test]
    fn db4_matches_convolution_oracle() {
        let bank = FilterBank::daubechies4();
        let x = random_signal(64, 7);
        let c = dwt_analyze(&x, &bank, 3).unwrap();
        // walk the cascade with the naive oracle
        let mut cur = x;
        for level in 0..3 {
            let a = oracle_stage(&cur, &bank.h);
            let d = oracle_stage(&cur, &bank.g);
            for (got, want) in c.details[level].iter().zip(&d) {
                assert!((got - want).abs() < 1e-12);
            }
            cur = a;
        }
        for (got, want) in c.approx.iter().zip(&cur) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_reconstruction_all_levels() {
        for bank in [FilterBank::haar(), FilterBank::daubechies4()] {
            let x = random_signal(64, 11);
            for levels in 1..=max_levels(64) {
                let c = dwt_analyze(&x, &bank, levels).unwrap();
                let y = dwt_synthesize(&c, &bank).unwrap();
                let err = x
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(err < 1e-10, "{} levels={} err={}", bank.name, levels, err);
            }
        }
    }

    #[test]
    fn zero_coeffs_give_zero_signal() {
        let bank = FilterBank::daubechies4();
        let c = WaveletCoeffs {
            levels: 2,
            approx: vec![0.0; 8],
            details: vec![vec![0.0; 16], vec![0.0; 8]],
            original_length: 32,
        };
        let y = dwt_synthesize(&c, &bank).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn haar_pairwise_constant_lives_in_approximation() {
        let bank = FilterBank::haar();
        let x = [1.0, 1.0, 2.0, 2.0];
        let (low, _high) = band_split(&x, &bank, 1).unwrap();
        for (a, b) in x.iter().zip(&low) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_short_reports_max_admissible() {
        let bank = FilterBank::haar();
        let err = dwt_analyze(&random_signal(40, 1), &bank, 5).unwrap_err();
        match err {
            Error::SignalTooShort { max_levels, .. } => assert_eq!(max_levels, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn band_split_alternating_haar() {
        let bank = FilterBank::haar();
        let x: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (low, high) = band_split(&x, &bank, 1).unwrap();
        for i in 0..16 {
            assert!(low[i].abs() < 1e-12);
            assert!((high[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_orthogonal_banks() {
        for bank in [FilterBank::haar(), FilterBank::daubechies4()] {
            for seed in 0..20 {
                let x = random_signal(128, seed);
                let c = dwt_analyze(&x, &bank, 3).unwrap();
                let ex: f64 = x.iter().map(|v| v * v).sum();
                let mut ec: f64 = c.approx.iter().map(|v| v * v).sum();
                for d in &c.details {
                    ec += d.iter().map(|v| v * v).sum::<f64>();
                }
                assert!((ex - ec).abs() / ex < 1e-9, "{}: {} vs {}", bank.name, ex, ec);
            }
        }
    }

    proptest! {
        #[test]
        fn prop_band_split_additivity(seed in 0u64..1000) {
            let bank = FilterBank::daubechies4();
            let x = random_signal(64, seed);
            let (low, high) = band_split(&x, &bank, 2).unwrap();
            for i in 0..64 {
                prop_assert!((low[i] + high[i] - x[i]).abs() < 1e-10);
            }
        }

        #[test]
        fn prop_linearity(seed in 0u64..1000, alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
            let bank = FilterBank::daubechies4();
            let x = random_signal(32, seed);
            let y = random_signal(32, seed.wrapping_add(9999));
            let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let cx = dwt_analyze(&x, &bank, 2).unwrap();
            let cy = dwt_analyze(&y, &bank, 2).unwrap();
            let cc = dwt_analyze(&combo, &bank, 2).unwrap();
            for i in 0..cc.approx.len() {
                prop_assert!((cc.approx[i] - (alpha * cx.approx[i] + beta * cy.approx[i])).abs() < 1e-10);
            }
            for l in 0..2 {
                for i in 0..cc.details[l].len() {
                    prop_assert!(
                        (cc.details[l][i] - (alpha * cx.details[l][i] + beta * cy.details[l][i])).abs() < 1e-10
                    );
                }
            }
        }
    }
}
