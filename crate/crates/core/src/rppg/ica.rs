//! Fixed-point ICA (log-cosh contrast, symmetric decorrelation) on three
//! channels.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::bandpass_butterworth;
use crate::spectral::Periodogram;
use crate::traces::{detrend_smoothness_prior, pearson, zscore, PulseSignal, RawTraces, GREEN};

use super::{DETREND_LAMBDA, PULSE_BAND};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcaConfig {
    pub n_components: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Component-selection band in Hz.
    pub band: (f64, f64),
}

impl Default for IcaConfig {
    fn default() -> Self {
        IcaConfig {
            n_components: 3,
            max_iter: 1000,
            tol: 1e-4,
            seed: 0,
            band: PULSE_BAND,
        }
    }
}

/// Unmixed sources, each zero-mean with unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct IcaComponents {
    pub sources: [Vec<f64>; 3],
    pub iterations: usize,
}

/// Separates three observed rows into three independent components.
pub fn fast_ica(rows: [&[f64]; 3], cfg: &IcaConfig) -> Result<IcaComponents> {
    if cfg.n_components != 3 {
        return Err(Error::Config(format!(
            "ICA works on exactly 3 components, got {}",
            cfg.n_components
        )));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::Config("ICA tolerance must be > 0".into()));
    }
    let n = rows[0].len();
    if n < 3 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Length("ICA needs three equal rows of at least 3 samples".into()));
    }
    let nf = n as f64;
    let centered: [Vec<f64>; 3] = rows.map(|r| {
        let m = r.iter().sum::<f64>() / nf;
        r.iter().map(|v| v - m).collect()
    });

    let cov = Matrix3::from_fn(|i, j| centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum::<f64>() / nf);
    let eig = SymmetricEigen::new(cov);
    let max_ev = eig.eigenvalues.max();
    let min_ev = eig.eigenvalues.min();
    if !(max_ev > 0.0) || min_ev <= 1e-10 * max_ev {
        return Err(Error::DegenerateInput(format!(
            "channel covariance is rank-deficient (eigenvalues {min_ev:e} .. {max_ev:e})"
        )));
    }
    let inv_sqrt = Matrix3::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    let whitening = inv_sqrt * eig.eigenvectors.transpose();
    let white = apply(&whitening, &centered);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = symmetric_decorrelation(&Matrix3::from_fn(|_, _| StandardNormal.sample(&mut rng)))?;

    for iter in 1..=cfg.max_iter {
        let mut next = Matrix3::zeros();
        for i in 0..3 {
            let mut g_sum = [0.0; 3];
            let mut dg_sum = 0.0;
            for t in 0..n {
                let u = w[(i, 0)] * white[0][t] + w[(i, 1)] * white[1][t] + w[(i, 2)] * white[2][t];
                let g = u.tanh();
                dg_sum += 1.0 - g * g;
                for (k, s) in g_sum.iter_mut().enumerate() {
                    *s += white[k][t] * g;
                }
            }
            for k in 0..3 {
                next[(i, k)] = g_sum[k] / nf - dg_sum / nf * w[(i, k)];
            }
        }
        let next = symmetric_decorrelation(&next)?;
        let change = (0..3)
            .map(|i| ((next.row(i).dot(&w.row(i))).abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = next;
        if change < cfg.tol {
            return Ok(IcaComponents {
                sources: apply(&w, &white),
                iterations: iter,
            });
        }
    }
    Err(Error::Convergence(cfg.max_iter))
}

fn apply(m: &Matrix3<f64>, rows: &[Vec<f64>; 3]) -> [Vec<f64>; 3] {
    let n = rows[0].len();
    [0, 1, 2].map(|i| (0..n).map(|t| m[(i, 0)] * rows[0][t] + m[(i, 1)] * rows[1][t] + m[(i, 2)] * rows[2][t]).collect())
}

/// `(W Wᵀ)^(-1/2) W`.
fn symmetric_decorrelation(w: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let eig = SymmetricEigen::new(w * w.transpose());
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::DegenerateInput("singular unmixing matrix".into()));
    }
    let inv_sqrt = Matrix3::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    Ok(eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose() * w)
}

/// ICA output before the final band-pass.
#[derive(Debug, Clone, PartialEq)]
pub struct IcaSelection {
    pub components: IcaComponents,
    pub selected: usize,
    /// Selected component, sign-aligned with the green trace.
    pub pulse: Vec<f64>,
}

/// Detrend, z-score, unmix, and pick the component with the largest
/// in-band power fraction.
pub fn ica_select(traces: &RawTraces, cfg: &IcaConfig) -> Result<IcaSelection> {
    if traces.len() < 90 {
        return Err(Error::Length(format!(
            "ICA needs at least 90 samples, got {}",
            traces.len()
        )));
    }
    let prepared = traces
        .channels
        .iter()
        .map(|c| detrend_smoothness_prior(c, DETREND_LAMBDA).map(|d| zscore(&d)))
        .collect::<Result<Vec<_>>>()?;
    let components = fast_ica([&prepared[0], &prepared[1], &prepared[2]], cfg)?;

    let fs = traces.fps;
    let fractions: Vec<f64> = components
        .sources
        .iter()
        .map(|s| Periodogram::new(s, fs, fs / s.len() as f64).band_fraction(cfg.band.0, cfg.band.1))
        .collect();
    let selected = (0..3).fold(0, |best, i| if fractions[i] > fractions[best] { i } else { best });

    let mut pulse = components.sources[selected].clone();
    if pearson(&pulse, &prepared[GREEN]) < 0.0 {
        pulse.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(IcaSelection {
        components,
        selected,
        pulse,
    })
}

pub fn extract_ica(traces: &RawTraces, cfg: &IcaConfig) -> Result<PulseSignal> {
    let sel = ica_select(traces, cfg)?;
    let samples = bandpass_butterworth(&sel.pulse, traces.fps, PULSE_BAND.0, PULSE_BAND.1, 3)?;
    Ok(PulseSignal {
        samples,
        fps: traces.fps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traces::{mean, std_dev};
    use rand_distr::Normal;
    use std::f64::consts::PI;

    fn sources(n: usize, seed: u64) -> [Vec<f64>; 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let pulse = (0..n).map(|i| (2.0 * PI * 1.2 * i as f64 / 30.0).sin()).collect();
        let drift = (0..n).map(|i| ((i as f64 / 30.0) * 0.37).rem_euclid(2.0) - 1.0).collect();
        let white = (0..n).map(|_| noise.sample(&mut rng)).collect();
        [pulse, drift, white]
    }

    fn mix(s: &[Vec<f64>; 3], m: [[f64; 3]; 3]) -> [Vec<f64>; 3] {
        let n = s[0].len();
        [0, 1, 2].map(|i| (0..n).map(|t| m[i][0] * s[0][t] + m[i][1] * s[1][t] + m[i][2] * s[2][t]).collect())
    }

    #[test]
    fn unmixes_known_mixture() {
        let s = sources(1800, 3);
        let x = mix(&s, [[0.9, 0.4, 0.3], [0.5, 1.0, 0.2], [0.3, 0.6, 0.8]]);
        let out = fast_ica([&x[0], &x[1], &x[2]], &IcaConfig::default()).unwrap();
        let best = out.sources.iter().map(|c| pearson(c, &s[0]).abs()).fold(0.0, f64::max);
        assert!(best >= 0.95, "best |r| = {best}");
    }

    #[test]
    fn components_are_white() {
        let s = sources(900, 9);
        let x = mix(&s, [[1.0, 0.2, 0.5], [0.1, 1.0, 0.7], [0.4, 0.3, 1.0]]);
        let out = fast_ica([&x[0], &x[1], &x[2]], &IcaConfig::default()).unwrap();
        for i in 0..3 {
            let sd = std_dev(&out.sources[i]);
            assert!((sd * sd - 1.0).abs() < 1e-6);
            assert!(mean(&out.sources[i]).abs() < 1e-9);
            for j in 0..i {
                assert!(pearson(&out.sources[i], &out.sources[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn duplicate_channel_is_degenerate() {
        let s = sources(300, 1);
        let err = fast_ica([&s[0], &s[1], &s[1]], &IcaConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn short_traces_rejected() {
        let tr = RawTraces::new([vec![0.5; 89], vec![0.4; 89], vec![0.3; 89]], 30.0).unwrap();
        assert!(matches!(extract_ica(&tr, &IcaConfig::default()), Err(Error::Length(_))));
    }

    #[test]
    fn seed_makes_output_deterministic() {
        let s = sources(600, 4);
        let x = mix(&s, [[0.9, 0.4, 0.3], [0.5, 1.0, 0.2], [0.3, 0.6, 0.8]]);
        let a = fast_ica([&x[0], &x[1], &x[2]], &IcaConfig::default()).unwrap();
        let b = fast_ica([&x[0], &x[1], &x[2]], &IcaConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iteration_cap_is_convergence_error() {
        let s = sources(600, 4);
        let x = mix(&s, [[0.9, 0.4, 0.3], [0.5, 1.0, 0.2], [0.3, 0.6, 0.8]]);
        let cfg = IcaConfig { max_iter: 1, tol: 1e-15, ..IcaConfig::default() };
        assert!(matches!(fast_ica([&x[0], &x[1], &x[2]], &cfg), Err(Error::Convergence(1))));
    }
}
