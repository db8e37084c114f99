//! Pulse quality and heart-rate accuracy metrics, spectrograms and the
//! aggregated evaluation report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::enhance::Enhancement;
use crate::error::{Error, Result};
use crate::rppg::{Method, PULSE_BAND};
use crate::spectral::Periodogram;
use crate::traces::{sliding_windows, PulseSignal, WindowPlan};
use crate::video::GroundTruthPpg;

/// SNR values are reported within ±60 dB.
pub const SNR_CAP_DB: f64 = 60.0;
/// Periodogram resolution used for heart-rate peaks and spectrograms (0.5 BPM).
pub const HR_RESOLUTION_HZ: f64 = 1.0 / 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnrConfig {
    pub band: (f64, f64),
    pub harmonic_half_width: f64,
    pub fft_resolution: f64,
}

impl Default for SnrConfig {
    fn default() -> Self {
        SnrConfig {
            band: (0.7, 4.0),
            harmonic_half_width: 0.1,
            fft_resolution: 0.01,
        }
    }
}

impl SnrConfig {
    pub fn validate(&self, fps: f64) -> Result<()> {
        let (lo, hi) = self.band;
        if !(lo > 0.0 && lo < hi && hi < fps / 2.0) {
            return Err(Error::Config(format!(
                "SNR band [{lo}, {hi}] must lie inside (0, {})",
                fps / 2.0
            )));
        }
        if !(self.harmonic_half_width > 0.0) {
            return Err(Error::Config("harmonic half-width must be > 0".into()));
        }
        if !(self.fft_resolution > 0.0) {
            return Err(Error::Config("FFT resolution must be > 0".into()));
        }
        Ok(())
    }
}

/// Power in the fundamental and second-harmonic templates relative to the
/// rest of the band, in dB.
pub fn snr_db(pulse: &PulseSignal, gt_hr_bpm: f64, cfg: &SnrConfig) -> Result<f64> {
    cfg.validate(pulse.fps)?;
    let min_len = (5.0 * pulse.fps).ceil() as usize;
    if pulse.samples.len() < min_len {
        return Err(Error::Length(format!(
            "SNR needs at least 5 s ({min_len} samples), got {}",
            pulse.samples.len()
        )));
    }
    let f0 = gt_hr_bpm / 60.0;
    let (lo, hi) = cfg.band;
    let w = cfg.harmonic_half_width;
    let touches = |f: f64| f + w >= lo && f - w <= hi;
    if !(f0 > 0.0) || !(touches(f0) || touches(2.0 * f0)) {
        return Err(Error::Metric(format!(
            "reference rate {gt_hr_bpm} BPM has no harmonic inside the SNR band"
        )));
    }
    let spec = Periodogram::new(&pulse.samples, pulse.fps, cfg.fft_resolution);
    let (mut signal, mut noise) = (0.0, 0.0);
    for k in spec.bins_in(lo, hi) {
        let f = spec.freq(k);
        if (f - f0).abs() <= w || (f - 2.0 * f0).abs() <= w {
            signal += spec.power[k];
        } else {
            noise += spec.power[k];
        }
    }
    if signal + noise <= 0.0 {
        return Err(Error::Metric("pulse has no power in the SNR band".into()));
    }
    if noise <= 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / noise).log10()).clamp(-SNR_CAP_DB, SNR_CAP_DB))
}

/// Bins of the SNR band inside / outside the harmonic templates, for a
/// signal of `len` samples. A white-noise pulse has expected SNR
/// `10 log10(inside / outside)`.
pub fn snr_template_bins(len: usize, fps: f64, gt_hr_bpm: f64, cfg: &SnrConfig) -> (usize, usize) {
    let spec = Periodogram::new(&vec![0.0; len], fps, cfg.fft_resolution);
    let f0 = gt_hr_bpm / 60.0;
    let w = cfg.harmonic_half_width;
    spec.bins_in(cfg.band.0, cfg.band.1)
        .map(|k| spec.freq(k))
        .fold((0, 0), |(i, o), f| {
            if (f - f0).abs() <= w || (f - 2.0 * f0).abs() <= w {
                (i + 1, o)
            } else {
                (i, o + 1)
            }
        })
}

/// Spectral peak inside `band` (Hz), in BPM, at 0.5 BPM resolution.
pub fn hr_from_window(window: &[f64], fps: f64, band: (f64, f64)) -> Result<f64> {
    let min_len = (5.0 * fps).ceil() as usize;
    if window.len() < min_len {
        return Err(Error::Length(format!(
            "heart-rate window needs at least 5 s ({min_len} samples), got {}",
            window.len()
        )));
    }
    if window.iter().all(|&v| v == 0.0) {
        return Err(Error::Metric("all-zero window".into()));
    }
    Periodogram::new(window, fps, HR_RESOLUTION_HZ)
        .peak_in(band.0, band.1)
        .map(|f| f * 60.0)
        .ok_or_else(|| Error::Metric("window has no power in the heart-rate band".into()))
}

fn check_pair(est: &[f64], gt: &[f64]) -> Result<()> {
    if est.len() != gt.len() || est.is_empty() {
        return Err(Error::Metric(format!(
            "need equal, non-empty series (got {} and {})",
            est.len(),
            gt.len()
        )));
    }
    Ok(())
}

pub fn mae(est: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(est, gt)?;
    Ok(est.iter().zip(gt).map(|(a, b)| (a - b).abs()).sum::<f64>() / est.len() as f64)
}

pub fn rmse(est: &[f64], gt: &[f64]) -> Result<f64> {
    check_pair(est, gt)?;
    Ok((est.iter().zip(gt).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / est.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `magnitudes[column][bin]`.
    pub magnitudes: Vec<Vec<f64>>,
    /// Window start times in seconds.
    pub times_s: Vec<f64>,
    pub freqs_bpm: Vec<f64>,
    /// Per-column peak frequency in BPM.
    pub ridge_bpm: Vec<f64>,
    /// Seconds covered by the source signal.
    pub duration_s: f64,
    pub window_s: f64,
    pub max_bpm: f64,
}

impl Spectrogram {
    pub fn columns(&self) -> usize {
        self.magnitudes.len()
    }

    /// Index of the ridge bin in each column.
    pub fn ridge_bins(&self) -> Vec<usize> {
        self.magnitudes.iter().map(|col| argmax(col)).collect()
    }

    /// `time_s,bpm,magnitude` rows, plus the ridge as `time_s,ridge_bpm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,bpm,magnitude\n");
        for (t, col) in self.times_s.iter().zip(&self.magnitudes) {
            for (f, m) in self.freqs_bpm.iter().zip(col) {
                writeln!(out, "{t:.3},{f:.3},{m:.6e}").unwrap();
            }
        }
        out
    }

    pub fn ridge_csv(&self) -> String {
        let mut out = String::from("time_s,ridge_bpm\n");
        for (t, r) in self.times_s.iter().zip(&self.ridge_bpm) {
            writeln!(out, "{t:.3},{r:.3}").unwrap();
        }
        out
    }
}

fn argmax(col: &[f64]) -> usize {
    let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    col.iter().position(|&v| v >= max).unwrap_or(0)
}

/// Sliding Hann-windowed periodograms, frequencies clipped to `max_bpm`.
pub fn spectrogram(signal: &[f64], fps: f64, plan: &WindowPlan, max_bpm: f64) -> Result<Spectrogram> {
    let windows = sliding_windows(signal, fps, plan)?;
    let mut magnitudes = Vec::with_capacity(windows.len());
    let mut times_s = Vec::with_capacity(windows.len());
    let mut freqs_bpm = Vec::new();
    for (start, w) in windows {
        let p = Periodogram::new(w, fps, HR_RESOLUTION_HZ);
        let last = p.bins_in(0.0, max_bpm / 60.0);
        if freqs_bpm.is_empty() {
            freqs_bpm = last.clone().map(|k| p.freq(k) * 60.0).collect();
        }
        magnitudes.push(p.power[last].iter().map(|v| v.sqrt()).collect::<Vec<_>>());
        times_s.push(start as f64 / fps);
    }
    let ridge_bpm = magnitudes.iter().map(|c| freqs_bpm[argmax(c)]).collect();
    Ok(Spectrogram {
        magnitudes,
        times_s,
        freqs_bpm,
        ridge_bpm,
        duration_s: signal.len() as f64 / fps,
        window_s: plan.win_s,
        max_bpm,
    })
}

/// Window-level heart rates and the scores derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoScore {
    pub snr_db: f64,
    pub mae_bpm: f64,
    pub rmse_bpm: f64,
    pub n_windows: usize,
    pub est_hr_bpm: Vec<f64>,
    pub ref_hr_bpm: Vec<f64>,
}

/// Per-window reference heart rate: the recorded rate averaged over the
/// window when available, otherwise the PPG's spectral peak.
pub fn reference_hr(gt: &GroundTruthPpg, plan: &WindowPlan) -> Result<Vec<f64>> {
    let fs = gt.sample_rate;
    let windows = sliding_windows(&gt.samples, fs, plan)?;
    windows
        .into_iter()
        .map(|(start, w)| {
            let t0 = start as f64 / fs;
            match gt.mean_hr_between(t0, t0 + plan.win_s) {
                Some(hr) => Ok(hr),
                None => hr_from_window(w, fs, PULSE_BAND),
            }
        })
        .collect()
}

/// Scores one pulse against its reference. Window `k` of the pulse is
/// compared with window `k` of the reference.
pub fn evaluate_video(pulse: &PulseSignal, gt: &GroundTruthPpg, plan: &WindowPlan, snr_cfg: &SnrConfig) -> Result<VideoScore> {
    let est: Vec<f64> = sliding_windows(&pulse.samples, pulse.fps, plan)?
        .into_iter()
        .map(|(_, w)| hr_from_window(w, pulse.fps, PULSE_BAND))
        .collect::<Result<_>>()?;
    let reference = reference_hr(gt, plan)?;
    let n = est.len().min(reference.len());
    if n == 0 {
        return Err(Error::Length("no complete analysis window".into()));
    }
    let (est, reference) = (est[..n].to_vec(), reference[..n].to_vec());
    let snr = snr_db(pulse, median(&reference), snr_cfg)?;
    Ok(VideoScore {
        snr_db: snr,
        mae_bpm: mae(&est, &reference)?,
        rmse_bpm: rmse(&est, &reference)?,
        n_windows: n,
        est_hr_bpm: est,
        ref_hr_bpm: reference,
    })
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub lux: f64,
    pub method: Method,
    pub enhancement: Enhancement,
    pub snr_db: f64,
    pub mae_bpm: f64,
    pub rmse_bpm: f64,
    pub mean_iou: Option<f64>,
    pub n_windows: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

pub const REPORT_HEADER: &str = "lux,method,enhancement,snr_db,mae_bpm,rmse_bpm,mean_iou,n_windows";

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let iou = r.mean_iou.map(|v| format!("{v:.6}")).unwrap_or_default();
            writeln!(
                out,
                "{:.4},{},{},{:.6},{:.6},{:.6},{},{}",
                r.lux, r.method, r.enhancement, r.snr_db, r.mae_bpm, r.rmse_bpm, iou, r.n_windows
            )
            .unwrap();
        }
        out
    }

    pub fn get(&self, lux: f64, method: Method, enhancement: Enhancement) -> Option<&EvalRow> {
        self.rows
            .iter()
            .find(|r| r.lux == lux && r.method == method && r.enhancement == enhancement)
    }
}

/// Means per (lux, method, enhancement); rows sorted by lux, then method
/// name, then enhancement name. Window counts are summed.
pub fn aggregate_report(rows: &[EvalRow]) -> EvalReport {
    let mut groups: BTreeMap<(u64, &'static str, &'static str), Vec<&EvalRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((lux_key(r.lux), r.method.name(), r.enhancement.name()))
            .or_default()
            .push(r);
    }
    let rows = groups
        .into_values()
        .map(|g| {
            let n = g.len() as f64;
            let avg = |f: fn(&EvalRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / n;
            let ious: Vec<f64> = g.iter().filter_map(|r| r.mean_iou).collect();
            EvalRow {
                lux: g[0].lux,
                method: g[0].method,
                enhancement: g[0].enhancement,
                snr_db: avg(|r| r.snr_db),
                mae_bpm: avg(|r| r.mae_bpm),
                rmse_bpm: avg(|r| r.rmse_bpm),
                mean_iou: (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64),
                n_windows: g.iter().map(|r| r.n_windows).sum(),
            }
        })
        .collect();
    EvalReport { rows }
}

/// Order-preserving key for non-negative finite lux values.
fn lux_key(lux: f64) -> u64 {
    lux.to_bits()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn tone(f: f64, fps: f64, secs: f64) -> Vec<f64> {
        (0..(fps * secs).round() as usize)
            .map(|i| (2.0 * PI * f * i as f64 / fps).sin())
            .collect()
    }

    fn pulse(samples: Vec<f64>) -> PulseSignal {
        PulseSignal { samples, fps: 30.0 }
    }

    #[test]
    fn snr_of_in_template_tone_is_high() {
        let s = snr_db(&pulse(tone(1.2, 30.0, 60.0)), 72.0, &SnrConfig::default()).unwrap();
        assert!(s >= 20.0, "{s}");
    }

    #[test]
    fn snr_of_off_template_tone_is_low() {
        let s = snr_db(&pulse(tone(1.8, 30.0, 60.0)), 72.0, &SnrConfig::default()).unwrap();
        assert!(s <= -10.0, "{s}");
    }

    #[test]
    fn snr_of_white_noise_matches_bin_ratio() {
        let cfg = SnrConfig::default();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mean_snr = (0..100)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x = (0..1800).map(|_| normal.sample(&mut rng)).collect();
                snr_db(&pulse(x), 72.0, &cfg).unwrap()
            })
            .sum::<f64>()
            / 100.0;
        let (inside, outside) = snr_template_bins(1800, 30.0, 72.0, &cfg);
        let expected = 10.0 * (inside as f64 / outside as f64).log10();
        assert!((mean_snr - expected).abs() <= 3.0, "{mean_snr} vs {expected}");
    }

    #[test]
    fn snr_errors() {
        let cfg = SnrConfig::default();
        assert!(matches!(snr_db(&pulse(vec![0.0; 1800]), 72.0, &cfg), Err(Error::Metric(_))));
        assert!(matches!(snr_db(&pulse(tone(1.2, 30.0, 4.0)), 72.0, &cfg), Err(Error::Length(_))));
        assert!(matches!(snr_db(&pulse(tone(1.2, 30.0, 10.0)), 900.0, &cfg), Err(Error::Metric(_))));
    }

    #[test]
    fn snr_is_capped() {
        // a tone exactly on a bin with a rectangular spectrum still leaks a
        // little under Hann; a zero-noise case needs the cap path directly
        let s = snr_db(&pulse(tone(1.2, 30.0, 60.0)), 72.0, &SnrConfig::default()).unwrap();
        assert!(s <= SNR_CAP_DB);
    }

    #[test]
    fn hr_of_tone() {
        let hr = hr_from_window(&tone(1.2, 30.0, 10.0), 30.0, PULSE_BAND).unwrap();
        assert!((hr - 72.0).abs() <= 0.5, "{hr}");
    }

    #[test]
    fn equal_tones_resolve_low() {
        let x: Vec<f64> = tone(1.0, 30.0, 10.0).iter().zip(tone(1.5, 30.0, 10.0)).map(|(a, b)| a + b).collect();
        assert_eq!(hr_from_window(&x, 30.0, PULSE_BAND).unwrap(), 60.0);
    }

    #[test]
    fn out_of_band_tone_ignored() {
        let x: Vec<f64> = tone(0.5, 30.0, 10.0).iter().zip(tone(1.0, 30.0, 10.0)).map(|(a, b)| a + 0.25 * b).collect();
        assert_eq!(hr_from_window(&x, 30.0, PULSE_BAND).unwrap(), 60.0);
    }

    #[test]
    fn hr_errors() {
        assert!(matches!(hr_from_window(&[0.0; 300], 30.0, PULSE_BAND), Err(Error::Metric(_))));
        assert!(matches!(hr_from_window(&[1.0; 100], 30.0, PULSE_BAND), Err(Error::Length(_))));
    }

    #[test]
    fn error_fixtures() {
        assert_eq!(mae(&[72.0, 75.0], &[72.0, 75.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[72.0, 75.0], &[72.0, 75.0]).unwrap(), 0.0);
        assert_eq!(mae(&[72.0, 75.0], &[70.0, 80.0]).unwrap(), 3.5);
        assert!((rmse(&[72.0, 75.0], &[70.0, 80.0]).unwrap() - 3.807_886_552_931_954).abs() < 1e-12);
        assert_eq!(mae(&[100.0], &[90.0]).unwrap(), 10.0);
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(Error::Metric(_))));
        assert!(matches!(rmse(&[], &[]), Err(Error::Metric(_))));
    }

    #[test]
    fn spectrogram_of_stationary_tone() {
        let sg = spectrogram(&tone(1.2, 30.0, 60.0), 30.0, &WindowPlan::default(), 300.0).unwrap();
        assert_eq!(sg.columns(), 51);
        assert!(sg.ridge_bpm.iter().all(|r| (r - 72.0).abs() <= 0.5));
        assert!(*sg.freqs_bpm.last().unwrap() <= 300.0);
        assert!(sg.magnitudes.iter().flatten().all(|&m| m >= 0.0));
        assert_eq!(sg.times_s[3], 3.0);
    }

    #[test]
    fn spectrogram_follows_chirp() {
        let (f0, f1, secs) = (1.0, 2.0, 60.0);
        let x: Vec<f64> = (0..1800)
            .map(|i| {
                let t = i as f64 / 30.0;
                (2.0 * PI * (f0 * t + (f1 - f0) / (2.0 * secs) * t * t)).sin()
            })
            .collect();
        let sg = spectrogram(&x, 30.0, &WindowPlan::default(), 300.0).unwrap();
        assert!(sg.ridge_bpm.windows(2).all(|w| w[1] >= w[0]), "{:?}", sg.ridge_bpm);
    }

    #[test]
    fn spectrogram_needs_one_window() {
        assert!(matches!(
            spectrogram(&[0.0; 200], 30.0, &WindowPlan::default(), 300.0),
            Err(Error::Length(_))
        ));
    }

    #[test]
    fn identical_pulse_scores_perfectly() {
        let p = tone(1.2, 30.0, 60.0);
        let gt = GroundTruthPpg::new(p.clone(), 30.0, None).unwrap();
        let s = evaluate_video(&pulse(p), &gt, &WindowPlan::default(), &SnrConfig::default()).unwrap();
        assert_eq!((s.mae_bpm, s.rmse_bpm, s.n_windows), (0.0, 0.0, 51));
    }

    #[test]
    fn recorded_hr_takes_precedence() {
        let p = tone(1.2, 30.0, 20.0);
        let gt = GroundTruthPpg::new(vec![0.0; 600], 30.0, Some(vec![70.0; 600])).unwrap();
        let s = evaluate_video(&pulse(p), &gt, &WindowPlan::default(), &SnrConfig::default()).unwrap();
        assert!(s.ref_hr_bpm.iter().all(|&r| r == 70.0));
        assert!((s.mae_bpm - 2.0).abs() <= 0.5);
    }

    #[test]
    fn noise_pulse_scores_poorly() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let noise: Vec<f64> = (0..1800).map(|_| normal.sample(&mut rng)).collect();
        let gt = GroundTruthPpg::new(tone(1.2, 30.0, 60.0), 30.0, None).unwrap();
        let s = evaluate_video(&pulse(noise), &gt, &WindowPlan::default(), &SnrConfig::default()).unwrap();
        assert!(s.mae_bpm > 10.0, "{}", s.mae_bpm);
    }

    fn row(lux: f64, method: Method, enh: Enhancement, mae: f64) -> EvalRow {
        EvalRow {
            lux,
            method,
            enhancement: enh,
            snr_db: 1.0,
            mae_bpm: mae,
            rmse_bpm: mae,
            mean_iou: Some(1.0),
            n_windows: 51,
        }
    }

    #[test]
    fn aggregation() {
        assert!(aggregate_report(&[]).rows.is_empty());
        let single = [row(1.0, Method::Pos, Enhancement::None, 2.0)];
        assert_eq!(aggregate_report(&single).rows, single.to_vec());
        let pair = [row(1.0, Method::Pos, Enhancement::None, 2.0), row(1.0, Method::Pos, Enhancement::None, 4.0)];
        let rep = aggregate_report(&pair);
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].mae_bpm, 3.0);
        assert_eq!(rep.rows[0].n_windows, 102);
    }

    #[test]
    fn aggregation_order() {
        let rows = [
            row(10.0, Method::Green, Enhancement::None, 1.0),
            row(1.0, Method::Pos, Enhancement::Lime, 1.0),
            row(1.0, Method::Pos, Enhancement::He, 1.0),
            row(1.0, Method::Green, Enhancement::None, 1.0),
        ];
        let keys: Vec<_> = aggregate_report(&rows)
            .rows
            .iter()
            .map(|r| (r.lux, r.method.name(), r.enhancement.name()))
            .collect();
        assert_eq!(
            keys,
            vec![(1.0, "green", "none"), (1.0, "pos", "he"), (1.0, "pos", "lime"), (10.0, "green", "none")]
        );
    }

    #[test]
    fn csv_layout() {
        let mut r = row(1.0, Method::Ica, Enhancement::He, 2.5);
        r.mean_iou = None;
        let csv = EvalReport { rows: vec![r] }.to_csv();
        assert_eq!(csv, format!("{REPORT_HEADER}\n1.0000,ica,he,1.000000,2.500000,2.500000,,51\n"));
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in proptest::collection::vec((0.0f64..200.0, 0.0f64..200.0), 1..50)) {
            let (est, gt): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (m, r) = (mae(&est, &gt).unwrap(), rmse(&est, &gt).unwrap());
            prop_assert!(r >= m - 1e-12);
            prop_assert_eq!(m == 0.0, est == gt);
            prop_assert_eq!(r == 0.0, est == gt);
        }

        #[test]
        fn hr_ignores_scale_and_sign(k in prop_oneof![0.01f64..100.0, -100.0f64..-0.01], f in 0.8f64..2.4) {
            let x: Vec<f64> = (0..300).map(|i| (2.0 * PI * f * i as f64 / 30.0).sin() + 0.3 * (i as f64 * 0.05).cos()).collect();
            let scaled: Vec<f64> = x.iter().map(|v| v * k).collect();
            prop_assert_eq!(hr_from_window(&x, 30.0, PULSE_BAND).unwrap(), hr_from_window(&scaled, 30.0, PULSE_BAND).unwrap());
        }

        #[test]
        fn snr_grows_with_tone_amplitude(a in 0.05f64..2.0, extra in 0.05f64..1.0) {
            let normal = Normal::new(0.0, 1.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let noise: Vec<f64> = (0..900).map(|_| normal.sample(&mut rng)).collect();
            let t = tone(1.2, 30.0, 30.0);
            let mk = |amp: f64| pulse(noise.iter().zip(&t).map(|(n, s)| n + amp * s).collect());
            let cfg = SnrConfig::default();
            let lo = snr_db(&mk(a), 72.0, &cfg).unwrap();
            let hi = snr_db(&mk(a + extra), 72.0, &cfg).unwrap();
            prop_assert!(hi > lo);
        }

        #[test]
        fn spectrogram_columns_match_windows(secs in 10usize..40) {
            let x = tone(1.1, 30.0, secs as f64);
            let plan = WindowPlan::default();
            let sg = spectrogram(&x, 30.0, &plan, 300.0).unwrap();
            prop_assert_eq!(sg.columns(), sliding_windows(&x, 30.0, &plan).unwrap().len());
        }
    }
}
