//! Hann-windowed, zero-padded periodograms.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// One-sided power spectrum on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    /// Bin spacing in Hz.
    pub df: f64,
    pub power: Vec<f64>,
}

impl Periodogram {
    /// Mean is removed, a periodic Hann window applied, and the transform is
    /// zero-padded to `max(len, ceil(fs / resolution_hz))` points.
    pub fn new(signal: &[f64], fs: f64, resolution_hz: f64) -> Self {
        let n = signal.len();
        let nfft = n.max((fs / resolution_hz - 1e-9).ceil() as usize).max(1);
        let mean = signal.iter().sum::<f64>() / n.max(1) as f64;
        let mut buf: Vec<Complex64> = signal
            .iter()
            .enumerate()
            .map(|(i, v)| Complex64::new((v - mean) * hann(i, n), 0.0))
            .collect();
        buf.resize(nfft, Complex64::new(0.0, 0.0));
        FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
        let power = buf[..nfft / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
        Periodogram {
            df: fs / nfft as f64,
            power,
        }
    }

    pub fn freq(&self, bin: usize) -> f64 {
        bin as f64 * self.df
    }

    /// Bins whose center frequency lies in `[lo, hi]`.
    pub fn bins_in(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let first = (lo / self.df - 1e-9).ceil().max(0.0) as usize;
        let last = ((hi / self.df + 1e-9).floor() as usize).min(self.power.len() - 1);
        first..=last
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Fraction of total power inside `[lo, hi]`; zero for a flat signal.
    pub fn band_fraction(&self, lo: f64, hi: f64) -> f64 {
        let total = self.total();
        if total <= 0.0 {
            return 0.0;
        }
        self.power[self.bins_in(lo, hi)].iter().sum::<f64>() / total
    }

    /// Peak frequency in `[lo, hi]`. Values within 1e-9 (relative) of the
    /// maximum count as ties and resolve to the lowest frequency.
    pub fn peak_in(&self, lo: f64, hi: f64) -> Option<f64> {
        let bins = self.bins_in(lo, hi);
        let max = self.power[bins.clone()].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(max > 0.0) {
            return None;
        }
        bins.into_iter()
            .find(|&k| self.power[k] >= max * (1.0 - 1e-9))
            .map(|k| self.freq(k))
    }
}

/// Periodic Hann window.
pub fn hann(i: usize, n: usize) -> f64 {
    0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()
}
