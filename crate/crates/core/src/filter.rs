//! Butterworth band-pass design and zero-phase filtering.
//!
//! Design goes analog prototype → band-pass transform → bilinear transform
//! with pre-warped band edges. The filter is kept as second-order sections,
//! each with numerator `1 - z^-2`, and normalized to unit gain at the
//! geometric band center.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    pub order: usize,
    pub sections: Vec<Section>,
}

impl Butterworth {
    /// Band-pass of prototype order `order` (so `2 * order` poles).
    pub fn bandpass(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config("filter order must be at least 1".into()));
        }
        if !(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0) {
            return Err(Error::Config(format!(
                "band [{low_hz}, {high_hz}] Hz must satisfy 0 < low < high < fs/2 = {}",
                fs / 2.0
            )));
        }
        let two_fs = 2.0 * fs;
        let warp = |f: f64| two_fs * (std::f64::consts::PI * f / fs).tan();
        let (wl, wh) = (warp(low_hz), warp(high_hz));
        let bw = wh - wl;
        let w0_sq = wl * wh;

        let mut z_poles = Vec::with_capacity(2 * order);
        for k in 0..order {
            let theta = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let half = p * (bw / 2.0);
            let root = (half * half - w0_sq).sqrt();
            for s in [half + root, half - root] {
                z_poles.push((two_fs + s) / (two_fs - s));
            }
        }

        let mut sections: Vec<Section> = pair_poles(z_poles)
            .into_iter()
            .map(|(p1, p2)| {
                let sum = p1 + p2;
                let prod = p1 * p2;
                Section {
                    b: [1.0, 0.0, -1.0],
                    a: [1.0, -sum.re, prod.re],
                }
            })
            .collect();

        let w_center = 2.0 * (w0_sq.sqrt() / two_fs).atan();
        let gain = response(&sections, w_center).norm();
        let g = gain.powf(-1.0 / sections.len() as f64);
        for s in &mut sections {
            for b in &mut s.b {
                *b *= g;
            }
        }
        Ok(Butterworth { order, sections })
    }

    /// Complex response at digital frequency `f_hz`.
    pub fn response_at(&self, f_hz: f64, fs: f64) -> Complex64 {
        response(&self.sections, 2.0 * std::f64::consts::PI * f_hz / fs)
    }

    /// Causal filtering from the given per-section states.
    fn run(&self, x: &[f64], mut state: Vec<[f64; 2]>) -> Vec<f64> {
        let mut y = x.to_vec();
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z[0];
                z[0] = s.b[1] * input - s.a[1] * out + z[1];
                z[1] = s.b[2] * input - s.a[2] * out;
                *v = out;
            }
        }
        y
    }

    /// Per-section states for a unit step already at steady state.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let dc = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[1] + s.a[2]);
                let z1 = dc - s.b[0];
                let z0_next = s.b[2] - s.a[2] * dc;
                let state = [scale * z1, scale * z0_next];
                scale *= dc;
                state
            })
            .collect()
    }

    /// Single causal pass starting from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        self.run(x, vec![[0.0; 2]; self.sections.len()])
    }

    /// Forward-backward filtering with odd-reflection padding of
    /// `3 * (2 * order + 1)` samples and steady-state initial conditions.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        if n <= 6 * self.order {
            return Err(Error::Length(format!(
                "zero-phase filtering of order {} needs more than {} samples, got {n}",
                self.order,
                6 * self.order
            )));
        }
        let pad = (3 * (2 * self.order + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_state();
        let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();

        let mut y = self.run(&ext, scaled(ext[0]));
        y.reverse();
        let mut y = self.run(&y, scaled(y[0]));
        y.reverse();
        Ok(y[pad..pad + n].to_vec())
    }
}

fn response(sections: &[Section], omega: f64) -> Complex64 {
    let z1 = Complex64::from_polar(1.0, -omega);
    let z2 = z1 * z1;
    sections
        .iter()
        .map(|s| (s.b[0] + z1 * s.b[1] + z2 * s.b[2]) / (s.a[0] + z1 * s.a[1] + z2 * s.a[2]))
        .product()
}

/// Groups poles into conjugate pairs; leftover real poles pair with each other.
fn pair_poles(poles: Vec<Complex64>) -> Vec<(Complex64, Complex64)> {
    const REAL_TOL: f64 = 1e-12;
    let mut pairs = Vec::new();
    let mut reals = Vec::new();
    for p in poles {
        if p.im.abs() <= REAL_TOL {
            reals.push(Complex64::new(p.re, 0.0));
        } else if p.im > 0.0 {
            pairs.push((p, p.conj()));
        }
    }
    reals.sort_by(|a, b| a.re.total_cmp(&b.re));
    for r in reals.chunks(2) {
        pairs.push((r[0], r.get(1).copied().unwrap_or(Complex64::new(0.0, 0.0))));
    }
    pairs
}

/// Zero-phase Butterworth band-pass.
pub fn bandpass_butterworth(signal: &[f64], fs: f64, low_hz: f64, high_hz: f64, order: usize) -> Result<Vec<f64>> {
    Butterworth::bandpass(order, low_hz, high_hz, fs)?.filtfilt(signal)
}
