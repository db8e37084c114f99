//! Raw RGB traces and the signal conditioning shared by the pulse extractors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roi::RoiTrack;
use crate::video::FrameSequence;

pub const RED: usize = 0;
pub const GREEN: usize = 1;
pub const BLUE: usize = 2;

/// Per-frame ROI channel means, rows R, G, B.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTraces {
    pub channels: [Vec<f64>; 3],
    pub fps: f64,
}

impl RawTraces {
    pub fn new(channels: [Vec<f64>; 3], fps: f64) -> Result<Self> {
        let len = channels[0].len();
        if len == 0 || channels.iter().any(|c| c.len() != len) {
            return Err(Error::Length("traces need three equal, non-empty rows".into()));
        }
        if !(fps > 0.0) {
            return Err(Error::Config(format!("fps must be positive, got {fps}")));
        }
        Ok(RawTraces { channels, fps })
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn red(&self) -> &[f64] {
        &self.channels[RED]
    }

    pub fn green(&self) -> &[f64] {
        &self.channels[GREEN]
    }

    pub fn blue(&self) -> &[f64] {
        &self.channels[BLUE]
    }
}

/// An extracted blood-volume-pulse waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSignal {
    pub samples: Vec<f64>,
    pub fps: f64,
}

/// Sliding-window protocol in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowPlan {
    pub win_s: f64,
    pub hop_s: f64,
}

impl Default for WindowPlan {
    fn default() -> Self {
        WindowPlan {
            win_s: 10.0,
            hop_s: 1.0,
        }
    }
}

impl WindowPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.hop_s > 0.0 && self.win_s > self.hop_s) {
            return Err(Error::Config(format!(
                "window plan needs win_s > hop_s > 0, got {} / {}",
                self.win_s, self.hop_s
            )));
        }
        Ok(())
    }

    /// Window and hop in samples at `fps`.
    pub fn samples(&self, fps: f64) -> (usize, usize) {
        (
            (self.win_s * fps).round() as usize,
            ((self.hop_s * fps).round() as usize).max(1),
        )
    }

    pub fn count(&self, len: usize, fps: f64) -> usize {
        let (win, hop) = self.samples(fps);
        if win == 0 || len < win {
            0
        } else {
            (len - win) / hop + 1
        }
    }
}

/// Mean of each channel inside the (frame-clipped) ROI of every frame.
pub fn spatial_average(video: &FrameSequence, track: &RoiTrack) -> Result<RawTraces> {
    if track.len() != video.len() {
        return Err(Error::Length(format!(
            "{} ROI boxes for {} frames",
            track.len(),
            video.len()
        )));
    }
    let (width, height) = (video.width(), video.height());
    let means: Vec<[f64; 3]> = video
        .frames()
        .par_iter()
        .zip(track.boxes.par_iter())
        .enumerate()
        .map(|(i, (frame, b))| {
            let r = b.clip_to(width, height).ok_or_else(|| {
                Error::at_frame(i, Error::Geometry("ROI lies outside the frame".into()))
            })?;
            let mut acc = [0.0; 3];
            for y in r.y as usize..r.bottom() as usize {
                for x in r.x as usize..r.right() as usize {
                    for (c, a) in acc.iter_mut().enumerate() {
                        *a += frame.get(x, y, c);
                    }
                }
            }
            let n = r.area() as f64;
            Ok(acc.map(|a| a / n))
        })
        .collect::<Result<_>>()?;
    let channels = [0, 1, 2].map(|c| means.iter().map(|m| m[c]).collect());
    RawTraces::new(channels, video.fps())
}

/// Smoothness-priors detrending: returns `z - trend` where
/// `(I + lambda^2 D2' D2) trend = z`, D2 the second-difference operator.
pub fn detrend_smoothness_prior(signal: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = signal.len();
    if n < 3 {
        return Err(Error::Length(format!("detrending needs at least 3 samples, got {n}")));
    }
    let system = PentaSpd::smoothness(n, lambda * lambda);
    let trend = system.solve_refined(signal, 1e-9);
    Ok(signal.iter().zip(&trend).map(|(z, t)| z - t).collect())
}

/// Symmetric positive-definite pentadiagonal matrix with its LDLᵀ factors.
struct PentaSpd {
    /// `bands[k][i]` holds A[i][i - k] for k = 0, 1, 2.
    bands: [Vec<f64>; 3],
    d: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl PentaSpd {
    /// `I + mu * D2ᵀ D2` of size n.
    fn smoothness(n: usize, mu: f64) -> Self {
        let mut bands = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        bands[0].iter_mut().for_each(|v| *v = 1.0);
        let row = [1.0, -2.0, 1.0];
        for r in 0..n - 2 {
            for a in 0..3 {
                for b in 0..=a {
                    bands[a - b][r + a] += mu * row[a] * row[b];
                }
            }
        }
        let (d, l1, l2) = Self::factor(&bands);
        PentaSpd { bands, d, l1, l2 }
    }

    fn factor(bands: &[Vec<f64>; 3]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = bands[0].len();
        let mut d = vec![0.0; n];
        // l1[i] = L[i][i-1], l2[i] = L[i][i-2]
        let mut l1 = vec![0.0; n];
        let mut l2 = vec![0.0; n];
        for i in 0..n {
            if i >= 2 {
                l2[i] = bands[2][i] / d[i - 2];
            }
            if i >= 1 {
                let mut v = bands[1][i];
                if i >= 2 {
                    v -= l2[i] * l1[i - 1] * d[i - 2];
                }
                l1[i] = v / d[i - 1];
            }
            let mut v = bands[0][i];
            if i >= 1 {
                v -= l1[i] * l1[i] * d[i - 1];
            }
            if i >= 2 {
                v -= l2[i] * l2[i] * d[i - 2];
            }
            d[i] = v;
        }
        (d, l1, l2)
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut y = rhs.to_vec();
        for i in 0..n {
            if i >= 1 {
                y[i] -= self.l1[i] * y[i - 1];
            }
            if i >= 2 {
                y[i] -= self.l2[i] * y[i - 2];
            }
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                y[i] -= self.l1[i + 1] * y[i + 1];
            }
            if i + 2 < n {
                y[i] -= self.l2[i + 2] * y[i + 2];
            }
        }
        y
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut v = self.bands[0][i] * x[i];
                for k in 1..=2 {
                    if i >= k {
                        v += self.bands[k][i] * x[i - k];
                    }
                    if i + k < n {
                        v += self.bands[k][i + k] * x[i + k];
                    }
                }
                v
            })
            .collect()
    }

    /// Direct solve plus iterative refinement until the max-abs residual is
    /// within `rel_tol` of the right-hand side's scale.
    fn solve_refined(&self, rhs: &[f64], rel_tol: f64) -> Vec<f64> {
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut x = self.solve(rhs);
        for _ in 0..3 {
            let ax = self.mul(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            if r.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= rel_tol * scale {
                break;
            }
            let dx = self.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        }
        x
    }
}

/// Windows of `round(win_s * fps)` samples every `round(hop_s * fps)` samples.
pub fn sliding_windows<'a>(signal: &'a [f64], fps: f64, plan: &WindowPlan) -> Result<Vec<(usize, &'a [f64])>> {
    plan.validate()?;
    let (win, hop) = plan.samples(fps);
    let count = plan.count(signal.len(), fps);
    if count == 0 {
        return Err(Error::Length(format!(
            "{} samples is shorter than one {win}-sample window",
            signal.len()
        )));
    }
    Ok((0..count).map(|k| (k * hop, &signal[k * hop..k * hop + win])).collect())
}

/// Divides each row by its own mean.
pub fn mean_normalize(window: [&[f64]; 3]) -> Result<[Vec<f64>; 3]> {
    let mut out: [Vec<f64>; 3] = Default::default();
    for (c, row) in window.iter().enumerate() {
        let mean = mean(row);
        if !(mean > 1e-12) {
            return Err(Error::DegenerateWindow(format!("channel {c} mean {mean} is not positive")));
        }
        out[c] = row.iter().map(|v| v / mean).collect();
    }
    Ok(out)
}

/// Zero mean, unit (population) variance. Constant input maps to zeros.
pub fn zscore(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    let sd = std_dev(x);
    if sd <= 0.0 {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - m) / sd).collect()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}
