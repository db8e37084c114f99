//! Plane-orthogonal-to-skin pulse extraction with overlap-add.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::bandpass_butterworth;
use crate::traces::{mean, mean_normalize, std_dev, PulseSignal, RawTraces};

use super::{FILTER_ORDER, PULSE_BAND};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PosConfig {
    pub window_s: f64,
    /// Rows span the plane orthogonal to the normalized skin tone `(1, 1, 1)`.
    pub projection: [[f64; 3]; 2],
}

impl Default for PosConfig {
    fn default() -> Self {
        PosConfig {
            window_s: 1.6,
            projection: [[0.0, 1.0, -1.0], [-2.0, 1.0, 1.0]],
        }
    }
}

impl PosConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_s > 0.0) {
            return Err(Error::Config("POS window must be > 0 s".into()));
        }
        let [a, b] = self.projection;
        let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        if cross.iter().all(|c| c.abs() < 1e-12) {
            return Err(Error::Config("POS projection rows must be linearly independent".into()));
        }
        Ok(())
    }

    pub fn window_len(&self, fps: f64) -> usize {
        (self.window_s * fps).round() as usize
    }
}

/// Overlap-added POS signal before band-pass filtering.
pub fn pos_overlap_add(traces: &RawTraces, cfg: &PosConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = traces.len();
    let win = cfg.window_len(traces.fps);
    if win == 0 || n < win {
        return Err(Error::Length(format!("POS needs at least {win} samples, got {n}")));
    }
    let [p1, p2] = cfg.projection;
    let mut out = vec![0.0; n];
    for start in 0..=n - win {
        let [r, g, b] = traces.channels.each_ref().map(|c| &c[start..start + win]);
        let c = mean_normalize([r, g, b]).map_err(|e| Error::at_frame(start, e))?;
        let project = |p: [f64; 3]| -> Vec<f64> {
            (0..win).map(|t| p[0] * c[0][t] + p[1] * c[1][t] + p[2] * c[2][t]).collect()
        };
        let (s1, s2) = (project(p1), project(p2));
        let sd2 = std_dev(&s2);
        let ratio = if sd2 < 1e-12 { 0.0 } else { std_dev(&s1) / sd2 };
        let h: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + ratio * b).collect();
        let m = mean(&h);
        for (o, v) in out[start..start + win].iter_mut().zip(&h) {
            *o += v - m;
        }
    }
    Ok(out)
}

pub fn extract_pos(traces: &RawTraces, cfg: &PosConfig) -> Result<PulseSignal> {
    let raw = pos_overlap_add(traces, cfg)?;
    let samples = bandpass_butterworth(&raw, traces.fps, PULSE_BAND.0, PULSE_BAND.1, FILTER_ORDER)?;
    Ok(PulseSignal {
        samples,
        fps: traces.fps,
    })
}
