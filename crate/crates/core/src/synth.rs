//! Seeded synthetic recordings: a skin-coloured field modulated by a
//! two-harmonic pulse, scaled by an illumination factor, with additive
//! sensor noise and optional 8-bit quantization.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roi::BoundingBox;
use crate::video::{quantize, Frame, FrameSequence, GroundTruthPpg, Recording, RecordingMeta};

pub use crate::recording::write_recording;

/// Lux reported for `illum_scale = 1`.
pub const LUX_AT_FULL_SCALE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub subject_id: String,
    pub fps: f64,
    pub duration_s: f64,
    pub width: usize,
    pub height: usize,
    pub hr_bpm: f64,
    /// Per-channel pulse amplitude (R, G, B).
    pub pulse_amp: [f64; 3],
    pub base_color: [f64; 3],
    pub illum_scale: f64,
    pub noise_sigma: f64,
    pub second_harmonic: f64,
    pub quantize: bool,
    pub seed: u64,
    /// Rigid translation of a textured patch, in px/frame.
    pub motion: Option<(f64, f64)>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let a = 0.02;
        SynthConfig {
            subject_id: "synth".into(),
            fps: 30.0,
            duration_s: 60.0,
            width: 32,
            height: 24,
            hr_bpm: 72.0,
            pulse_amp: [0.2 * a, a, 0.4 * a],
            base_color: [0.7, 0.5, 0.4],
            illum_scale: 1.0,
            noise_sigma: 0.01,
            second_harmonic: 0.3,
            quantize: true,
            seed: 0,
            motion: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.fps > 0.0 && self.duration_s > 0.0) || self.fps * self.duration_s < 1.0 {
            return bad(format!(
                "fps·duration must be at least one frame (fps {}, duration {} s)",
                self.fps, self.duration_s
            ));
        }
        if self.width == 0 || self.height == 0 {
            return bad("frame size must be non-zero".into());
        }
        if !(self.hr_bpm > 0.0 && self.hr_bpm < 300.0) {
            return bad(format!("heart rate {} BPM outside (0, 300)", self.hr_bpm));
        }
        if !(self.illum_scale > 0.0 && self.illum_scale <= 1.0) {
            return bad(format!("illum_scale {} outside (0, 1]", self.illum_scale));
        }
        if !(self.noise_sigma >= 0.0 && self.second_harmonic >= 0.0) {
            return bad("noise sigma and harmonic amplitude must be ≥ 0".into());
        }
        for c in 0..3 {
            let (b, a) = (self.base_color[c], self.pulse_amp[c]);
            if !(a >= 0.0 && b >= 0.0) || b + a > 1.0 {
                return bad(format!(
                    "channel {c}: need base ≥ 0, amplitude ≥ 0 and base + amplitude ≤ 1 (got {b} + {a})"
                ));
            }
        }
        if let Some((dx, dy)) = self.motion {
            if !(dx.is_finite() && dy.is_finite()) {
                return bad("motion must be finite".into());
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.fps * self.duration_s).round() as usize
    }

    pub fn lux(&self) -> f64 {
        LUX_AT_FULL_SCALE * self.illum_scale
    }

    /// Unit-amplitude pulse waveform at time `t` seconds.
    pub fn pulse(&self, t: f64) -> f64 {
        let f0 = self.hr_bpm / 60.0;
        (2.0 * PI * f0 * t).sin() + self.second_harmonic * (4.0 * PI * f0 * t).sin()
    }

    /// Box of the moving patch at frame 0; `None` without motion.
    pub fn patch_origin(&self) -> Option<BoundingBox> {
        self.motion?;
        let (w, h) = ((self.width / 4).max(1) as i64, (self.height / 4).max(1) as i64);
        BoundingBox::new(w / 2, h / 2, w, h).ok()
    }

    /// Patch box at frame `i`, translated by the rounded accumulated motion.
    pub fn patch_at(&self, i: usize) -> Option<BoundingBox> {
        let (dx, dy) = self.motion?;
        let b = self.patch_origin()?;
        let off = |d: f64| (d * i as f64 + 0.5).floor() as i64;
        Some(b.translate(off(dx), off(dy)))
    }

    /// Region a face detector would report for the first frame.
    pub fn roi_hint(&self) -> BoundingBox {
        self.patch_origin().unwrap_or_else(|| {
            BoundingBox::centered(self.width, self.height, 0.5).expect("frame size validated")
        })
    }
}

/// Illumination scales of the 11-point sweep, 10⁰ to 10² lux at 0.2 decade steps.
pub fn lux_sweep_scales() -> Vec<f64> {
    (0..=10).map(|k| 10f64.powf(k as f64 / 5.0) / LUX_AT_FULL_SCALE).collect()
}

/// Deterministic hash texture in `[0, 1)`.
pub fn texture(x: i64, y: i64) -> f64 {
    let mut h = (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= h >> 31;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 29;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

pub fn generate_recording(cfg: &SynthConfig) -> Result<Recording> {
    cfg.validate()?;
    let n = cfg.frame_count();
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let frames = (0..n)
        .into_par_iter()
        .map(|i| render_frame(cfg, i, &noise))
        .collect::<Result<Vec<_>>>()?;
    let video = FrameSequence::new(frames, cfg.fps)?;
    let samples: Vec<f64> = (0..n).map(|i| cfg.pulse(i as f64 / cfg.fps)).collect();
    let ground_truth = GroundTruthPpg::new(samples, cfg.fps, Some(vec![cfg.hr_bpm; n]))?;
    let meta = RecordingMeta {
        subject_id: cfg.subject_id.clone(),
        lux: cfg.lux(),
        fps: cfg.fps,
        duration_s: n as f64 / cfg.fps,
        roi_hint: Some(cfg.roi_hint()),
        landmarks_path: None,
    };
    Ok(Recording {
        video,
        ground_truth,
        meta,
    })
}

fn render_frame(cfg: &SynthConfig, i: usize, noise: &Normal<f64>) -> Result<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i as u64);
    let p = cfg.pulse(i as f64 / cfg.fps);
    let s = cfg.illum_scale;
    let skin: [f64; 3] = std::array::from_fn(|c| cfg.base_color[c] + cfg.pulse_amp[c] * p);
    let patch = cfg.patch_at(i);
    let (w, h) = (cfg.width, cfg.height);
    let mut values = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as i64, y as i64);
            let clean: [f64; 3] = match patch {
                None => skin,
                Some(b) if xi >= b.x && xi < b.right() && yi >= b.y && yi < b.bottom() => {
                    let m = 0.6 + 0.8 * texture(xi - b.x, yi - b.y);
                    std::array::from_fn(|c| cfg.base_color[c] * m + cfg.pulse_amp[c] * p)
                }
                Some(_) => cfg.base_color.map(|b| 0.3 * b),
            };
            for v in clean {
                let n = if cfg.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                values.push((s * v + n).clamp(0.0, 1.0));
            }
        }
    }
    if cfg.quantize {
        Frame::from_bytes(w, h, quantize(&values))
    } else {
        Frame::from_normalized(w, h, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roi::RoiTrack;
    use crate::spectral::Periodogram;
    use crate::traces::spatial_average;

    fn small(secs: f64) -> SynthConfig {
        SynthConfig {
            duration_s: secs,
            width: 8,
            height: 6,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn still_field_is_constant() {
        let cfg = SynthConfig {
            pulse_amp: [0.0; 3],
            noise_sigma: 0.0,
            ..small(1.0)
        };
        let rec = generate_recording(&cfg).unwrap();
        let first = &rec.video.frames()[0];
        assert!(rec.video.frames().iter().all(|f| f == first));
    }

    #[test]
    fn exact_green_trace_without_noise_or_quantization() {
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            quantize: false,
            illum_scale: 0.3,
            ..small(3.0)
        };
        let rec = generate_recording(&cfg).unwrap();
        let full = BoundingBox::new(0, 0, 8, 6).unwrap();
        let tr = spatial_average(&rec.video, &RoiTrack::constant(full, rec.video.len())).unwrap();
        for (i, g) in tr.green().iter().enumerate() {
            let want = 0.3 * (0.5 + 0.02 * cfg.pulse(i as f64 / 30.0));
            assert!((g - want).abs() < 1e-12);
        }
    }

    #[test]
    fn dim_quantized_pulse_is_below_one_lsb() {
        let cfg = SynthConfig {
            illum_scale: 0.01,
            noise_sigma: 0.0,
            second_harmonic: 0.0,
            ..small(2.0)
        };
        let peak_to_peak = 2.0 * cfg.pulse_amp[1] * cfg.illum_scale;
        assert!(peak_to_peak < 1.0 / 255.0);
        let rec = generate_recording(&cfg).unwrap();
        let g: Vec<f64> = rec.video.frames().iter().map(|f| f.get(0, 0, 1)).collect();
        let span = g.iter().cloned().fold(f64::MIN, f64::max) - g.iter().cloned().fold(f64::MAX, f64::min);
        assert!(span <= 1.0 / 255.0 + 1e-12);
    }

    #[test]
    fn ground_truth_and_meta() {
        let cfg = SynthConfig { illum_scale: 0.25, ..small(2.0) };
        let rec = generate_recording(&cfg).unwrap();
        assert_eq!(rec.video.len(), 60);
        assert_eq!(rec.ground_truth.samples.len(), 60);
        assert_eq!(rec.ground_truth.samples[5], cfg.pulse(5.0 / 30.0));
        assert!(rec.ground_truth.hr_bpm.as_ref().unwrap().iter().all(|&h| h == 72.0));
        assert_eq!(rec.meta.lux, 25.0);
        assert_eq!(rec.meta.roi_hint, Some(cfg.roi_hint()));
    }

    #[test]
    fn seed_is_reproducible() {
        let a = generate_recording(&small(1.0)).unwrap();
        let b = generate_recording(&small(1.0)).unwrap();
        let c = generate_recording(&SynthConfig { seed: 1, ..small(1.0) }).unwrap();
        assert_eq!(a.video, b.video);
        assert_ne!(a.video, c.video);
    }

    #[test]
    fn invalid_configs() {
        let cases = [
            SynthConfig { illum_scale: 0.0, ..small(1.0) },
            SynthConfig { illum_scale: 1.5, ..small(1.0) },
            SynthConfig { base_color: [0.999, 0.5, 0.4], ..small(1.0) },
            SynthConfig { pulse_amp: [-0.1, 0.0, 0.0], ..small(1.0) },
            SynthConfig { duration_s: 0.01, ..small(1.0) },
            SynthConfig { width: 0, ..small(1.0) },
        ];
        for cfg in cases {
            assert!(matches!(generate_recording(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn patch_moves_rigidly() {
        let cfg = SynthConfig {
            width: 64,
            height: 48,
            motion: Some((3.0, 2.0)),
            noise_sigma: 0.0,
            pulse_amp: [0.0; 3],
            ..small(0.2)
        };
        let rec = generate_recording(&cfg).unwrap();
        let (b0, b3) = (cfg.patch_at(0).unwrap(), cfg.patch_at(3).unwrap());
        assert_eq!((b3.x - b0.x, b3.y - b0.y), (9, 6));
        let (f0, f3) = (&rec.video.frames()[0], &rec.video.frames()[3]);
        for y in 0..b0.h as usize {
            for x in 0..b0.w as usize {
                let (x0, y0) = (b0.x as usize + x, b0.y as usize + y);
                assert_eq!(f0.get(x0, y0, 1), f3.get(x0 + 9, y0 + 6, 1));
            }
        }
    }

    #[test]
    fn sweep_grid() {
        let s = lux_sweep_scales();
        assert_eq!(s.len(), 11);
        assert!((s[0] - 0.01).abs() < 1e-15 && (s[10] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn texture_range() {
        for (x, y) in [(0, 0), (-5, 3), (1000, -7)] {
            let t = texture(x, y);
            assert!((0.0..1.0).contains(&t));
        }
        assert_ne!(texture(0, 0), texture(1, 0));
    }

    #[test]
    fn dimming_never_raises_band_fraction() {
        let fraction = |scale: f64| {
            let rec = generate_recording(&SynthConfig { illum_scale: scale, ..small(20.0) }).unwrap();
            let roi = rec.meta.roi_hint.unwrap();
            let tr = spatial_average(&rec.video, &RoiTrack::constant(roi, rec.video.len())).unwrap();
            Periodogram::new(tr.green(), 30.0, 0.01).band_fraction(0.7, 2.5)
        };
        let f: Vec<f64> = [1.0, 0.1, 0.01].iter().map(|&s| fraction(s)).collect();
        assert!(f[0] >= f[1] && f[1] >= f[2], "{f:?}");
    }
}
