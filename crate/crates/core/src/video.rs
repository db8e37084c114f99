//! Video, ground-truth and metadata types shared by every stage.
//!
//! Pixel values are conceptually doubles in `[0, 1]` with channel order
//! R, G, B. Frames that came from (or are headed to) 8-bit storage keep
//! their bytes and are converted on access with [`to_normalized`]; this
//! keeps minute-long recordings at one byte per sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roi::BoundingBox;

/// Converts 8-bit samples to normalized doubles, `v / 255`.
pub fn to_normalized(bytes: &[u8]) -> Vec<f64> {
    bytes.iter().map(|&b| byte_to_unit(b)).collect()
}

/// Inverse of [`to_normalized`]: clamps to `[0, 1]` and rounds half up.
pub fn quantize(values: &[f64]) -> Vec<u8> {
    values.iter().map(|&v| unit_to_byte(v)).collect()
}

#[inline]
pub fn byte_to_unit(b: u8) -> f64 {
    b as f64 / 255.0
}

#[inline]
pub fn unit_to_byte(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

#[derive(Debug, Clone, PartialEq)]
enum Samples {
    Bytes(Vec<u8>),
    Float(Vec<f64>),
}

/// One interleaved RGB frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    samples: Samples,
}

impl Frame {
    pub fn from_bytes(width: usize, height: usize, bytes: Vec<u8>) -> Result<Self> {
        check_len(width, height, bytes.len())?;
        Ok(Frame {
            width,
            height,
            samples: Samples::Bytes(bytes),
        })
    }

    /// Builds a float frame. Values are expected in `[0, 1]`.
    pub fn from_normalized(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_len(width, height, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite pixel value".into()));
        }
        Ok(Frame {
            width,
            height,
            samples: Samples::Float(values),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_quantized(&self) -> bool {
        matches!(self.samples, Samples::Bytes(_))
    }

    /// Normalized value of channel `c` at `(x, y)`.
    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        let i = (y * self.width + x) * 3 + c;
        match &self.samples {
            Samples::Bytes(b) => byte_to_unit(b[i]),
            Samples::Float(f) => f[i],
        }
    }

    /// Interleaved normalized samples.
    pub fn to_normalized(&self) -> Vec<f64> {
        match &self.samples {
            Samples::Bytes(b) => to_normalized(b),
            Samples::Float(f) => f.clone(),
        }
    }

    /// Interleaved 8-bit samples; float frames are quantized.
    pub fn to_bytes(&self) -> Vec<u8> {
        match &self.samples {
            Samples::Bytes(b) => b.clone(),
            Samples::Float(f) => quantize(f),
        }
    }

    /// One channel as a row-major plane of normalized values.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        let n = self.width * self.height;
        match &self.samples {
            Samples::Bytes(b) => (0..n).map(|i| byte_to_unit(b[i * 3 + c])).collect(),
            Samples::Float(f) => (0..n).map(|i| f[i * 3 + c]).collect(),
        }
    }

    /// Rec. 601 luma plane.
    pub fn luma(&self) -> Vec<f64> {
        let n = self.width * self.height;
        (0..n)
            .map(|i| {
                let (x, y) = (i % self.width, i / self.width);
                0.299 * self.get(x, y, 0) + 0.587 * self.get(x, y, 1) + 0.114 * self.get(x, y, 2)
            })
            .collect()
    }

    /// The same frame stored as 8-bit samples.
    pub fn quantized(&self) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            samples: Samples::Bytes(self.to_bytes()),
        }
    }
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("empty frame {width}x{height}")));
    }
    if len != width * height * 3 {
        return Err(Error::Format(format!(
            "frame {width}x{height} needs {} samples, got {len}",
            width * height * 3
        )));
    }
    Ok(())
}

/// Ordered frames sharing one size, with their frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::Config(format!("fps must be positive, got {fps}")));
        }
        let first = frames
            .first()
            .ok_or_else(|| Error::Format("a video needs at least one frame".into()))?;
        let (w, h) = (first.width, first.height);
        if let Some((i, f)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| f.width != w || f.height != h)
        {
            return Err(Error::Format(format!(
                "frame {} is {}x{}, expected {w}x{h}",
                i + 1,
                f.width,
                f.height
            )));
        }
        Ok(FrameSequence { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }
}

/// Contact PPG reference.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPpg {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    /// Reference heart rate aligned with `samples`, when the recording provides one.
    pub hr_bpm: Option<Vec<f64>>,
}

impl GroundTruthPpg {
    pub fn new(samples: Vec<f64>, sample_rate: f64, hr_bpm: Option<Vec<f64>>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Config(format!(
                "PPG sample rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(hr) = &hr_bpm {
            if hr.len() != samples.len() {
                return Err(Error::Format(format!(
                    "{} heart-rate values for {} PPG samples",
                    hr.len(),
                    samples.len()
                )));
            }
            if let Some(v) = hr.iter().find(|v| !(**v > 0.0 && **v < 300.0)) {
                return Err(Error::Format(format!("reference heart rate {v} outside (0, 300)")));
            }
        }
        Ok(GroundTruthPpg {
            samples,
            sample_rate,
            hr_bpm,
        })
    }

    /// Mean reference heart rate over `[start_s, end_s)`, if one is recorded.
    pub fn mean_hr_between(&self, start_s: f64, end_s: f64) -> Option<f64> {
        let hr = self.hr_bpm.as_ref()?;
        let lo = (start_s * self.sample_rate).round().max(0.0) as usize;
        let hi = ((end_s * self.sample_rate).round() as usize).min(hr.len());
        if lo >= hi {
            return hr.get(lo.min(hr.len().saturating_sub(1))).copied();
        }
        Some(hr[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub subject_id: String,
    pub lux: f64,
    pub fps: f64,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi_hint: Option<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks_path: Option<String>,
}

impl RecordingMeta {
    pub fn validate(&self) -> Result<()> {
        if !(self.lux > 0.0) {
            return Err(Error::Format(format!("lux must be positive, got {}", self.lux)));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::Format(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if !(self.fps > 0.0) {
            return Err(Error::Format(format!("fps must be positive, got {}", self.fps)));
        }
        Ok(())
    }
}

/// A loaded or generated recording.
#[derive(Debug, Clone)]
pub struct Recording {
    pub video: FrameSequence,
    pub ground_truth: GroundTruthPpg,
    pub meta: RecordingMeta,
}
