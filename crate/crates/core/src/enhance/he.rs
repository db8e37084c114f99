//! Per-channel histogram equalization on 8-bit frames.

use crate::video::{Frame, FrameSequence};
use crate::error::Result;

/// Equalizes one 8-bit channel in place. A channel with a single distinct
/// value is left unchanged.
pub fn equalize_channel(values: &mut [u8]) {
    let n = values.len();
    let mut hist = [0usize; 256];
    for &v in values.iter() {
        hist[v as usize] += 1;
    }
    let mut cdf = [0usize; 256];
    let mut acc = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    if cdf_min >= n {
        return;
    }
    let denom = (n - cdf_min) as f64;
    let lut: Vec<u8> = cdf
        .iter()
        .map(|&c| ((c.saturating_sub(cdf_min)) as f64 / denom * 255.0 + 0.5).floor() as u8)
        .collect();
    for v in values.iter_mut() {
        *v = lut[*v as usize];
    }
}

pub fn histogram_equalize(frame: &Frame) -> Frame {
    let mut bytes = frame.to_bytes();
    for c in 0..3 {
        let mut channel: Vec<u8> = bytes.iter().skip(c).step_by(3).copied().collect();
        equalize_channel(&mut channel);
        for (i, v) in channel.into_iter().enumerate() {
            bytes[i * 3 + c] = v;
        }
    }
    Frame::from_bytes(frame.width(), frame.height(), bytes).expect("size unchanged")
}

pub fn enhance_video_he(video: &FrameSequence) -> Result<FrameSequence> {
    let frames = video.frames().iter().map(histogram_equalize).collect();
    FrameSequence::new(frames, video.fps())
}
