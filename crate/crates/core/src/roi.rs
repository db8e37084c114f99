//! Skin ROI construction, template tracking and overlap scoring.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::{Frame, FrameSequence};

/// Axis-aligned box in pixel coordinates, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[i64; 4]")]
pub struct BoundingBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl BoundingBox {
    pub fn new(x: i64, y: i64, w: i64, h: i64) -> Result<Self> {
        if w <= 0 || h <= 0 {
            return Err(Error::Geometry(format!("box {x},{y},{w},{h} has no area")));
        }
        Ok(BoundingBox { x, y, w, h })
    }

    pub fn area(&self) -> i64 {
        self.w * self.h
    }

    pub fn right(&self) -> i64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> i64 {
        self.y + self.h
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Self {
        BoundingBox {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| BoundingBox {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }

    /// The part of the box inside a `width`×`height` frame.
    pub fn clip_to(&self, width: usize, height: usize) -> Option<BoundingBox> {
        self.intersection(&BoundingBox {
            x: 0,
            y: 0,
            w: width as i64,
            h: height as i64,
        })
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.x >= 0 && self.y >= 0 && self.right() <= width as i64 && self.bottom() <= height as i64
    }

    /// Centered box covering `fraction` of each frame dimension.
    pub fn centered(width: usize, height: usize, fraction: f64) -> Result<Self> {
        let w = ((width as f64 * fraction).round() as i64).max(1);
        let h = ((height as f64 * fraction).round() as i64).max(1);
        BoundingBox::new((width as i64 - w) / 2, (height as i64 - h) / 2, w, h)
    }
}

impl TryFrom<[i64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [i64; 4]) -> Result<Self> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [i64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

pub const LANDMARK_COUNT: usize = 66;

/// The 66-point facial landmark layout, stored 0-based and addressed 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<(f64, f64)>,
}

impl LandmarkSet {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() != LANDMARK_COUNT {
            return Err(Error::Format(format!(
                "expected {LANDMARK_COUNT} landmarks, got {}",
                points.len()
            )));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Format("non-finite landmark coordinate".into()));
        }
        Ok(LandmarkSet { points })
    }

    /// Reads the landmark CSV: 66 lines of `x,y`.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let text = fs::read_to_string(path)?;
        let mut points = Vec::with_capacity(LANDMARK_COUNT);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse = |s: Option<&str>| {
                s.and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Format(format!("landmarks line {}: expected `x,y`", i + 1)))
            };
            let mut parts = line.split(',');
            let x = parse(parts.next())?;
            let y = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Format(format!("landmarks line {}: expected `x,y`", i + 1)));
            }
            points.push((x, y));
        }
        LandmarkSet::new(points)
    }

    /// 1-based landmark lookup.
    pub fn point(&self, index: usize) -> Option<(f64, f64)> {
        index.checked_sub(1).and_then(|i| self.points.get(i)).copied()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        LandmarkSet {
            points: self.points.iter().map(|(x, y)| (x + dx, y + dy)).collect(),
        }
    }
}

/// Which landmarks bound the ROI on each side (1-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarkRoles {
    pub left: usize,
    pub right: usize,
    pub top: usize,
    pub bottom: usize,
}

impl Default for LandmarkRoles {
    /// Jaw points 5 and 13 bound the cheeks, nose point 29 the top, and
    /// point 51 above the mouth the bottom.
    fn default() -> Self {
        LandmarkRoles {
            left: 5,
            right: 13,
            top: 29,
            bottom: 51,
        }
    }
}

pub const DEFAULT_INSET: f64 = 0.05;

/// Builds the cheek/nose ROI from landmarks, inset by `inset_fraction` of
/// each dimension on every side.
pub fn roi_from_landmarks(lm: &LandmarkSet, inset_fraction: f64) -> Result<BoundingBox> {
    roi_from_landmarks_with(lm, inset_fraction, LandmarkRoles::default())
}

pub fn roi_from_landmarks_with(
    lm: &LandmarkSet,
    inset_fraction: f64,
    roles: LandmarkRoles,
) -> Result<BoundingBox> {
    if !(0.0..0.4).contains(&inset_fraction) {
        return Err(Error::Config(format!(
            "inset fraction must be in [0, 0.4), got {inset_fraction}"
        )));
    }
    let get = |i: usize| {
        lm.point(i)
            .ok_or_else(|| Error::Config(format!("landmark index {i} out of range")))
    };
    let (l, r, t, b) = (get(roles.left)?, get(roles.right)?, get(roles.top)?, get(roles.bottom)?);
    let (left, right) = (l.0.min(r.0), l.0.max(r.0));
    let (top, bottom) = (t.1.min(b.1), t.1.max(b.1));
    let (width, height) = (right - left, bottom - top);
    if width <= 0.0 || height <= 0.0 {
        return Err(Error::Geometry(format!(
            "landmark hull is degenerate ({width} x {height})"
        )));
    }
    let round = |v: f64| (v + 0.5).floor() as i64;
    let x0 = round(left + inset_fraction * width);
    let x1 = round(right - inset_fraction * width);
    let y0 = round(top + inset_fraction * height);
    let y1 = round(bottom - inset_fraction * height);
    BoundingBox::new(x0, y0, x1 - x0, y1 - y0)
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection(b).map_or(0, |i| i.area());
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Per-frame ROI boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiTrack {
    pub boxes: Vec<BoundingBox>,
}

impl RoiTrack {
    /// The same box for `n` frames.
    pub fn constant(b: BoundingBox, n: usize) -> Self {
        RoiTrack { boxes: vec![b; n] }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Mean IOU against a fixed reference box.
    pub fn mean_iou(&self, reference: &BoundingBox) -> f64 {
        self.boxes.iter().map(|b| iou(b, reference)).sum::<f64>() / self.boxes.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub search_radius: usize,
    pub accept_threshold: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            search_radius: 16,
            accept_threshold: 0.5,
        }
    }
}

/// Tracks the frame-1 ROI by normalized cross-correlation of the grayscale
/// template within `search_radius` of the previous box. Weak matches keep
/// the previous box. The template is never updated.
pub fn track_roi(video: &FrameSequence, initial: BoundingBox, cfg: TrackerConfig) -> Result<RoiTrack> {
    let (width, height) = (video.width(), video.height());
    if !initial.fits_in(width, height) {
        return Err(Error::Geometry(format!(
            "initial box {:?} is not inside the {width}x{height} frame",
            <[i64; 4]>::from(initial)
        )));
    }
    let frames = video.frames();
    let template = Template::new(&frames[0].luma(), width, initial);

    let mut boxes = Vec::with_capacity(frames.len());
    boxes.push(initial);
    let mut prev = initial;
    for frame in &frames[1..] {
        let image = LumaImage::new(frame);
        if let Some((best, score)) = template.best_match(&image, prev, cfg.search_radius) {
            if score >= cfg.accept_threshold {
                prev = best;
            }
        }
        boxes.push(prev);
    }
    Ok(RoiTrack { boxes })
}

struct Template {
    w: usize,
    h: usize,
    /// Zero-mean template values, row-major.
    centered: Vec<f64>,
    norm: f64,
}

impl Template {
    fn new(luma: &[f64], frame_width: usize, b: BoundingBox) -> Self {
        let (w, h) = (b.w as usize, b.h as usize);
        let mut values = Vec::with_capacity(w * h);
        for y in 0..h {
            let row = (b.y as usize + y) * frame_width + b.x as usize;
            values.extend_from_slice(&luma[row..row + w]);
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        Template { w, h, centered, norm }
    }

    /// Highest-NCC placement within the search window. Ties keep the
    /// candidate found first in row-major scan order.
    fn best_match(&self, img: &LumaImage, prev: BoundingBox, radius: usize) -> Option<(BoundingBox, f64)> {
        if self.norm <= 1e-12 {
            return None;
        }
        let r = radius as i64;
        let x_lo = (prev.x - r).max(0);
        let y_lo = (prev.y - r).max(0);
        let x_hi = (prev.x + r).min(img.width as i64 - self.w as i64);
        let y_hi = (prev.y + r).min(img.height as i64 - self.h as i64);
        if x_hi < x_lo || y_hi < y_lo {
            return None;
        }
        let n = (self.w * self.h) as f64;
        let row_best: Vec<Option<(i64, f64)>> = (y_lo..=y_hi)
            .into_par_iter()
            .map(|y| {
                let mut best: Option<(i64, f64)> = None;
                for x in x_lo..=x_hi {
                    let (xu, yu) = (x as usize, y as usize);
                    let (sum, sum_sq) = img.window_sums(xu, yu, self.w, self.h);
                    let var = sum_sq - sum * sum / n;
                    if var <= 1e-12 {
                        continue;
                    }
                    let mut dot = 0.0;
                    for ty in 0..self.h {
                        let row = &img.values[(yu + ty) * img.width + xu..][..self.w];
                        let trow = &self.centered[ty * self.w..][..self.w];
                        dot += row.iter().zip(trow).map(|(a, b)| a * b).sum::<f64>();
                    }
                    let score = dot / (self.norm * var.sqrt());
                    if best.is_none_or(|(_, s)| score > s) {
                        best = Some((x, score));
                    }
                }
                best
            })
            .collect();
        let mut best: Option<(BoundingBox, f64)> = None;
        for (y, cand) in (y_lo..).zip(row_best) {
            if let Some((x, score)) = cand {
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((prev_with(prev, x, y), score));
                }
            }
        }
        best
    }
}

fn prev_with(prev: BoundingBox, x: i64, y: i64) -> BoundingBox {
    BoundingBox { x, y, ..prev }
}

/// Luma plane with summed-area tables for O(1) window statistics.
struct LumaImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl LumaImage {
    fn new(frame: &Frame) -> Self {
        let (width, height) = (frame.width(), frame.height());
        let values = frame.luma();
        let stride = width + 1;
        let mut sum = vec![0.0; stride * (height + 1)];
        let mut sum_sq = vec![0.0; stride * (height + 1)];
        for y in 0..height {
            let (mut row, mut row_sq) = (0.0, 0.0);
            for x in 0..width {
                let v = values[y * width + x];
                row += v;
                row_sq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + row;
                sum_sq[(y + 1) * stride + x + 1] = sum_sq[y * stride + x + 1] + row_sq;
            }
        }
        LumaImage {
            width,
            height,
            values,
            sum,
            sum_sq,
        }
    }

    fn window_sums(&self, x: usize, y: usize, w: usize, h: usize) -> (f64, f64) {
        let s = self.width + 1;
        let rect = |t: &[f64]| t[(y + h) * s + x + w] - t[y * s + x + w] - t[(y + h) * s + x] + t[y * s + x];
        (rect(&self.sum), rect(&self.sum_sq))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn landmarks(p5: (f64, f64), p13: (f64, f64), p29: (f64, f64), p51: (f64, f64)) -> LandmarkSet {
        let mut pts = vec![(0.0, 0.0); LANDMARK_COUNT];
        pts[4] = p5;
        pts[12] = p13;
        pts[28] = p29;
        pts[50] = p51;
        LandmarkSet::new(pts).unwrap()
    }

    #[test]
    fn hull_without_inset() {
        let lm = landmarks((10.0, 50.0), (90.0, 50.0), (50.0, 40.0), (50.0, 80.0));
        assert_eq!(roi_from_landmarks(&lm, 0.0).unwrap(), BoundingBox::new(10, 40, 80, 40).unwrap());
    }

    #[test]
    fn hull_with_inset() {
        let lm = landmarks((10.0, 50.0), (90.0, 50.0), (50.0, 40.0), (50.0, 80.0));
        assert_eq!(roi_from_landmarks(&lm, 0.1).unwrap(), BoundingBox::new(18, 44, 64, 32).unwrap());
    }

    #[test]
    fn vertical_collinear_points_are_degenerate() {
        let lm = landmarks((50.0, 10.0), (50.0, 30.0), (50.0, 40.0), (50.0, 80.0));
        assert!(matches!(roi_from_landmarks(&lm, 0.0), Err(Error::Geometry(_))));
    }

    #[test]
    fn inset_out_of_range_rejected() {
        let lm = landmarks((10.0, 50.0), (90.0, 50.0), (50.0, 40.0), (50.0, 80.0));
        assert!(roi_from_landmarks(&lm, 0.4).is_err());
    }

    #[test]
    fn landmark_count_enforced() {
        assert!(LandmarkSet::new(vec![(0.0, 0.0); 65]).is_err());
    }

    #[test]
    fn iou_fixtures() {
        let a = BoundingBox::new(0, 0, 2, 2).unwrap();
        let b = BoundingBox::new(1, 0, 2, 2).unwrap();
        let far = BoundingBox::new(10, 10, 2, 2).unwrap();
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &far), 0.0);
        assert_eq!(iou(&a, &b), 1.0 / 3.0);
    }

    #[test]
    fn bounding_box_serializes_as_array() {
        let b = BoundingBox::new(1, 2, 3, 4).unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), "[1,2,3,4]");
        assert!(serde_json::from_str::<BoundingBox>("[1,2,0,4]").is_err());
    }

    fn textured(width: usize, height: usize, ox: i64, oy: i64) -> Frame {
        let mut v = vec![0.0; width * height * 3];
        for y in 0..height {
            for x in 0..width {
                let val = crate::synth::texture(x as i64 - ox, y as i64 - oy);
                for c in 0..3 {
                    v[(y * width + x) * 3 + c] = val;
                }
            }
        }
        Frame::from_normalized(width, height, v).unwrap()
    }

    #[test]
    fn static_video_keeps_initial_box() {
        let frames = vec![textured(40, 30, 0, 0); 4];
        let video = FrameSequence::new(frames, 30.0).unwrap();
        let init = BoundingBox::new(10, 8, 12, 10).unwrap();
        let track = track_roi(&video, init, TrackerConfig::default()).unwrap();
        assert_eq!(track, RoiTrack::constant(init, 4));
    }

    #[test]
    fn black_video_reuses_previous_box() {
        let black = Frame::from_bytes(20, 20, vec![0; 1200]).unwrap();
        let video = FrameSequence::new(vec![black; 3], 30.0).unwrap();
        let init = BoundingBox::new(5, 5, 6, 6).unwrap();
        let track = track_roi(&video, init, TrackerConfig::default()).unwrap();
        assert!(track.boxes.iter().all(|b| *b == init));
    }

    #[test]
    fn initial_box_outside_frame_rejected() {
        let video = FrameSequence::new(vec![textured(20, 20, 0, 0)], 30.0).unwrap();
        let init = BoundingBox::new(15, 15, 10, 10).unwrap();
        assert!(matches!(
            track_roi(&video, init, TrackerConfig::default()),
            Err(Error::Geometry(_))
        ));
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded(
            ax in -20i64..20, ay in -20i64..20, aw in 1i64..15, ah in 1i64..15,
            bx in -20i64..20, by in -20i64..20, bw in 1i64..15, bh in 1i64..15,
        ) {
            let a = BoundingBox::new(ax, ay, aw, ah).unwrap();
            let b = BoundingBox::new(bx, by, bw, bh).unwrap();
            prop_assert_eq!(iou(&a, &b), iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&iou(&a, &b)));
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn landmark_roi_is_translation_equivariant(dx in -50i32..50, dy in -50i32..50, inset in 0.0f64..0.39) {
            let lm = landmarks((10.0, 50.0), (90.0, 50.0), (50.0, 40.0), (50.0, 80.0));
            let base = roi_from_landmarks(&lm, inset).unwrap();
            let moved = roi_from_landmarks(&lm.translate(dx as f64, dy as f64), inset).unwrap();
            prop_assert_eq!(moved, base.translate(dx as i64, dy as i64));
        }

        #[test]
        fn tracker_recovers_integer_shifts(dx in -6i64..=6, dy in -6i64..=6) {
            let frames = vec![textured(48, 40, 0, 0), textured(48, 40, dx, dy)];
            let video = FrameSequence::new(frames, 30.0).unwrap();
            let init = BoundingBox::new(16, 14, 14, 12).unwrap();
            let cfg = TrackerConfig { search_radius: 8, accept_threshold: 0.5 };
            let track = track_roi(&video, init, cfg).unwrap();
            prop_assert_eq!(track.boxes[1], init.translate(dx, dy));
        }
    }
}
