//! On-disk recording layout.
//!
//! ```text
//! <dir>/meta.json              subject_id, lux, fps, duration_s, [roi_hint], [landmarks_path]
//! <dir>/gt.csv                 t_s,ppg,hr_bpm   (hr_bpm may be empty)
//! <dir>/frames/frame_000001.bmp  (or .png), numbered from 1 without gaps
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::video::{Frame, FrameSequence, GroundTruthPpg, Recording, RecordingMeta};

pub const META_FILE: &str = "meta.json";
pub const GT_FILE: &str = "gt.csv";
pub const FRAMES_DIR: &str = "frames";
pub const GT_HEADER: &str = "t_s,ppg,hr_bpm";

/// Loads a recording directory.
pub fn load_recording(dir: &Path) -> Result<Recording> {
    let meta_path = dir.join(META_FILE);
    let gt_path = dir.join(GT_FILE);
    let frames_dir = dir.join(FRAMES_DIR);
    for p in [&meta_path, &gt_path, &frames_dir] {
        if !p.exists() {
            return Err(Error::NotFound(p.clone()));
        }
    }

    let meta: RecordingMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
    meta.validate()?;
    let ground_truth = parse_ground_truth(&fs::read_to_string(&gt_path)?)?;

    let paths = frame_paths(&frames_dir)?;
    let mut frames = Vec::with_capacity(paths.len());
    for path in &paths {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        frames.push(Frame::from_bytes(w as usize, h as usize, img.into_raw())?);
    }
    let video = FrameSequence::new(frames, meta.fps)?;

    Ok(Recording {
        video,
        ground_truth,
        meta,
    })
}

/// Frame files in index order; rejects gaps and mixed duplicates.
fn frame_paths(frames_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut indexed = BTreeMap::new();
    for entry in fs::read_dir(frames_dir)? {
        let path = entry?.path();
        let Some(index) = frame_index(&path) else {
            continue;
        };
        if indexed.insert(index, path.clone()).is_some() {
            return Err(Error::Format(format!("duplicate frame index {index}")));
        }
    }
    if indexed.is_empty() {
        return Err(Error::Format(format!("no frames in {}", frames_dir.display())));
    }
    for (expected, &index) in (1usize..).zip(indexed.keys()) {
        if index != expected {
            return Err(Error::Format(format!(
                "frame index gap: expected {expected}, found {index}"
            )));
        }
    }
    Ok(indexed.into_values().collect())
}

fn frame_index(path: &Path) -> Option<usize> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    if ext != "bmp" && ext != "png" {
        return None;
    }
    let digits = path.file_stem()?.to_str()?.strip_prefix("frame_")?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.bmp")
}

fn parse_ground_truth(text: &str) -> Result<GroundTruthPpg> {
    let mut lines = text.lines();
    let header = lines.next().map(str::trim).unwrap_or_default();
    if header != GT_HEADER {
        return Err(Error::Format(format!("gt.csv header must be `{GT_HEADER}`, got `{header}`")));
    }
    let mut times = Vec::new();
    let mut ppg = Vec::new();
    let mut hr = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "gt.csv line {}: expected 3 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("gt.csv line {}: bad number `{s}`", lineno + 2)))
        };
        times.push(num(fields[0])?);
        ppg.push(num(fields[1])?);
        hr.push(if fields[2].is_empty() { None } else { Some(num(fields[2])?) });
    }
    if times.len() < 2 {
        return Err(Error::Format("gt.csv needs at least two samples".into()));
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(Error::Format("gt.csv timestamps must increase".into()));
    }
    let mut sample_rate = (times.len() - 1) as f64 / span;
    if (sample_rate - sample_rate.round()).abs() < 1e-6 {
        sample_rate = sample_rate.round();
    }
    let hr_bpm = if hr.iter().all(Option::is_none) {
        None
    } else if hr.iter().all(Option::is_some) {
        Some(hr.into_iter().flatten().collect())
    } else {
        return Err(Error::Format("gt.csv hr_bpm must be filled on all rows or none".into()));
    };
    GroundTruthPpg::new(ppg, sample_rate, hr_bpm)
}

/// Serializes the ground truth in the `gt.csv` layout.
pub fn format_ground_truth(gt: &GroundTruthPpg) -> String {
    let mut out = String::with_capacity(gt.samples.len() * 32);
    out.push_str(GT_HEADER);
    out.push('\n');
    for (i, v) in gt.samples.iter().enumerate() {
        let t = i as f64 / gt.sample_rate;
        match &gt.hr_bpm {
            Some(hr) => writeln!(out, "{t},{v},{}", hr[i]),
            None => writeln!(out, "{t},{v},"),
        }
        .expect("writing to a String cannot fail");
    }
    out
}

/// Writes a recording in the layout [`load_recording`] reads. Frames are
/// stored as 8-bit BMP, so float frames are quantized on the way out.
pub fn write_recording(recording: &Recording, dir: &Path) -> Result<PathBuf> {
    let frames_dir = dir.join(FRAMES_DIR);
    fs::create_dir_all(&frames_dir)?;
    fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&recording.meta)?)?;
    fs::write(dir.join(GT_FILE), format_ground_truth(&recording.ground_truth))?;
    for (i, frame) in recording.video.frames().iter().enumerate() {
        let img = RgbImage::from_raw(frame.width() as u32, frame.height() as u32, frame.to_bytes())
            .expect("frame buffer size is checked at construction");
        img.save_with_format(frames_dir.join(frame_file_name(i + 1)), ImageFormat::Bmp)?;
    }
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(fps: f64) -> RecordingMeta {
        RecordingMeta {
            subject_id: "s01".into(),
            lux: 10.0,
            fps,
            duration_s: 0.1,
            roi_hint: None,
            landmarks_path: None,
        }
    }

    fn fixture(dir: &Path, indices: &[usize]) {
        fs::create_dir_all(dir.join(FRAMES_DIR)).unwrap();
        fs::write(dir.join(META_FILE), serde_json::to_string(&meta(30.0)).unwrap()).unwrap();
        fs::write(dir.join(GT_FILE), "t_s,ppg,hr_bpm\n0,0.1,\n0.5,0.2,\n1.0,0.3,\n").unwrap();
        let img = RgbImage::from_fn(4, 4, |x, y| image::Rgb([x as u8 * 10, y as u8 * 20, 77]));
        for &i in indices {
            img.save(dir.join(FRAMES_DIR).join(frame_file_name(i))).unwrap();
        }
    }

    #[test]
    fn loads_identical_frames() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path(), &[1, 2, 3]);
        let rec = load_recording(tmp.path()).unwrap();
        assert_eq!(rec.video.len(), 3);
        assert_eq!(rec.video.fps(), 30.0);
        assert_eq!((rec.video.width(), rec.video.height()), (4, 4));
        assert!(rec.video.frames().windows(2).all(|w| w[0] == w[1]));
        assert_eq!(rec.ground_truth.sample_rate, 2.0);
        assert!(rec.ground_truth.hr_bpm.is_none());
    }

    #[test]
    fn frame_gap_is_format_error() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path(), &[1, 2, 4]);
        assert!(matches!(load_recording(tmp.path()), Err(Error::Format(_))));
    }

    #[test]
    fn missing_meta_is_not_found() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path(), &[1]);
        fs::remove_file(tmp.path().join(META_FILE)).unwrap();
        assert!(matches!(load_recording(tmp.path()), Err(Error::NotFound(_))));
    }

    #[test]
    fn inconsistent_dimensions_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path(), &[1, 2]);
        RgbImage::new(5, 4).save(tmp.path().join(FRAMES_DIR).join(frame_file_name(3))).unwrap();
        assert!(matches!(load_recording(tmp.path()), Err(Error::Format(_))));
    }

    #[test]
    fn png_frames_are_accepted() {
        let tmp = tempfile::tempdir().unwrap();
        fixture(tmp.path(), &[]);
        let img = RgbImage::from_pixel(2, 2, image::Rgb([1, 2, 3]));
        img.save(tmp.path().join(FRAMES_DIR).join("frame_000001.png")).unwrap();
        let rec = load_recording(tmp.path()).unwrap();
        assert_eq!(rec.video.frames()[0].to_bytes(), vec![1, 2, 3].repeat(4));
    }

    #[test]
    fn ground_truth_round_trips() {
        let gt = GroundTruthPpg::new(
            (0..90).map(|i| (i as f64 * 0.37).sin()).collect(),
            30.0,
            Some(vec![72.0; 90]),
        )
        .unwrap();
        let parsed = parse_ground_truth(&format_ground_truth(&gt)).unwrap();
        assert_eq!(parsed, gt);
    }

    #[test]
    fn partially_empty_hr_column_rejected() {
        let text = "t_s,ppg,hr_bpm\n0,1,70\n1,2,\n";
        assert!(parse_ground_truth(text).is_err());
    }
}
