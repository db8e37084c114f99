//! Enhance → ROI → traces → pulse → metrics, for one recording or a dataset
//! sweep, plus the artifact writers (report CSVs, spectrogram SVG/CSV).

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enhance::{Enhancement, LimeConfig};
use crate::error::{Error, Result};
use crate::metrics::{aggregate_report, evaluate_video, spectrogram, EvalReport, EvalRow, SnrConfig, Spectrogram, VideoScore};
use crate::recording::{load_recording, write_recording, META_FILE};
use crate::roi::{roi_from_landmarks, track_roi, BoundingBox, LandmarkSet, RoiTrack, TrackerConfig, DEFAULT_INSET};
use crate::rppg::{self, extract_green, Method, MethodConfig};
use crate::synth::{generate_recording, SynthConfig};
use crate::traces::{spatial_average, std_dev, RawTraces, WindowPlan};
use crate::video::Recording;

pub const REPORT_FILE: &str = "report.csv";
pub const VIDEOS_FILE: &str = "videos.csv";
pub const IOU_FILE: &str = "iou.csv";
pub const SPECTROGRAM_DIR: &str = "spectrograms";
/// Centered box used when neither landmarks nor a ROI hint are available.
pub const FALLBACK_ROI_FRACTION: f64 = 0.4;
pub const SPECTROGRAM_MAX_BPM: f64 = 300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub enhance: Vec<Enhancement>,
    pub method: Vec<Method>,
    pub jobs: Option<usize>,
    /// Landmark CSV applied to every recording; overrides per-recording landmarks.
    pub landmarks: Option<PathBuf>,
    pub roi_inset: f64,
    pub seed: u64,
    pub emit_spectrogram: bool,
    pub synth: Option<PathBuf>,
    pub window: WindowPlan,
    pub snr: SnrConfig,
    pub lime: LimeConfig,
    pub tracker: TrackerConfig,
    pub rppg: MethodConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            out: PathBuf::from("out"),
            enhance: Enhancement::ALL.to_vec(),
            method: Method::ALL.to_vec(),
            jobs: None,
            landmarks: None,
            roi_inset: DEFAULT_INSET,
            seed: 0,
            emit_spectrogram: false,
            synth: None,
            window: WindowPlan::default(),
            snr: SnrConfig::default(),
            lime: LimeConfig::default(),
            tracker: TrackerConfig::default(),
            rppg: MethodConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => e.into(),
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.enhance.is_empty() || self.method.is_empty() {
            return Err(Error::Config("need at least one enhancement and one method".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        if !(0.0..0.4).contains(&self.roi_inset) {
            return Err(Error::Config(format!("ROI inset {} outside [0, 0.4)", self.roi_inset)));
        }
        self.window.validate()?;
        self.lime.validate()?;
        self.rppg.pos.validate()
    }

    /// Method settings with the run seed applied to ICA.
    pub fn method_config(&self) -> MethodConfig {
        let mut m = self.rppg.clone();
        m.ica.seed = self.seed;
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Enhance,
    Roi,
    Traces,
    Method,
    Metrics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Load => "load",
            Stage::Enhance => "enhance",
            Stage::Roi => "roi",
            Stage::Traces => "traces",
            Stage::Method => "method",
            Stage::Metrics => "metrics",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("recording `{recording}`: {stage} stage failed: {source}")]
pub struct StageError {
    pub recording: String,
    pub stage: Stage,
    #[source]
    pub source: Error,
}

/// Chooses the first-frame ROI: landmarks, then the recording's hint, then
/// a centered box. The result is clipped to the frame.
pub fn initial_roi(rec: &Recording, dir: Option<&Path>, cfg: &RunConfig) -> Result<BoundingBox> {
    let landmarks = cfg.landmarks.clone().or_else(|| {
        rec.meta
            .landmarks_path
            .as_ref()
            .map(|p| dir.map_or_else(|| PathBuf::from(p), |d| d.join(p)))
    });
    let (w, h) = (rec.video.width(), rec.video.height());
    let roi = match (landmarks, rec.meta.roi_hint) {
        (Some(path), _) => roi_from_landmarks(&LandmarkSet::load(&path)?, cfg.roi_inset)?,
        (None, Some(hint)) => hint,
        (None, None) => BoundingBox::centered(w, h, FALLBACK_ROI_FRACTION)?,
    };
    roi.clip_to(w, h)
        .ok_or_else(|| Error::Geometry(format!("ROI {roi:?} lies outside the {w}x{h} frame")))
}

/// Output of the enhancement, ROI and trace stages for one enhancement.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub enhancement: Enhancement,
    pub track: RoiTrack,
    pub traces: RawTraces,
    /// Mean IOU of the track against the recording's reference box.
    pub mean_iou: Option<f64>,
}

impl Prepared {
    /// Peak amplitude (√2·RMS) of the detrended, band-passed green trace.
    pub fn green_amplitude(&self) -> Result<f64> {
        Ok(std_dev(&extract_green(&self.traces)?.samples) * std::f64::consts::SQRT_2)
    }
}

pub fn prepare(
    rec: &Recording,
    dir: Option<&Path>,
    enhancement: Enhancement,
    cfg: &RunConfig,
) -> std::result::Result<Prepared, (Stage, Error)> {
    let video = enhancement.apply(&rec.video, &cfg.lime).map_err(|e| (Stage::Enhance, e))?;
    let roi = initial_roi(rec, dir, cfg).map_err(|e| (Stage::Roi, e))?;
    let track = track_roi(&video, roi, cfg.tracker).map_err(|e| (Stage::Roi, e))?;
    let traces = spatial_average(&video, &track).map_err(|e| (Stage::Traces, e))?;
    let mean_iou = rec.meta.roi_hint.map(|hint| track.mean_iou(&hint));
    Ok(Prepared {
        enhancement,
        track,
        traces,
        mean_iou,
    })
}

#[derive(Debug, Clone)]
pub struct VideoResult {
    pub recording: String,
    pub row: EvalRow,
    pub score: VideoScore,
    pub spectrogram: Option<Spectrogram>,
}

#[derive(Debug, Default)]
pub struct RecordingOutcome {
    pub videos: Vec<VideoResult>,
    pub failures: Vec<StageError>,
    /// `(enhancement, mean IOU)` for each prepared enhancement with a reference box.
    pub ious: Vec<(Enhancement, f64)>,
}

/// Runs every configured (enhancement, method) pair on one recording.
/// Failures are collected per stage; the remaining pairs still run.
pub fn evaluate_recording(rec: &Recording, id: &str, dir: Option<&Path>, cfg: &RunConfig) -> RecordingOutcome {
    let mut out = RecordingOutcome::default();
    let fail = |stage: Stage, source: Error| StageError {
        recording: id.to_string(),
        stage,
        source,
    };
    let methods = cfg.method_config();
    for &enhancement in &cfg.enhance {
        let prepared = match prepare(rec, dir, enhancement, cfg) {
            Ok(p) => p,
            Err((stage, e)) => {
                out.failures.push(fail(stage, e));
                continue;
            }
        };
        if let Some(iou) = prepared.mean_iou {
            out.ious.push((enhancement, iou));
        }
        for &method in &cfg.method {
            match score_method(rec, &prepared, method, &methods, cfg) {
                Ok((score, spectrogram)) => out.videos.push(VideoResult {
                    recording: id.to_string(),
                    row: EvalRow {
                        lux: rec.meta.lux,
                        method,
                        enhancement,
                        snr_db: score.snr_db,
                        mae_bpm: score.mae_bpm,
                        rmse_bpm: score.rmse_bpm,
                        mean_iou: prepared.mean_iou,
                        n_windows: score.n_windows,
                    },
                    score,
                    spectrogram,
                }),
                Err((stage, e)) => out.failures.push(fail(stage, e)),
            }
        }
    }
    out
}

fn score_method(
    rec: &Recording,
    prepared: &Prepared,
    method: Method,
    methods: &MethodConfig,
    cfg: &RunConfig,
) -> std::result::Result<(VideoScore, Option<Spectrogram>), (Stage, Error)> {
    let pulse = rppg::extract(method, &prepared.traces, methods).map_err(|e| (Stage::Method, e))?;
    let score = evaluate_video(&pulse, &rec.ground_truth, &cfg.window, &cfg.snr).map_err(|e| (Stage::Metrics, e))?;
    let sg = if cfg.emit_spectrogram {
        Some(spectrogram(&pulse.samples, pulse.fps, &cfg.window, SPECTROGRAM_MAX_BPM).map_err(|e| (Stage::Metrics, e))?)
    } else {
        None
    };
    Ok((score, sg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IouRow {
    pub lux: f64,
    pub enhancement: Enhancement,
    pub mean_iou: f64,
    pub n_recordings: usize,
}

#[derive(Debug, Default)]
pub struct RunSummary {
    pub report: EvalReport,
    pub videos: Vec<VideoResult>,
    pub failures: Vec<StageError>,
    pub iou: Vec<IouRow>,
}

/// Recording directories under `root`, sorted by name. A directory holding
/// a meta file is itself a single recording.
pub fn find_recordings(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.is_dir() {
        return Err(Error::NotFound(root.to_path_buf()));
    }
    if root.join(META_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(META_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Config(format!("no recordings under {}", root.display())));
    }
    Ok(dirs)
}

fn recording_id(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Loads and evaluates recordings in parallel (bounded by `jobs`), then
/// reduces the results in input order.
pub fn evaluate_recordings(dirs: &[PathBuf], cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let outcomes: Vec<(f64, RecordingOutcome)> = pool.install(|| {
        dirs.par_iter()
            .map(|dir| {
                let id = recording_id(dir);
                match load_recording(dir) {
                    Ok(rec) => (rec.meta.lux, evaluate_recording(&rec, &id, Some(dir), cfg)),
                    Err(source) => (
                        f64::NAN,
                        RecordingOutcome {
                            failures: vec![StageError {
                                recording: id,
                                stage: Stage::Load,
                                source,
                            }],
                            ..RecordingOutcome::default()
                        },
                    ),
                }
            })
            .collect()
    });
    Ok(reduce(outcomes))
}

fn reduce(outcomes: Vec<(f64, RecordingOutcome)>) -> RunSummary {
    let mut summary = RunSummary::default();
    let mut ious: BTreeMap<(u64, &'static str), (f64, Enhancement, Vec<f64>)> = BTreeMap::new();
    for (lux, o) in outcomes {
        for f in &o.failures {
            log::warn!("{f}");
        }
        for (enh, iou) in o.ious {
            ious.entry((lux.to_bits(), enh.name()))
                .or_insert_with(|| (lux, enh, Vec::new()))
                .2
                .push(iou);
        }
        summary.videos.extend(o.videos);
        summary.failures.extend(o.failures);
    }
    let rows: Vec<EvalRow> = summary.videos.iter().map(|v| v.row.clone()).collect();
    summary.report = aggregate_report(&rows);
    summary.iou = ious
        .into_values()
        .map(|(lux, enhancement, v)| IouRow {
            lux,
            enhancement,
            mean_iou: v.iter().sum::<f64>() / v.len() as f64,
            n_recordings: v.len(),
        })
        .collect();
    summary
}

/// Evaluates one recording directory and writes the artifacts to `cfg.out`.
pub fn run_pipeline(recording_dir: &Path, cfg: &RunConfig) -> Result<RunSummary> {
    if !recording_dir.join(META_FILE).is_file() {
        return Err(Error::NotFound(recording_dir.join(META_FILE)));
    }
    let summary = evaluate_recordings(&[recording_dir.to_path_buf()], cfg)?;
    write_outputs(&summary, &cfg.out)?;
    Ok(summary)
}

/// Sweeps every recording under `root` and writes the artifacts to `cfg.out`.
pub fn run_benchmark(root: &Path, cfg: &RunConfig) -> Result<RunSummary> {
    let dirs = find_recordings(root)?;
    let summary = evaluate_recordings(&dirs, cfg)?;
    write_outputs(&summary, &cfg.out)?;
    Ok(summary)
}

pub fn videos_csv(videos: &[VideoResult]) -> String {
    let mut out = String::from("recording,lux,method,enhancement,snr_db,mae_bpm,rmse_bpm,mean_iou,n_windows\n");
    for v in videos {
        let r = &v.row;
        let iou = r.mean_iou.map(|x| format!("{x:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{},{:.4},{},{},{:.6},{:.6},{:.6},{},{}",
            v.recording, r.lux, r.method, r.enhancement, r.snr_db, r.mae_bpm, r.rmse_bpm, iou, r.n_windows
        )
        .unwrap();
    }
    out
}

pub fn iou_csv(rows: &[IouRow]) -> String {
    let mut out = String::from("lux,enhancement,mean_iou,n_recordings\n");
    for r in rows {
        writeln!(out, "{:.4},{},{:.6},{}", r.lux, r.enhancement, r.mean_iou, r.n_recordings).unwrap();
    }
    out
}

pub fn write_outputs(summary: &RunSummary, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(REPORT_FILE), summary.report.to_csv())?;
    fs::write(out.join(VIDEOS_FILE), videos_csv(&summary.videos))?;
    if !summary.iou.is_empty() {
        fs::write(out.join(IOU_FILE), iou_csv(&summary.iou))?;
    }
    for v in &summary.videos {
        if let Some(sg) = &v.spectrogram {
            let dir = out.join(SPECTROGRAM_DIR);
            fs::create_dir_all(&dir)?;
            let stem = format!("{}_{}_{}", v.recording, v.row.enhancement, v.row.method);
            emit_spectrogram_svg(sg, &dir.join(format!("{stem}.svg")))?;
            fs::write(dir.join(format!("{stem}.csv")), sg.to_csv())?;
            fs::write(dir.join(format!("{stem}_ridge.csv")), sg.ridge_csv())?;
        }
    }
    Ok(())
}

/// Synthetic dataset description: a base config swept over illumination
/// scales and seeds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthPlan {
    #[serde(flatten)]
    pub base: SynthConfig,
    pub illum_scales: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SynthPlan {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
            _ => e.into(),
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn configs(&self) -> Vec<SynthConfig> {
        let scales = if self.illum_scales.is_empty() { vec![self.base.illum_scale] } else { self.illum_scales.clone() };
        let seeds = if self.seeds.is_empty() { vec![self.base.seed] } else { self.seeds.clone() };
        scales
            .iter()
            .flat_map(|&illum_scale| {
                seeds.iter().map(move |&seed| SynthConfig {
                    illum_scale,
                    seed,
                    ..self.base.clone()
                })
            })
            .collect()
    }
}

/// Generates and writes every recording of `plan` under `root`.
pub fn generate_dataset(plan: &SynthPlan, root: &Path) -> Result<Vec<PathBuf>> {
    plan.configs()
        .iter()
        .map(|cfg| {
            let rec = generate_recording(cfg)?;
            let dir = root.join(format!("{}_lux{:08.3}_seed{}", cfg.subject_id, cfg.lux(), cfg.seed));
            write_recording(&rec, &dir)
        })
        .collect()
}

const SVG_LEFT: f64 = 48.0;
const SVG_TOP: f64 = 12.0;
const SVG_PLOT_W: f64 = 720.0;
const SVG_PLOT_H: f64 = 300.0;
const SVG_BPM_ROW: f64 = 5.0;

/// Heat map with time across (0 to the signal duration), 0 to `max_bpm`
/// upward, one `<g class="col">` per window and a `*` on each column's peak.
pub fn spectrogram_svg(sg: &Spectrogram) -> Result<String> {
    if sg.columns() == 0 || sg.freqs_bpm.is_empty() {
        return Err(Error::Length("spectrogram has no columns".into()));
    }
    let rows = (sg.max_bpm / SVG_BPM_ROW).ceil().max(1.0) as usize;
    let peak = sg.magnitudes.iter().flatten().cloned().fold(0.0, f64::max);
    let hop = if sg.columns() > 1 { sg.times_s[1] - sg.times_s[0] } else { sg.window_s };
    let sx = SVG_PLOT_W / sg.duration_s;
    let row_h = SVG_PLOT_H / rows as f64;
    let y_of = |bpm: f64| SVG_TOP + SVG_PLOT_H * (1.0 - bpm / sg.max_bpm);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
        SVG_LEFT + SVG_PLOT_W + 12.0,
        SVG_TOP + SVG_PLOT_H + 36.0
    )
    .unwrap();
    writeln!(s, r#"<rect x="{SVG_LEFT}" y="{SVG_TOP}" width="{SVG_PLOT_W}" height="{SVG_PLOT_H}" fill="hsl(240,100%,50%)"/>"#).unwrap();
    for (k, col) in sg.magnitudes.iter().enumerate() {
        let center = sg.times_s[k] + sg.window_s / 2.0;
        let x = SVG_LEFT + (center - hop / 2.0) * sx;
        let mut pooled = vec![0.0f64; rows];
        for (m, bpm) in col.iter().zip(&sg.freqs_bpm) {
            let r = ((bpm / SVG_BPM_ROW) as usize).min(rows - 1);
            pooled[r] = pooled[r].max(*m);
        }
        writeln!(s, r#"<g class="col" data-t="{:.3}">"#, sg.times_s[k]).unwrap();
        for (r, m) in pooled.iter().enumerate() {
            let v = if peak > 0.0 { m / peak } else { 0.0 };
            writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{row_h:.2}" fill="hsl({:.0},100%,50%)"/>"#,
                SVG_TOP + SVG_PLOT_H - (r + 1) as f64 * row_h,
                hop * sx,
                240.0 * (1.0 - v)
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text class="ridge" x="{:.2}" y="{:.2}" fill="white" text-anchor="middle" dominant-baseline="central">*</text>"#,
            SVG_LEFT + center * sx,
            y_of(sg.ridge_bpm[k])
        )
        .unwrap();
        s.push_str("</g>\n");
    }
    let bottom = SVG_TOP + SVG_PLOT_H;
    writeln!(s, r#"<text x="{SVG_LEFT}" y="{:.0}">0 s</text>"#, bottom + 14.0).unwrap();
    writeln!(
        s,
        r#"<text x="{:.0}" y="{:.0}" text-anchor="end">{:.0} s</text>"#,
        SVG_LEFT + SVG_PLOT_W,
        bottom + 14.0,
        sg.duration_s
    )
    .unwrap();
    writeln!(s, r#"<text x="{:.0}" y="{:.0}" text-anchor="end">0</text>"#, SVG_LEFT - 4.0, bottom).unwrap();
    writeln!(
        s,
        r#"<text x="{:.0}" y="{:.0}" text-anchor="end">{:.0}</text>"#,
        SVG_LEFT - 4.0,
        SVG_TOP + 8.0,
        sg.max_bpm
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{:.0}" y="{:.0}" text-anchor="middle">time (s) / heart rate (BPM)</text>"#,
        SVG_LEFT + SVG_PLOT_W / 2.0,
        bottom + 30.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_spectrogram_svg(sg: &Spectrogram, path: &Path) -> Result<()> {
    let svg = spectrogram_svg(sg)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, svg)?;
    Ok(())
}
