//! Low-light remote photoplethysmography: Retinex enhancement, ROI tracking,
//! pulse extraction (Green, ICA, POS) and heart-rate evaluation.

pub mod enhance;
pub mod error;
pub mod filter;
pub mod metrics;
pub mod pipeline;
pub mod recording;
pub mod roi;
pub mod rppg;
pub mod spectral;
pub mod synth;
pub mod traces;
pub mod video;

pub use enhance::{Enhancement, LimeConfig};
pub use error::{Error, Result};
pub use metrics::{EvalReport, EvalRow, SnrConfig, Spectrogram};
pub use recording::{load_recording, write_recording};
pub use roi::{BoundingBox, LandmarkSet, RoiTrack, TrackerConfig};
pub use rppg::{Method, MethodConfig};
pub use synth::{generate_recording, SynthConfig};
pub use traces::{PulseSignal, RawTraces, WindowPlan};
pub use video::{Frame, FrameSequence, GroundTruthPpg, Recording, RecordingMeta};
