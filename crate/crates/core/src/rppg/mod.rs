//! Pulse extractors: Green, ICA and POS.

mod ica;
mod pos;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ica::{extract_ica, fast_ica, ica_select, IcaComponents, IcaConfig, IcaSelection};
pub use pos::{extract_pos, pos_overlap_add, PosConfig};

use crate::error::{Error, Result};
use crate::filter::bandpass_butterworth;
use crate::traces::{detrend_smoothness_prior, PulseSignal, RawTraces};

/// Heart-rate band in Hz (42–150 BPM).
pub const PULSE_BAND: (f64, f64) = (0.7, 2.5);
pub const DETREND_LAMBDA: f64 = 100.0;
pub const FILTER_ORDER: usize = 3;

/// Green row, detrended and band-passed.
pub fn extract_green(traces: &RawTraces) -> Result<PulseSignal> {
    let detrended = detrend_smoothness_prior(traces.green(), DETREND_LAMBDA)?;
    let samples = bandpass_butterworth(&detrended, traces.fps, PULSE_BAND.0, PULSE_BAND.1, FILTER_ORDER)?;
    Ok(PulseSignal {
        samples,
        fps: traces.fps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Green,
    Ica,
    Pos,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Green, Method::Ica, Method::Pos];

    pub fn name(self) -> &'static str {
        match self {
            Method::Green => "green",
            Method::Ica => "ica",
            Method::Pos => "pos",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "green" => Ok(Method::Green),
            "ica" => Ok(Method::Ica),
            "pos" => Ok(Method::Pos),
            other => Err(Error::Config(format!("unknown method `{other}` (green|ica|pos)"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    pub ica: IcaConfig,
    pub pos: PosConfig,
}

pub fn extract(method: Method, traces: &RawTraces, cfg: &MethodConfig) -> Result<PulseSignal> {
    match method {
        Method::Green => extract_green(traces),
        Method::Ica => extract_ica(traces, &cfg.ica),
        Method::Pos => extract_pos(traces, &cfg.pos),
    }
}
