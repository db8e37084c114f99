//! Low-light enhancement: histogram equalization and illumination-map recovery.

mod he;
mod lime;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use he::{enhance_video_he, equalize_channel, histogram_equalize};
pub use lime::{
    enhance_frame_lime, enhance_video_lime, gradient_weights, initial_illumination, recover_reflectance,
    refine_illumination, solve_surrogate, surrogate_objective, surrogate_weights, IlluminationMap, LimeConfig,
    SolveStats, SurrogateSystem, WeightField,
};

use crate::error::{Error, Result};
use crate::video::FrameSequence;

/// Which enhancement runs before ROI extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Enhancement {
    None,
    He,
    Lime,
}

impl Enhancement {
    pub const ALL: [Enhancement; 3] = [Enhancement::None, Enhancement::He, Enhancement::Lime];

    pub fn name(self) -> &'static str {
        match self {
            Enhancement::None => "none",
            Enhancement::He => "he",
            Enhancement::Lime => "lime",
        }
    }

    pub fn apply<'a>(self, video: &'a FrameSequence, lime: &LimeConfig) -> Result<Cow<'a, FrameSequence>> {
        Ok(match self {
            Enhancement::None => Cow::Borrowed(video),
            Enhancement::He => Cow::Owned(enhance_video_he(video)?),
            Enhancement::Lime => Cow::Owned(enhance_video_lime(video, lime)?),
        })
    }
}

impl fmt::Display for Enhancement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Enhancement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Enhancement::None),
            "he" => Ok(Enhancement::He),
            "lime" => Ok(Enhancement::Lime),
            other => Err(Error::Config(format!("unknown enhancement `{other}` (none|he|lime)"))),
        }
    }
}
