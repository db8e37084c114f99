use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("signal too short: {0}")]
    Length(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("degenerate window: {0}")]
    DegenerateWindow(String),

    #[error("ICA did not converge after {0} iterations")]
    Convergence(usize),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("metric error: {0}")]
    Metric(String),

    /// Wraps an error raised while processing one frame of a video.
    #[error("frame {index}: {source}")]
    AtFrame {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_frame(index: usize, source: Error) -> Self {
        Error::AtFrame {
            index,
            source: Box::new(source),
        }
    }
}
