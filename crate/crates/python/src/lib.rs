//! Python bindings: recordings, the signal-processing building blocks and
//! the benchmark runner. Signals cross the boundary as lists of floats.

use std::path::PathBuf;

use pyo3::exceptions::{PyFileNotFoundError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rppg_core::enhance::{enhance_frame_lime, histogram_equalize};
use rppg_core::filter::bandpass_butterworth;
use rppg_core::metrics::{self, SnrConfig};
use rppg_core::pipeline::{evaluate_recording, run_benchmark as core_run_benchmark, RunConfig};
use rppg_core::roi::{self, BoundingBox};
use rppg_core::rppg::{extract, MethodConfig, PULSE_BAND};
use rppg_core::synth::{generate_recording, SynthConfig};
use rppg_core::traces::{detrend_smoothness_prior, PulseSignal, RawTraces};
use rppg_core::{Enhancement, Error, Frame, LimeConfig, Method};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NotFound(p) => PyFileNotFoundError::new_err(p.display().to_string()),
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::Solver { .. } | Error::Convergence(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_list<T: std::str::FromStr<Err = Error>>(list: &str) -> Result<Vec<T>, Error> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// A loaded or synthesized recording.
#[pyclass(name = "Recording", module = "lowlight_rppg", frozen)]
struct PyRecording {
    inner: rppg_core::Recording,
}

#[pymethods]
impl PyRecording {
    /// Loads a recording directory (meta.json, gt.csv, frames/).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyRecording {
            inner: rppg_core::load_recording(&path).map_err(to_py)?,
        })
    }

    /// Generates a synthetic recording. `config` is a JSON object with any
    /// of the synthesizer fields; missing fields take their defaults.
    #[staticmethod]
    #[pyo3(signature = (config = None))]
    fn synthesize(config: Option<&str>) -> PyResult<Self> {
        let cfg: SynthConfig = match config {
            Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
            None => SynthConfig::default(),
        };
        Ok(PyRecording {
            inner: generate_recording(&cfg).map_err(to_py)?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<PathBuf> {
        rppg_core::write_recording(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn fps(&self) -> f64 {
        self.inner.video.fps()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.video.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.video.height()
    }

    #[getter]
    fn lux(&self) -> f64 {
        self.inner.meta.lux
    }

    #[getter]
    fn subject_id(&self) -> String {
        self.inner.meta.subject_id.clone()
    }

    #[getter]
    fn ppg(&self) -> Vec<f64> {
        self.inner.ground_truth.samples.clone()
    }

    #[getter]
    fn roi_hint(&self) -> Option<(i64, i64, i64, i64)> {
        self.inner.meta.roi_hint.map(|b| (b.x, b.y, b.w, b.h))
    }

    /// Interleaved RGB values in [0, 1] of frame `index`.
    fn frame(&self, index: usize) -> PyResult<Vec<f64>> {
        self.inner
            .video
            .frames()
            .get(index)
            .map(Frame::to_normalized)
            .ok_or_else(|| PyValueError::new_err(format!("frame {index} out of range")))
    }

    /// Scores every (enhancement, method) pair; returns one dict per run.
    #[pyo3(signature = (enhance = "none", method = "green,ica,pos", seed = 0))]
    fn evaluate<'py>(&self, py: Python<'py>, enhance: &str, method: &str, seed: u64) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let cfg = RunConfig {
            enhance: parse_list(enhance).map_err(to_py)?,
            method: parse_list(method).map_err(to_py)?,
            seed,
            ..RunConfig::default()
        };
        cfg.validate().map_err(to_py)?;
        let out = py.detach(|| evaluate_recording(&self.inner, &self.inner.meta.subject_id, None, &cfg));
        if out.videos.is_empty() {
            if let Some(f) = out.failures.into_iter().next() {
                return Err(PyRuntimeError::new_err(f.to_string()));
            }
        }
        out.videos
            .iter()
            .map(|v| {
                let d = PyDict::new(py);
                d.set_item("method", v.row.method.name())?;
                d.set_item("enhancement", v.row.enhancement.name())?;
                d.set_item("lux", v.row.lux)?;
                d.set_item("snr_db", v.row.snr_db)?;
                d.set_item("mae_bpm", v.row.mae_bpm)?;
                d.set_item("rmse_bpm", v.row.rmse_bpm)?;
                d.set_item("mean_iou", v.row.mean_iou)?;
                d.set_item("hr_bpm", v.score.est_hr_bpm.clone())?;
                Ok(d)
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.video.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Recording(subject_id={:?}, frames={}, {}x{}, fps={}, lux={})",
            self.inner.meta.subject_id,
            self.inner.video.len(),
            self.inner.video.width(),
            self.inner.video.height(),
            self.inner.video.fps(),
            self.inner.meta.lux
        )
    }
}

#[pyfunction]
#[pyo3(signature = (signal, fps, low = PULSE_BAND.0, high = PULSE_BAND.1, order = 3))]
fn bandpass(signal: Vec<f64>, fps: f64, low: f64, high: f64, order: usize) -> PyResult<Vec<f64>> {
    bandpass_butterworth(&signal, fps, low, high, order).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (signal, lam = 100.0))]
fn detrend(signal: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    detrend_smoothness_prior(&signal, lam).map_err(to_py)
}

/// Pulse signal from per-frame mean R, G, B traces.
#[pyfunction]
#[pyo3(signature = (red, green, blue, fps, method = "pos", seed = 0))]
fn extract_pulse(red: Vec<f64>, green: Vec<f64>, blue: Vec<f64>, fps: f64, method: &str, seed: u64) -> PyResult<Vec<f64>> {
    let method: Method = method.parse().map_err(to_py)?;
    let traces = RawTraces::new([red, green, blue], fps).map_err(to_py)?;
    let mut cfg = MethodConfig::default();
    cfg.ica.seed = seed;
    Ok(extract(method, &traces, &cfg).map_err(to_py)?.samples)
}

#[pyfunction]
#[pyo3(signature = (window, fps, low = PULSE_BAND.0, high = PULSE_BAND.1))]
fn hr_from_window(window: Vec<f64>, fps: f64, low: f64, high: f64) -> PyResult<f64> {
    metrics::hr_from_window(&window, fps, (low, high)).map_err(to_py)
}

#[pyfunction]
fn snr_db(pulse: Vec<f64>, fps: f64, gt_hr_bpm: f64) -> PyResult<f64> {
    metrics::snr_db(&PulseSignal { samples: pulse, fps }, gt_hr_bpm, &SnrConfig::default()).map_err(to_py)
}

#[pyfunction]
fn mae(est: Vec<f64>, gt: Vec<f64>) -> PyResult<f64> {
    metrics::mae(&est, &gt).map_err(to_py)
}

#[pyfunction]
fn rmse(est: Vec<f64>, gt: Vec<f64>) -> PyResult<f64> {
    metrics::rmse(&est, &gt).map_err(to_py)
}

/// Intersection over union of two `(x, y, w, h)` boxes.
#[pyfunction]
fn iou(a: (i64, i64, i64, i64), b: (i64, i64, i64, i64)) -> PyResult<f64> {
    let mk = |(x, y, w, h)| BoundingBox::new(x, y, w, h).map_err(to_py);
    Ok(roi::iou(&mk(a)?, &mk(b)?))
}

/// Enhances one interleaved-RGB frame with `he` or `lime`.
#[pyfunction]
#[pyo3(signature = (width, height, values, method = "lime"))]
fn enhance_frame(width: usize, height: usize, values: Vec<f64>, method: &str) -> PyResult<Vec<f64>> {
    let frame = Frame::from_normalized(width, height, values).map_err(to_py)?;
    let out = match method.parse::<Enhancement>().map_err(to_py)? {
        Enhancement::None => frame,
        Enhancement::He => histogram_equalize(&frame.quantized()),
        Enhancement::Lime => enhance_frame_lime(&frame, &LimeConfig::default()).map_err(to_py)?,
    };
    Ok(out.to_normalized())
}

/// Benchmarks every recording under `root`, writes the artifacts to `out`
/// and returns the report CSV text.
#[pyfunction]
#[pyo3(signature = (root, out, enhance = "none,he,lime", method = "green,ica,pos", jobs = None, seed = 0))]
fn run_benchmark(
    py: Python<'_>,
    root: PathBuf,
    out: PathBuf,
    enhance: &str,
    method: &str,
    jobs: Option<usize>,
    seed: u64,
) -> PyResult<String> {
    let cfg = RunConfig {
        out,
        enhance: parse_list(enhance).map_err(to_py)?,
        method: parse_list(method).map_err(to_py)?,
        jobs,
        seed,
        ..RunConfig::default()
    };
    let summary = py.detach(|| core_run_benchmark(&root, &cfg)).map_err(to_py)?;
    Ok(summary.report.to_csv())
}

#[pymodule]
fn lowlight_rppg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRecording>()?;
    m.add_function(wrap_pyfunction!(bandpass, m)?)?;
    m.add_function(wrap_pyfunction!(detrend, m)?)?;
    m.add_function(wrap_pyfunction!(extract_pulse, m)?)?;
    m.add_function(wrap_pyfunction!(hr_from_window, m)?)?;
    m.add_function(wrap_pyfunction!(snr_db, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(enhance_frame, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comma_lists_parse() {
        let m: Vec<Method> = parse_list("pos, green").unwrap();
        assert_eq!(m, vec![Method::Pos, Method::Green]);
        assert!(parse_list::<Enhancement>("he,bogus").is_err());
        assert!(parse_list::<Method>("").unwrap().is_empty());
    }

    #[test]
    fn functions_round_trip_through_python() {
        Python::initialize();
        Python::attach(|py| {
            let m = PyModule::new(py, "lowlight_rppg").unwrap();
            lowlight_rppg(&m).unwrap();
            let iou = m.getattr("iou").unwrap().call1(((0, 0, 10, 10), (5, 0, 10, 10))).unwrap();
            assert_eq!(iou.extract::<f64>().unwrap(), 1.0 / 3.0);
            let err = m.getattr("extract_pulse").unwrap().call1((vec![0.5; 10], vec![0.5; 10], vec![0.5; 10], 30.0, "chrom"));
            assert!(err.unwrap_err().is_instance_of::<PyValueError>(py));
        });
    }
}
