//! Illumination-map enhancement with a green-channel initial estimate.
//!
//! The frame is modeled as reflectance times illumination. The initial
//! illumination `t_hat` is the green channel. It is refined by minimizing
//!
//! ```text
//! ||t_hat - t||² + alpha * Σ_d Σ_x w̃_d(x) (∂_d t(x))²
//! ```
//!
//! the quadratic surrogate of the weighted-ℓ1 gradient penalty, with
//! `w̃_d = W_d / (|∂_d t_hat| + eps)` and `W_d = 1 / (|∂_d t_hat| + eps)`.
//! Its minimizer solves one sparse SPD system, here by Jacobi-preconditioned
//! conjugate gradients. Reflectance is `L / max(T, t_floor)^gamma`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::{Frame, FrameSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub alpha: f64,
    pub epsilon_w: f64,
    pub gamma: f64,
    pub t_floor: f64,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            alpha: 0.15,
            epsilon_w: 1e-3,
            gamma: 0.8,
            t_floor: 0.004,
            solver_tol: 1e-6,
            solver_max_iter: 5000,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.alpha >= 0.0) {
            return bad("alpha must be >= 0");
        }
        if !(self.epsilon_w > 0.0) {
            return bad("epsilon_w must be > 0");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(self.t_floor > 0.0 && self.t_floor <= 0.1) {
            return bad("t_floor must be in (0, 0.1]");
        }
        if !(self.solver_tol > 0.0) {
            return bad("solver_tol must be > 0");
        }
        Ok(())
    }
}

/// Per-pixel illumination, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl IlluminationMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::Format(format!(
                "illumination map {width}x{height} with {} values",
                values.len()
            )));
        }
        Ok(IlluminationMap { width, height, values })
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Forward differences with a zero gradient on the last column / row.
    pub fn gradients(&self) -> (Vec<f64>, Vec<f64>) {
        let (w, h) = (self.width, self.height);
        let mut gh = vec![0.0; w * h];
        let mut gv = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    gh[y * w + x] = self.at(x + 1, y) - self.at(x, y);
                }
                if y + 1 < h {
                    gv[y * w + x] = self.at(x, y + 1) - self.at(x, y);
                }
            }
        }
        (gh, gv)
    }
}

/// Horizontal and vertical gradient weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    pub w_h: Vec<f64>,
    pub w_v: Vec<f64>,
}

/// The green channel of a normalized frame.
pub fn initial_illumination(frame: &Frame) -> IlluminationMap {
    IlluminationMap {
        width: frame.width(),
        height: frame.height(),
        values: frame.channel(1),
    }
}

/// `W_d = 1 / (|∂_d t_hat| + eps)`.
pub fn gradient_weights(t_hat: &IlluminationMap, epsilon_w: f64) -> WeightField {
    let (gh, gv) = t_hat.gradients();
    let w = |g: &[f64]| g.iter().map(|g| 1.0 / (g.abs() + epsilon_w)).collect();
    WeightField {
        w_h: w(&gh),
        w_v: w(&gv),
    }
}

/// Coefficients of the quadratic surrogate, `W_d / (|∂_d t_hat| + eps)`.
pub fn surrogate_weights(t_hat: &IlluminationMap, w: &WeightField, epsilon_w: f64) -> WeightField {
    let (gh, gv) = t_hat.gradients();
    let scale = |w: &[f64], g: &[f64]| w.iter().zip(g).map(|(w, g)| w / (g.abs() + epsilon_w)).collect();
    WeightField {
        w_h: scale(&w.w_h, &gh),
        w_v: scale(&w.w_v, &gv),
    }
}

/// `||t_hat - t||² + alpha Σ w̃ (∇t)²`.
pub fn surrogate_objective(t: &IlluminationMap, t_hat: &IlluminationMap, coeffs: &WeightField, alpha: f64) -> f64 {
    let (gh, gv) = t.gradients();
    let data: f64 = t.values.iter().zip(&t_hat.values).map(|(a, b)| (a - b) * (a - b)).sum();
    let smooth: f64 = coeffs.w_h.iter().zip(&gh).map(|(w, g)| w * g * g).sum::<f64>()
        + coeffs.w_v.iter().zip(&gv).map(|(w, g)| w * g * g).sum::<f64>();
    data + alpha * smooth
}

/// Sparse operator `I + alpha Σ_d D_dᵀ diag(w̃_d) D_d` on a `width`×`height` grid.
pub struct SurrogateSystem<'a> {
    width: usize,
    height: usize,
    alpha: f64,
    coeffs: &'a WeightField,
}

impl<'a> SurrogateSystem<'a> {
    pub fn new(width: usize, height: usize, alpha: f64, coeffs: &'a WeightField) -> Self {
        SurrogateSystem {
            width,
            height,
            alpha,
            coeffs,
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (w, h) = (self.width, self.height);
        out.copy_from_slice(x);
        for y in 0..h {
            for cx in 0..w {
                let i = y * w + cx;
                if cx + 1 < w {
                    let f = self.alpha * self.coeffs.w_h[i] * (x[i] - x[i + 1]);
                    out[i] += f;
                    out[i + 1] -= f;
                }
                if y + 1 < h {
                    let f = self.alpha * self.coeffs.w_v[i] * (x[i] - x[i + w]);
                    out[i] += f;
                    out[i + w] -= f;
                }
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let mut d = vec![1.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    let e = self.alpha * self.coeffs.w_h[i];
                    d[i] += e;
                    d[i + 1] += e;
                }
                if y + 1 < h {
                    let e = self.alpha * self.coeffs.w_v[i];
                    d[i] += e;
                    d[i + w] += e;
                }
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Unclamped minimizer of the surrogate objective.
pub fn solve_surrogate(
    t_hat: &IlluminationMap,
    w: &WeightField,
    cfg: &LimeConfig,
) -> Result<(IlluminationMap, SolveStats)> {
    let n = t_hat.values.len();
    if w.w_h.len() != n || w.w_v.len() != n {
        return Err(Error::Format("weight field does not match the map".into()));
    }
    let coeffs = surrogate_weights(t_hat, w, cfg.epsilon_w);
    let system = SurrogateSystem::new(t_hat.width, t_hat.height, cfg.alpha, &coeffs);
    let (x, stats) = pcg(&system, &t_hat.values, cfg.solver_tol, cfg.solver_max_iter)?;
    Ok((
        IlluminationMap {
            width: t_hat.width,
            height: t_hat.height,
            values: x,
        },
        stats,
    ))
}

/// Jacobi-preconditioned conjugate gradients, starting from `b`.
fn pcg(system: &SurrogateSystem, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = system.diagonal().iter().map(|d| 1.0 / d).collect();

    let mut x = b.to_vec();
    let mut ap = vec![0.0; n];
    system.apply(&x, &mut ap);
    let mut r: Vec<f64> = b.iter().zip(&ap).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    let mut rel = dot(&r, &r).sqrt() / b_norm;
    let mut iterations = 0;
    while rel > tol {
        if iterations == max_iter {
            return Err(Error::Solver {
                iterations,
                residual: rel,
            });
        }
        system.apply(&p, &mut ap);
        let step = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
        rel = dot(&r, &r).sqrt() / b_norm;
    }
    Ok((
        x,
        SolveStats {
            iterations,
            relative_residual: rel,
        },
    ))
}

/// Surrogate solve followed by clamping to `[t_floor, 1]`.
pub fn refine_illumination(t_hat: &IlluminationMap, w: &WeightField, cfg: &LimeConfig) -> Result<IlluminationMap> {
    cfg.validate()?;
    let (mut t, _) = solve_surrogate(t_hat, w, cfg)?;
    t.values.iter_mut().for_each(|v| *v = v.clamp(cfg.t_floor, 1.0));
    Ok(t)
}

/// `clip(L_c / max(T, t_floor)^gamma, 0, 1)` on interleaved RGB values.
pub fn recover_reflectance(frame: &[f64], t: &IlluminationMap, cfg: &LimeConfig) -> Result<Vec<f64>> {
    if frame.len() != t.values.len() * 3 {
        return Err(Error::Format("frame and illumination map sizes differ".into()));
    }
    Ok(frame
        .chunks_exact(3)
        .zip(&t.values)
        .flat_map(|(px, &t)| {
            let d = t.max(cfg.t_floor).powf(cfg.gamma);
            [0, 1, 2].map(|c| (px[c] / d).clamp(0.0, 1.0))
        })
        .collect())
}

/// Full per-frame enhancement, re-quantized to 8 bits.
pub fn enhance_frame_lime(frame: &Frame, cfg: &LimeConfig) -> Result<Frame> {
    let t_hat = initial_illumination(frame);
    let w = gradient_weights(&t_hat, cfg.epsilon_w);
    let t = refine_illumination(&t_hat, &w, cfg)?;
    let r = recover_reflectance(&frame.to_normalized(), &t, cfg)?;
    Ok(Frame::from_normalized(frame.width(), frame.height(), r)?.quantized())
}

/// Enhances every frame independently; frame order and rate are kept.
pub fn enhance_video_lime(video: &FrameSequence, cfg: &LimeConfig) -> Result<FrameSequence> {
    cfg.validate()?;
    let frames = video
        .frames()
        .par_iter()
        .enumerate()
        .map(|(i, f)| enhance_frame_lime(f, cfg).map_err(|e| Error::at_frame(i, e)))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, video.fps())
}
