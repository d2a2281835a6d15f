//! Space-time discretization of predictions into boundary samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polygon, Pose, Vec2};
use crate::world::{Footprint, Prediction};

/// Largest spacing between boundary samples that keeps a footprint from slipping between them.
pub fn point_spacing(footprint: &Footprint, b: f64) -> Result<f64> {
    match *footprint {
        Footprint::Rectangle { width, .. } => {
            if !(b > 0.0 && b < width / 2.0) {
                return Err(Error::Domain(format!("buffer b = {b} must lie in (0, W/2) = (0, {})", width / 2.0)));
            }
            Ok(2.0 * b)
        }
        Footprint::Circle { radius } => {
            if !(b > 0.0 && b < radius / 2.0) {
                return Err(Error::Domain(format!("buffer b = {b} must lie in (0, R/2) = (0, {})", radius / 2.0)));
            }
            Ok(2.0 * radius * ((radius - b) / radius).acos().sin())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub tau_max: f64,
    pub n_pred: usize,
    pub tau: f64,
    pub times: Vec<f64>,
}

/// Uniform time grid on [0, t_f] whose step does not exceed 2 b_t / v_rel.
pub fn time_grid(t_f: f64, b_t: f64, v_rel: f64) -> Result<TimeGrid> {
    if !(t_f > 0.0 && v_rel > 0.0) {
        return Err(Error::Domain(format!("need t_f > 0 and v_rel > 0, got {t_f} and {v_rel}")));
    }
    let upper = t_f * v_rel / 2.0;
    if !(b_t > 0.0 && b_t < upper) {
        return Err(Error::Domain(format!("temporal buffer b_t = {b_t} must lie in (0, t_f v_rel / 2) = (0, {upper})")));
    }
    let tau_max = 2.0 * b_t / v_rel;
    // The tolerance absorbs rounding when t_f is an exact multiple of tau_max.
    let n_pred = ((t_f / tau_max) - 1e-9).ceil().max(1.0) as usize;
    let tau = t_f / n_pred as f64;
    let mut times: Vec<f64> = (0..n_pred).map(|j| j as f64 * tau).collect();
    times.push(t_f);
    Ok(TimeGrid { tau_max, n_pred, tau, times })
}

/// Discretization constants for one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationParams {
    pub b: f64,
    pub b_t: f64,
    pub beta: f64,
    pub r: f64,
    pub grid: TimeGrid,
}

impl DiscretizationParams {
    pub fn new(footprint: &Footprint, b: f64, b_t: f64, t_f: f64, v_rel: f64) -> Result<Self> {
        Ok(Self { b, b_t, beta: b + b_t, r: point_spacing(footprint, b)?, grid: time_grid(t_f, b_t, v_rel)? })
    }
}

/// Vertices of every polygon plus evenly spaced edge points no farther than `r` apart.
pub fn sample_boundary(polys: &[Polygon], r: f64) -> Result<Vec<Vec2>> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("sample spacing must be positive, got {r}")));
    }
    let mut out = Vec::new();
    for poly in polys {
        let start = out.len();
        for (a, b) in poly.edges() {
            out.push(a);
            let len = a.dist(b);
            if len == 0.0 {
                continue;
            }
            let n = (len / r).ceil() as usize;
            for i in 1..n {
                out.push(a.lerp(b, i as f64 / n as f64));
            }
        }
        let mut seen: Vec<Vec2> = Vec::with_capacity(out.len() - start);
        for p in out.drain(start..) {
            if !seen.contains(&p) {
                seen.push(p);
            }
        }
        out.extend(seen);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiscretizedPrediction {
    pub points: Vec<(f64, Vec2)>,
}

impl DiscretizedPrediction {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Re-expresses every point in the local frame of `frame`.
    pub fn to_frame(&self, frame: &Pose) -> DiscretizedPrediction {
        DiscretizedPrediction { points: self.points.iter().map(|&(t, x)| (t, frame.to_local(x))).collect() }
    }

    /// One `t x y` line per point.
    pub fn to_text(&self) -> String {
        self.points.iter().map(|(t, x)| format!("{t:.6} {:.6} {:.6}\n", x.x, x.y)).collect()
    }
}

/// Boundary samples of the prediction at every grid time.
pub fn disc(pred: &Prediction, times: &[f64], r: f64) -> Result<DiscretizedPrediction> {
    let mut points = Vec::new();
    if pred.is_empty() {
        return Ok(DiscretizedPrediction { points });
    }
    for &t in times {
        for x in sample_boundary(&pred.eval(t), r)? {
            points.push((t, x));
        }
    }
    Ok(DiscretizedPrediction { points })
}
