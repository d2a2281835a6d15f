//! Obstacles, fault semantics, sensing and prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Polygon, Pose, Vec2};
use crate::interval::Interval;

/// Number of sides of the polygon that stands in for a disk when buffering.
pub const BUFFER_POLYGON_SIDES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Footprint {
    /// Rectangle with `length` along the heading and `width` across it.
    Rectangle { width: f64, length: f64 },
    Circle { radius: f64 },
}

impl Footprint {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Footprint::Rectangle { width, length } if width > 0.0 && length > width => Ok(()),
            Footprint::Circle { radius } if radius > 0.0 => Ok(()),
            _ => Err(Error::Config(format!("invalid footprint {self:?}"))),
        }
    }

    pub fn circumradius(&self) -> f64 {
        match *self {
            Footprint::Rectangle { width, length } => 0.5 * width.hypot(length),
            Footprint::Circle { radius } => radius,
        }
    }

    /// Body-frame polygon; circles are replaced by their circumscribed 16-gon.
    pub fn local_polygon(&self) -> Polygon {
        match *self {
            Footprint::Rectangle { width, length } => Polygon::rectangle(Vec2::ZERO, length, width),
            Footprint::Circle { radius } => Polygon::circumscribed_ngon(Vec2::ZERO, radius, BUFFER_POLYGON_SIDES),
        }
    }

    /// Half-extents (x, y) of the footprint rotated by any heading in `heading`.
    pub fn rotated_half_extents(&self, heading: Interval) -> (f64, f64) {
        match *self {
            Footprint::Circle { radius } => (radius, radius),
            Footprint::Rectangle { width, length } => {
                let c = heading.cos().abs().hi;
                let s = heading.sin().abs().hi;
                let (hl, hw) = (0.5 * length, 0.5 * width);
                ((c * hl + s * hw).min(hl.hypot(hw)), (s * hl + c * hw).min(hl.hypot(hw)))
            }
        }
    }

    /// Closed intersection test of the posed footprint against a convex polygon.
    pub fn intersects(&self, pose: &Pose, poly: &Polygon) -> bool {
        match *self {
            Footprint::Circle { radius } => poly.distance_to(pose.pos) <= radius,
            Footprint::Rectangle { width, length } => {
                Polygon::rectangle(Vec2::ZERO, length, width).transform(pose).intersects(poly)
            }
        }
    }

    /// Samples a point of the footprint from two unit-interval coordinates.
    pub fn body_point(&self, u: f64, v: f64) -> Vec2 {
        match *self {
            Footprint::Circle { radius } => {
                let r = radius * u.sqrt();
                let a = std::f64::consts::TAU * v;
                Vec2::new(r * a.cos(), r * a.sin())
            }
            Footprint::Rectangle { width, length } => Vec2::new((u - 0.5) * length, (v - 0.5) * width),
        }
    }
}

/// Convex obstacle moving at constant speed along a piecewise-linear path, reversing at
/// the path ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    /// Footprint relative to the obstacle reference point.
    pub shape: Polygon,
    pub waypoints: Vec<Vec2>,
    pub speed: f64,
}

impl Obstacle {
    pub fn fixed(shape: Polygon, at: Vec2) -> Self {
        Self { shape, waypoints: vec![at], speed: 0.0 }
    }

    pub fn path_length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    pub fn position(&self, t: f64) -> Vec2 {
        let total = self.path_length();
        if self.waypoints.len() < 2 || total == 0.0 || self.speed == 0.0 {
            return self.waypoints.first().copied().unwrap_or(Vec2::ZERO);
        }
        let mut s = (self.speed * t.max(0.0)).rem_euclid(2.0 * total);
        if s > total {
            s = 2.0 * total - s;
        }
        for w in self.waypoints.windows(2) {
            let len = w[0].dist(w[1]);
            if s <= len {
                return if len > 0.0 { w[0].lerp(w[1], s / len) } else { w[0] };
            }
            s -= len;
        }
        *self.waypoints.last().unwrap()
    }

    pub fn polygon_at(&self, t: f64) -> Polygon {
        self.shape.translate(self.position(t))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct World {
    pub bounds: Option<Aabb>,
    pub obstacles: Vec<Obstacle>,
}

impl World {
    pub fn polygons_at(&self, t: f64) -> Vec<Polygon> {
        self.obstacles.iter().map(|o| o.polygon_at(t)).collect()
    }
}

/// Sensing radius and the speed bounds it is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub delta_sense: f64,
    pub v_max: f64,
    pub v_obs_max: f64,
}

impl SensorConfig {
    pub fn v_rel(&self) -> f64 {
        self.v_max + self.v_obs_max
    }

    pub fn validate(&self, t_f: f64, tau_plan: f64, eps: f64) -> Result<()> {
        let need = min_sensor_horizon(t_f, tau_plan, self.v_rel(), eps);
        if self.delta_sense > 0.0 && self.delta_sense >= need {
            Ok(())
        } else {
            Err(Error::Config(format!("delta_sense {} below required {need}", self.delta_sense)))
        }
    }
}

/// Obstacles with any footprint point within `delta_sense` of `robot` at time `t`.
pub fn sense(world: &World, robot: Vec2, delta_sense: f64, t: f64) -> Vec<Obstacle> {
    world.obstacles.iter().filter(|o| o.polygon_at(t).distance_to(robot) <= delta_sense).cloned().collect()
}

/// Sensing radius beyond which no obstacle can cause a fault during the next plan.
pub fn min_sensor_horizon(t_f: f64, tau_plan: f64, v_rel: f64, eps: f64) -> f64 {
    (t_f + tau_plan) * v_rel + 2.0 * eps
}

/// Outer approximation of the Minkowski sum of each polygon with a closed disk of radius `dist`.
pub fn buffer_polygons(polys: &[Polygon], dist: f64) -> Result<Vec<Polygon>> {
    if !(dist >= 0.0) {
        return Err(Error::Domain(format!("buffer distance must be nonnegative, got {dist}")));
    }
    if dist == 0.0 {
        return Ok(polys.to_vec());
    }
    let disk = Polygon::circumscribed_ngon(Vec2::ZERO, dist, BUFFER_POLYGON_SIDES);
    Ok(polys.iter().map(|p| p.minkowski_sum(&disk)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    /// Knows the true future motion of each sensed obstacle.
    Oracle,
    /// Grows the initial footprint at the obstacle speed bound, ignoring heading.
    Cone,
}

/// Time-parameterized union of buffered polygons covering the sensed obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub kind: PredictorKind,
    pub obstacles: Vec<Obstacle>,
    /// Global time at which the obstacles were sensed.
    pub t_sense: f64,
    /// Global time corresponding to prediction time 0.
    pub t0: f64,
    pub horizon: f64,
    pub buffer: f64,
    pub eps: f64,
    pub v_obs_max: f64,
}

impl Prediction {
    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    /// Total outward buffer applied (beta + eps).
    pub fn total_buffer(&self) -> f64 {
        self.buffer + self.eps
    }

    /// Polygons of P(t), t measured from the prediction start.
    pub fn eval(&self, t: f64) -> Vec<Polygon> {
        match self.kind {
            PredictorKind::Oracle => {
                let polys: Vec<Polygon> = self.obstacles.iter().map(|o| o.polygon_at(self.t0 + t)).collect();
                buffer_polygons(&polys, self.total_buffer()).expect("nonnegative buffer")
            }
            PredictorKind::Cone => {
                let polys: Vec<Polygon> = self.obstacles.iter().map(|o| o.polygon_at(self.t_sense)).collect();
                let elapsed = (self.t0 + t.max(0.0) - self.t_sense).max(0.0);
                buffer_polygons(&polys, self.v_obs_max * elapsed + self.total_buffer()).expect("nonnegative buffer")
            }
        }
    }
}

/// Knows each sensed obstacle's future motion; P(t) is its true footprint at `t0 + t`.
pub fn predict_oracle(obstacles: Vec<Obstacle>, t0: f64, horizon: f64, buffer: f64, eps: f64) -> Prediction {
    Prediction { kind: PredictorKind::Oracle, obstacles, t_sense: t0, t0, horizon, buffer, eps, v_obs_max: 0.0 }
}

/// Footprints sensed at `t_sense`, grown by `v_obs_max` times the time elapsed since then.
pub fn predict_cone(obstacles: Vec<Obstacle>, t_sense: f64, t0: f64, horizon: f64, buffer: f64, eps: f64, v_obs_max: f64) -> Prediction {
    Prediction { kind: PredictorKind::Cone, obstacles, t_sense, t0, horizon, buffer, eps, v_obs_max }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FaultVerdict {
    NotAtFault,
    AtFault { obstacle: usize },
}

impl FaultVerdict {
    pub fn is_fault(&self) -> bool {
        matches!(self, FaultVerdict::AtFault { .. })
    }
}

/// A stationary robot is never at fault; a moving one is at fault iff it touches an obstacle.
pub fn check_not_at_fault(pose: &Pose, footprint: &Footprint, obstacles: &[Polygon], moving: bool) -> FaultVerdict {
    if !moving {
        return FaultVerdict::NotAtFault;
    }
    match obstacles.iter().position(|o| footprint.intersects(pose, o)) {
        Some(obstacle) => FaultVerdict::AtFault { obstacle },
        None => FaultVerdict::NotAtFault,
    }
}
