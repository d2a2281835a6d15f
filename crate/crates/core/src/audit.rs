//! Offline fault audit of a persisted trace.
//!
//! The auditor uses only the world description and robot states stored in the trace. It
//! re-simulates obstacle motion itself, interpolates the robot pose between recorded steps,
//! and tests raw footprint geometry at a finer step than the simulator.

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, Polygon, Pose, Vec2};
use crate::sim::MOVING_SPEED;
use crate::trace::{StepRecord, TraceRecord, TrialTrace};
use crate::world::{Footprint, Obstacle};

pub const AUDIT_DT: f64 = 1e-3;
/// Largest disagreement between recorded and re-simulated obstacle positions.
const POSITION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum AuditVerdict {
    Clean,
    Fault { t: f64, obstacle: usize },
    Inconclusive { reason: String },
}

impl AuditVerdict {
    pub fn is_clean(&self) -> bool {
        matches!(self, AuditVerdict::Clean)
    }

    pub fn label(&self) -> String {
        match self {
            AuditVerdict::Clean => "clean".into(),
            AuditVerdict::Fault { t, obstacle } => format!("fault at t = {t:.3} s (obstacle {obstacle})"),
            AuditVerdict::Inconclusive { reason } => format!("inconclusive: {reason}"),
        }
    }
}

fn obstacle_position(o: &Obstacle, t: f64) -> Vec2 {
    let w = &o.waypoints;
    let legs: Vec<f64> = w.windows(2).map(|p| (p[1] - p[0]).norm()).collect();
    let total: f64 = legs.iter().sum();
    if w.is_empty() {
        return Vec2::ZERO;
    }
    if total <= 0.0 || o.speed <= 0.0 {
        return w[0];
    }
    let cycles = o.speed * t.max(0.0) / total;
    let whole = cycles.floor();
    let frac = cycles - whole;
    let mut s = if (whole as u64) % 2 == 0 { frac * total } else { (1.0 - frac) * total };
    for (i, &len) in legs.iter().enumerate() {
        if s <= len || i + 1 == legs.len() {
            let a = if len > 0.0 { (s / len).min(1.0) } else { 0.0 };
            return w[i] + (w[i + 1] - w[i]) * a;
        }
        s -= len;
    }
    w[w.len() - 1]
}

fn touches(footprint: &Footprint, pose: &Pose, obstacle: &Polygon) -> bool {
    match *footprint {
        Footprint::Circle { radius } => obstacle.distance_to(pose.pos) <= radius,
        Footprint::Rectangle { width, length } => {
            let body = [(0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5), (0.5, -0.5)].map(|(u, v)| pose.to_world(Vec2::new(u * length, v * width)));
            let body = Polygon::from_vertices_unchecked(body.to_vec());
            body.intersects(obstacle)
        }
    }
}

fn check_steps(trace: &TrialTrace, dt: f64) -> Result<Vec<&StepRecord>, String> {
    if !matches!(trace.records.last(), Some(TraceRecord::Result(_))) {
        return Err("trace has no result record".into());
    }
    let steps: Vec<&StepRecord> = trace.steps().collect();
    if steps.is_empty() {
        return Err("trace has no steps".into());
    }
    for (i, s) in steps.iter().enumerate() {
        if s.step != i as u64 {
            return Err(format!("step {} follows step {}", s.step, i as i64 - 1));
        }
        if (s.t - i as f64 * dt).abs() > 1e-9 || !s.t.is_finite() {
            return Err(format!("step {i} has time {} instead of {}", s.t, i as f64 * dt));
        }
    }
    Ok(steps)
}

/// First time at which the moving robot touches an obstacle, or clean.
pub fn fault_audit(trace: &TrialTrace) -> AuditVerdict {
    let Some(h) = trace.header() else {
        return AuditVerdict::Inconclusive { reason: "trace has no header".into() };
    };
    let dt = h.robot.dt;
    let steps = match check_steps(trace, dt) {
        Ok(s) => s,
        Err(reason) => return AuditVerdict::Inconclusive { reason },
    };
    let obstacles = &h.world.obstacles;
    let reach = h.robot.footprint.circumradius();
    let radii: Vec<f64> = obstacles.iter().map(|o| o.shape.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max)).collect();
    for s in &steps {
        if s.obstacles.len() != obstacles.len() {
            return AuditVerdict::Inconclusive { reason: format!("step {} lists {} obstacles", s.step, s.obstacles.len()) };
        }
        for (i, (o, p)) in obstacles.iter().zip(&s.obstacles).enumerate() {
            if obstacle_position(o, s.t).dist(*p) > POSITION_TOL {
                return AuditVerdict::Inconclusive { reason: format!("obstacle {i} position disagrees at step {}", s.step) };
            }
        }
    }
    let sub = ((dt / AUDIT_DT).round() as usize).max(1);
    let speed = |s: &StepRecord| h.robot.model.planar_speed(&s.state);
    let last = steps.len() - 1;
    for n in 0..=last {
        let a = steps[n];
        let b = steps[(n + 1).min(last)];
        let count = if n == last { 1 } else { sub };
        for m in 0..count {
            let u = m as f64 / sub as f64;
            let t = a.t + u * dt;
            let (va, vb) = (speed(a), speed(b));
            if va + u * (vb - va) <= MOVING_SPEED {
                continue;
            }
            let pa = a.state.pos();
            let pose = Pose {
                pos: pa + (b.state.pos() - pa) * u,
                heading: a.state.heading + u * wrap_angle(b.state.heading - a.state.heading),
            };
            for (i, o) in obstacles.iter().enumerate() {
                let c = obstacle_position(o, t);
                if c.dist(pose.pos) > reach + radii[i] + 1e-9 {
                    continue;
                }
                if touches(&h.robot.footprint, &pose, &o.shape.translate(c)) {
                    return AuditVerdict::Fault { t, obstacle: i };
                }
            }
        }
    }
    AuditVerdict::Clean
}
