//! Interval flowpipe enclosing the forward reachable set, stored per k-cell and time step.
//!
//! The trajectory-producing flow is a rigid motion with closed form, so each step box is
//! the interval image of that closed form over the k-cell and the step, grown by the
//! accumulated disturbance bound and the footprint.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RobotConfig;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Polygon, Vec2};
use crate::interval::{cosc_interval, sinc_interval, Interval};
use crate::models::{braking_time, ParamSpace, PhaseSchedule, TrajParam, TrajectoryFamily, YawLaw};
use crate::tracking::TrackingErrorBound;
use crate::world::Footprint;

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_CELLS: usize = 30;
pub const DEFAULT_DT: f64 = 0.02;
/// Safety factor on the Lipschitz remainder term.
pub const REMAINDER_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrsHeader {
    pub version: u32,
    pub robot_id: String,
    pub config_hash: String,
    pub g_hash: String,
    pub g_margin: f64,
    pub params: ParamSpace,
    pub cells: [usize; 2],
    pub dt: f64,
    pub steps: usize,
    pub tau_plan: f64,
    pub t_f: f64,
    /// Phase boundaries over K: [tau_plan, tau_plan + min brake, tau_plan + max brake].
    pub phase_bounds: [f64; 3],
    pub remainder_factor: f64,
    /// Largest remainder inflation applied to any box.
    pub remainder: f64,
    /// Radius of the rounded boxes (circle footprints) or 0.
    pub round: f64,
    pub workspace_half: f64,
    /// Largest face speed of the occupied boxes between consecutive steps.
    pub max_face_speed: f64,
}

/// Occupied set of one (cell, step): points within `round` of `bx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occupancy {
    pub bx: Aabb,
    pub round: f64,
}

impl Occupancy {
    pub fn contains(&self, x: Vec2) -> bool {
        if self.round == 0.0 {
            self.bx.contains(x)
        } else {
            self.bx.distance_to(x) <= self.round
        }
    }

    pub fn intersects(&self, poly: &Polygon) -> bool {
        if self.round == 0.0 {
            poly.intersects_aabb(&self.bx)
        } else {
            poly.distance_to_polygon(&self.bx.to_polygon()) <= self.round
        }
    }

    pub fn bounding_box(&self) -> Aabb {
        self.bx.inflate(self.round, self.round)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrsTube {
    pub header: FrsHeader,
    /// Indexed by (i * cells[1] + j) * steps + n.
    boxes: Vec<Aabb>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrsSummary {
    pub cells: usize,
    pub steps: usize,
    pub max_face_speed: f64,
    pub remainder: f64,
    pub extent: Aabb,
    pub mean_final_area: f64,
}

/// Resolution and inputs for one tube build.
#[derive(Debug, Clone, Copy)]
pub struct FrsOptions {
    pub cells: [usize; 2],
    pub dt: f64,
}

impl Default for FrsOptions {
    fn default() -> Self {
        Self { cells: [DEFAULT_CELLS, DEFAULT_CELLS], dt: DEFAULT_DT }
    }
}

fn omega_interval(family: &TrajectoryFamily, k1: Interval, k2: Interval) -> Interval {
    match family.yaw {
        YawLaw::Direct => k1,
        YawLaw::Bicycle { wheelbase } => (k1 * k2).scale(1.0 / wheelbase),
    }
}

struct CellBuilder<'a> {
    family: &'a TrajectoryFamily,
    footprint: Footprint,
    g: &'a TrackingErrorBound,
    dt: f64,
    steps: usize,
}

impl CellBuilder<'_> {
    fn step_span(&self, n: usize) -> Interval {
        Interval::new(n as f64 * self.dt, ((n + 1) as f64 * self.dt).min(self.family.t_f))
    }

    /// Reference-point box and heading interval over a time interval and cell.
    fn center(&self, t: Interval, k1: Interval, k2: Interval) -> (Interval, Interval, Interval) {
        let f = self.family;
        let tb_lo = braking_time(TrajParam::new(0.0, k2.lo), &f.brake);
        let tb_hi = braking_time(TrajParam::new(0.0, k2.hi), &f.brake);
        let s_lo = PhaseSchedule { tau_plan: f.tau_plan, tau_brake: tb_lo, t_f: f.t_f }.arc_time(t.lo);
        let s_hi = PhaseSchedule { tau_plan: f.tau_plan, tau_brake: tb_hi, t_f: f.t_f }.arc_time(t.hi);
        let s = Interval::new(s_lo.min(s_hi), s_hi.max(s_lo));
        let phi = omega_interval(f, k1, k2) * s;
        let dist = k2 * s;
        (dist * sinc_interval(phi), dist * cosc_interval(phi), phi)
    }

    /// Occupied boxes for every step of one cell plus the largest remainder used.
    fn build(&self, k1: Interval, k2: Interval) -> (Vec<Aabb>, f64) {
        let omega = omega_interval(self.family, k1, k2).mag();
        let pad = REMAINDER_FACTOR * omega * self.dt * self.dt;
        let rates: Vec<[f64; 2]> = (0..self.steps)
            .map(|m| {
                let t = self.step_span(m);
                [self.g.rate_upper(0, t, k1, k2), self.g.rate_upper(1, t, k1, k2)]
            })
            .collect();
        // Arc-time bounds over the cell: a disturbance entering at step m is rotated by at
        // most omega * (S(end of step n) - S(start of step m)) before step n ends.
        let f = self.family;
        let sched = |k2: f64| PhaseSchedule { tau_plan: f.tau_plan, tau_brake: braking_time(TrajParam::new(0.0, k2), &f.brake), t_f: f.t_f };
        let (slow, sfast) = (sched(k2.lo), sched(k2.hi));
        let mut out = Vec::with_capacity(self.steps);
        for n in 0..self.steps {
            let span = self.step_span(n);
            let s_end = sfast.arc_time(span.hi);
            let mut e = [0.0f64; 2];
            for (m, r) in rates.iter().enumerate().take(n + 1) {
                let sm = self.step_span(m);
                let turn = (omega * (s_end - slow.arc_time(sm.lo)).max(0.0)).min(std::f64::consts::FRAC_PI_2).sin();
                let w = sm.width();
                e[0] += w * (r[0] + turn * r[1]);
                e[1] += w * (r[1] + turn * r[0]);
            }
            let (x, y, phi) = self.center(span, k1, k2);
            let (fx, fy) = match self.footprint {
                Footprint::Circle { .. } => (0.0, 0.0),
                rect => rect.rotated_half_extents(phi),
            };
            out.push(Aabb::new(
                Vec2::new(x.lo - e[0] - pad - fx, y.lo - e[1] - pad - fy),
                Vec2::new(x.hi + e[0] + pad + fx, y.hi + e[1] + pad + fy),
            ));
        }
        (out, pad)
    }
}

/// Builds the tube over `params` (usually the robot's K) for fitted tracking error `g`.
pub fn compute_frs(cfg: &RobotConfig, params: ParamSpace, g: &TrackingErrorBound, opts: FrsOptions) -> Result<FrsTube> {
    if opts.cells.iter().any(|c| *c == 0) || !(opts.dt > 0.0) {
        return Err(Error::Domain("need at least one k-cell per axis and a positive time step".into()));
    }
    let mut family = cfg.family;
    family.params = params;
    let steps = ((family.t_f / opts.dt) - 1e-9).ceil().max(1.0) as usize;
    let builder = CellBuilder { family: &family, footprint: cfg.footprint, g, dt: opts.dt, steps };
    let round = match cfg.footprint {
        Footprint::Circle { radius } => radius,
        Footprint::Rectangle { .. } => 0.0,
    };
    let [n1, n2] = opts.cells;
    let cell_iv = |axis: usize, i: usize, n: usize| {
        let w = params.width(axis) / n as f64;
        Interval::new(params.lo[axis] + w * i as f64, if i + 1 == n { params.hi[axis] } else { params.lo[axis] + w * (i + 1) as f64 })
    };
    let cells: Vec<(Vec<Aabb>, f64)> =
        (0..n1 * n2).into_par_iter().map(|c| builder.build(cell_iv(0, c / n2, n1), cell_iv(1, c % n2, n2))).collect();

    let half = cfg.workspace_half;
    let ws = Aabb::new(Vec2::new(-half, -half), Vec2::new(half, half));
    let mut boxes = Vec::with_capacity(n1 * n2 * steps);
    let mut remainder: f64 = 0.0;
    let mut face: f64 = 0.0;
    for (c, (cell, pad)) in cells.into_iter().enumerate() {
        for (n, b) in cell.iter().enumerate() {
            if !ws.contains_box(&b.inflate(round, round)) {
                return Err(Error::FrsOverflow { i: c / n2, j: c % n2, step: n });
            }
        }
        for w in cell.windows(2) {
            face = face.max(w[0].face_displacement(&w[1]) / opts.dt);
        }
        remainder = remainder.max(pad);
        boxes.extend(cell);
    }
    let tp = family.tau_plan;
    let header = FrsHeader {
        version: FORMAT_VERSION,
        robot_id: cfg.id.clone(),
        config_hash: cfg.hash(),
        g_hash: g.hash(),
        g_margin: g.margin,
        params,
        cells: opts.cells,
        dt: opts.dt,
        steps,
        tau_plan: tp,
        t_f: family.t_f,
        phase_bounds: [tp, tp + family.min_brake(), tp + family.max_brake()],
        remainder_factor: REMAINDER_FACTOR,
        remainder,
        round,
        workspace_half: half,
        max_face_speed: face,
    };
    Ok(FrsTube { header, boxes })
}

impl FrsTube {
    pub fn steps(&self) -> usize {
        self.header.steps
    }

    pub fn dt(&self) -> f64 {
        self.header.dt
    }

    pub fn t_f(&self) -> f64 {
        self.header.t_f
    }

    pub fn step_span(&self, n: usize) -> (f64, f64) {
        let dt = self.header.dt;
        (n as f64 * dt, ((n + 1) as f64 * dt).min(self.header.t_f))
    }

    /// Cell containing k; points on shared faces go to the higher cell except at the upper edge.
    pub fn cell_of(&self, k: TrajParam) -> Result<(usize, usize)> {
        let p = &self.header.params;
        p.check(k)?;
        let idx = |axis: usize, v: f64| {
            let n = self.header.cells[axis];
            let w = p.width(axis);
            if w <= 0.0 {
                0
            } else {
                (((v - p.lo[axis]) / w * n as f64).floor().max(0.0) as usize).min(n - 1)
            }
        };
        Ok((idx(0, k.k1), idx(1, k.k2)))
    }

    pub fn cell_bounds(&self, i: usize, j: usize) -> (Interval, Interval) {
        let p = &self.header.params;
        let iv = |axis: usize, c: usize| {
            let n = self.header.cells[axis];
            let w = p.width(axis) / n as f64;
            Interval::new(p.lo[axis] + w * c as f64, if c + 1 == n { p.hi[axis] } else { p.lo[axis] + w * (c + 1) as f64 })
        };
        (iv(0, i), iv(1, j))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> TrajParam {
        let (a, b) = self.cell_bounds(i, j);
        TrajParam::new(a.mid(), b.mid())
    }

    pub fn occupancy(&self, cell: (usize, usize), step: usize) -> Occupancy {
        let idx = (cell.0 * self.header.cells[1] + cell.1) * self.header.steps + step;
        Occupancy { bx: self.boxes[idx], round: self.header.round }
    }

    /// Steps whose closed intervals meet [a, b].
    pub fn steps_meeting(&self, a: f64, b: f64) -> std::ops::RangeInclusive<usize> {
        let dt = self.header.dt;
        let last = self.header.steps - 1;
        let lo = (((a / dt) - 1e-9).ceil() as i64 - 1).clamp(0, last as i64) as usize;
        let hi = (((b / dt) + 1e-9).floor() as i64).clamp(0, last as i64) as usize;
        lo..=hi.max(lo)
    }

    /// Indicator of the tube: 1 when x lies in the occupied set of k's cell at the step(s)
    /// bracketing t.
    pub fn w_eval(&self, t: f64, x: Vec2, k: TrajParam) -> Result<f64> {
        if !(0.0..=self.header.t_f + 1e-12).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", self.header.t_f)));
        }
        let cell = self.cell_of(k)?;
        let hit = self.steps_meeting(t, t).any(|n| self.occupancy(cell, n).contains(x));
        Ok(if hit { 1.0 } else { 0.0 })
    }

    /// Whether x meets the occupied set of `cell` at any step meeting [t - half, t + half].
    pub fn hits_window(&self, cell: (usize, usize), t: f64, half: f64, x: Vec2) -> bool {
        self.steps_meeting(t - half, t + half).any(|n| self.occupancy(cell, n).contains(x))
    }

    /// Reference-point enclosure at an exact time (no disturbance or footprint).
    pub fn center_enclosure(&self, cfg: &RobotConfig, cell: (usize, usize), t: f64) -> Aabb {
        let mut family = cfg.family;
        family.params = self.header.params;
        let b = CellBuilder { family: &family, footprint: cfg.footprint, g: &TrackingErrorBound::zero(&family, 1.0), dt: self.header.dt, steps: 0 };
        let (k1, k2) = self.cell_bounds(cell.0, cell.1);
        let (x, y, _) = b.center(Interval::point(t), k1, k2);
        Aabb::new(Vec2::new(x.lo, y.lo), Vec2::new(x.hi, y.hi))
    }

    pub fn summary(&self) -> FrsSummary {
        let n = self.header.cells[0] * self.header.cells[1];
        let last = self.header.steps - 1;
        let mut extent = Aabb::empty();
        let mut area = 0.0;
        for c in 0..n {
            for s in 0..self.header.steps {
                extent = extent.union(&self.boxes[c * self.header.steps + s]);
            }
            area += self.boxes[c * self.header.steps + last].area();
        }
        FrsSummary {
            cells: n,
            steps: self.header.steps,
            max_face_speed: self.header.max_face_speed,
            remainder: self.header.remainder,
            extent: extent.inflate(self.header.round, self.header.round),
            mean_final_area: area / n as f64,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tube serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let tube: FrsTube = serde_json::from_str(text)?;
        if tube.header.version != FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported FRS format version {}", tube.header.version)));
        }
        let h = &tube.header;
        if tube.boxes.len() != h.cells[0] * h.cells[1] * h.steps {
            return Err(Error::Config("FRS box count does not match its header".into()));
        }
        Ok(tube)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}
