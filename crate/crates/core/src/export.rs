//! Plot-ready JSON extracted from a trace: robot path, obstacle tracks, committed-plan tube
//! outlines in the world frame, and a K-space feasibility map for one iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frs::FrsTube;
use crate::geometry::{Aabb, Vec2};
use crate::planner::{naf_feasible, Planner};
use crate::trace::TrialTrace;

pub const PLOT_DATA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOverlay {
    pub j: usize,
    pub t_j: f64,
    pub k: [f64; 2],
    /// Tube snapshots ([t, x0, y0, x1, y1, x2, y2, x3, y3]) in the world frame.
    pub outlines: Vec<[f64; 9]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSpaceMap {
    pub j: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub cells: [usize; 2],
    /// Row-major over (k1 index, k2 index).
    pub feasible: Vec<bool>,
    pub k_star: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub version: u32,
    pub robot_id: String,
    pub goal: [f64; 2],
    /// [t, x, y, heading, planar speed].
    pub path: Vec<[f64; 5]>,
    /// Obstacle shapes relative to their reference points.
    pub obstacle_shapes: Vec<Vec<[f64; 2]>>,
    /// Per recorded sample: [t, x_0, y_0, x_1, y_1, ...].
    pub obstacle_tracks: Vec<Vec<f64>>,
    pub plans: Vec<PlanOverlay>,
    pub kspace: Option<KSpaceMap>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExportOptions {
    /// Keep every n-th fine step.
    pub stride: usize,
    /// Keep every n-th tube step in plan outlines.
    pub tube_stride: usize,
    pub kspace_iteration: Option<usize>,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self { stride: 10, tube_stride: 10, kspace_iteration: None }
    }
}

fn pair(v: Vec2) -> [f64; 2] {
    [v.x, v.y]
}

/// Builds plot data; the tube must be the one the trace was planned with.
pub fn export_plot_data(trace: &TrialTrace, tube: &FrsTube, opts: ExportOptions) -> Result<PlotData> {
    let h = trace.header().ok_or_else(|| Error::Trace("trace has no header".into()))?;
    if tube.header.robot_id != h.robot.id {
        return Err(Error::Trace(format!("tube is for `{}`, trace is for `{}`", tube.header.robot_id, h.robot.id)));
    }
    let stride = opts.stride.max(1);
    let mut path = Vec::new();
    let mut tracks = Vec::new();
    for s in trace.steps().filter(|s| s.step % stride as u64 == 0) {
        path.push([s.t, s.state.x, s.state.y, s.state.heading, h.robot.model.planar_speed(&s.state)]);
        let mut row = vec![s.t];
        row.extend(s.obstacles.iter().flat_map(|p| [p.x, p.y]));
        tracks.push(row);
    }
    let mut plans = Vec::new();
    for it in trace.iterations().filter(|it| it.k_star.is_some()) {
        let k = it.committed;
        let cell = tube.cell_of(k)?;
        let t0 = it.t_j + h.robot.family.tau_plan;
        let outlines = (0..tube.steps())
            .step_by(opts.tube_stride.max(1))
            .map(|n| {
                let occ = tube.occupancy(cell, n);
                let bx: Aabb = occ.bx.inflate(occ.round, occ.round);
                let c = bx.corners().map(|p| it.anchor.to_world(p));
                [t0 + tube.step_span(n).0, c[0].x, c[0].y, c[1].x, c[1].y, c[2].x, c[2].y, c[3].x, c[3].y]
            })
            .collect();
        plans.push(PlanOverlay { j: it.j, t_j: it.t_j, k: [k.k1, k.k2], outlines });
    }
    let kspace = match opts.kspace_iteration {
        None => None,
        Some(j) => {
            let it = trace.iterations().find(|it| it.j == j).ok_or_else(|| Error::Trace(format!("no iteration {j} in trace")))?;
            let planner = Planner::new(&h.robot, tube, h.planner)?;
            let step = j as u64 * planner.steps_per_plan();
            let robot = trace.steps().find(|s| s.step == step).ok_or_else(|| Error::Trace(format!("no step {step} in trace")))?;
            let t0 = (step + planner.steps_per_plan()) as f64 * h.robot.dt;
            let (_, d) = planner.discretize(&h.world, robot.state.pos(), it.t_j, t0, &it.anchor)?;
            let [n1, n2] = tube.header.cells;
            let feasible = (0..n1).flat_map(|i| (0..n2).map(move |jj| (i, jj))).map(|(i, jj)| naf_feasible(tube, &d, tube.cell_center(i, jj), planner.opts.threshold)).collect();
            let p = tube.header.params;
            Some(KSpaceMap { j, lo: p.lo, hi: p.hi, cells: tube.header.cells, feasible, k_star: it.k_star.map(|k| [k.k1, k.k2]) })
        }
    };
    Ok(PlotData {
        version: PLOT_DATA_VERSION,
        robot_id: h.robot.id.clone(),
        goal: pair(h.goal),
        path,
        obstacle_shapes: h.world.obstacles.iter().map(|o| o.shape.vertices().iter().map(|v| pair(*v)).collect()).collect(),
        obstacle_tracks: tracks,
        plans,
        kspace,
    })
}
