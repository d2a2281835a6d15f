//! Receding-horizon planning: the not-at-fault check, the rate-limited parameter search, and
//! the per-iteration state machine that falls back to the committed plan's braking phase.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::RobotConfig;
use crate::discretize::{disc, DiscretizationParams, DiscretizedPrediction};
use crate::error::{Error, Result};
use crate::frs::FrsTube;
use crate::geometry::{Aabb, Pose, Vec2};
use crate::models::{HighFidelityState, ParamSpace, Phase, TrajParam, TrajectoryFamily};
use crate::world::{predict_cone, predict_oracle, sense, PredictorKind, World};

pub const DEFAULT_THRESHOLD: f64 = 0.999;
/// Candidate budget per iteration in simulation; comfortably above a full rate-box scan.
pub const DEFAULT_CANDIDATE_BUDGET: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "limit", rename_all = "snake_case")]
pub enum Budget {
    /// Virtual time: number of feasibility checks.
    Candidates(usize),
    /// Live mode.
    WallClock(Duration),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerOptions {
    pub threshold: f64,
    pub budget: Budget,
    pub predictor: PredictorKind,
    /// Distance from the plan start to the waypoint on the line to the goal.
    pub lookahead: f64,
    pub refine: bool,
}

impl PlannerOptions {
    pub fn for_robot(cfg: &RobotConfig) -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            budget: Budget::Candidates(DEFAULT_CANDIDATE_BUDGET),
            predictor: PredictorKind::Oracle,
            lookahead: cfg.model.v_max * (cfg.family.tau_plan + 1.0),
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Tracking,
    Braking,
    Stopped,
}

/// World-to-trajectory-frame transform: the returned pose's `to_local` maps world points
/// into the frame whose origin and heading are the robot's predicted pose.
pub fn frame_anchor(x: &HighFidelityState) -> Pose {
    x.pose()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    /// Waypoint in the trajectory frame.
    pub waypoint: Vec2,
}

impl CostSpec {
    pub fn eval(&self, family: &TrajectoryFamily, k: TrajParam) -> f64 {
        let d = family.endpoint(k) - self.waypoint;
        d.dot(d)
    }
}

/// Waypoint on the segment from `from` to `goal` at distance `lookahead`, or the goal if closer.
pub fn waypoint(from: Vec2, goal: Vec2, lookahead: f64) -> Vec2 {
    let d = goal - from;
    let n = d.norm();
    if n <= lookahead || n == 0.0 {
        goal
    } else {
        from + d * (lookahead / n)
    }
}

fn cell_extent(tube: &FrsTube, cell: (usize, usize)) -> Aabb {
    let mut b = Aabb::empty();
    for n in 0..tube.steps() {
        b = b.union(&tube.occupancy(cell, n).bounding_box());
    }
    b
}

fn feasible_in_cell(tube: &FrsTube, d: &DiscretizedPrediction, cell: (usize, usize), threshold: f64) -> bool {
    let extent = cell_extent(tube, cell);
    let half = tube.dt();
    d.points.iter().all(|&(t, x)| {
        let w = if extent.contains(x) && tube.hits_window(cell, t, half, x) { 1.0 } else { 0.0 };
        w < threshold
    })
}

/// True iff the tube indicator, evaluated over a one-step window around each sample time,
/// stays below `threshold` at every discretized point.
pub fn naf_feasible(tube: &FrsTube, d: &DiscretizedPrediction, k: TrajParam, threshold: f64) -> bool {
    match tube.cell_of(k) {
        Ok(cell) => feasible_in_cell(tube, d, cell, threshold),
        Err(_) => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub k: Option<TrajParam>,
    pub cost: f64,
    pub enumerated: usize,
    pub feasible: usize,
    pub budget_exhausted: bool,
}

fn better(family: &TrajectoryFamily, cost: &CostSpec, a: TrajParam, b: Option<(TrajParam, f64)>) -> Option<f64> {
    let ja = cost.eval(family, a);
    match b {
        None => Some(ja),
        Some((kb, jb)) => {
            let ord = ja.total_cmp(&jb).then(a.k1.abs().total_cmp(&kb.k1.abs())).then(a.k2.total_cmp(&kb.k2));
            (ord == std::cmp::Ordering::Less).then_some(ja)
        }
    }
}

/// Rate-box candidates around `k_ref`: the k-cell centers, in lexicographic cell order.
pub fn candidates(tube: &FrsTube, params: &ParamSpace, k_ref: TrajParam, admits: &dyn Fn(TrajParam) -> bool) -> Vec<TrajParam> {
    let [n1, n2] = tube.header.cells;
    let mut out = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            let c = tube.cell_center(i, j);
            if params.contains(c) && params.within_rate(k_ref, c) && admits(c) {
                out.push(c);
            }
        }
    }
    out
}

/// Deterministic enumeration with one quarter-cell refinement pass around the best center.
#[allow(clippy::too_many_arguments)]
pub fn optimize(
    tube: &FrsTube,
    family: &TrajectoryFamily,
    d: &DiscretizedPrediction,
    cost: &CostSpec,
    k_ref: TrajParam,
    admits: &dyn Fn(TrajParam) -> bool,
    threshold: f64,
    budget: Budget,
    refine: bool,
) -> OptimizeResult {
    let start = Instant::now();
    let mut res = OptimizeResult { cost: f64::INFINITY, ..Default::default() };
    let over = |n: usize| match budget {
        Budget::Candidates(limit) => n >= limit,
        Budget::WallClock(limit) => start.elapsed() >= limit,
    };
    let mut best: Option<(TrajParam, f64)> = None;
    for c in candidates(tube, &family.params, k_ref, admits) {
        if over(res.enumerated) {
            res.budget_exhausted = true;
            break;
        }
        res.enumerated += 1;
        if !naf_feasible(tube, d, c, threshold) {
            continue;
        }
        res.feasible += 1;
        if let Some(j) = better(family, cost, c, best) {
            best = Some((c, j));
        }
    }
    if let (true, false, Some((center, _))) = (refine, res.budget_exhausted, best) {
        let cell = tube.cell_of(center).expect("candidate lies in K");
        let (a, b) = tube.cell_bounds(cell.0, cell.1);
        for di in [-1.0, 0.0, 1.0] {
            for dj in [-1.0, 0.0, 1.0] {
                if di == 0.0 && dj == 0.0 {
                    continue;
                }
                let k = TrajParam::new(center.k1 + di * a.width() / 4.0, center.k2 + dj * b.width() / 4.0);
                if !(family.params.contains(k) && family.params.within_rate(k_ref, k) && admits(k)) {
                    continue;
                }
                if over(res.enumerated) {
                    res.budget_exhausted = true;
                    break;
                }
                res.enumerated += 1;
                if naf_feasible(tube, d, k, threshold) {
                    if let Some(j) = better(family, cost, k, best) {
                        best = Some((k, j));
                    }
                }
            }
        }
    }
    if let Some((k, j)) = best {
        res.k = Some(k);
        res.cost = j;
    }
    res
}

/// Number of feasibility checks that fit in `tau_plan` of wall-clock time on this machine.
pub fn calibrate_candidate_budget(tube: &FrsTube, d: &DiscretizedPrediction, tau_plan: f64) -> usize {
    let probe = 64.min(tube.header.cells[0] * tube.header.cells[1]);
    let start = Instant::now();
    for c in 0..probe {
        let cell = (c / tube.header.cells[1], c % tube.header.cells[1]);
        std::hint::black_box(feasible_in_cell(tube, d, cell, DEFAULT_THRESHOLD));
    }
    let per = start.elapsed().as_secs_f64() / probe as f64;
    if per <= 0.0 {
        usize::MAX
    } else {
        (tau_plan / per).floor() as usize
    }
}

/// A committed desired trajectory: parameter, frame, and the fine step at which it began.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommittedPlan {
    pub k: TrajParam,
    pub anchor: Pose,
    pub start_step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerState {
    pub plan: CommittedPlan,
    pub j: usize,
    /// Predicted high-fidelity state at t_j + tau_plan.
    pub x_pred: HighFidelityState,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub j: usize,
    pub t_j: f64,
    pub k_prev: TrajParam,
    pub k_star: Option<TrajParam>,
    pub committed: TrajParam,
    pub feasible: usize,
    pub enumerated: usize,
    pub budget_exhausted: bool,
    /// Cost of the new plan; absent when none was found.
    pub cost: Option<f64>,
    pub mode: Mode,
    pub anchor: Pose,
    pub sensed: usize,
    pub disc_points: usize,
    /// The committed parameter passed the not-at-fault check in this iteration.
    pub verified: bool,
}

pub struct Planner<'a> {
    pub cfg: &'a RobotConfig,
    pub tube: &'a FrsTube,
    pub disc: DiscretizationParams,
    pub opts: PlannerOptions,
    steps_per_plan: u64,
}

impl<'a> Planner<'a> {
    pub fn new(cfg: &'a RobotConfig, tube: &'a FrsTube, opts: PlannerOptions) -> Result<Self> {
        if !(opts.threshold > 0.0 && opts.threshold < 1.0) {
            return Err(Error::Config(format!("threshold must lie in (0, 1), got {}", opts.threshold)));
        }
        let ratio = cfg.family.tau_plan / cfg.dt;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Config("tau_plan must be a whole number of integration steps".into()));
        }
        let disc = DiscretizationParams::new(&cfg.footprint, cfg.b, cfg.b_t, cfg.family.t_f, Self::disc_speed(cfg, tube))?;
        Ok(Self { cfg, tube, disc, opts, steps_per_plan: ratio.round() as u64 })
    }

    /// Relative speed used for the time grid: the faster of v_max and the tube's face speed,
    /// plus the obstacle speed bound.
    pub fn disc_speed(cfg: &RobotConfig, tube: &FrsTube) -> f64 {
        cfg.model.v_max.max(tube.header.max_face_speed) + cfg.v_obs_max
    }

    pub fn steps_per_plan(&self) -> u64 {
        self.steps_per_plan
    }

    pub fn initial_state(&self, start: Pose) -> PlannerState {
        PlannerState {
            plan: CommittedPlan { k: TrajParam::default(), anchor: start, start_step: 0 },
            j: 0,
            x_pred: HighFidelityState::at_rest(start),
            mode: Mode::Stopped,
        }
    }

    fn plan_time(&self, plan: &CommittedPlan, step: u64) -> f64 {
        step.saturating_sub(plan.start_step) as f64 * self.cfg.dt
    }

    pub fn mode_at(&self, plan: &CommittedPlan, step: u64) -> Mode {
        if plan.k.k2 == 0.0 && plan.k.k1 == 0.0 {
            return Mode::Stopped;
        }
        let sched = self.cfg.family.schedule(plan.k);
        match sched.phase(self.plan_time(plan, step).min(sched.t_f)) {
            Phase::Move => Mode::Tracking,
            Phase::Brake => Mode::Braking,
            Phase::Stop => Mode::Stopped,
        }
    }

    /// Effective command s(t) k of a plan at a fine step.
    pub fn effective_command(&self, plan: &CommittedPlan, step: u64) -> TrajParam {
        let sched = self.cfg.family.schedule(plan.k);
        let s = sched.speed_scale(self.plan_time(plan, step));
        TrajParam::new(s * plan.k.k1, s * plan.k.k2)
    }

    /// One fine integration step of the high-fidelity model under the committed plan.
    pub fn advance(&self, plan: &CommittedPlan, x: &HighFidelityState, step: u64) -> Result<HighFidelityState> {
        let sched = self.cfg.family.schedule(plan.k);
        self.cfg.model.step(x, self.plan_time(plan, step), self.cfg.dt, plan.k, &sched)
    }

    /// Discretized prediction for a plan starting at global time `t0`, in the plan frame.
    pub fn discretize(&self, world: &World, robot: Vec2, t_sense: f64, t0: f64, anchor: &Pose) -> Result<(usize, DiscretizedPrediction)> {
        let sensed = sense(world, robot, self.cfg.delta_sense, t_sense);
        let n = sensed.len();
        let (t_f, beta, eps) = (self.cfg.family.t_f, self.disc.beta, self.cfg.model.eps());
        let pred = match self.opts.predictor {
            PredictorKind::Oracle => predict_oracle(sensed, t0, t_f, beta, eps),
            PredictorKind::Cone => predict_cone(sensed, t_sense, t0, t_f, beta, eps, self.cfg.v_obs_max),
        };
        Ok((n, disc(&pred, &self.disc.grid.times, self.disc.r)?.to_frame(anchor)))
    }

    /// One loop body: sense at t_j from `robot`, plan for the start t_j + tau_plan, commit or
    /// keep the previous plan, then predict the state at the next plan start.
    pub fn iterate(&self, state: &mut PlannerState, world: &World, robot: Vec2, goal: Vec2) -> Result<IterationRecord> {
        let step_j = state.j as u64 * self.steps_per_plan;
        let start = step_j + self.steps_per_plan;
        let t_j = step_j as f64 * self.cfg.dt;
        let t0 = start as f64 * self.cfg.dt;
        let anchor = frame_anchor(&state.x_pred);
        let (sensed, d) = self.discretize(world, robot, t_j, t0, &anchor)?;
        let k_prev = self.effective_command(&state.plan, start);
        let wp = anchor.to_local(waypoint(anchor.pos, goal, self.opts.lookahead));
        let x_pred = state.x_pred;
        let admits = |k: TrajParam| self.cfg.admits(k, &x_pred);
        let res = optimize(
            self.tube,
            &self.cfg.family,
            &d,
            &CostSpec { waypoint: wp },
            k_prev,
            &admits,
            self.opts.threshold,
            self.opts.budget,
            self.opts.refine,
        );
        if let Some(k) = res.k {
            state.plan = CommittedPlan { k, anchor, start_step: start };
        }
        state.mode = self.mode_at(&state.plan, start);
        let mut x = state.x_pred;
        for s in start..start + self.steps_per_plan {
            x = self.advance(&state.plan, &x, s)?;
        }
        state.x_pred = x;
        let record = IterationRecord {
            j: state.j,
            t_j,
            k_prev,
            k_star: res.k,
            committed: state.plan.k,
            feasible: res.feasible,
            enumerated: res.enumerated,
            budget_exhausted: res.budget_exhausted,
            cost: res.k.map(|_| res.cost),
            mode: state.mode,
            anchor,
            sensed,
            disc_points: d.len(),
            verified: res.k.map_or(true, |k| naf_feasible(self.tube, &d, k, self.opts.threshold)),
        };
        state.j += 1;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frs::{compute_frs, FrsOptions};
    use crate::geometry::Polygon;
    use crate::tracking::{TrackingErrorBound, BINS_PER_PHASE};
    use crate::world::Obstacle;

    fn segway_tube() -> (RobotConfig, FrsTube) {
        let cfg = RobotConfig::segway();
        let mut g = TrackingErrorBound::zero(&cfg.family, 1.0);
        for c in 0..2 {
            g.coeffs[0][c] = vec![[0.1, 0.0, 0.0, 0.0, 0.0, 0.0]; BINS_PER_PHASE];
            g.coeffs[1][c] = vec![[0.1, 0.0, 0.0, 0.0, 0.0, 0.0]; BINS_PER_PHASE];
        }
        let tube = compute_frs(&cfg, cfg.family.params, &g, FrsOptions { cells: [12, 12], dt: 0.02 }).unwrap();
        (cfg, tube)
    }

    fn all(_: TrajParam) -> bool {
        true
    }

    #[test]
    fn anchor_examples() {
        let id = frame_anchor(&HighFidelityState::default());
        assert_eq!(id.to_local(Vec2::new(3.0, -1.0)), Vec2::new(3.0, -1.0));
        let a = frame_anchor(&HighFidelityState { x: 1.0, y: 2.0, heading: std::f64::consts::FRAC_PI_2, ..Default::default() });
        let p = a.to_local(Vec2::new(1.0, 3.0));
        assert!((p.x - 1.0).abs() < 1e-12 && p.y.abs() < 1e-12);
        let q = a.to_world(a.to_local(Vec2::new(-4.0, 0.5)));
        assert!((q.x + 4.0).abs() < 1e-12 && (q.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn naf_basic_cases() {
        let (_, tube) = segway_tube();
        let k = TrajParam::new(0.0, 1.0);
        assert!(naf_feasible(&tube, &DiscretizedPrediction::default(), k, DEFAULT_THRESHOLD));
        let inside = DiscretizedPrediction { points: vec![(0.5, Vec2::new(0.5, 0.0))] };
        assert!(!naf_feasible(&tube, &inside, k, DEFAULT_THRESHOLD));
        let far = DiscretizedPrediction { points: vec![(0.5, Vec2::new(9.0, 9.0)), (1.0, Vec2::new(-9.0, 0.0))] };
        for i in 0..12 {
            for j in 0..12 {
                assert!(naf_feasible(&tube, &far, tube.cell_center(i, j), DEFAULT_THRESHOLD));
            }
        }
    }

    fn exhaustive(tube: &FrsTube, fam: &TrajectoryFamily, d: &DiscretizedPrediction, cost: &CostSpec, k_ref: TrajParam) -> Option<TrajParam> {
        let mut cands: Vec<TrajParam> = candidates(tube, &fam.params, k_ref, &all).into_iter().filter(|k| naf_feasible(tube, d, *k, DEFAULT_THRESHOLD)).collect();
        cands.sort_by(|a, b| {
            cost.eval(fam, *a).total_cmp(&cost.eval(fam, *b)).then(a.k1.abs().total_cmp(&b.k1.abs())).then(a.k2.total_cmp(&b.k2))
        });
        cands.first().copied()
    }

    #[test]
    fn straight_waypoint_picks_fastest_straight() {
        let (cfg, tube) = segway_tube();
        let d = DiscretizedPrediction::default();
        let cost = CostSpec { waypoint: Vec2::new(2.0, 0.0) };
        let k_ref = TrajParam::new(0.0, 2.0);
        let res = optimize(&tube, &cfg.family, &d, &cost, k_ref, &all, DEFAULT_THRESHOLD, Budget::Candidates(10_000), false);
        assert_eq!(res.k, exhaustive(&tube, &cfg.family, &d, &cost, k_ref));
        let k = res.k.unwrap();
        assert!(k.k1.abs() < 0.2 && k.k2 > 1.9);
        let refined = optimize(&tube, &cfg.family, &d, &cost, k_ref, &all, DEFAULT_THRESHOLD, Budget::Candidates(10_000), true);
        assert!(refined.cost <= res.cost);
    }

    #[test]
    fn waypoint_at_robot_prefers_slowest() {
        let (cfg, tube) = segway_tube();
        let d = DiscretizedPrediction::default();
        let cost = CostSpec { waypoint: Vec2::ZERO };
        let k_ref = TrajParam::new(0.0, 0.5);
        let res = optimize(&tube, &cfg.family, &d, &cost, k_ref, &all, DEFAULT_THRESHOLD, Budget::Candidates(10_000), false);
        let k = res.k.unwrap();
        assert_eq!(Some(k), exhaustive(&tube, &cfg.family, &d, &cost, k_ref));
        let min_k2 = candidates(&tube, &cfg.family.params, k_ref, &all).iter().map(|k| k.k2).fold(f64::INFINITY, f64::min);
        assert_eq!(k.k2, min_k2);
    }

    #[test]
    fn infeasible_everywhere_and_budget() {
        let (cfg, tube) = segway_tube();
        let wall: Vec<(f64, Vec2)> = (0..=100).flat_map(|i| {
            let t = i as f64 * 0.02;
            (-10..=10).flat_map(move |a| (-10..=10).map(move |b| (t, Vec2::new(a as f64 * 0.1, b as f64 * 0.1))))
        }).collect();
        let d = DiscretizedPrediction { points: wall };
        let cost = CostSpec { waypoint: Vec2::new(2.0, 0.0) };
        let res = optimize(&tube, &cfg.family, &d, &cost, TrajParam::new(0.0, 1.0), &all, DEFAULT_THRESHOLD, Budget::Candidates(10_000), true);
        assert!(res.k.is_none() && res.feasible == 0 && res.enumerated > 0);
        let free = DiscretizedPrediction::default();
        let cut = optimize(&tube, &cfg.family, &free, &cost, TrajParam::new(0.0, 1.0), &all, DEFAULT_THRESHOLD, Budget::Candidates(3), true);
        assert_eq!(cut.enumerated, 3);
        assert!(cut.budget_exhausted);
        assert!(naf_feasible(&tube, &free, cut.k.unwrap(), DEFAULT_THRESHOLD));
    }

    #[test]
    fn free_world_keeps_tracking_and_wall_forces_stop() {
        let (cfg, tube) = segway_tube();
        let planner = Planner::new(&cfg, &tube, PlannerOptions::for_robot(&cfg)).unwrap();
        let goal = Vec2::new(15.0, 0.0);
        let mut st = planner.initial_state(Pose::IDENTITY);
        let mut robot = HighFidelityState::at_rest(Pose::IDENTITY);
        let free = World::default();
        let mut step = 0u64;
        for it in 0..8 {
            let exec = st.plan;
            let rec = planner.iterate(&mut st, &free, robot.pos(), goal).unwrap();
            assert!(rec.k_star.is_some() && rec.verified);
            if it > 0 {
                assert_eq!(rec.mode, Mode::Tracking);
            }
            for _ in 0..planner.steps_per_plan() {
                robot = planner.advance(&exec, &robot, step).unwrap();
                step += 1;
            }
        }
        assert!(robot.speed > 1.0);

        let wall = World {
            bounds: None,
            obstacles: (0..20).map(|i| Obstacle::fixed(Polygon::rectangle(Vec2::ZERO, 0.3, 0.3), Vec2::new(robot.x + 1.2, -3.0 + 0.3 * i as f64))).collect(),
        };
        let rec = planner.iterate(&mut st, &wall, robot.pos(), goal).unwrap();
        assert!(rec.k_star.is_none());
        assert_eq!(rec.mode, Mode::Braking);
    }
}
