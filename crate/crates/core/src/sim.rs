//! Seeded scenes, the virtual-time trial loop, batches, and the metrics table.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{fault_audit, AuditVerdict};
use crate::config::RobotConfig;
use crate::error::{Error, Result};
use crate::frs::FrsTube;
use crate::geometry::{Aabb, Polygon, Pose, Vec2};
use crate::models::HighFidelityState;
use crate::planner::{Planner, PlannerOptions};
use crate::trace::{StepRecord, TraceHeader, TraceRecord, TrialTrace, TRACE_VERSION};
use crate::world::{check_not_at_fault, min_sensor_horizon, Obstacle, World};

/// Speed below which the robot counts as stationary.
pub const MOVING_SPEED: f64 = 1e-3;
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub robot_id: String,
    pub world_size: [f64; 2],
    pub n_obs: usize,
    pub obstacle_size: f64,
    pub separation: f64,
    pub separation_tol: f64,
    /// Start and goal keep this distance from the world edges.
    pub edge_margin: f64,
    pub path_segments: usize,
    /// Length range of one random-walk segment.
    pub segment_length: [f64; 2],
    pub seed: u64,
    pub max_duration: f64,
    pub goal_tolerance: f64,
    /// Iterations without a feasible plan, or without progress, after which a stopped robot gives up.
    pub patience: usize,
}

impl TrialConfig {
    pub fn for_robot(robot: &RobotConfig, n_obs: usize, seed: u64) -> Self {
        let (world_size, obstacle_size, separation) = match robot.id.as_str() {
            "ev" => ([60.0, 10.0], 1.0, 50.0),
            _ => ([20.0, 10.0], 0.3, 18.0),
        };
        Self {
            robot_id: robot.id.clone(),
            world_size,
            n_obs,
            obstacle_size,
            separation,
            separation_tol: 1.0,
            edge_margin: 1.0,
            path_segments: 5,
            segment_length: [1.0, 5.0],
            seed,
            max_duration: 120.0,
            goal_tolerance: 0.5,
            patience: 30,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let tc: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        tc.validate()?;
        Ok(tc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("trial config serializes")
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::new(Vec2::ZERO, Vec2::new(self.world_size[0], self.world_size[1]))
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.world_size.iter().all(|&s| s > 0.0)
            && self.obstacle_size > 0.0
            && self.separation > 0.0
            && self.max_duration > 0.0
            && self.goal_tolerance > 0.0
            && self.segment_length[0] >= 0.0
            && self.segment_length[0] <= self.segment_length[1];
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid trial config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub world: World,
    pub start: Pose,
    pub goal: Vec2,
}

fn uniform_in(rng: &mut ChaCha8Rng, b: &Aabb) -> Vec2 {
    Vec2::new(rng.gen_range(b.lo.x..=b.hi.x), rng.gen_range(b.lo.y..=b.hi.y))
}

/// Samples start, goal, and obstacles. Obstacle starts avoid the robot's start footprint
/// inflated by a quarter of the minimum sensor horizon.
pub fn world_gen(seed: u64, tc: &TrialConfig, robot: &RobotConfig) -> Result<Scene> {
    tc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = tc.bounds();
    let inner = bounds.inflate(-tc.edge_margin, -tc.edge_margin);
    if inner.is_empty() {
        return Err(Error::WorldGen("edge margin leaves no room for start and goal".into()));
    }
    let (start, goal) = (0..MAX_ATTEMPTS)
        .map(|_| (uniform_in(&mut rng, &inner), uniform_in(&mut rng, &inner)))
        .find(|(s, g)| (s.dist(*g) - tc.separation).abs() <= tc.separation_tol)
        .ok_or_else(|| Error::WorldGen(format!("no start/goal pair {} m apart in {MAX_ATTEMPTS} attempts", tc.separation)))?;
    let d = goal - start;
    let start = Pose::new(start.x, start.y, d.y.atan2(d.x));

    let horizon = min_sensor_horizon(robot.family.t_f, robot.family.tau_plan, robot.v_rel(), robot.model.eps());
    let keep_out = robot.footprint.local_polygon().transform(&start);
    let half = tc.obstacle_size / 2.0;
    let obs_box = bounds.inflate(-half, -half);
    let shape = Polygon::rectangle(Vec2::ZERO, tc.obstacle_size, tc.obstacle_size);
    let mut obstacles = Vec::with_capacity(tc.n_obs);
    for _ in 0..tc.n_obs {
        let at = (0..MAX_ATTEMPTS)
            .map(|_| uniform_in(&mut rng, &obs_box))
            .find(|p| shape.translate(*p).distance_to_polygon(&keep_out) > horizon / 4.0)
            .ok_or_else(|| Error::WorldGen(format!("no obstacle position clear of the start in {MAX_ATTEMPTS} attempts")))?;
        let mut waypoints = vec![at];
        for _ in 0..tc.path_segments {
            let prev = *waypoints.last().unwrap();
            let len = rng.gen_range(tc.segment_length[0]..=tc.segment_length[1]);
            let dir = rng.gen_range(0.0..2.0 * PI);
            let next = obs_box.closest_point(prev + Vec2::new(len * dir.cos(), len * dir.sin()));
            waypoints.push(next);
        }
        let speed = rng.gen_range(0.0..=robot.v_obs_max);
        obstacles.push(Obstacle { shape: shape.clone(), waypoints, speed });
    }
    Ok(Scene { world: World { bounds: Some(bounds), obstacles }, start, goal })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Goal,
    AtFault,
    Timeout,
    /// Stopped with no feasible plan, or no progress, for the patience window.
    Stuck,
    /// The high-fidelity integration diverged.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub n_obs: usize,
    pub termination: Termination,
    pub reached_goal: bool,
    pub at_fault: bool,
    pub fault_time: Option<f64>,
    pub ended_stopped: bool,
    pub average_speed: f64,
    pub peak_speed: f64,
    pub duration: f64,
    pub iterations: usize,
    pub plan_success_rate: f64,
}

/// Recomputes a trial's metrics from its step and iteration records.
pub fn summarize(trace: &TrialTrace, termination: Termination) -> Result<TrialResult> {
    let h = trace.header().ok_or_else(|| Error::Trace("trace has no header".into()))?;
    let robot = &h.robot;
    let (mut sum, mut peak, mut n) = (0.0, 0.0f64, 0usize);
    let mut last: Option<&StepRecord> = None;
    for s in trace.steps() {
        let v = robot.model.planar_speed(&s.state);
        sum += v;
        peak = peak.max(v);
        n += 1;
        last = Some(s);
    }
    let last = last.ok_or_else(|| Error::Trace("trace has no steps".into()))?;
    let (mut iters, mut ok) = (0usize, 0usize);
    for it in trace.iterations() {
        iters += 1;
        ok += it.k_star.is_some() as usize;
    }
    Ok(TrialResult {
        seed: h.trial.seed,
        n_obs: h.trial.n_obs,
        termination,
        reached_goal: termination == Termination::Goal,
        at_fault: termination == Termination::AtFault,
        fault_time: (termination == Termination::AtFault).then_some(last.t),
        ended_stopped: robot.model.planar_speed(&last.state) <= MOVING_SPEED,
        average_speed: sum / n as f64,
        peak_speed: peak,
        duration: last.t,
        iterations: iters,
        plan_success_rate: if iters == 0 { 0.0 } else { ok as f64 / iters as f64 },
    })
}

/// Robot, tube, and planner options shared by every trial of a batch.
pub struct Harness<'a> {
    pub robot: &'a RobotConfig,
    pub tube: &'a FrsTube,
    pub opts: PlannerOptions,
    frs_hash: String,
}

impl<'a> Harness<'a> {
    pub fn new(robot: &'a RobotConfig, tube: &'a FrsTube, opts: PlannerOptions) -> Result<Self> {
        if tube.header.robot_id != robot.id || tube.header.config_hash != robot.hash() {
            return Err(Error::Config(format!("tube was built for robot `{}` with a different config", tube.header.robot_id)));
        }
        Ok(Self { robot, tube, opts, frs_hash: tube.hash() })
    }

    pub fn run_trial(&self, tc: &TrialConfig) -> Result<(TrialResult, TrialTrace)> {
        let scene = world_gen(tc.seed, tc, self.robot)?;
        self.run_scene(tc, &scene)
    }

    /// Runs the receding-horizon loop: plan every tau_plan, integrate at the fine step, and
    /// check the not-at-fault condition at every recorded step.
    pub fn run_scene(&self, tc: &TrialConfig, scene: &Scene) -> Result<(TrialResult, TrialTrace)> {
        let robot = self.robot;
        let planner = Planner::new(robot, self.tube, self.opts)?;
        let spp = planner.steps_per_plan();
        let mut trace = TrialTrace::default();
        trace.push(TraceRecord::Header(Box::new(TraceHeader {
            version: TRACE_VERSION,
            robot: robot.clone(),
            config_hash: robot.hash(),
            g_hash: self.tube.header.g_hash.clone(),
            frs_hash: self.frs_hash.clone(),
            trial: tc.clone(),
            planner: self.opts,
            world: scene.world.clone(),
            start: scene.start,
            goal: scene.goal,
        })));
        let mut state = planner.initial_state(scene.start);
        let mut x = HighFidelityState::at_rest(scene.start);
        let mut exec = state.plan;
        let (mut no_plan, mut no_progress) = (0usize, 0usize);
        let mut best_dist = x.pos().dist(scene.goal);
        let max_steps = (tc.max_duration / robot.dt).round() as u64;
        let mut step = 0u64;
        let termination = loop {
            let t = step as f64 * robot.dt;
            if step % spp == 0 {
                exec = state.plan;
                let rec = planner.iterate(&mut state, &scene.world, x.pos(), scene.goal)?;
                no_plan = if rec.k_star.is_some() { 0 } else { no_plan + 1 };
                let d = x.pos().dist(scene.goal);
                if d < best_dist - 0.05 {
                    best_dist = d;
                    no_progress = 0;
                } else {
                    no_progress += 1;
                }
                trace.push(TraceRecord::Iteration(rec));
            }
            trace.push(TraceRecord::Step(StepRecord {
                step,
                t,
                state: x,
                k: exec.k,
                mode: planner.mode_at(&exec, step),
                obstacles: scene.world.obstacles.iter().map(|o| o.position(t)).collect(),
            }));
            let moving = robot.model.planar_speed(&x) > MOVING_SPEED;
            if check_not_at_fault(&x.pose(), &robot.footprint, &scene.world.polygons_at(t), moving).is_fault() {
                break Termination::AtFault;
            }
            if x.pos().dist(scene.goal) <= tc.goal_tolerance {
                break Termination::Goal;
            }
            if !moving && (no_plan >= tc.patience || no_progress >= tc.patience) {
                break Termination::Stuck;
            }
            if step >= max_steps {
                break Termination::Timeout;
            }
            match planner.advance(&exec, &x, step) {
                Ok(next) => x = next,
                Err(Error::IntegrationDiverged { .. }) => break Termination::Aborted,
                Err(e) => return Err(e),
            }
            step += 1;
        };
        let result = summarize(&trace, termination)?;
        trace.push(TraceRecord::Result(result.clone()));
        Ok((result, trace))
    }

    /// Seeds 1..=trials_per_count for every obstacle count, in parallel, ordered by (count, seed).
    pub fn run_batch(&self, batch: &BatchSpec) -> Result<Vec<BatchTrial>> {
        let jobs: Vec<(usize, u64)> = batch.counts.iter().flat_map(|&c| (1..=batch.trials_per_count as u64).map(move |s| (c, s))).collect();
        jobs.par_iter()
            .map(|&(n_obs, seed)| {
                let tc = TrialConfig { n_obs, seed, ..batch.template.clone() };
                let (result, trace) = self.run_trial(&tc)?;
                let audit = batch.audit.then(|| fault_audit(&trace));
                if let Some(dir) = &batch.trace_dir {
                    trace.save(&dir.join(format!("trial_n{n_obs:02}_s{seed:04}.jsonl")))?;
                }
                Ok(BatchTrial { result, audit })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSpec {
    pub template: TrialConfig,
    pub trials_per_count: usize,
    pub counts: Vec<usize>,
    pub audit: bool,
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchTrial {
    pub result: TrialResult,
    pub audit: Option<AuditVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// `None` for the aggregate row.
    pub n_obs: Option<usize>,
    pub trials: usize,
    pub afc_pct: f64,
    pub goals_pct: f64,
    pub goal_trials: usize,
    /// Mean over goal-reaching trials of the trial-mean planar speed.
    pub avg_speed: f64,
    /// Mean over goal-reaching trials of the trial-peak planar speed.
    pub peak_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

fn row(n_obs: Option<usize>, rs: &[&TrialResult]) -> MetricsRow {
    let n = rs.len();
    let goals: Vec<&&TrialResult> = rs.iter().filter(|r| r.reached_goal).collect();
    let g = goals.len();
    let mean = |f: fn(&TrialResult) -> f64| if g == 0 { 0.0 } else { goals.iter().map(|r| f(r)).sum::<f64>() / g as f64 };
    let pct = |c: usize| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 };
    MetricsRow {
        n_obs,
        trials: n,
        afc_pct: pct(rs.iter().filter(|r| r.at_fault).count()),
        goals_pct: pct(g),
        goal_trials: g,
        avg_speed: mean(|r| r.average_speed),
        peak_speed: mean(|r| r.peak_speed),
    }
}

/// Per-count rows in ascending count order, then the aggregate.
pub fn metrics_table(results: &[TrialResult]) -> MetricsTable {
    let mut by: BTreeMap<usize, Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        by.entry(r.n_obs).or_default().push(r);
    }
    let mut rows: Vec<MetricsRow> = by.iter().map(|(n, rs)| row(Some(*n), rs)).collect();
    rows.push(row(None, &results.iter().collect::<Vec<_>>()));
    MetricsTable { rows }
}

impl MetricsTable {
    pub const CSV_HEADER: &'static str = "n_obs,trials,afc_pct,goals_pct,goal_trials,as_mps,aps_mps";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let n = r.n_obs.map_or_else(|| "all".to_string(), |n| n.to_string());
            let _ = writeln!(s, "{n},{},{:.1},{:.1},{},{:.3},{:.3}", r.trials, r.afc_pct, r.goals_pct, r.goal_trials, r.avg_speed, r.peak_speed);
        }
        s
    }

    pub fn aggregate(&self) -> &MetricsRow {
        self.rows.last().expect("aggregate row")
    }
}
