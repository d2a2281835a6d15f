//! Robot models: the phase-switched trajectory-producing model, the open-loop
//! low-level controller that tracks it, and the high-fidelity Segway/EV dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose, Vec2};
use crate::interval::{cosc, sinc};

/// A point k = (k1, k2) in trajectory-parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajParam {
    pub k1: f64,
    pub k2: f64,
}

impl TrajParam {
    pub const fn new(k1: f64, k2: f64) -> Self {
        Self { k1, k2 }
    }
}

/// The compact box K plus the per-iteration rate limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub rate_limit: [f64; 2],
}

impl ParamSpace {
    pub fn contains(&self, k: TrajParam) -> bool {
        k.k1 >= self.lo[0] && k.k1 <= self.hi[0] && k.k2 >= self.lo[1] && k.k2 <= self.hi[1]
    }

    pub fn within_rate(&self, from: TrajParam, to: TrajParam) -> bool {
        (to.k1 - from.k1).abs() <= self.rate_limit[0] + 1e-12 && (to.k2 - from.k2).abs() <= self.rate_limit[1] + 1e-12
    }

    pub fn check(&self, k: TrajParam) -> Result<()> {
        if self.contains(k) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "k = ({}, {}) outside K = [{}, {}] x [{}, {}]",
                k.k1, k.k2, self.lo[0], self.hi[0], self.lo[1], self.hi[1]
            )))
        }
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }
}

/// How the braking time depends on k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum BrakeLaw {
    /// Fixed braking duration (Segway: 1.0 s).
    Constant { seconds: f64 },
    /// Duration k2 / decel (EV: k2 / 3).
    SpeedOver { decel: f64 },
}

/// Maps k to the desired yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "yaw", rename_all = "snake_case")]
pub enum YawLaw {
    /// omega_des = k1.
    Direct,
    /// omega_des = k1 k2 / wheelbase.
    Bicycle { wheelbase: f64 },
}

/// Everything that determines the family of desired trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFamily {
    pub params: ParamSpace,
    pub tau_plan: f64,
    pub t_f: f64,
    pub brake: BrakeLaw,
    pub yaw: YawLaw,
}

impl TrajectoryFamily {
    pub fn omega_des(&self, k: TrajParam) -> f64 {
        match self.yaw {
            YawLaw::Direct => k.k1,
            YawLaw::Bicycle { wheelbase } => k.k1 * k.k2 / wheelbase,
        }
    }

    pub fn schedule(&self, k: TrajParam) -> PhaseSchedule {
        PhaseSchedule { tau_plan: self.tau_plan, tau_brake: braking_time(k, &self.brake), t_f: self.t_f }
    }

    /// Largest braking time over K.
    pub fn max_brake(&self) -> f64 {
        match self.brake {
            BrakeLaw::Constant { seconds } => seconds,
            BrakeLaw::SpeedOver { decel } => self.params.hi[1].max(0.0) / decel,
        }
    }

    pub fn min_brake(&self) -> f64 {
        match self.brake {
            BrakeLaw::Constant { seconds } => seconds,
            BrakeLaw::SpeedOver { decel } => self.params.lo[1].max(0.0) / decel,
        }
    }

    /// Stationary endpoint of the desired trajectory from the origin.
    pub fn endpoint(&self, k: TrajParam) -> Vec2 {
        let sched = self.schedule(k);
        arc_point(self.omega_des(k), k.k2, sched.arc_time(sched.t_f))
    }
}

/// The three time phases of one desired trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Move,
    Brake,
    Stop,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Move, Phase::Brake, Phase::Stop];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Move => "move",
            Phase::Brake => "brake",
            Phase::Stop => "stop",
        }
    }
}

/// Computes tau_brake(k).
pub fn braking_time(k: TrajParam, law: &BrakeLaw) -> f64 {
    match *law {
        BrakeLaw::Constant { seconds } => seconds,
        BrakeLaw::SpeedOver { decel } => k.k2.max(0.0) / decel,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSchedule {
    pub tau_plan: f64,
    pub tau_brake: f64,
    pub t_f: f64,
}

impl PhaseSchedule {
    pub fn brake_end(&self) -> f64 {
        self.tau_plan + self.tau_brake
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if (0.0..=self.t_f + 1e-12).contains(&t) {
            Ok(())
        } else {
            Err(Error::Domain(format!("t = {t} outside [0, {}]", self.t_f)))
        }
    }

    /// Phase containing t; shared boundaries resolve to the later phase.
    pub fn phase(&self, t: f64) -> Phase {
        if t < self.tau_plan {
            Phase::Move
        } else if self.tau_brake > 0.0 && t < self.brake_end() {
            Phase::Brake
        } else if self.tau_brake <= 0.0 && t <= self.tau_plan {
            Phase::Move
        } else {
            Phase::Stop
        }
    }

    /// Speed scaling s(t, k): 1 while moving, linear ramp while braking, 0 once stopped.
    pub fn speed_scale(&self, t: f64) -> f64 {
        if t <= self.tau_plan {
            1.0
        } else if self.tau_brake > 0.0 && t < self.brake_end() {
            1.0 - (t - self.tau_plan) / self.tau_brake
        } else {
            0.0
        }
    }

    /// Integral of s over [0, t].
    pub fn arc_time(&self, t: f64) -> f64 {
        if t <= self.tau_plan {
            t.max(0.0)
        } else if self.tau_brake > 0.0 && t < self.brake_end() {
            let u = t - self.tau_plan;
            self.tau_plan + u - u * u / (2.0 * self.tau_brake)
        } else {
            self.tau_plan + 0.5 * self.tau_brake
        }
    }
}

/// Position after rigid motion with yaw rate `omega` and speed `speed` for arc time `s`,
/// starting at the origin with zero heading.
pub fn arc_point(omega: f64, speed: f64, s: f64) -> Vec2 {
    let phi = omega * s;
    Vec2::new(speed * s * sinc(phi), speed * s * cosc(phi))
}

/// Right-hand side of the trajectory-producing model.
pub fn traj_producing_rhs(t: f64, x: Vec2, k: TrajParam, family: &TrajectoryFamily) -> Result<Vec2> {
    let sched = family.schedule(k);
    sched.check_time(t)?;
    let s = sched.speed_scale(t);
    if s == 0.0 {
        return Ok(Vec2::ZERO);
    }
    let w = family.omega_des(k);
    Ok(Vec2::new(k.k2 - w * x.y, w * x.x) * s)
}

/// Uniformly sampled trajectory starting at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<S>,
}

impl<S> Trajectory<S> {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &S)> {
        self.samples.iter().enumerate().map(move |(i, s)| (self.t0 + i as f64 * self.dt, s))
    }
}

fn step_count(t_f: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    Ok((t_f / dt - 1e-9).ceil().max(1.0) as usize)
}

/// RK4 integration of the trajectory-producing model from the origin.
pub fn desired_trajectory(k: TrajParam, family: &TrajectoryFamily, dt: f64) -> Result<Trajectory<Vec2>> {
    let n = step_count(family.t_f, dt)?;
    let h = family.t_f / n as f64;
    let mut x = Vec2::ZERO;
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(x);
    for i in 0..n {
        let t = i as f64 * h;
        let t_mid = (t + 0.5 * h).min(family.t_f);
        let t_end = (t + h).min(family.t_f);
        let a = traj_producing_rhs(t, x, k, family)?;
        let b = traj_producing_rhs(t_mid, x + a * (0.5 * h), k, family)?;
        let c = traj_producing_rhs(t_mid, x + b * (0.5 * h), k, family)?;
        let d = traj_producing_rhs(t_end, x + c * h, k, family)?;
        x = x + (a + b * 2.0 + c * 2.0 + d) * (h / 6.0);
        samples.push(x);
    }
    Ok(Trajectory { t0: 0.0, dt: h, samples })
}

/// Commanded input (u1, u2).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub u1: f64,
    pub u2: f64,
}

/// Returns u_k(t): (k1, k2) while moving, s(t,k)(k1, k2) while braking, zero once stopped.
/// Defined for every t >= 0 so a robot past t_f stays commanded to rest.
pub fn low_level_controller(t: f64, k: TrajParam, sched: &PhaseSchedule) -> ControlInput {
    let s = if t < 0.0 { 1.0 } else { sched.speed_scale(t) };
    ControlInput { u1: s * k.k1, u2: s * k.k2 }
}

/// High-fidelity state. `aux` is the yaw rate (Segway) or steering angle (EV).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HighFidelityState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub aux: f64,
    pub speed: f64,
}

impl HighFidelityState {
    pub fn at_rest(pose: Pose) -> Self {
        Self { x: pose.pos.x, y: pose.pos.y, heading: pose.heading, aux: 0.0, speed: 0.0 }
    }

    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn pose(&self) -> Pose {
        Pose { pos: self.pos(), heading: self.heading }
    }

    fn is_finite(&self) -> bool {
        [self.x, self.y, self.heading, self.aux, self.speed].iter().all(|v| v.is_finite())
    }

    fn axpy(&self, a: f64, d: &[f64; 5]) -> Self {
        Self {
            x: self.x + a * d[0],
            y: self.y + a * d[1],
            heading: self.heading + a * d[2],
            aux: self.aux + a * d[3],
            speed: self.speed + a * d[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dynamics {
    /// Unicycle with first-order yaw-rate and speed tracking.
    Segway { yaw_gain: f64, speed_gain: f64 },
    /// Small electric vehicle with steering and longitudinal saturation.
    Ev { c: [f64; 8], max_steer: f64, max_steer_rate: f64, accel_limits: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dynamics: Dynamics,
    pub v_max: f64,
    /// Per-coordinate state estimation errors (eps1, eps2).
    pub est_error: [f64; 2],
}

impl ModelParams {
    /// Maximum spatial estimation error.
    pub fn eps(&self) -> f64 {
        self.est_error[0].hypot(self.est_error[1])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0) {
            return Err(Error::Config("v_max must be positive".into()));
        }
        if self.est_error.iter().any(|e| *e < 0.0) {
            return Err(Error::Config("estimation errors must be nonnegative".into()));
        }
        if let Dynamics::Ev { accel_limits, max_steer, max_steer_rate, .. } = self.dynamics {
            if !(accel_limits[0] < accel_limits[1]) || !(max_steer > 0.0) || !(max_steer_rate > 0.0) {
                return Err(Error::Config("EV saturation intervals must be nonempty".into()));
            }
        }
        Ok(())
    }

    fn rhs(&self, s: &HighFidelityState, u: ControlInput) -> [f64; 5] {
        let (sin, cos) = s.heading.sin_cos();
        match self.dynamics {
            Dynamics::Segway { yaw_gain, speed_gain } => [
                s.speed * cos,
                s.speed * sin,
                s.aux,
                yaw_gain * (u.u1 - s.aux),
                speed_gain * (u.u2 - s.speed),
            ],
            Dynamics::Ev { c, max_steer_rate, accel_limits, max_steer } => {
                let v = s.speed;
                let yaw = s.aux.tan() * v / (c[2] + c[3] * v * v);
                let lateral = yaw * (c[0] + c[1] * v * v);
                let mut steer_rate = (c[4] * (s.aux - u.u1)).clamp(-max_steer_rate, max_steer_rate);
                if (s.aux >= max_steer && steer_rate > 0.0) || (s.aux <= -max_steer && steer_rate < 0.0) {
                    steer_rate = 0.0;
                }
                let dv = v - u.u2;
                let accel = (c[5] + c[6] * dv + c[7] * dv * dv).clamp(accel_limits[0], accel_limits[1]);
                [v * cos - lateral * sin, v * sin + lateral * cos, yaw, steer_rate, accel]
            }
        }
    }

    fn project(&self, mut s: HighFidelityState) -> HighFidelityState {
        if let Dynamics::Ev { max_steer, .. } = self.dynamics {
            s.aux = s.aux.clamp(-max_steer, max_steer);
        }
        s.speed = s.speed.clamp(0.0, self.v_max);
        s.heading = wrap_angle(s.heading);
        s
    }

    /// Planar speed of the reference point.
    pub fn planar_speed(&self, s: &HighFidelityState) -> f64 {
        let d = self.rhs(s, ControlInput::default());
        d[0].hypot(d[1])
    }

    /// One RK4 step of length `dt` starting at plan time `t` while tracking `k`.
    pub fn step(&self, s: &HighFidelityState, t: f64, dt: f64, k: TrajParam, sched: &PhaseSchedule) -> Result<HighFidelityState> {
        let u0 = low_level_controller(t, k, sched);
        let um = low_level_controller(t + 0.5 * dt, k, sched);
        let u1 = low_level_controller(t + dt, k, sched);
        let a = self.rhs(s, u0);
        let b = self.rhs(&s.axpy(0.5 * dt, &a), um);
        let c = self.rhs(&s.axpy(0.5 * dt, &b), um);
        let d = self.rhs(&s.axpy(dt, &c), u1);
        let mut inc = [0.0; 5];
        for i in 0..5 {
            inc[i] = (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]) / 6.0;
        }
        let next = self.project(s.axpy(dt, &inc));
        if !next.is_finite() {
            return Err(Error::IntegrationDiverged { t: t + dt });
        }
        Ok(next)
    }
}

/// Fixed-step RK4 of the high-fidelity model under u_k over [0, t_f].
pub fn integrate_high_fidelity(
    model: &ModelParams,
    x0: HighFidelityState,
    k: TrajParam,
    family: &TrajectoryFamily,
    dt: f64,
) -> Result<Trajectory<HighFidelityState>> {
    let n = step_count(family.t_f, dt)?;
    let h = family.t_f / n as f64;
    let sched = family.schedule(k);
    let mut s = model.project(x0);
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(s);
    for i in 0..n {
        s = model.step(&s, i as f64 * h, h, k, &sched)?;
        samples.push(s);
    }
    Ok(Trajectory { t0: 0.0, dt: h, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RobotConfig;
    use approx::assert_abs_diff_eq;

    fn segway() -> RobotConfig {
        RobotConfig::segway()
    }

    #[test]
    fn speed_scale_boundaries() {
        let fam = segway().family;
        let k = TrajParam::new(0.7, 1.3);
        let sched = fam.schedule(k);
        assert_eq!(sched.speed_scale(fam.tau_plan), 1.0);
        assert_eq!(sched.speed_scale(sched.brake_end()), 0.0);
        let before = traj_producing_rhs(fam.tau_plan - 1e-9, Vec2::new(0.3, 0.2), k, &fam).unwrap();
        let at = traj_producing_rhs(fam.tau_plan, Vec2::new(0.3, 0.2), k, &fam).unwrap();
        assert!((before - at).norm() < 1e-8);
        assert_eq!(traj_producing_rhs(sched.brake_end(), Vec2::new(1.0, 1.0), k, &fam).unwrap(), Vec2::ZERO);
    }

    #[test]
    fn straight_line_rhs() {
        let fam = segway().family;
        let v = traj_producing_rhs(0.2, Vec2::new(3.0, -1.0), TrajParam::new(0.0, 2.0), &fam).unwrap();
        assert_eq!(v, Vec2::new(2.0, 0.0));
    }

    #[test]
    fn rhs_rejects_time_outside_horizon() {
        let fam = segway().family;
        assert!(matches!(traj_producing_rhs(-0.1, Vec2::ZERO, TrajParam::default(), &fam), Err(Error::Domain(_))));
        assert!(traj_producing_rhs(fam.t_f + 0.1, Vec2::ZERO, TrajParam::default(), &fam).is_err());
    }

    #[test]
    fn zero_brake_time_means_empty_brake_phase() {
        let fam = RobotConfig::ev().family;
        let k = TrajParam::new(0.2, 0.0);
        let sched = fam.schedule(k);
        assert_eq!(sched.tau_brake, 0.0);
        assert_eq!(traj_producing_rhs(fam.tau_plan + 0.01, Vec2::new(1.0, 0.0), k, &fam).unwrap(), Vec2::ZERO);
        assert_eq!(sched.phase(fam.tau_plan + 0.01), Phase::Stop);
    }

    #[test]
    fn straight_endpoint_matches_quadrature() {
        // x1(t_f) = k2 * tau_plan + k2 * integral of s over the braking phase = 1.0 + 1.0.
        let fam = segway().family;
        let traj = desired_trajectory(TrajParam::new(0.0, 2.0), &fam, 0.01).unwrap();
        let end = *traj.samples.last().unwrap();
        assert_abs_diff_eq!(end.x, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(end.y, 0.0, epsilon = 1e-12);
        let prev = traj.samples[traj.len() - 2];
        assert!((end - prev).norm() < 1e-9);
        assert_abs_diff_eq!(fam.endpoint(TrajParam::new(0.0, 2.0)).x, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_param_stays_at_origin() {
        let fam = segway().family;
        let traj = desired_trajectory(TrajParam::new(0.0, 0.0), &fam, 0.01).unwrap();
        assert!(traj.samples.iter().all(|p| *p == Vec2::ZERO));
    }

    #[test]
    fn arc_radius_matches_chord_formula() {
        let fam = segway().family;
        let (k1, k2) = (1.5, 1.0);
        let traj = desired_trajectory(TrajParam::new(k1, k2), &fam, 0.01).unwrap();
        for (t, p) in traj.iter().filter(|(t, _)| *t <= fam.tau_plan) {
            let chord = 2.0 * (k2 / k1) * (k1 * t / 2.0).sin().abs();
            assert_abs_diff_eq!(p.norm(), chord, epsilon = 1e-9);
        }
        // closed form agrees with RK4 across all phases
        for (t, p) in traj.iter() {
            let sched = fam.schedule(TrajParam::new(k1, k2));
            let q = arc_point(k1, k2, sched.arc_time(t));
            assert!((*p - q).norm() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn controller_phases() {
        let fam = segway().family;
        let k = TrajParam::new(1.5, 2.0);
        let sched = fam.schedule(k);
        assert_eq!(low_level_controller(0.2, k, &sched), ControlInput { u1: 1.5, u2: 2.0 });
        let mid = low_level_controller(fam.tau_plan + sched.tau_brake / 2.0, k, &sched);
        assert_abs_diff_eq!(mid.u1, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(mid.u2, 1.0, epsilon = 1e-12);
        assert_eq!(low_level_controller(fam.t_f - 0.1, k, &sched), ControlInput { u1: 0.0, u2: 0.0 });
    }

    #[test]
    fn braking_times() {
        let seg = segway().family;
        let ev = RobotConfig::ev().family;
        assert_eq!(braking_time(TrajParam::new(0.3, 1.7), &seg.brake), 1.0);
        assert_abs_diff_eq!(braking_time(TrajParam::new(0.0, 5.0), &ev.brake), 5.0 / 3.0, epsilon = 1e-15);
        assert_eq!(braking_time(TrajParam::new(0.0, 0.0), &ev.brake), 0.0);
        assert_abs_diff_eq!(ev.schedule(TrajParam::new(0.0, 3.0)).tau_brake, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn segway_equilibrium() {
        let cfg = segway();
        let x0 = HighFidelityState::at_rest(Pose::IDENTITY);
        let traj = integrate_high_fidelity(&cfg.model, x0, TrajParam::default(), &cfg.family, 0.01).unwrap();
        assert!(traj.samples.iter().all(|s| *s == x0));
    }

    #[test]
    fn robots_stop_by_t_f_and_respect_v_max() {
        for cfg in [RobotConfig::segway(), RobotConfig::ev()] {
            let p = cfg.family.params;
            for &k1 in &[p.lo[0], 0.0, p.hi[0]] {
                for &k2 in &[p.lo[1], 0.5 * p.hi[1], p.hi[1]] {
                    let k = TrajParam::new(k1, k2);
                    for x0 in cfg.initial_grid(k, 2, 2) {
                        let traj = integrate_high_fidelity(&cfg.model, x0, k, &cfg.family, cfg.dt).unwrap();
                        let peak = traj.samples.iter().map(|s| cfg.model.planar_speed(s)).fold(0.0, f64::max);
                        assert!(peak <= cfg.model.v_max + 1e-6, "{}: peak {peak}", cfg.id);
                        let end = cfg.model.planar_speed(traj.samples.last().unwrap());
                        assert!(end < 1e-3, "{}: k=({k1},{k2}) x0={x0:?} end speed {end}", cfg.id);
                    }
                }
            }
        }
    }

    #[test]
    fn integration_is_deterministic() {
        let cfg = RobotConfig::ev();
        let x0 = HighFidelityState { speed: 2.0, aux: 0.1, ..Default::default() };
        let a = integrate_high_fidelity(&cfg.model, x0, TrajParam::new(0.3, 4.0), &cfg.family, 0.01).unwrap();
        let b = integrate_high_fidelity(&cfg.model, x0, TrajParam::new(0.3, 4.0), &cfg.family, 0.01).unwrap();
        assert_eq!(a, b);
    }
}
