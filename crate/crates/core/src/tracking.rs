//! Empirical tracking-error functions g_{i,j}.
//!
//! Each g_{i,j} is piecewise constant in absolute time over ten bins spanning the widest
//! possible extent of phase i, and quadratic in k within each bin. A bin only contributes
//! where phase i is active for the given k.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RobotConfig;
use crate::error::{Error, Result};
use crate::geometry::wrap_angle;
use crate::interval::Interval;
use crate::models::{arc_point, braking_time, integrate_high_fidelity, HighFidelityState, Phase, TrajParam, TrajectoryFamily};
use crate::world::Footprint;

pub const BINS_PER_PHASE: usize = 10;
pub const DEFAULT_MARGIN: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationSample {
    pub phase: Phase,
    /// Coordinate index, 0 or 1.
    pub coord: usize,
    pub k: TrajParam,
    pub x0_id: usize,
    pub t: f64,
    pub deviation: f64,
}

/// Sampling grid: `k_per_axis`^2 parameters, each with `n_aux` x `n_speed` initial states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub k_per_axis: usize,
    pub n_aux: usize,
    pub n_speed: usize,
}

impl Default for SampleGrid {
    fn default() -> Self {
        Self { k_per_axis: 9, n_aux: 3, n_speed: 5 }
    }
}

impl SampleGrid {
    pub fn k_values(&self, family: &TrajectoryFamily) -> Vec<TrajParam> {
        let p = &family.params;
        let lin = |a: usize, i: usize| {
            if self.k_per_axis <= 1 {
                0.5 * (p.lo[a] + p.hi[a])
            } else {
                p.lo[a] + p.width(a) * i as f64 / (self.k_per_axis - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(self.k_per_axis * self.k_per_axis);
        for i in 0..self.k_per_axis {
            for j in 0..self.k_per_axis {
                out.push(TrajParam::new(lin(0, i), lin(1, j)));
            }
        }
        out
    }
}

/// Lever arm for converting heading error into body-point displacement.
fn heading_lever(fp: &Footprint) -> f64 {
    match fp {
        Footprint::Circle { .. } => 0.0,
        Footprint::Rectangle { .. } => fp.circumradius(),
    }
}

/// Per-step coordinatewise deviation of the high-fidelity footprint from the desired
/// trajectory, both started at the origin with zero heading.
pub fn deviation_trace(cfg: &RobotConfig, k: TrajParam, x0: HighFidelityState, dt: f64) -> Result<Vec<(f64, [f64; 2])>> {
    let x0 = HighFidelityState { x: 0.0, y: 0.0, heading: 0.0, ..x0 };
    let traj = integrate_high_fidelity(&cfg.model, x0, k, &cfg.family, dt)?;
    let sched = cfg.family.schedule(k);
    let omega = cfg.family.omega_des(k);
    let lever = heading_lever(&cfg.footprint);
    Ok(traj
        .iter()
        .map(|(t, s)| {
            let arc = sched.arc_time(t);
            let p = arc_point(omega, k.k2, arc);
            let dh = lever * wrap_angle(s.heading - omega * arc).abs();
            (t, [(s.x - p.x).abs() + dh, (s.y - p.y).abs() + dh])
        })
        .collect())
}

/// Simulates every (k, x0) pair and records coordinatewise deviations at every step.
pub fn sample_tracking_deviations(cfg: &RobotConfig, k_grid: &[TrajParam], grid: &SampleGrid, dt: f64) -> Result<Vec<DeviationSample>> {
    if k_grid.is_empty() || grid.n_aux == 0 || grid.n_speed == 0 {
        return Err(Error::Domain("sampling grids must be nonempty".into()));
    }
    let per_k: Vec<Result<Vec<DeviationSample>>> = k_grid
        .par_iter()
        .map(|&k| {
            let sched = cfg.family.schedule(k);
            let mut out = Vec::new();
            for (x0_id, x0) in cfg.initial_grid(k, grid.n_aux, grid.n_speed).into_iter().enumerate() {
                for (t, dev) in deviation_trace(cfg, k, x0, dt)? {
                    let phase = sched.phase(t);
                    for (coord, &deviation) in dev.iter().enumerate() {
                        out.push(DeviationSample { phase, coord, k, x0_id, t, deviation });
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_k {
        all.extend(r?);
    }
    Ok(all)
}

/// Time bins for one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    pub start: f64,
    pub end: f64,
    pub bins: usize,
}

impl BinGrid {
    pub fn width(&self) -> f64 {
        (self.end - self.start) / self.bins as f64
    }

    pub fn bin(&self, b: usize) -> (f64, f64) {
        let w = self.width();
        (self.start + w * b as f64, if b + 1 == self.bins { self.end } else { self.start + w * (b + 1) as f64 })
    }

    /// Bins meeting the closed interval [a, c].
    pub fn overlapping(&self, a: f64, c: f64) -> std::ops::RangeInclusive<usize> {
        let w = self.width();
        if !(w > 0.0) {
            return 0..=0;
        }
        let lo = (((a - self.start) / w).floor().max(0.0) as usize).min(self.bins - 1);
        let hi = (((c - self.start) / w).ceil().max(1.0) as usize - 1).min(self.bins - 1).max(lo);
        lo..=hi
    }
}

/// Quadratic in k: c0 + c1 k1 + c2 k2 + c3 k1^2 + c4 k1 k2 + c5 k2^2.
pub type QuadCoeffs = [f64; 6];

fn monomials(k: TrajParam) -> [f64; 6] {
    [1.0, k.k1, k.k2, k.k1 * k.k1, k.k1 * k.k2, k.k2 * k.k2]
}

fn quad_eval(c: &QuadCoeffs, k: TrajParam) -> f64 {
    monomials(k).iter().zip(c).map(|(m, c)| m * c).sum()
}

fn quad_interval(c: &QuadCoeffs, k1: Interval, k2: Interval) -> Interval {
    let terms = [Interval::point(1.0), k1, k2, k1.sqr(), k1 * k2, k2.sqr()];
    terms.iter().zip(c).fold(Interval::point(0.0), |acc, (m, &c)| acc + m.scale(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub pairs: usize,
    pub violations: usize,
    /// Largest observed deviation minus its bound (negative when all samples are covered).
    pub worst_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitReport {
    pub samples: usize,
    pub violations: usize,
    pub worst_excess: f64,
    pub grid: Option<SampleGrid>,
    pub holdout: Option<HoldoutReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingErrorBound {
    pub family: TrajectoryFamily,
    pub margin: f64,
    pub grids: [BinGrid; 3],
    /// Indexed by [phase][coord][bin].
    pub coeffs: [[Vec<QuadCoeffs>; 2]; 3],
    pub report: FitReport,
}

/// Closed interval of times during which phase `i` is active for k.
fn phase_span(family: &TrajectoryFamily, phase: Phase, k: TrajParam) -> Option<(f64, f64)> {
    let tp = family.tau_plan;
    let tb = braking_time(k, &family.brake);
    match phase {
        Phase::Move => Some((0.0, tp)),
        Phase::Brake if tb > 0.0 => Some((tp, tp + tb)),
        Phase::Brake => None,
        Phase::Stop => Some((tp + tb, family.t_f)),
    }
}

impl TrackingErrorBound {
    pub fn zero(family: &TrajectoryFamily, margin: f64) -> Self {
        let tp = family.tau_plan;
        let grids = [
            BinGrid { start: 0.0, end: tp, bins: BINS_PER_PHASE },
            BinGrid { start: tp, end: tp + family.max_brake(), bins: BINS_PER_PHASE },
            BinGrid { start: tp + family.min_brake(), end: family.t_f, bins: BINS_PER_PHASE },
        ];
        let zeros = || vec![[0.0; 6]; BINS_PER_PHASE];
        Self {
            family: *family,
            margin,
            grids,
            coeffs: [[zeros(), zeros()], [zeros(), zeros()], [zeros(), zeros()]],
            report: FitReport::default(),
        }
    }

    /// g_{i,j}(t, k).
    pub fn phase_rate(&self, phase: Phase, coord: usize, t: f64, k: TrajParam) -> f64 {
        let Some((a, c)) = phase_span(&self.family, phase, k) else { return 0.0 };
        if t < a || t > c {
            return 0.0;
        }
        let grid = &self.grids[phase.index()];
        let coeffs = &self.coeffs[phase.index()][coord];
        grid.overlapping(t, t).map(|b| quad_eval(&coeffs[b], k).max(0.0)).fold(0.0, f64::max) * self.margin
    }

    /// Running integral of max_i g_{i,j} over [0, t].
    pub fn integral(&self, coord: usize, t: f64, k: TrajParam) -> f64 {
        let mut total = 0.0;
        for phase in Phase::ALL {
            let Some((a, c)) = phase_span(&self.family, phase, k) else { continue };
            let grid = &self.grids[phase.index()];
            for b in 0..grid.bins {
                let (lo, hi) = grid.bin(b);
                let len = hi.min(c).min(t) - lo.max(a);
                if len > 0.0 {
                    total += len * quad_eval(&self.coeffs[phase.index()][coord][b], k).max(0.0);
                }
            }
        }
        total * self.margin
    }

    /// Upper bound of max_i g_{i,j} over a time interval and a box of parameters.
    pub fn rate_upper(&self, coord: usize, t: Interval, k1: Interval, k2: Interval) -> f64 {
        let tp = self.family.tau_plan;
        let tb = Interval::new(
            braking_time(TrajParam::new(0.0, k2.lo), &self.family.brake),
            braking_time(TrajParam::new(0.0, k2.hi), &self.family.brake),
        );
        let mut out: f64 = 0.0;
        for phase in Phase::ALL {
            let span = match phase {
                Phase::Move => (t.lo, t.hi.min(tp)),
                Phase::Brake if tb.hi > 0.0 => (t.lo.max(tp), t.hi.min(tp + tb.hi)),
                Phase::Brake => continue,
                Phase::Stop => (t.lo.max(tp + tb.lo), t.hi),
            };
            if span.0 > span.1 {
                continue;
            }
            let grid = &self.grids[phase.index()];
            if span.1 < grid.start || span.0 > grid.end {
                continue;
            }
            for b in grid.overlapping(span.0, span.1) {
                out = out.max(quad_interval(&self.coeffs[phase.index()][coord][b], k1, k2).hi);
            }
        }
        out.max(0.0) * self.margin
    }

    /// Worst excess of observed deviation over the integral bound, and the count of violations.
    pub fn validate(&self, samples: &[DeviationSample]) -> (usize, Option<(f64, DeviationSample)>) {
        let mut violations = 0;
        let mut worst: Option<(f64, DeviationSample)> = None;
        for s in samples {
            let excess = s.deviation - self.integral(s.coord, s.t, s.k);
            if excess > 1e-12 {
                violations += 1;
            }
            if worst.map_or(true, |(w, _)| excess > w) {
                worst = Some((excess, *s));
            }
        }
        (violations, worst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bound serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// g_j(t, k) = max_i g_{i,j}(t, k).
pub fn g_eval(bound: &TrackingErrorBound, t: f64, k: TrajParam) -> [f64; 2] {
    let mut g = [0.0f64; 2];
    for (coord, gj) in g.iter_mut().enumerate() {
        for phase in Phase::ALL {
            *gj = gj.max(bound.phase_rate(phase, coord, t, k));
        }
    }
    g
}

/// Upper-dominating quadratic through the required rates at the given parameters.
fn fit_dominating_quadratic(points: &[(TrajParam, f64)]) -> QuadCoeffs {
    if points.iter().all(|(_, r)| *r <= 0.0) {
        return [0.0; 6];
    }
    let a = DMatrix::from_fn(points.len(), 6, |i, j| monomials(points[i].0)[j]);
    let b = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let sol = a.clone().svd(true, true).solve(&b, 1e-10).unwrap_or_else(|_| DVector::zeros(6));
    let mut c = [0.0; 6];
    for (i, v) in sol.iter().enumerate() {
        c[i] = if v.is_finite() { *v } else { 0.0 };
    }
    let shift = points.iter().map(|(k, r)| r - quad_eval(&c, *k)).fold(0.0, f64::max);
    c[0] += shift;
    c
}

/// Fits g so every sample satisfies deviation(t) <= integral_0^t g, then scales by `margin`.
pub fn fit_error_bound(family: &TrajectoryFamily, samples: &[DeviationSample], margin: f64) -> Result<TrackingErrorBound> {
    if !(margin > 0.0) {
        return Err(Error::Domain(format!("margin must be positive, got {margin}")));
    }
    let mut bound = TrackingErrorBound::zero(family, 1.0);

    // Per k and coordinate, the largest deviation over initial states at each time.
    let mut by_k: BTreeMap<(u64, u64), (TrajParam, [BTreeMap<u64, f64>; 2])> = BTreeMap::new();
    for s in samples {
        let entry = by_k.entry((s.k.k1.to_bits(), s.k.k2.to_bits())).or_insert_with(|| (s.k, [BTreeMap::new(), BTreeMap::new()]));
        let slot = entry.1[s.coord].entry(s.t.to_bits()).or_insert(0.0);
        *slot = slot.max(s.deviation);
    }
    let envelopes: Vec<(TrajParam, [Vec<(f64, f64)>; 2])> = by_k
        .into_values()
        .map(|(k, maps)| {
            let conv = |m: &BTreeMap<u64, f64>| {
                let mut v: Vec<(f64, f64)> = m.iter().map(|(t, d)| (f64::from_bits(*t), *d)).collect();
                v.sort_by(|a, b| a.0.total_cmp(&b.0));
                v
            };
            (k, [conv(&maps[0]), conv(&maps[1])])
        })
        .collect();

    for phase in Phase::ALL {
        let pi = phase.index();
        for b in 0..BINS_PER_PHASE {
            let (blo, bhi) = bound.grids[pi].bin(b);
            for coord in 0..2 {
                let mut points = Vec::new();
                for (k, env) in &envelopes {
                    let Some((a, c)) = phase_span(family, phase, *k) else { continue };
                    let (s, e) = (blo.max(a), bhi.min(c));
                    if e - s <= 1e-12 {
                        continue;
                    }
                    let g0 = bound.integral(coord, s, *k);
                    let rate = env[coord]
                        .iter()
                        .filter(|(t, _)| *t > s + 1e-12 && *t <= e + 1e-12)
                        .map(|(t, d)| (d - g0) / (t - s))
                        .fold(0.0, f64::max);
                    points.push((*k, rate));
                }
                bound.coeffs[pi][coord][b] = fit_dominating_quadratic(&points);
            }
        }
    }

    bound.margin = margin;
    let (violations, worst) = bound.validate(samples);
    if violations > 0 {
        let (excess, s) = worst.expect("violation implies a worst sample");
        return Err(Error::FitFailed {
            violations,
            worst_excess: excess,
            phase: s.phase.name().into(),
            coord: s.coord,
            t: s.t,
            k1: s.k.k1,
            k2: s.k.k2,
        });
    }
    bound.report = FitReport {
        samples: samples.len(),
        violations: 0,
        worst_excess: worst.map_or(0.0, |w| w.0),
        grid: None,
        holdout: None,
    };
    Ok(bound)
}

/// Checks the bound on `pairs` fresh random (k, x0) combinations.
pub fn holdout(bound: &TrackingErrorBound, cfg: &RobotConfig, pairs: usize, seed: u64, dt: f64) -> Result<HoldoutReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = cfg.family.params;
    let draws: Vec<(TrajParam, HighFidelityState)> = (0..pairs)
        .map(|_| {
            let k = TrajParam::new(rng.gen_range(p.lo[0]..=p.hi[0]), rng.gen_range(p.lo[1]..=p.hi[1]));
            let a = cfg.aux_range(k);
            let v = cfg.speed_range(k);
            let x0 = HighFidelityState { aux: rng.gen_range(a[0]..=a[1]), speed: rng.gen_range(v[0]..=v[1]), ..Default::default() };
            (k, x0)
        })
        .collect();
    let results: Vec<Result<f64>> = draws
        .par_iter()
        .map(|&(k, x0)| {
            let trace = deviation_trace(cfg, k, x0, dt)?;
            Ok(trace
                .iter()
                .flat_map(|(t, d)| (0..2).map(move |j| (j, *t, d[j])))
                .map(|(j, t, d)| d - bound.integral(j, t, k))
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect();
    let mut report = HoldoutReport { pairs, violations: 0, worst_excess: f64::NEG_INFINITY };
    for r in results {
        let excess = r?;
        if excess > 1e-12 {
            report.violations += 1;
        }
        report.worst_excess = report.worst_excess.max(excess);
    }
    Ok(report)
}

/// Samples on `grid`, fits with `margin`, and records a holdout check in the report.
pub fn fit_for_robot(cfg: &RobotConfig, grid: &SampleGrid, margin: f64, holdout_pairs: usize, seed: u64) -> Result<TrackingErrorBound> {
    let ks = grid.k_values(&cfg.family);
    let samples = sample_tracking_deviations(cfg, &ks, grid, cfg.dt)?;
    let mut bound = fit_error_bound(&cfg.family, &samples, margin)?;
    bound.report.grid = Some(*grid);
    if holdout_pairs > 0 {
        bound.report.holdout = Some(holdout(&bound, cfg, holdout_pairs, seed, cfg.dt)?);
    }
    Ok(bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{desired_trajectory, Trajectory};

    #[test]
    fn at_rest_with_zero_param_has_no_deviation() {
        let cfg = RobotConfig::segway();
        let trace = deviation_trace(&cfg, TrajParam::default(), HighFidelityState::default(), 0.01).unwrap();
        assert!(trace.iter().all(|(_, d)| d[0] == 0.0 && d[1] == 0.0));
        assert_eq!(trace[0].1, [0.0, 0.0]);
    }

    #[test]
    fn sample_cardinality() {
        let cfg = RobotConfig::segway();
        let grid = SampleGrid { k_per_axis: 5, n_aux: 1, n_speed: 9 };
        let ks = grid.k_values(&cfg.family);
        let samples = sample_tracking_deviations(&cfg, &ks, &grid, 0.01).unwrap();
        let mut pairs: Vec<(u64, u64, usize)> = samples.iter().map(|s| (s.k.k1.to_bits(), s.k.k2.to_bits(), s.x0_id)).collect();
        pairs.sort();
        pairs.dedup();
        assert_eq!(pairs.len(), 225);
        assert!(samples.iter().all(|s| s.deviation >= 0.0));
        assert!(samples.iter().filter(|s| s.t == 0.0).all(|s| s.deviation == 0.0));
    }

    #[test]
    fn zero_data_gives_zero_bound() {
        let fam = RobotConfig::segway().family;
        let samples: Vec<DeviationSample> = (0..=200)
            .map(|i| DeviationSample { phase: Phase::Move, coord: 0, k: TrajParam::new(0.0, 1.0), x0_id: 0, t: i as f64 * 0.01, deviation: 0.0 })
            .collect();
        let b = fit_error_bound(&fam, &samples, 1.1).unwrap();
        assert!(b.coeffs.iter().flatten().flatten().flatten().all(|c| *c == 0.0));
        assert_eq!(g_eval(&b, 1.0, TrajParam::new(0.5, 1.0)), [0.0, 0.0]);
    }

    #[test]
    fn segway_fit_covers_samples_and_small_margin_fails() {
        let cfg = RobotConfig::segway();
        let grid = SampleGrid { k_per_axis: 5, n_aux: 3, n_speed: 3 };
        let ks = grid.k_values(&cfg.family);
        let samples = sample_tracking_deviations(&cfg, &ks, &grid, 0.01).unwrap();
        let b = fit_error_bound(&cfg.family, &samples, 1.1).unwrap();
        assert_eq!(b.validate(&samples).0, 0);
        match fit_error_bound(&cfg.family, &samples, 0.5) {
            Err(Error::FitFailed { violations, worst_excess, .. }) => assert!(violations > 0 && worst_excess > 0.0),
            other => panic!("expected fit failure, got {other:?}"),
        }
    }

    fn toy_bound() -> TrackingErrorBound {
        let fam = RobotConfig::segway().family;
        let mut b = TrackingErrorBound::zero(&fam, 1.0);
        for c in 0..2 {
            b.coeffs[0][c] = vec![[0.3, 0.0, 0.0, 0.0, 0.0, 0.0]; BINS_PER_PHASE];
            b.coeffs[1][c] = vec![[0.1, 0.0, 0.0, 0.0, 0.0, 0.0]; BINS_PER_PHASE];
        }
        b
    }

    #[test]
    fn support_and_boundary_max() {
        let b = toy_bound();
        let k = TrajParam::new(0.2, 1.0);
        assert_eq!(g_eval(&b, 1.8, k), [0.0, 0.0]);
        assert_eq!(g_eval(&b, 0.5, k), [0.3, 0.3]);
        assert_eq!(g_eval(&b, 1.0, k), [0.1, 0.1]);
        for phase in Phase::ALL {
            for t in [0.0, 0.25, 0.5, 1.0, 1.5, 2.0] {
                assert!(g_eval(&b, t, k)[0] >= b.phase_rate(phase, 0, t, k));
            }
        }
        assert!((b.integral(0, 2.0, k) - (0.3 * 0.5 + 0.1 * 1.0)).abs() < 1e-12);
    }

    #[test]
    fn rate_upper_dominates_pointwise() {
        let cfg = RobotConfig::ev();
        let grid = SampleGrid { k_per_axis: 4, n_aux: 2, n_speed: 2 };
        let ks = grid.k_values(&cfg.family);
        let samples = sample_tracking_deviations(&cfg, &ks, &grid, 0.02).unwrap();
        let b = fit_error_bound(&cfg.family, &samples, 1.1).unwrap();
        let (t, k1, k2) = (Interval::new(0.6, 0.7), Interval::new(-0.1, 0.1), Interval::new(2.0, 2.5));
        let up = [b.rate_upper(0, t, k1, k2), b.rate_upper(1, t, k1, k2)];
        for i in 0..=4 {
            for j in 0..=4 {
                let k = TrajParam::new(k1.lo + 0.05 * i as f64, k2.lo + 0.125 * j as f64);
                for s in 0..=5 {
                    let g = g_eval(&b, 0.6 + 0.02 * s as f64, k);
                    assert!(g[0] <= up[0] + 1e-12 && g[1] <= up[1] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn segway_straight_trace_within_bound() {
        let cfg = RobotConfig::segway();
        let b = fit_for_robot(&cfg, &SampleGrid { k_per_axis: 5, n_aux: 3, n_speed: 3 }, 1.1, 0, 0).unwrap();
        let k = TrajParam::new(0.0, 2.0);
        let x0 = HighFidelityState { speed: 2.0, ..Default::default() };
        let hi = integrate_high_fidelity(&cfg.model, x0, k, &cfg.family, 0.01).unwrap();
        let des: Trajectory<_> = desired_trajectory(k, &cfg.family, 0.01).unwrap();
        for ((t, s), (_, p)) in hi.iter().zip(des.iter()) {
            assert!((s.x - p.x).abs() <= b.integral(0, t, k) + 1e-9);
            assert!((s.y - p.y).abs() <= b.integral(1, t, k) + 1e-9);
        }
    }

    #[test]
    fn json_round_trip_and_hash() {
        let b = toy_bound();
        let back = TrackingErrorBound::from_json(&b.to_json()).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.hash(), b.hash());
        assert_eq!(b.hash().len(), 64);
    }
}
