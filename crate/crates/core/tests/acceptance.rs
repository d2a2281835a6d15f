//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines are printed under `cargo test`. The process fails
//! when a criterion fails, except criteria listed as unattainable, which print FAIL with
//! their reason and are checked against their independent oracle instead.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rtdd_core::certificate::{check_certificate, spot_check, CertContext, PolynomialCertificate, Verdict};
use rtdd_core::config::RobotConfig;
use rtdd_core::discretize::{disc, point_spacing, time_grid, DiscretizationParams};
use rtdd_core::frs::FrsTube;
use rtdd_core::geometry::{Aabb, Polygon, Pose, Vec2};
use rtdd_core::models::{integrate_high_fidelity, HighFidelityState, TrajParam};
use rtdd_core::planner::{naf_feasible, Planner, PlannerOptions, DEFAULT_THRESHOLD};
use rtdd_core::poly::Polynomial;
use rtdd_core::sim::{metrics_table, BatchSpec, Harness, TrialConfig, TrialResult};
use rtdd_core::world::{min_sensor_horizon, predict_oracle, Footprint, Obstacle};

struct Outcome {
    pass: bool,
    detail: String,
    /// Set only when the independent oracle agrees and the stated target cannot be met.
    unattainable: Option<String>,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail, unattainable: None }
}

fn random_k(rng: &mut ChaCha8Rng, cfg: &RobotConfig) -> TrajParam {
    let p = cfg.family.params;
    TrajParam::new(rng.gen_range(p.lo[0]..=p.hi[0]), rng.gen_range(p.lo[1]..=p.hi[1]))
}

fn cell_extents(tube: &FrsTube) -> Vec<Aabb> {
    let [n1, n2] = tube.header.cells;
    (0..n1 * n2)
        .map(|c| {
            let cell = (c / n2, c % n2);
            (0..tube.steps()).fold(Aabb::empty(), |b, n| b.union(&tube.occupancy(cell, n).bounding_box()))
        })
        .collect()
}

struct Batch {
    results: Vec<TrialResult>,
    clean: usize,
    csv: String,
}

fn segway_batch(threads: usize) -> Batch {
    let p = common::segway();
    let h = Harness::new(&p.cfg, &p.tube, PlannerOptions::for_robot(&p.cfg)).unwrap();
    let batch = BatchSpec { template: TrialConfig::for_robot(&p.cfg, 0, 0), trials_per_count: 20, counts: (1..=10).collect(), audit: true, trace_dir: None };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let out = pool.install(|| h.run_batch(&batch)).unwrap();
    let results: Vec<TrialResult> = out.iter().map(|b| b.result.clone()).collect();
    let clean = out.iter().filter(|b| b.audit.as_ref().is_some_and(|a| a.is_clean())).count();
    let csv = metrics_table(&results).to_csv();
    Batch { results, clean, csv }
}

fn not_at_fault(batch: &Batch) -> Outcome {
    let n = batch.results.len();
    let faults = batch.results.iter().filter(|r| r.at_fault).count();
    outcome(
        n == 200 && faults == 0 && batch.clean == n,
        format!("{n} Segway trials (20 per count 1-10): {faults} at-fault, {} audits clean", batch.clean),
    )
}

fn liveness(batch: &Batch) -> Outcome {
    let few: Vec<&TrialResult> = batch.results.iter().filter(|r| r.n_obs <= 5).collect();
    let goals = few.iter().filter(|r| r.reached_goal).count();
    let rate = 100.0 * goals as f64 / few.len() as f64;
    outcome(rate >= 80.0, format!("goal rate {rate:.1}% over {} trials with <= 5 obstacles (floor 80%)", few.len()))
}

fn rollout_containment(cfg: &RobotConfig, tube: &FrsTube, seed: u64) -> (usize, usize) {
    let per_rollout = 100;
    let rollouts = 1000;
    (0..rollouts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let k = random_k(&mut rng, cfg);
            let (a, v) = (cfg.aux_range(k), cfg.speed_range(k));
            let x0 = HighFidelityState { aux: rng.gen_range(a[0]..=a[1]), speed: rng.gen_range(v[0]..=v[1]), ..Default::default() };
            let tr = integrate_high_fidelity(&cfg.model, x0, k, &cfg.family, cfg.dt).unwrap();
            let mut bad = 0;
            for _ in 0..per_rollout {
                let j = rng.gen_range(0..tr.len());
                let x = tr.samples[j].pose().to_world(cfg.footprint.body_point(rng.gen(), rng.gen()));
                if tube.w_eval(tr.time(j), x, k).unwrap() != 1.0 {
                    bad += 1;
                }
            }
            (per_rollout, bad)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

fn tube_containment(seg: &common::Pipeline, ev: &common::Pipeline) -> Outcome {
    let (ns, bs) = rollout_containment(&seg.cfg, &seg.tube, 11);
    let (ne, be) = rollout_containment(&ev.cfg, &ev.tube, 12);
    outcome(bs == 0 && be == 0 && ns >= 100_000 && ne >= 100_000, format!("Segway {bs}/{ns} and EV {be}/{ne} rollout points outside the tube"))
}

struct Sweep {
    passed: usize,
    attempts: usize,
    violations: usize,
    near: usize,
}

fn random_obstacle(rng: &mut ChaCha8Rng, cfg: &RobotConfig, region: &Aabb, size: f64) -> Obstacle {
    let at = Vec2::new(rng.gen_range(region.lo.x..=region.hi.x), rng.gen_range(region.lo.y..=region.hi.y));
    let dir = rng.gen_range(0.0..std::f64::consts::TAU);
    let speed = rng.gen_range(0.0..=cfg.v_obs_max);
    Obstacle { shape: Polygon::rectangle(Vec2::ZERO, size, size), waypoints: vec![at, at + Vec2::new(dir.cos(), dir.sin()) * 100.0], speed }
}

/// Fine-time sweep of each discretely feasible (scene, k) pair against the unbuffered obstacles.
fn discretization_sweep(p: &common::Pipeline, region: Aabb, size: f64, wanted: usize, seed: u64) -> Sweep {
    let cfg = &p.cfg;
    let tube = &p.tube;
    let dp = DiscretizationParams::new(&cfg.footprint, cfg.b, cfg.b_t, cfg.family.t_f, Planner::disc_speed(cfg, tube)).unwrap();
    let extents = cell_extents(tube);
    let n2 = tube.header.cells[1];
    let fine: Vec<f64> = (0..=(cfg.family.t_f / 1e-3).round() as usize).map(|i| i as f64 * 1e-3).collect();
    let batch = 2000;
    let mut sweep = Sweep { passed: 0, attempts: 0, violations: 0, near: 0 };
    let mut round = 0u64;
    while sweep.passed < wanted && sweep.attempts < 50 * wanted {
        let parts: Vec<(bool, usize, bool)> = (0..batch)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(round * batch as u64 + i as u64));
                let k = random_k(&mut rng, cfg);
                let n_obs = rng.gen_range(1..=3);
                let obstacles: Vec<Obstacle> = (0..n_obs).map(|_| random_obstacle(&mut rng, cfg, &region, size)).collect();
                let pred = predict_oracle(obstacles.clone(), 0.0, cfg.family.t_f, dp.beta, cfg.model.eps());
                let d = disc(&pred, &dp.grid.times, dp.r).unwrap();
                if !naf_feasible(tube, &d, k, DEFAULT_THRESHOLD) {
                    return (false, 0, false);
                }
                let cell = tube.cell_of(k).unwrap();
                let extent = extents[cell.0 * n2 + cell.1];
                let (mut bad, mut near) = (0, false);
                for &t in &fine {
                    for o in &obstacles {
                        let poly = o.polygon_at(t);
                        if extent.inflate(0.3 + tube.header.round, 0.3 + tube.header.round).intersects(&poly.bounding_box()) {
                            for n in tube.steps_meeting(t, t) {
                                let occ = tube.occupancy(cell, n);
                                if occ.intersects(&poly) {
                                    bad += 1;
                                } else if poly.distance_to_polygon(&occ.bx.to_polygon()) - occ.round < 0.3 {
                                    near = true;
                                }
                            }
                        }
                    }
                }
                (true, bad, near)
            })
            .collect();
        for (ok, bad, near) in parts {
            sweep.attempts += 1;
            if ok && sweep.passed < wanted {
                sweep.passed += 1;
                sweep.violations += bad;
                sweep.near += near as usize;
            }
        }
        round += 1;
    }
    sweep
}

fn discretization_soundness(seg: &common::Pipeline, ev: &common::Pipeline) -> Outcome {
    let s = discretization_sweep(seg, Aabb::new(Vec2::new(-1.5, -3.5), Vec2::new(4.5, 3.5)), 0.3, 10_000, 100);
    let e = discretization_sweep(ev, Aabb::new(Vec2::new(-2.0, -6.0), Vec2::new(12.0, 6.0)), 1.0, 10_000, 200);
    outcome(
        s.passed == 10_000 && e.passed == 10_000 && s.violations == 0 && e.violations == 0,
        format!(
            "Segway {} / EV {} feasible pairs ({} / {} sampled; {} / {} within 0.3 m): {} / {} fine-grid intersections",
            s.passed, e.passed, s.attempts, e.attempts, s.near, e.near, s.violations, e.violations
        ),
    )
}

fn formulas() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, got: f64, want: f64| {
        let pass = (got - want).abs() <= 1e-6;
        ok &= pass;
        notes.push(format!("{name} = {got:.7}{}", if pass { "" } else { " (mismatch)" }));
    };
    let g = time_grid(2.0, 0.1, 3.0).unwrap();
    check("tau_max", g.tau_max, 0.2 / 3.0);
    check("n_pred", g.n_pred as f64, 30.0);
    check("tau", g.tau, 2.0 / 30.0);
    check("grid points", g.times.len() as f64, 31.0);
    check("rect spacing", point_spacing(&Footprint::Rectangle { width: 1.3, length: 2.4 }, 0.1).unwrap(), 0.2);
    let circle = point_spacing(&Footprint::Circle { radius: 0.38 }, 0.1).unwrap();
    // Chord of a radius-0.38 circle at sagitta 0.1.
    check("circle spacing", circle, 2.0 * (2.0f64 * 0.38 * 0.1 - 0.1 * 0.1).sqrt());
    check("sensor horizon", min_sensor_horizon(2.0, 0.5, 3.0, 0.1), 2.5 * 3.0 + 0.2);
    let stated = 0.5154;
    let literal_ok = (circle - stated).abs() <= 1e-6;
    let unattainable = (ok && !literal_ok).then(|| {
        format!(
            "stated circle spacing {stated} differs from the formula value {circle:.7} by {:.1e}; neither the radius nor the diameter reading of R yields it",
            (circle - stated).abs()
        )
    });
    Outcome { pass: ok && literal_ok, detail: notes.join(", "), unattainable }
}

fn sensor_horizon(p: &common::Pipeline) -> Outcome {
    let cfg = &p.cfg;
    let tube = &p.tube;
    let tp = cfg.family.tau_plan;
    let horizon = min_sensor_horizon(cfg.family.t_f, tp, cfg.v_rel(), cfg.model.eps());
    let extents = cell_extents(tube);
    let [n1, n2] = tube.header.cells;
    let results: Vec<(usize, bool)> = (0..1000u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(5000 + s);
            // Plan frame after up to tau_plan of motion at v_max from the sensing pose.
            let r = cfg.model.v_max * tp * rng.gen::<f64>().sqrt();
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let anchor = Pose::new(r * a.cos(), r * a.sin(), rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
            let inv = anchor.inverse();
            let shape = Polygon::rectangle(Vec2::ZERO, 0.3, 0.3);
            let half_diag = 0.15 * 2f64.sqrt();
            let obstacles: Vec<Obstacle> = (0..rng.gen_range(1..=5))
                .map(|_| {
                    let b = rng.gen_range(0.0..std::f64::consts::TAU);
                    let at = Vec2::new(b.cos(), b.sin()) * (horizon + half_diag + rng.gen_range(1e-6..0.5));
                    let (dir, speed) = if rng.gen_bool(0.5) { (-at * (1.0 / at.norm()), cfg.v_obs_max) } else {
                        let c = rng.gen_range(0.0..std::f64::consts::TAU);
                        (Vec2::new(c.cos(), c.sin()), rng.gen_range(0.0..=cfg.v_obs_max))
                    };
                    Obstacle { shape: shape.clone(), waypoints: vec![at, at + dir * 100.0], speed }
                })
                .collect();
            let mut hits = 0;
            for o in &obstacles {
                let swept = o.polygon_at(tp).transform(&inv).bounding_box().union(&o.polygon_at(tp + cfg.family.t_f).transform(&inv).bounding_box());
                for c in 0..n1 * n2 {
                    if !extents[c].inflate(tube.header.round, tube.header.round).intersects(&swept) {
                        continue;
                    }
                    for n in 0..tube.steps() {
                        let (t0, t1) = tube.step_span(n);
                        let mid = o.polygon_at(tp + 0.5 * (t0 + t1)).transform(&inv);
                        let occ = tube.occupancy((c / n2, c % n2), n);
                        let slack = o.speed * 0.5 * (t1 - t0);
                        if mid.distance_to_polygon(&occ.bx.to_polygon()) <= occ.round + slack {
                            hits += 1;
                        }
                    }
                }
            }
            let closest = obstacles.iter().map(|o| o.polygon_at(0.0).distance_to(Vec2::ZERO)).fold(f64::INFINITY, f64::min);
            (hits, closest > horizon)
        })
        .collect();
    let hits: usize = results.iter().map(|r| r.0).sum();
    let valid = results.iter().all(|r| r.1);
    outcome(valid && hits == 0, format!("1000 scenes beyond {horizon:.2} m, all {} cells: {hits} tube intersections over [tau_plan, tau_plan + t_f]", n1 * n2))
}

fn certificate() -> Outcome {
    let ctx = CertContext::for_robot(&RobotConfig::segway()).unwrap();
    let ok = PolynomialCertificate::uniform(Polynomial::zero(), Polynomial::constant(1.0), Polynomial::zero());
    let bad = PolynomialCertificate::uniform(Polynomial::zero(), Polynomial::zero(), Polynomial::zero());
    let v_ok = check_certificate(&ok, &ctx, 12);
    let v_bad = check_certificate(&bad, &ctx, 12);
    let spot = spot_check(&ok, &ctx, 10_000, 3);
    let witness = matches!(&v_bad, Verdict::Reject { witness, value, .. } if !witness.is_empty() && *value < 0.0);
    outcome(
        matches!(v_ok, Verdict::Accept { .. }) && witness && spot.failures == 0 && spot.points == 10_000,
        format!("(0,1,0) {}, (0,0,0) {} with witness: {witness}, spot check {}/{} failures", v_ok.label(), v_bad.label(), spot.failures, spot.points),
    )
}

fn determinism(first: &Batch, second: &Batch) -> Outcome {
    let same = first.csv.as_bytes() == second.csv.as_bytes() && first.results == second.results;
    outcome(same, format!("two 200-trial batches ({} and 2 worker threads): metrics tables byte-identical = {same}", rayon::current_num_threads()))
}

fn main() {
    let start = Instant::now();
    let seg = common::segway();
    let ev = common::ev();
    let batch = segway_batch(rayon::current_num_threads());
    let again = segway_batch(2);
    let criteria: Vec<(&str, Outcome)> = vec![
        ("not-at-fault batch", not_at_fault(&batch)),
        ("liveness", liveness(&batch)),
        ("tube containment", tube_containment(seg, ev)),
        ("discretization soundness", discretization_soundness(seg, ev)),
        ("formula checks", formulas()),
        ("sensor horizon", sensor_horizon(seg)),
        ("certificate checker", certificate()),
        ("batch determinism", determinism(&batch, &again)),
    ];
    let mut failed = 0;
    for (name, o) in &criteria {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            match &o.unattainable {
                Some(why) => println!("     unattainable: {why}"),
                None => failed += 1,
            }
        }
    }
    print!("{}", batch.csv);
    println!("acceptance finished in {:.1?}", start.elapsed());
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
