mod common;

use proptest::prelude::*;

use rtdd_core::audit::fault_audit;
use rtdd_core::models::{integrate_high_fidelity, HighFidelityState, TrajParam};
use rtdd_core::planner::{Mode, PlannerOptions};
use rtdd_core::sim::{world_gen, Harness, TrialConfig};

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn generated_obstacles_respect_speed_bound(seed in any::<u64>(), n in 0usize..10) {
        let cfg = &common::segway().cfg;
        let scene = world_gen(seed, &TrialConfig::for_robot(cfg, n, seed), cfg).unwrap();
        prop_assert_eq!(scene.world.obstacles.len(), n);
        for o in &scene.world.obstacles {
            prop_assert!(o.speed <= cfg.v_obs_max);
            for i in 0..200 {
                let t = i as f64 * 0.37;
                prop_assert!(o.position(t).dist(o.position(t + 0.01)) <= o.speed * 0.01 + 1e-9);
            }
        }
    }

    #[test]
    fn rollouts_stay_in_tube(u1 in 0.0f64..1.0, u2 in 0.0f64..1.0, a in 0.0f64..1.0, v in 0.0f64..1.0, ev in any::<bool>()) {
        let p = if ev { common::ev() } else { common::segway() };
        let cfg = &p.cfg;
        let ps = cfg.family.params;
        let k = TrajParam::new(ps.lo[0] + u1 * ps.width(0), ps.lo[1] + u2 * ps.width(1));
        let (ar, sr) = (cfg.aux_range(k), cfg.speed_range(k));
        let x0 = HighFidelityState { aux: ar[0] + a * (ar[1] - ar[0]), speed: sr[0] + v * (sr[1] - sr[0]), ..Default::default() };
        let tr = integrate_high_fidelity(&cfg.model, x0, k, &cfg.family, cfg.dt).unwrap();
        for (i, s) in tr.samples.iter().enumerate().step_by(7) {
            for (bu, bv) in [(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.0, 1.0), (1.0, 1.0)] {
                let x = s.pose().to_world(cfg.footprint.body_point(bu, bv));
                prop_assert_eq!(p.tube.w_eval(tr.time(i), x, k).unwrap(), 1.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn trials_are_reproducible_total_and_clean(seed in 1u64..10_000, n in 1usize..10) {
        let p = common::segway();
        let h = Harness::new(&p.cfg, &p.tube, PlannerOptions::for_robot(&p.cfg)).unwrap();
        let tc = TrialConfig::for_robot(&p.cfg, n, seed);
        let (r, trace) = h.run_trial(&tc).unwrap();
        prop_assert_eq!(&h.run_trial(&tc).unwrap().0, &r);
        prop_assert!(!r.at_fault);
        prop_assert!(fault_audit(&trace).is_clean());
        let mut last_t = -1.0;
        for (i, s) in trace.steps().enumerate() {
            prop_assert_eq!(s.step, i as u64);
            prop_assert!(s.t > last_t);
            last_t = s.t;
        }
        for it in trace.iterations() {
            prop_assert!(it.verified);
            // Either a new plan is committed or the previous one keeps braking.
            prop_assert!(it.k_star.is_some() || it.mode != Mode::Tracking);
        }
    }
}
