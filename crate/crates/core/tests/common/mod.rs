#![allow(dead_code)]

use std::sync::OnceLock;

use rtdd_core::config::RobotConfig;
use rtdd_core::frs::{compute_frs, FrsOptions, FrsTube};
use rtdd_core::tracking::{fit_for_robot, SampleGrid, TrackingErrorBound, DEFAULT_MARGIN};

pub struct Pipeline {
    pub cfg: RobotConfig,
    pub g: TrackingErrorBound,
    pub tube: FrsTube,
}

fn build(cfg: RobotConfig) -> Pipeline {
    let g = fit_for_robot(&cfg, &SampleGrid::default(), DEFAULT_MARGIN, 0, 7).expect("fit");
    let tube = compute_frs(&cfg, cfg.family.params, &g, FrsOptions::default()).expect("frs");
    Pipeline { cfg, g, tube }
}

pub fn segway() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| build(RobotConfig::segway()))
}

pub fn ev() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| build(RobotConfig::ev()))
}
