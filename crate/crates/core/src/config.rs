//! Robot definitions and their TOML representation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{BrakeLaw, Dynamics, HighFidelityState, ModelParams, ParamSpace, TrajParam, TrajectoryFamily, YawLaw};
use crate::world::{min_sensor_horizon, Footprint};

/// Stop margin appended after the longest braking maneuver when choosing t_f.
pub const STOP_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub id: String,
    pub model: ModelParams,
    pub family: TrajectoryFamily,
    pub footprint: Footprint,
    /// Obstacle speed bound assumed by predictions and the sensor horizon.
    pub v_obs_max: f64,
    pub delta_sense: f64,
    /// Half-width of the square workspace X (trajectory frame) the FRS must stay inside.
    pub workspace_half: f64,
    /// Half-widths (aux, speed) of the lifted initial set around the commanded (k1, k2).
    /// `aux` is the yaw rate (Segway) or steering angle (EV).
    pub init_window: [f64; 2],
    /// Integration step for the high-fidelity model.
    pub dt: f64,
    /// Spatial buffer b.
    pub b: f64,
    /// Temporal buffer b_t.
    pub b_t: f64,
}

impl RobotConfig {
    pub fn segway() -> Self {
        let tau_plan = 0.5;
        let family = TrajectoryFamily {
            params: ParamSpace { lo: [-1.5, 0.0], hi: [1.5, 2.0], rate_limit: [0.5, 0.5] },
            tau_plan,
            t_f: tau_plan + 1.0 + STOP_MARGIN,
            brake: BrakeLaw::Constant { seconds: 1.0 },
            yaw: YawLaw::Direct,
        };
        Self {
            id: "segway".into(),
            model: ModelParams {
                dynamics: Dynamics::Segway { yaw_gain: 8.0, speed_gain: 12.0 },
                v_max: 2.0,
                est_error: [0.0, 0.0],
            },
            family,
            footprint: Footprint::Circle { radius: 0.38 },
            v_obs_max: 1.0,
            delta_sense: 10.0,
            workspace_half: 10.0,
            init_window: [0.75, 0.75],
            dt: 0.01,
            b: 0.1,
            b_t: 0.1,
        }
    }

    pub fn ev() -> Self {
        let tau_plan = 0.5;
        let decel = 3.0;
        let k2_max = 5.0;
        let family = TrajectoryFamily {
            params: ParamSpace { lo: [-0.5, 0.0], hi: [0.5, k2_max], rate_limit: [0.1, 0.5] },
            tau_plan,
            t_f: tau_plan + k2_max / decel + STOP_MARGIN,
            brake: BrakeLaw::SpeedOver { decel },
            yaw: YawLaw::Bicycle { wheelbase: 1.5 },
        };
        Self {
            id: "ev".into(),
            model: ModelParams {
                dynamics: Dynamics::Ev {
                    c: [0.0, 0.0, 1.5, 0.01, -6.0, 0.0, -14.0, 0.0],
                    max_steer: 0.5,
                    max_steer_rate: 0.5,
                    accel_limits: [-6.86, 3.5],
                },
                v_max: k2_max,
                est_error: [0.0, 0.0],
            },
            family,
            footprint: Footprint::Rectangle { width: 1.3, length: 2.4 },
            v_obs_max: 1.5,
            delta_sense: 25.0,
            workspace_half: 25.0,
            init_window: [0.15, 0.75],
            dt: 0.01,
            b: 0.1,
            b_t: 0.1,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "segway" => Some(Self::segway()),
            "ev" => Some(Self::ev()),
            _ => None,
        }
    }

    /// Loads a preset name or a TOML file path.
    pub fn load(source: &str) -> Result<Self> {
        if let Some(cfg) = Self::preset(source) {
            return Ok(cfg);
        }
        Self::from_toml_file(Path::new(source))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RobotConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("robot config serializes")
    }

    /// Range of initial aux state admitted for trajectories with parameter k.
    pub fn aux_range(&self, k: TrajParam) -> [f64; 2] {
        let w = self.init_window[0];
        let mut r = [k.k1 - w, k.k1 + w];
        if let Dynamics::Ev { max_steer, .. } = self.model.dynamics {
            r = [r[0].max(-max_steer), r[1].min(max_steer)];
        }
        r
    }

    /// Range of initial speed admitted for trajectories with parameter k.
    pub fn speed_range(&self, k: TrajParam) -> [f64; 2] {
        let w = self.init_window[1];
        [(k.k2 - w).max(0.0), (k.k2 + w).min(self.model.v_max)]
    }

    /// Whether a trajectory-frame initial state lies in the lifted initial set of k.
    pub fn admits(&self, k: TrajParam, s: &HighFidelityState) -> bool {
        let a = self.aux_range(k);
        let v = self.speed_range(k);
        s.aux >= a[0] - 1e-12 && s.aux <= a[1] + 1e-12 && s.speed >= v[0] - 1e-12 && s.speed <= v[1] + 1e-12
    }

    /// Grid of initial states at the origin with `n_aux` x `n_speed` values spanning the lifted set.
    pub fn initial_grid(&self, k: TrajParam, n_aux: usize, n_speed: usize) -> Vec<HighFidelityState> {
        let a = self.aux_range(k);
        let v = self.speed_range(k);
        let lin = |r: [f64; 2], n: usize, i: usize| if n <= 1 { 0.5 * (r[0] + r[1]) } else { r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64 };
        let mut out = Vec::with_capacity(n_aux * n_speed);
        for i in 0..n_aux {
            for j in 0..n_speed {
                out.push(HighFidelityState { aux: lin(a, n_aux, i), speed: lin(v, n_speed, j), ..Default::default() });
            }
        }
        out
    }

    /// SHA-256 of the TOML encoding.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn v_rel(&self) -> f64 {
        self.model.v_max + self.v_obs_max
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.footprint.validate()?;
        let f = &self.family;
        let p = &f.params;
        if !(p.lo[0] <= p.hi[0] && p.lo[1] <= p.hi[1]) {
            return Err(Error::Config("empty parameter box K".into()));
        }
        if p.rate_limit.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("rate limits must be positive".into()));
        }
        if !(f.tau_plan > 0.0 && f.tau_plan < f.t_f) {
            return Err(Error::Config(format!("need 0 < tau_plan < t_f, got {} and {}", f.tau_plan, f.t_f)));
        }
        for k in [TrajParam::new(p.lo[0], p.lo[1]), TrajParam::new(p.hi[0], p.hi[1])] {
            let s = f.schedule(k);
            if s.brake_end() > f.t_f + 1e-12 {
                return Err(Error::Config(format!("tau_plan + tau_brake = {} exceeds t_f = {}", s.brake_end(), f.t_f)));
            }
        }
        if let YawLaw::Bicycle { wheelbase } = f.yaw {
            if !(wheelbase > 0.0) {
                return Err(Error::Config("wheelbase must be positive".into()));
            }
        }
        if self.v_obs_max < 0.0 {
            return Err(Error::Config("v_obs_max must be nonnegative".into()));
        }
        let bound = min_sensor_horizon(f.t_f, f.tau_plan, self.v_rel(), self.model.eps());
        if self.delta_sense < bound {
            return Err(Error::Config(format!("delta_sense = {} is below the minimum sensor horizon {bound}", self.delta_sense)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.init_window.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("initial-set window must be nonnegative".into()));
        }
        if !(self.b > 0.0 && self.b_t > 0.0) {
            return Err(Error::Config("buffers must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for cfg in [RobotConfig::segway(), RobotConfig::ev()] {
            cfg.validate().unwrap();
            let back = RobotConfig::from_toml_str(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg);
        }
        assert!((RobotConfig::segway().family.t_f - 2.0).abs() < 1e-12);
        assert!((RobotConfig::ev().family.t_f - 2.6667).abs() < 1e-4);
    }

    #[test]
    fn short_sensor_horizon_rejected() {
        let mut cfg = RobotConfig::segway();
        cfg.delta_sense = 7.0;
        let err = RobotConfig::from_toml_str(&cfg.to_toml()).unwrap_err();
        assert!(err.to_string().contains("sensor horizon"));
    }
}
