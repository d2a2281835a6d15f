use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integration diverged at t = {t:.4} s")]
    IntegrationDiverged { t: f64 },
    #[error("tracking-error fit failed: {violations} violating samples, worst excess {worst_excess:.3e} m at phase {phase}, coord {coord}, t = {t:.3} s, k = ({k1:.3}, {k2:.3})")]
    FitFailed { violations: usize, worst_excess: f64, phase: String, coord: usize, t: f64, k1: f64, k2: f64 },
    #[error("reachable box escapes the workspace in k-cell ({i}, {j}) at step {step}")]
    FrsOverflow { i: usize, j: usize, step: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("world generation failed: {0}")]
    WorldGen(String),
    #[error("trace error: {0}")]
    Trace(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
