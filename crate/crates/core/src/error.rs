use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (asymmetry {0:e})")]
    NotSkew(f64),
    #[error("matrix is not in se(3) (last row magnitude {0:e})")]
    NotSe3Algebra(f64),
    #[error("rotation angle {0} is too close to pi for a unique logarithm")]
    LogBranchCut(f64),
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },
    #[error("degenerate tendon path tangent (norm {norm:e}){}", node.map(|i| format!(" at node {i}")).unwrap_or_default())]
    DegenerateTendon { norm: f64, node: Option<usize> },
    #[error("section {1} is fully compressed (|q| = {0:e})")]
    CompressedSection(f64, usize),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("step size underflow at t = {t}: h = {h:e}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("singular iteration matrix")]
    SingularMatrix,
    #[error("{what} did not converge: {detail}")]
    NoConvergence { what: &'static str, detail: String },
    #[error("measurement stream: {0}")]
    Stream(String),
    #[error("measurement is stale at t = {t}: last sample {age} s old (limit {limit} s)")]
    StaleMeasurement { t: f64, age: f64, limit: f64 },
    #[error("trajectories are not aligned: {0}")]
    Misaligned(String),
    #[error("config: {0}")]
    Config(String),
    #[error("csv {path}: {reason}")]
    Csv { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
