//! Error types shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Error, Debug, Clone)]
pub enum CoreError {
    /// Invalid configuration or construction parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an interface contract (e.g. mismatched lengths).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Requested boundary patch is empty after margins.
    #[error("patch too small: {0}")]
    PatchTooSmall(String),

    /// Eigensolver failed to converge within its iteration budget.
    #[error("eigensolver failure: {message} (worst residual {worst_residual:.3e})")]
    Solver { message: String, worst_residual: f64 },

    /// An operation that requires a simple eigenvalue hit a cluster.
    /// The caller must route this index through the cluster pipeline.
    #[error("eigenvalue {k} is not simple: {detail}")]
    Multiplicity { k: usize, detail: String },

    /// An eigenvalue lies on (or too near) a Riesz contour.
    #[error("contour error: {0}")]
    Contour(String),

    /// Branch tracking lost its eigenspace (projection collapsed).
    #[error("branch loss at t={t}: |P(t)φ₀|_M = {projection_norm:.3e}")]
    BranchLoss { t: f64, projection_norm: f64 },

    /// The spectrum-simplification search exhausted its trial budget.
    #[error("simplicity search failed at stage {stage} after {trials} trials")]
    SearchFailure { stage: usize, trials: usize },

    /// A degenerate cluster failed to split under the chosen direction.
    #[error("cluster failed to split at s={s:.3e}: {detail}")]
    SplitFailure { s: f64, detail: String },

    /// A limit schedule ran out before the Cauchy criterion was met.
    #[error("no Cauchy convergence within schedule; residual history {history:?}")]
    NonConvergence { history: Vec<f64> },

    /// A zero band's vanishing order could not be classified.
    #[error("vanishing-order ambiguity at band {band}: {detail}")]
    OrderAmbiguity { band: usize, detail: String },

    /// The replay oracle has no record for a queried impedance.
    #[error("replay oracle missing query for omega hash {omega_hash}")]
    MissingQuery { omega_hash: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<std::io::Error> for CoreError {
    fn from(e: std::io::Error) -> Self {
        CoreError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CoreError {
    fn from(e: serde_json::Error) -> Self {
        CoreError::Serde(e.to_string())
    }
}
