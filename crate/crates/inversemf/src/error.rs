use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Shape mismatches, bad format tags, malformed admissibility keys.
    #[error("structural model error: {0}")]
    Structural(String),

    /// The model parsed but failed one of its invariants.
    #[error("model invariant failed: {0}")]
    Invariant(String),

    #[error("horizon too short: need at least {required}, have {available}")]
    HorizonTooShort { required: usize, available: usize },

    #[error("admissibility product not positive within cap {cap}")]
    NotMixingWithinCap { cap: usize },

    #[error("no admissible connector of length {len} between letters {from} and {to}")]
    NoConnector { from: u8, to: u8, len: usize },

    #[error("word is not admissible along the path: {0}")]
    Inadmissible(String),

    #[error("root bracket expansion exceeded |t| > {limit}")]
    BracketFailure { limit: f64 },

    #[error("eigenproblem iteration did not converge: residual {residual:.3e} > bound {bound:.3e}")]
    NonConvergence { residual: f64, bound: f64 },

    #[error("potential shift would break the mean-negativity assumption (post-shift mean sup = {mean_sup:.6})")]
    NormalizationBreaksAssumption { mean_sup: f64 },

    #[error("no positive-weight atom within lookahead {lookahead}")]
    NoAtomFound { lookahead: usize },

    #[error("no cylinder matched the requested exponent window (d = {d})")]
    EmptySelection { d: f64 },

    #[error("scale {scale:.3e} is below the truncation floor {floor:.3e}")]
    ScaleBelowFloor { scale: f64, floor: f64 },

    #[error("cylinder diameter underflow at depth {depth}")]
    DepthGuard { depth: usize },

    #[error("estimated workload {estimate:.3e} exceeds the configured cap {cap:.3e}")]
    ResourceGuard { estimate: f64, cap: f64 },

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
