use thiserror::Error;

/// Worst divisor found while checking a small-divisor condition.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DivisorWitness {
    pub k: Vec<i32>,
    pub j: usize,
    pub l: usize,
    pub channel: String,
    pub divisor: f64,
    pub bound: f64,
}

#[derive(Debug, Error)]
pub enum KamError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("quadrature capacity exceeded: requested {requested}, capacity {capacity}")]
    Capacity { requested: usize, capacity: usize },

    #[error("accuracy error in {what}: estimated residual {residual:.3e}")]
    Accuracy { what: String, residual: f64 },

    #[error("small divisor violation at k={:?} ({}, {}) channel {}: |{:.3e}| < {:.3e}",
        .0.k, .0.j, .0.l, .0.channel, .0.divisor, .0.bound)]
    Resonance(DivisorWitness),

    #[error("generator too large for the exponential series: norm {norm:.3e} > 1")]
    StepTooLarge { norm: f64 },

    #[error("truncation budget exceeded: {0}")]
    Budget(String),

    #[error("smallness gate violated: eps0 = {eps0:.3e} > gamma0 * alpha0^5 = {bound:.3e}")]
    SmallnessGate { eps0: f64, bound: f64 },

    #[error("all parameter samples were excised")]
    EmptyParameterSet,

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, KamError>;
