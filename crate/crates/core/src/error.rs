use thiserror::Error;

pub type Result<T, E = PrismError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PrismError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("density singular at boundary (component {component} is zero with concentration {alpha} < 1)")]
    SingularBoundary { component: usize, alpha: f64 },

    #[error("matrix is rank deficient: smallest singular value {smallest_singular_value:e} <= {tolerance:e}")]
    RankDeficient {
        smallest_singular_value: f64,
        tolerance: f64,
    },

    #[error("factorization failed: {0}")]
    FactorizationFailed(String),

    #[error("degenerate posterior covariance: trace {trace:e} is not positive")]
    DegenerateCovariance { trace: f64 },

    #[error("degenerate importance weights: {finite} of {total} log-weights finite (max {max_log_weight})")]
    DegenerateWeights {
        finite: usize,
        total: usize,
        max_log_weight: f64,
    },

    #[error("proposal is a reference sampler only and has no normalized density for weighting")]
    UnsupportedForWeighting,

    #[error("grid quadrature supports k <= 3, got k = {0}")]
    OracleDimension(usize),

    #[error("second-moment statistic is numerically singular (smallest eigenvalue {smallest_eigenvalue:e})")]
    SingularStatistic { smallest_eigenvalue: f64 },

    #[error("incompatible E-step backend: {0}")]
    IncompatibleBackend(String),

    #[error("observation {index}: {source}")]
    AtObservation {
        index: usize,
        #[source]
        source: Box<PrismError>,
    },

    #[error("EM iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<PrismError>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PrismError {
    pub(crate) fn at_observation(self, index: usize) -> Self {
        PrismError::AtObservation {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        PrismError::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}
