use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation {trunc} out of range for grid size {grid_size} (must be <= {max})", max = grid_size / 2)]
    InvalidTruncation { trunc: usize, grid_size: usize },

    #[error("grid size mismatch: {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid grid size {0}: must be even and positive")]
    InvalidGridSize(usize),

    #[error("input field is not zero-mean (|mean mode| = {0:e})")]
    NonZeroMean(f64),

    #[error("state is not L2-normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("insufficient calibration data: alpha = {alpha} needs more than {n_cal} calibration scores (k = {k})")]
    InsufficientCalibration { alpha: f64, n_cal: usize, k: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("kernel is not differentiable in the placement; use the gaussian bump kernel for optimization")]
    NonDifferentiableKernel,

    #[error("projection did not converge after {iterations} iterations (residual {residual:e})")]
    ProjectionNonConvergence { iterations: usize, residual: f64 },

    #[error("stage schedule is not nested: N[{stage}] = {current} < N[{prev_stage}] = {previous}", prev_stage = stage - 1)]
    NestingViolation {
        stage: usize,
        previous: usize,
        current: usize,
    },

    #[error("zero conditional probability P(B = {outcome} | A = 0); measurement violates the strictly-positive-outcome assumption")]
    ZeroConditionalProbability { outcome: usize },

    #[error("negative eigenvalue {0:e} in spectrum")]
    NegativeEigenvalue(f64),

    #[error("at least 2 samples are required, got {0}")]
    TooFewSamples(usize),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wraps an error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
