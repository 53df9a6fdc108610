use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "could not place {k} points with separation {delta_target} in [-1,1]^{d} \
         after {restarts} restarts"
    )]
    InfeasibleSeparation {
        d: usize,
        k: usize,
        delta_target: f64,
        restarts: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("whitening slice numerically rank deficient: sigma_k = {sigma_k:.3e} < {tol:.3e}")]
    RankDeficient { sigma_k: f64, tol: f64 },

    #[error("pencil matrix numerically singular: sigma_min = {sigma_min:.3e} < {tol:.3e}")]
    SingularPencil { sigma_min: f64, tol: f64 },

    #[error("factor column {col} has vanishing last entry (|.| = {abs:.3e} < {tol:.3e})")]
    VanishingLastEntry { col: usize, abs: f64, tol: f64 },

    #[error("weight normal system ill-conditioned: cond = {cond:.3e} > {max:.1e}")]
    IllConditionedWeights { cond: f64, max: f64 },

    #[error(
        "characteristic-function amplification overflows doubles: \
         exponent {exponent:.1} > {max:.0}"
    )]
    CfOverflow { exponent: f64, max: f64 },

    #[error("every sigma candidate failed: {summary}")]
    AllSigmaFailed { summary: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("linear-algebra kernel: {0}")]
    Kernel(#[from] ndarray_linalg::error::LinalgError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Wraps an error with the pipeline stage it came from, so end-to-end
    /// callers can report which step failed.
    pub fn at_stage(stage: &'static str, source: Error) -> Error {
        Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Outermost stage label, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
