use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("atomic detuning is zero; the dispersive couplings are undefined")]
    ZeroAtomDetuning,

    #[error("self-organization threshold diverges: delta = Delta_c - N U / 2 is zero")]
    ThresholdDiverges,

    #[error(
        "diffusion matrix is not symmetric: max asymmetry {asymmetry:e} exceeds {tolerance:e}"
    )]
    AsymmetricDiffusion { asymmetry: f64, tolerance: f64 },

    #[error("Liouvillian steady state is not unique (null space is degenerate)")]
    DegenerateNullSpace,

    #[error(
        "linear solve residual {residual:e} exceeds {tolerance:e} (condition estimate {condition:e})"
    )]
    SolverResidual {
        residual: f64,
        tolerance: f64,
        condition: f64,
    },

    #[error("trajectory {trajectory} produced a non-finite state at step {step}")]
    NonFinite { trajectory: usize, step: usize },

    #[error("{aborted} of {total} trajectories aborted (limit is 0.1%)")]
    AbortRate { aborted: usize, total: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
