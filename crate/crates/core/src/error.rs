use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid diffusion spec: {0}")]
    InvalidSpec(String),

    #[error("SL process is singular at s = {s} (requires s < 1)")]
    Singularity { s: f64 },

    #[error("time s = {s} outside [{lo}, {hi}]")]
    TimeOutOfRange { s: f64, lo: f64, hi: f64 },

    #[error("perturbation kernel has zero width at s = {s}")]
    ZeroKernelWidth { s: f64 },

    #[error("invalid gaussian mixture: {0}")]
    InvalidMixture(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("jump probability {q} at site {site} (x = {x}) leaves [0, 1]")]
    JumpProbability { site: usize, x: f64, q: f64 },

    #[error("lattice configuration: {0}")]
    Lattice(String),

    #[error("reverse kernel inconsistency at site {site}: incoming flux {flux} onto empty site")]
    ReverseInconsistency { site: usize, flux: f64 },

    #[error("entropy term diverges at step {step}, site {site}")]
    LogOfZero { step: usize, site: usize },

    #[error("endpoint kernel budget exceeded: {sites} sites x {steps} steps (max {max_sites} x {max_steps})")]
    Budget {
        sites: usize,
        steps: usize,
        max_sites: usize,
        max_steps: usize,
    },

    #[error("drift is not confining: {0}")]
    NonConfining(String),

    #[error("non-finite input to network at row {row}")]
    NonFiniteInput { row: usize },

    #[error("non-finite loss at sample {index}")]
    NonFiniteLoss { index: usize },

    #[error("non-finite training loss for datum {datum} at s = {s}")]
    NonFiniteTraining { datum: usize, s: f64 },

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("{count} non-finite log ratios in Monte-Carlo estimate")]
    NonFiniteMonteCarlo { count: usize },

    #[error("non-finite sampler state at step {step}")]
    NonFiniteState { step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteLoss { .. }
                | Error::NonFiniteTraining { .. }
                | Error::Diverged { .. }
                | Error::NonFiniteMonteCarlo { .. }
                | Error::NonFiniteState { .. }
                | Error::LogOfZero { .. }
                | Error::ReverseInconsistency { .. }
        )
    }
}
