use alloc::string::String;
use alloc::vec::Vec;

/// Errors produced by the solver core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid lattice specification: {0}")]
    InvalidSpec(String),

    #[error("coupling between sites {m} and {n} is not allowed by the mask")]
    ConstraintViolation { m: usize, n: usize },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("integrator exceeded {max_steps} steps at t = {t}")]
    StepLimit { t: f64, max_steps: usize },

    #[error("integrator produced a non-finite derivative at t = {t}")]
    Divergence { t: f64 },

    #[error("invalid integration request: {0}")]
    InvalidIntegration(String),

    #[error("initial state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("protocol time grid is malformed: {0}")]
    GridGap(String),

    #[error("shooting did not converge after {iterations} iterations (best residual {best_residual:e})")]
    NotConverged {
        best_residual: f64,
        iterations: usize,
        iterate: Vec<f64>,
    },

    #[error("converged root failed forward verification (fidelity {fidelity})")]
    Inconsistent { fidelity: f64 },

    #[error("guess library holds {available} usable sizes, {required} required")]
    InsufficientHistory { available: usize, required: usize },

    #[error("root finder could not bracket a solution: {0}")]
    Bracket(String),

    #[error("trajectory enumeration for N = {n} exceeds the cap of {cap}")]
    EnumerationCap { n: usize, cap: usize },

    #[error("continuation seed is not a converged solution")]
    SeedNotConverged,

    #[error("shape mismatch: {0}")]
    Mismatch(String),
}

pub type Result<T> = core::result::Result<T, Error>;
