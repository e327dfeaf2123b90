use thiserror::Error;

/// Errors raised by the laboratory's numerical stages.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("state escaped the working box at t = {time}: {state:?}")]
    StateEscaped { time: f64, state: Vec<f64> },

    #[error("non-finite value encountered at t = {time}")]
    NonFinite { time: f64 },

    #[error("signal domain error: {0}")]
    DomainError(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no nontrivial component found ({0})")]
    EmptyResult(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("requested unstable dimension {k} exceeds state dimension {dim}")]
    InvalidDim { k: usize, dim: usize },

    #[error("splitting is not hyperbolic: exponent {exponent} within gap {gap} of zero")]
    NonHyperbolic { exponent: f64, gap: f64 },

    #[error("component has no cycle")]
    NoCycle,

    #[error("periodic orbit not closed: defect {defect} exceeds tolerance {tolerance}")]
    OrbitNotClosed { defect: f64, tolerance: f64 },

    #[error("shooting did not converge after {iterations} iterations (defect {defect})")]
    ShootingFailed { iterations: usize, defect: f64 },

    #[error("{} K-cell(s) admit no covering candidate", cells.len())]
    Uncoverable { cells: Vec<usize> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("hyperbolic splitting is untrusted: {0}")]
    UntrustedSplitting(String),

    #[error("initial state {0:?} is not in K")]
    InitialStateOutsideK(Vec<f64>),

    #[error("encoder miss at step {step}: state {state:?} lies in no coding region")]
    EncoderMiss { step: usize, state: Vec<f64> },

    #[error("no alphabet budget achieved invariance for tau = {tau}")]
    NoPass { tau: f64 },

    #[error("reference parameter pipeline failed: {0}")]
    ReferenceFailed(String),

    #[error("unknown field family `{0}`")]
    UnknownFamily(String),

    #[error("invalid system definition: {0}")]
    InvalidSystem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
