use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("pole on unit circle at omega = {omega}")]
    PoleOnUnitCircle { omega: f64 },
    #[error("unstable filter (largest pole magnitude {max_pole:.6})")]
    UnstableFilter { max_pole: f64 },
    #[error("invalid transfer: {0}")]
    InvalidTransfer(String),
    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),
    #[error("algebraic loop through nodes {cycle:?}")]
    AlgebraicLoop { cycle: Vec<usize> },
    #[error("I - G is near-singular at omega = {omega}")]
    NearSingular { omega: f64 },
    #[error("unknown signal tag: {0}")]
    UnknownTag(String),
    #[error("no such module G_{output}{input}")]
    NoSuchModule { output: usize, input: usize },
    #[error("predictor set violates consistency conditions: {0}")]
    ConsistencyViolated(String),
    #[error("eliminated subnetwork ill-posed at omega = {omega}")]
    EliminatedIllPosed { omega: f64 },
    #[error("nonpositive spectrum value {value} at grid index {index}")]
    NonpositiveSpectrum { index: usize, value: f64 },
    #[error("predictor unstable")]
    PredictorUnstable,
    #[error("too few samples: {n} < {required}")]
    TooFewSamples { n: usize, required: usize },
    #[error("optimization failed: {}", .0.join("; "))]
    OptimizationFailed(Vec<String>),
    #[error("unidentifiable parameterization, null-space direction {direction:?}")]
    Unidentifiable { direction: Vec<f64> },
    #[error("no excitation margin at omega = {omega} (Schur complement {schur})")]
    NoExcitationMargin { omega: f64, schur: f64 },
    #[error("frequency grids differ")]
    GridMismatch,
    #[error("at least {required} runs needed, got {got}")]
    TooFewRuns { required: usize, got: usize },
    #[error("signal too short: {len} samples, need {required}")]
    SignalTooShort { len: usize, required: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("parse error: {0}")]
    Parse(String),
}
