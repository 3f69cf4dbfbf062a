use std::fmt;

use thiserror::Error;

/// Location in the (t, y, z) box or on a sampled path where a hypothesis failed.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    Point { t: f64, y: f64, z: Vec<f64> },
    Pair { t: f64, y1: f64, z1: Vec<f64>, y2: f64, z2: Vec<f64> },
    Path { path: usize },
    PathStep { path: usize, step: usize },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Point { t, y, z } => write!(f, "(t={t}, y={y}, z={z:?})"),
            Witness::Pair { t, y1, z1, y2, z2 } => {
                write!(f, "(t={t}, y1={y1}, z1={z1:?}, y2={y2}, z2={z2:?})")
            }
            Witness::Path { path } => write!(f, "path {path}"),
            Witness::PathStep { path, step } => write!(f, "path {path}, step {step}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tree enumeration with N = {steps} exceeds the capacity limit N <= {limit}")]
    Capacity { steps: usize, limit: usize },

    #[error("operation requires a rademacher-tree noise bundle")]
    NotTree,

    #[error("regression at step {step} is rank deficient; use a ridge > 0")]
    RankDeficient { step: usize },

    #[error("regression at step {step} needs at least {needed} paths, got {paths}")]
    TooFewPaths { step: usize, needed: usize, paths: usize },

    #[error("generator is not declared Lipschitz; regularize it first")]
    NotLipschitz,

    #[error("implicit step is not a contraction: dt * C = {factor} >= 1")]
    Contraction { factor: f64 },

    #[error("scalar fixed point did not converge at path {path}, step {step} after {iterations} iterations")]
    Picard { path: usize, step: usize, iterations: usize },

    #[error("iterate {n} is not monotone at path {path}, step {step}: y^n - y^(n-1) = {margin}")]
    NonMonotone { n: usize, path: usize, step: usize, margin: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("hypothesis {hypothesis} refused: counterexample at {witness}")]
    HypothesisRefused { hypothesis: String, witness: Witness },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
