use thiserror::Error;

use crate::fitter::FitResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name}={value} is outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("non-differentiable generator: {0}")]
    NonDifferentiable(String),

    #[error("invalid basis index (s={s}, l={l})")]
    InvalidIndex { s: u32, l: u32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("bisection failed to bracket t={t} at u={u}")]
    NotBracketed { u: f64, t: f64 },

    #[error("bisection did not reach tolerance after {0} iterations")]
    BisectionLimit(usize),

    #[error("QP solver did not converge after {iterations} iterations (kkt residual {kkt_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        kkt_residual: f64,
        best: Box<FitResult>,
    },

    #[error("singular KKT system in the active-set solver")]
    SingularKkt,

    #[error("cell probabilities sum to {total}, below alpha={alpha}")]
    InsufficientMass { total: f64, alpha: f64 },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            domain,
        }
    }
}
