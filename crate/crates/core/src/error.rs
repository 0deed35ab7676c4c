use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("jump impossible: tr(X rho X^dag) = {0:e}")]
    JumpImpossible(f64),

    #[error("cannot renormalize operator with trace {0:e}")]
    ZeroTrace(f64),

    #[error("operator is not unitary (defect {0:e})")]
    NonUnitary(f64),

    #[error("probe measurement is incomplete (defect {0:e})")]
    IncompleteMeasurement(f64),

    #[error("all outcome probabilities vanish (total {0:e})")]
    AllOutcomesZero(f64),

    #[error("observable `{name}` has imaginary expectation {imag:e}")]
    ComplexObservable { name: String, imag: f64 },

    #[error("integrator rejected step: local error {0:e}")]
    StepRejected(f64),

    #[error("at step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },
}

impl Error {
    pub fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
