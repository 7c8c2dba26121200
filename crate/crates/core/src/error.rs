use thiserror::Error;

/// Errors raised by the analytical, optimization and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// A parameter record failed validation.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    /// Adaptive quadrature hit its subdivision cap before meeting tolerance.
    #[error(
        "quadrature did not converge: worst interval [{lo}, {hi}] has error {err:e} \
         (total estimate {value:e}, {subdivisions} subdivisions)"
    )]
    Quadrature {
        lo: f64,
        hi: f64,
        err: f64,
        value: f64,
        subdivisions: usize,
    },

    /// The bracket handed to a root finder does not contain a sign change.
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// A realized network contained no base station to serve the user.
    #[error("no serving base station in trial {trial}")]
    NoServingBs { trial: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        op,
        detail: detail.into(),
    }
}
