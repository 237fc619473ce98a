use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong in the core crate.
///
/// Variants carry a static description; the numeric context is small enough
/// that callers log it themselves.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Model coefficients violate `eta > 0`, `rho > 0`, `q >= 0` or are not finite.
    ParameterDomain(&'static str),
    /// A point outside the state space `{x >= i >= 0}` or a query outside a table.
    Domain(&'static str),
    /// Inputs that are individually valid but do not fit together.
    Configuration(&'static str),
    /// The boundary solve produced a table that violates its invariants.
    NumericalFailure(&'static str),
    /// A sample path violates admissibility or its own invariants.
    PathInvalid(&'static str),
    /// A policy prescribed an inadmissible action.
    Policy(&'static str),
    /// Non-finite values appeared during simulation.
    Numerical(&'static str),
}

impl Error {
    /// Stable machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ParameterDomain(_) => "parameter_domain",
            Error::Domain(_) => "domain",
            Error::Configuration(_) => "configuration",
            Error::NumericalFailure(_) => "numerical_failure",
            Error::PathInvalid(_) => "path_invalid",
            Error::Policy(_) => "policy",
            Error::Numerical(_) => "numerical",
        }
    }

    pub fn message(&self) -> &'static str {
        match self {
            Error::ParameterDomain(m)
            | Error::Domain(m)
            | Error::Configuration(m)
            | Error::NumericalFailure(m)
            | Error::PathInvalid(m)
            | Error::Policy(m)
            | Error::Numerical(m) => m,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
