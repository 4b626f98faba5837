use alloc::string::String;

use thiserror::Error;

use crate::conic::ConicError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix of size {size} is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { size: usize, pivot: usize, value: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("dense oracle of dimension {size} exceeds the cap {cap}")]
    OracleTooLarge { size: usize, cap: usize },

    #[error("AP {ap} has no usable channel (all estimate variances are zero)")]
    InfeasibleAp { ap: usize },

    #[error("per-AP power constraint violated at AP {ap}: load {load}")]
    PowerConstraintViolated { ap: usize, load: f64 },

    #[error("embedded-pilot estimation supports at most {max_users} users, got {users}")]
    EpInfeasible { users: usize, max_users: usize },

    #[error("conic backend: {0}")]
    Conic(#[from] ConicError),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}
