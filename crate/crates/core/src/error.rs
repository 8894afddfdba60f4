use thiserror::Error;

use crate::derivation::DerivationReport;

/// Errors produced by oddforge.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("row {row}: dimension mismatch: expected {expected}, got {actual}")]
    RowDimensionMismatch {
        row: usize,
        expected: usize,
        actual: usize,
    },

    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("degenerate point set: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("the in-distribution sample set is empty")]
    EmptyIdSet,

    #[error(
        "unsatisfiable OOD constraint: OOD sample {ood_index} coincides with anchor {anchor_index} (affinity is 1 there for every sigma)"
    )]
    Unsatisfiable { ood_index: usize, anchor_index: usize },

    #[error(
        "OOD constraint enforcement did not converge after {} passes ({} adjustments)",
        .0.passes_used,
        .0.adjustments.len()
    )]
    NonConvergence(Box<DerivationReport>),

    #[error("incompatible model format version {found:?} (supported: {supported:?})")]
    IncompatibleVersion { found: String, supported: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("coefficient of determination is undefined: {0}")]
    UndefinedRSquared(String),

    #[error("infeasible region: acceptance rate {rate:e} after {draws} draws")]
    InfeasibleRegion { rate: f64, draws: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for errors that mean the OOD consistency constraint could not be met.
    pub fn is_constraint_failure(&self) -> bool {
        matches!(self, Error::Unsatisfiable { .. } | Error::NonConvergence(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &str, x: &[f64]) -> Result<()> {
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} contains {v}")));
    }
    Ok(())
}
