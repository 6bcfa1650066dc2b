use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Arm;

/// Coarse classification of a per-method failure inside a simulation.
///
/// Tolerance failures still produce a tally (an interval that cannot certify
/// its endpoints counts as non-covering); the others are excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureKind {
    Tolerance,
    NonConvergence,
    Other,
}

/// Errors raised anywhere in the estimation and simulation pipeline.
#[derive(Debug, Error)]
pub enum MetaError {
    #[error("study {study}: {arm} arm mean must be strictly positive (got {mean})")]
    NonPositiveMean { study: String, arm: Arm, mean: f64 },

    #[error("study {study}: {arm} arm needs at least 2 subjects (got {n})")]
    ArmTooSmall { study: String, arm: Arm, n: u32 },

    #[error("study {study}: {arm} arm standard deviation must be nonnegative (got {sd})")]
    NegativeSd { study: String, arm: Arm, sd: f64 },

    #[error("study {study}: {arm} arm has a non-finite summary value")]
    NonFinite { study: String, arm: Arm },

    #[error("study {study}: within-study variance is zero (both standard deviations are 0)")]
    ZeroVariance { study: String },

    #[error("at least {needed} studies are required (got {got})")]
    TooFewStudies { needed: usize, got: usize },

    #[error("weights are degenerate: {0}")]
    DegenerateWeights(&'static str),

    #[error("no bracketing interval found below tau2 cap {cap}")]
    NoBracket { cap: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: u32 },

    #[error("{what}: requested tolerance {tolerance:e} was not met")]
    ToleranceNotMet { what: &'static str, tolerance: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("moments must be strictly positive (mean {mean}, variance {variance})")]
    NonPositiveMoment { mean: f64, variance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("grid is not rectangular: {0}")]
    NonRectangularGrid(String),

    #[error("{what} is unavailable because an input it depends on failed ({kind:?})")]
    Upstream { what: String, kind: FailureKind },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MetaError {
    pub fn failure_kind(&self) -> FailureKind {
        match self {
            MetaError::ToleranceNotMet { .. } => FailureKind::Tolerance,
            MetaError::NonConvergence { .. } => FailureKind::NonConvergence,
            MetaError::Upstream { kind, .. } => *kind,
            _ => FailureKind::Other,
        }
    }
}

pub type Result<T, E = MetaError> = std::result::Result<T, E>;
