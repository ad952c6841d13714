//! Stream files, instance generators, the run/report pipeline, experiment
//! suites, capacitated search and claim verification.

pub mod capacitated;
pub mod experiment;
pub mod generators;
pub mod run;
pub mod stream;
pub mod verify;

pub use capacitated::{capacitated_search, CapEstimator, CapacitatedResult};
pub use experiment::{envelope_bounds, min_grid_experiment, ratio_envelope, EnvelopeConfig};
pub use generators::{generate, Generator, Instance, InstanceSpec};
pub use run::{run, Algorithm, RunConfig, RunReport};
pub use stream::{parse_stream, write_stream, StreamError};
pub use verify::{verify_claims, VerifyConfig};

use thiserror::Error;

use crate::coreset::CoresetError;
use crate::estimators::EstimatorError;
use crate::matching_graph::MatchingGraphError;
use crate::oracle::OracleError;

/// Version tag written into every JSON report.
pub const REPORT_SCHEMA: &str = "emdstream.report/1";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model violation: {0}")]
    ModelViolation(String),
    #[error(transparent)]
    Estimator(EstimatorError),
    #[error(transparent)]
    Coreset(CoresetError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    MatchingGraph(#[from] MatchingGraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<EstimatorError> for HarnessError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::SizeMismatch { .. } | EstimatorError::EmptyStream => {
                HarnessError::ModelViolation(e.to_string())
            }
            EstimatorError::Config(msg) => HarnessError::Config(msg),
            other => HarnessError::Estimator(other),
        }
    }
}

impl From<CoresetError> for HarnessError {
    fn from(e: CoresetError) -> Self {
        match e {
            CoresetError::DeletionUnsupported
            | CoresetError::DistinctBoundExceeded { .. }
            | CoresetError::SizeMismatch { .. }
            | CoresetError::EmptyStream => HarnessError::ModelViolation(e.to_string()),
            CoresetError::Config(msg) => HarnessError::Config(msg),
            CoresetError::OutOfDomain(p) => HarnessError::Config(format!("point {p} outside the domain")),
            other => HarnessError::Coreset(other),
        }
    }
}

impl HarnessError {
    /// 2 for unusable input or configuration, 3 for streams that break the
    /// model, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Stream(_) | HarnessError::Config(_) => 2,
            HarnessError::Oracle(OracleError::TooLarge(_)) => 2,
            HarnessError::ModelViolation(_) => 3,
            HarnessError::Oracle(OracleError::Infeasible { .. }) => 3,
            _ => 1,
        }
    }
}
