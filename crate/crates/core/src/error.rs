use std::path::PathBuf;

use thiserror::Error;

use crate::graph::ElementId;

/// A local optimization whose feasible set under the hard detuning bounds is
/// empty.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error(
    "infeasible step at {element_label}: no frequency option satisfies the hard bounds \
     imposed by [{}]; increase k or reduce delta_hard",
    blocking_labels.join(", ")
)]
pub struct InfeasibleStep {
    pub element: ElementId,
    pub element_label: String,
    /// Elements whose hard bounds exclude every option for `element`.
    pub blocking: Vec<ElementId>,
    pub blocking_labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ModelError {
    #[error("constraint element {0} has no fixed assignment")]
    MissingAssignment(String),
    #[error("local objective has no parameters")]
    NoParameters,
}

/// Failure of one calibration subgoal; other subgoals still run to completion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgoalFailure {
    pub subgoal: usize,
    pub calibrated_before_abort: usize,
    pub remaining: usize,
    pub cause: InfeasibleStep,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CalibrationError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Infeasible(#[from] InfeasibleStep),
    #[error("{} subgoal(s) failed: {}", .0.len(), describe_failures(.0))]
    SubgoalsFailed(Vec<SubgoalFailure>),
}

fn describe_failures(failures: &[SubgoalFailure]) -> String {
    failures
        .iter()
        .map(|f| {
            format!(
                "subgoal {} ({} calibrated, {} left): {}",
                f.subgoal, f.calibrated_before_abort, f.remaining, f.cause
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("assignment is incomplete: {0} is missing")]
    Incomplete(String),
    #[error("exhaustive search refused: {required} assignments exceed budget {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("config line {line}, key `{key}`: {message}")]
pub struct ConfigError {
    /// 1-based line number; 0 when the offending value is a default.
    pub line: usize,
    pub key: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum DatabaseError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported database format version {found} (expected {expected})")]
    Version { found: String, expected: u32 },
    #[error("config digest mismatch: database was written with {found}, current config is {expected}")]
    Digest { found: String, expected: String },
    #[error("database is truncated: {0}")]
    Truncated(String),
    #[error("malformed database line {line}: {message}")]
    Malformed { line: usize, message: String },
}
