use alloc::boxed::Box;
use alloc::string::String;

use serde::{Deserialize, Serialize};

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Pipeline stage tag attached to errors raised inside `run_experiment`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Data,
    Baseline,
    Novelty,
    Selection,
    Normalization,
    Monolithic,
    Split,
    SplitLarge,
    SplitSmall,
    Transfer,
    Control,
    Pca,
}

impl core::fmt::Display for Stage {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let name = match self {
            Stage::Data => "data",
            Stage::Baseline => "baseline",
            Stage::Novelty => "novelty",
            Stage::Selection => "selection",
            Stage::Normalization => "normalization",
            Stage::Monolithic => "monolithic",
            Stage::Split => "split",
            Stage::SplitLarge => "split_large",
            Stage::SplitSmall => "split_small",
            Stage::Transfer => "transfer",
            Stage::Control => "control",
            Stage::Pca => "pca",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Error {
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("singular dynamic stiffness at {freq_hz} Hz")]
    SingularSystem { freq_hz: f64 },

    #[error("reference spectrum below floor at line {line}")]
    DegenerateReference { line: usize },

    #[error("out of bounds: {detail}")]
    Bounds { detail: String },

    #[error("precondition violated: {detail}")]
    Precondition { detail: String },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("baseline covariance is not positive definite; increase the ridge")]
    SingularBaseline,

    #[error("training feature column {column} is constant")]
    DegenerateFeature { column: usize },

    #[error("non-finite input value")]
    NonFiniteInput,

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate})")]
    Divergence { epoch: usize, learning_rate: f64 },

    #[error("all {restarts} restarts diverged")]
    AllRestartsDiverged { restarts: usize },

    #[error("invalid problem split: {detail}")]
    InvalidSplit { detail: String },

    #[error("label {label} is not in the model's class list")]
    Label { label: u8 },

    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: Stage, source: Box<Error> },
}

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn bounds(detail: impl Into<String>) -> Self {
        Error::Bounds {
            detail: detail.into(),
        }
    }

    pub(crate) fn precondition(detail: impl Into<String>) -> Self {
        Error::Precondition {
            detail: detail.into(),
        }
    }

    pub(crate) fn dimension(what: &str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            got,
        }
    }

    /// Wraps `self` with a pipeline stage tag.
    pub fn at(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
