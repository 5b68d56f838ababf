use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("step {steps} is not admissible for model {model_id} (allowed: {allowed:?})")]
    StepDomain {
        model_id: u32,
        steps: u32,
        allowed: Vec<u32>,
    },

    #[error("resource share must be positive, got {share}")]
    NonPositiveShare { share: f64 },

    #[error("resource share {share} exceeds total resource {total}")]
    InfeasibleShare { share: f64, total: f64 },

    #[error("thresholds must satisfy x1 < x2, got ({x1}, {x2})")]
    ThresholdOrder { x1: f64, x2: f64 },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("constraint {constraint} violated: {detail}")]
    ConstraintViolation {
        constraint: Constraint,
        detail: String,
    },

    #[error("infeasible{}: {binding}", slot_suffix(*.slot))]
    Infeasible { binding: String, slot: Option<u64> },

    #[error("search space of {size} candidates exceeds the limit of {limit}; use a coarser resource grid")]
    SearchSpaceTooLarge { size: u128, limit: u128 },

    #[error("usage: {0}")]
    Usage(String),

    #[error("failed to parse {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

fn slot_suffix(slot: Option<u64>) -> String {
    match slot {
        Some(s) => format!(" in slot {s}"),
        None => String::new(),
    }
}

/// Constraints of the joint assignment/allocation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Every task is assigned to exactly one model (C1 and C2 together).
    UniqueAssignment,
    /// Steps lie in the model's admissible step set (C3).
    StepSet,
    /// Allocated resources do not exceed the budget (C4).
    ResourceBudget,
    /// Every loaded model receives a positive share.
    PositiveShare,
    /// Per-task delay stays under the latency bound.
    LatencyBound,
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Constraint::UniqueAssignment => "C1/C2 (unique assignment)",
            Constraint::StepSet => "C3 (step set)",
            Constraint::ResourceBudget => "C4 (resource budget)",
            Constraint::PositiveShare => "positive share for loaded models",
            Constraint::LatencyBound => "latency bound",
        };
        f.write_str(s)
    }
}

impl SimError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> u8 {
        match self {
            SimError::Infeasible { .. } => 3,
            SimError::ConstraintViolation { .. } | SimError::Invariant(_) => 4,
            _ => 2,
        }
    }

    /// Attaches a slot index to infeasibility errors.
    pub fn in_slot(self, slot: u64) -> Self {
        match self {
            SimError::Infeasible { binding, .. } => SimError::Infeasible {
                binding,
                slot: Some(slot),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
