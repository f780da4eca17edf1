//! The run algorithm, trace recording and view extraction.

mod engine;
mod trace;

use thiserror::Error;

use crate::machine::{MachineError, Port};
use crate::qcore::StateError;

pub use engine::{initial_state, run, RunConfig, RunDistribution};
pub use trace::{project_combined_view, view, CombinedSide, Trace, TraceRecord, View};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error("collection is not closed; dangling ports: {}", dangling.iter().map(Port::to_string).collect::<Vec<_>>().join(", "))]
    NotClosed { dangling: Vec<Port> },
    #[error("expected exactly one master scheduler, found: {}", names.join(", "))]
    MasterCount { names: Vec<String> },
    #[error("machine {machine} cannot start at k = {k}: no initial state 1^k")]
    MissingInitialState { machine: String, k: usize },
    #[error("machine {machine} failed validation: {}", report.join("; "))]
    InvalidMachine { machine: String, report: Vec<String> },
    #[error("{machine} is not a combination")]
    NotACombination { machine: String },
    #[error("cannot decompose a record of {machine}: {detail}")]
    UndecomposableRecord { machine: String, detail: String },
    #[error("bad run configuration: {0}")]
    BadConfig(String),
}
