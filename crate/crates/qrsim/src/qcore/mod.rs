//! Finite-dimensional quantum linear algebra over labelled basis spaces.
//!
//! States are density operators kept in an entanglement-factored form:
//! the registered subsystems are partitioned into factors, and each factor
//! stores a trace-1 Hermitian matrix restricted to the basis vectors it
//! actually has support on. Operations merge factors when they act
//! jointly and split them again on preparation, so desk-scale networks
//! stay tractable even though the full product space is huge.

mod alphabet;
mod channel;
mod dist;
pub mod linalg;
mod space;
mod state;

pub use alphabet::Alphabet;
pub use channel::{validate_channel, ChannelError, ChannelReport, KrausChannel};
pub use dist::{statistical_distance, Distribution};
pub use space::{display_label, LabeledSpace};
pub use state::{DensityState, MeasureOutcome, RegId, StateError};

pub(crate) use alphabet::{parse_unary, unary as unary_label};
pub(crate) use space::{pair_label as pair_label_of, split_pair_label};

/// Tolerance for Hermiticity and positivity checks on density operators.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Tolerance for trace preservation and distribution normalisation.
pub const TRACE_TOL: f64 = 1e-9;
/// Branches below this probability are dropped and booked as pruned mass.
pub const PRUNE_EPS: f64 = 1e-12;
