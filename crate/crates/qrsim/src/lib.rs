//! Exact simulation of networks of quantum machines with classical,
//! message-driven scheduling.
//!
//! A network is a *collection* of machines exchanging messages through
//! buffers. Each machine carries a quantum and a classical state register
//! and evolves under a trace-preserving superoperator; the scheduler
//! measures classical state and port contents between activations, so a
//! run induces an exact probability distribution over activation traces.
//!
//! On top of the run engine sits a security harness: structures (protocols
//! with service ports), configurations (protocol + honest user +
//! adversary), and witnessed security claims comparing the honest user's
//! view between a real and an ideal protocol by statistical distance.
//!
//! Modules:
//!
//! - [`qcore`] — labelled state spaces, density operators, Kraus channels,
//!   projective measurements and discrete distributions.
//! - [`machine`] — ports, machine definitions, transition programs,
//!   buffers, canonisation and combination.
//! - [`network`] — collections, completion, structures, forbidden ports,
//!   configurations and composition.
//! - [`runner`] — the run algorithm, traces, views and view projection
//!   out of combined machines.
//! - [`security`] — view comparison, claim checking and verdicts.
//! - [`doc`] — the network-description document format and the structured
//!   output documents.
//! - [`random`] — seeded generators for states, channels and small closed
//!   collections, used by the validation harness.

pub mod doc;
pub mod machine;
pub mod network;
pub mod qcore;
pub mod random;
pub mod runner;
pub mod security;



pub use qcore::{Alphabet, DensityState, Distribution, KrausChannel, LabeledSpace, RegId};


