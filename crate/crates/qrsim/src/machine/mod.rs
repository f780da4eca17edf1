//! The machine model: ports, machine definitions, transition programs,
//! buffers, canonisation and combination.

mod buffer;
mod canon;
mod combine;
mod def;
mod port;
mod program;

pub use buffer::{make_buffer, queue_space};
pub use canon::canonise;
pub use combine::{combine, split_state_label};
pub use def::{DeltaSpec, MachineDef, MachineError, MachineKind, ValidationReport};
pub use port::{Port, PortDir, PortLabel};
pub use program::{Instruction, LabelExpr, Predicate, Program, RegRef};
