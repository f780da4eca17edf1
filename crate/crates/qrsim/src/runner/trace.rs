use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::machine::{split_state_label, MachineDef, Port};
use crate::qcore::Distribution;

use super::RunError;

/// One activation record (name, s, I, s′, O, P): the machine's classical
/// state before and after, its classical in- and outputs, and the set of
/// in-ports that were nonempty.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TraceRecord {
    pub machine: String,
    /// Classical state measured before the activation.
    pub pre_state: String,
    /// Classical in-port contents, keyed by in(CPorts).
    pub inputs: BTreeMap<Port, String>,
    /// Classical state measured after the activation.
    pub post_state: String,
    /// Classical out-port contents, keyed by out(CPorts).
    pub outputs: BTreeMap<Port, String>,
    /// The in-ports found nonempty before the activation.
    pub nonempty: BTreeSet<Port>,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kv = |m: &BTreeMap<Port, String>| {
            m.iter()
                .map(|(p, v)| format!("{p}={}", crate::qcore::display_label(v)))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let ports = self
            .nonempty
            .iter()
            .map(Port::to_string)
            .collect::<Vec<_>>()
            .join(", ");
        write!(
            f,
            "({}, {}, [{}], {}, [{}], {{{ports}}})",
            self.machine,
            crate::qcore::display_label(&self.pre_state),
            kv(&self.inputs),
            crate::qcore::display_label(&self.post_state),
            kv(&self.outputs),
        )
    }
}

/// A finite activation trace. Traces cut off by the activation budget are
/// marked truncated and never compare equal to complete ones.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub truncated: bool,
}

/// The restriction of a trace to one machine's records, order preserved.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct View {
    pub records: Vec<TraceRecord>,
    pub truncated: bool,
}

/// Projects a run distribution onto one machine's view, aggregating
/// traces that restrict to the same view.
pub fn view(runs: &Distribution<Trace>, machine_name: &str) -> Distribution<View> {
    runs.map(|trace| View {
        records: trace
            .records
            .iter()
            .filter(|r| r.machine == machine_name)
            .cloned()
            .collect(),
        truncated: trace.truncated,
    })
}

/// Which component of a combination to extract.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombinedSide {
    Left,
    Right,
}

/// Extracts one component's view out of the view of Comb(M₁, M₂):
/// records whose nonempty-port set meets the component's ports are
/// rewritten to that component's fields, all others are dropped.
pub fn project_combined_view(
    v: &View,
    combined: &MachineDef,
    side: CombinedSide,
) -> Result<View, RunError> {
    let Some((left, right)) = combined.combined_components() else {
        return Err(RunError::NotACombination { machine: combined.name.clone() });
    };
    let component = match side {
        CombinedSide::Left => left,
        CombinedSide::Right => right,
    };
    let mut records = Vec::new();
    for r in &v.records {
        if r.machine != combined.name {
            return Err(RunError::UndecomposableRecord {
                machine: combined.name.clone(),
                detail: format!("record belongs to {}", r.machine),
            });
        }
        if !r.nonempty.iter().any(|p| component.ports.contains(p)) {
            continue;
        }
        let split = |label: &str| -> Result<String, RunError> {
            let (l, r) = split_state_label(label).ok_or_else(|| RunError::UndecomposableRecord {
                machine: combined.name.clone(),
                detail: format!("state label {label:?} is not a pair"),
            })?;
            Ok(match side {
                CombinedSide::Left => l.to_string(),
                CombinedSide::Right => r.to_string(),
            })
        };
        records.push(TraceRecord {
            machine: component.name.clone(),
            pre_state: split(&r.pre_state)?,
            inputs: r
                .inputs
                .iter()
                .filter(|(p, _)| component.ports.contains(p))
                .map(|(p, v)| (p.clone(), v.clone()))
                .collect(),
            post_state: split(&r.post_state)?,
            outputs: r
                .outputs
                .iter()
                .filter(|(p, _)| component.ports.contains(p))
                .map(|(p, v)| (p.clone(), v.clone()))
                .collect(),
            nonempty: r.nonempty.clone(),
        });
    }
    Ok(View { records, truncated: v.truncated })
}
