//! Combination: welding two machines into one whose Δ is the tensor of
//! the canonised components' Δs over paired state spaces.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::qcore::{pair_label_of, split_pair_label, DensityState, LabeledSpace};

use super::canon::canonise;
use super::def::{DeltaSpec, MachineDef, MachineError, MachineKind};

/// Comb(m1, m2): name "(n₁+n₂)", the union of the (disjoint) port
/// sequences, paired state spaces, the piecewise length function and the
/// product of the final-state sets. Both machines are canonised first.
pub fn combine(m1: &MachineDef, m2: &MachineDef) -> Result<MachineDef, MachineError> {
    for m in [m1, m2] {
        match m.kind()? {
            MachineKind::Simple | MachineKind::MasterScheduler => {}
            kind => {
                return Err(MachineError::WrongKind { op: "combine", name: m.name.clone(), kind })
            }
        }
    }
    let p1: BTreeSet<_> = m1.ports.iter().collect();
    if let Some(shared) = m2.ports.iter().find(|p| p1.contains(*p)) {
        return Err(MachineError::PortOverlap {
            a: m1.name.clone(),
            b: m2.name.clone(),
            port: shared.clone(),
        });
    }

    let left = canonise(m1)?;
    let right = canonise(m2)?;

    let name = format!("({}+{})", left.name, right.name);
    let mut ports = left.ports.clone();
    ports.extend(right.ports.iter().cloned());
    let cports = left.cports.union(&right.cports).cloned().collect();
    let qstates = Arc::new(LabeledSpace::product(&left.qstates, &right.qstates));
    let cstates = Arc::new(LabeledSpace::product(&left.cstates, &right.cstates));

    let mut lenfn_zero = BTreeSet::new();
    for s1 in left.cstates.labels() {
        for s2 in right.cstates.labels() {
            let pair = pair_label_of(s1, s2);
            for p in left.in_ports() {
                if left.len_is_zero(s1, p) {
                    lenfn_zero.insert((pair.clone(), p.clone()));
                }
            }
            for p in right.in_ports() {
                if right.len_is_zero(s2, p) {
                    lenfn_zero.insert((pair.clone(), p.clone()));
                }
            }
        }
    }

    let mut fin = BTreeSet::new();
    for f1 in &left.fin {
        for f2 in &right.fin {
            fin.insert(pair_label_of(f1, f2));
        }
    }

    let msg_space = left.msg_space.clone();
    Ok(MachineDef {
        name,
        ports,
        cports,
        qstates,
        cstates,
        delta: DeltaSpec::Combined { left: Box::new(left), right: Box::new(right) },
        lenfn_zero,
        fin,
        msg_space,
    })
}

/// Applies Δ_C = Δ̃₁ ⊗ Δ̃₂: the paired state registers are split into the
/// component registers, each component's guarded Δ runs on its own half
/// (port registers are shared as-is), and the halves are fused back.
pub(crate) fn apply_combined(
    combined: &MachineDef,
    left: &MachineDef,
    right: &MachineDef,
    state: DensityState,
) -> Result<DensityState, MachineError> {
    let state = state
        .split_register(
            &combined.q_reg(),
            (left.q_reg(), left.qstates.clone()),
            (right.q_reg(), right.qstates.clone()),
        )
        .map_err(MachineError::from)?
        .split_register(
            &combined.c_reg(),
            (left.c_reg(), left.cstates.clone()),
            (right.c_reg(), right.cstates.clone()),
        )
        .map_err(MachineError::from)?;
    let state = left.apply_delta(state)?;
    let state = right.apply_delta(state)?;
    let state = state
        .fuse_registers(&left.q_reg(), &right.q_reg(), combined.q_reg(), combined.qstates.clone())
        .map_err(MachineError::from)?
        .fuse_registers(&left.c_reg(), &right.c_reg(), combined.c_reg(), combined.cstates.clone())
        .map_err(MachineError::from)?;
    Ok(state)
}

/// Splits a combined machine's classical-state label into the component
/// labels, e.g. "(a|b)" → ("a", "b").
pub fn split_state_label(label: &str) -> Option<(&str, &str)> {
    split_pair_label(label)
}
