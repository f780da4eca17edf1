//! Canonisation: wrapping a machine's Δ so that it acts as the identity
//! when the machine is final or all of its in-ports are empty.
//!
//! In a run those guards are enforced by the scheduler before Δ is ever
//! applied, so replacing Δ by Δ̃ never changes the run distribution; the
//! point of the wrapper is that a canonised machine stays well-behaved
//! when it is welded into a combination and the scheduler can no longer
//! guard each component separately.

use crate::qcore::DensityState;

use super::def::{DeltaSpec, MachineDef, MachineError, MachineKind};

/// Returns M̃: the same machine with Δ replaced by the guarded Δ̃ and the
/// length function forced to 0 in final states.
///
/// The length-function amendment makes a final component inside a
/// combination drop its inputs instead of waking the combined machine,
/// which is what keeps run and view distributions invariant under
/// combination. Inside an ordinary run it is unobservable: the scheduler
/// never consults the length function of a final machine.
pub fn canonise(m: &MachineDef) -> Result<MachineDef, MachineError> {
    match m.kind()? {
        MachineKind::Simple | MachineKind::MasterScheduler => {}
        kind => {
            return Err(MachineError::WrongKind { op: "canonise", name: m.name.clone(), kind })
        }
    }
    let mut out = m.clone();
    out.delta = DeltaSpec::Canonised(Box::new(m.delta.clone()));
    for s in &m.fin {
        for p in m.in_ports() {
            out.lenfn_zero.insert((s.clone(), p.clone()));
        }
    }
    Ok(out)
}

/// The measurement process defining Δ̃ on the machine's registers:
/// measure the classical state, measure per-port emptiness, erase ports
/// switched off by the length function, then apply the inner Δ only if
/// the state is not final and at least one port was nonempty.
pub(crate) fn apply_guarded(
    m: &MachineDef,
    inner: &DeltaSpec,
    state: DensityState,
) -> Result<DensityState, MachineError> {
    let c_reg = m.c_reg();
    let (state_branches, _) = state.measure_complete(&c_reg).map_err(MachineError::from)?;
    let mut results = Vec::new();
    for (s, st) in state_branches {
        // Emptiness of every in-port, before any erasure.
        let mut branches: Vec<(bool, DensityState)> = vec![(false, st)];
        for p in m.in_ports() {
            let reg = MachineDef::port_reg(p);
            let mut next = Vec::with_capacity(branches.len());
            for (any_nonempty, st) in branches {
                let (outs, _) = st.measure_emptiness(&reg).map_err(MachineError::from)?;
                for (is_empty, st) in outs {
                    next.push((any_nonempty || !is_empty, st));
                }
            }
            branches = next;
        }
        for (any_nonempty, mut st) in branches {
            for p in m.in_ports() {
                if m.len_is_zero(&s, p) {
                    st = st
                        .prepare_epsilon(&MachineDef::port_reg(p))
                        .map_err(MachineError::from)?;
                }
            }
            if !m.is_final(&s) && any_nonempty {
                st = m.apply_delta_spec(inner, st)?;
            }
            results.push(st);
        }
    }
    DensityState::mix(results).map_err(MachineError::from)
}
