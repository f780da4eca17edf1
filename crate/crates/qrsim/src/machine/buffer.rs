//! Buffers: the fixed queueing machines sitting on every connection.
//!
//! A buffer p̃ owns the ports p~?, p~!, p<?. Its quantum state is the
//! queue of pending messages, encoded as words: the empty queue is the
//! empty word ε, a queue (n; m₁, …, mₙ) is the comma-joined word
//! "m₁,…,mₙ". Messages are appended and extracted by linear maps, never
//! measured, so superposed payloads pass through coherently.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::qcore::{parse_unary, DensityState, LabeledSpace, RegId};

use super::def::{DeltaSpec, MachineDef, MachineError};
use super::port::Port;

/// All queue contents of at most `cap` messages over the nonempty words
/// of the message space, in (length, slot-index) order; the empty queue ε
/// comes first.
pub fn queue_space(msg_space: &LabeledSpace, cap: usize) -> Arc<LabeledSpace> {
    let messages: Vec<&String> = msg_space.labels().iter().filter(|m| !m.is_empty()).collect();
    let mut labels: Vec<String> = vec![String::new()];
    let mut layer: Vec<String> = vec![String::new()];
    for _ in 0..cap {
        let mut next = Vec::with_capacity(layer.len() * messages.len());
        for q in &layer {
            for m in &messages {
                let e = if q.is_empty() { (*m).clone() } else { format!("{q},{m}") };
                next.push(e);
            }
        }
        labels.extend(next.iter().cloned());
        layer = next;
    }
    LabeledSpace::shared(labels).expect("queue encodings are distinct")
}

fn queue_parts(label: &str) -> Vec<&str> {
    if label.is_empty() {
        Vec::new()
    } else {
        label.split(',').collect()
    }
}

fn queue_len(label: &str) -> usize {
    queue_parts(label).len()
}

/// The buffer machine for connection name `name`:
/// (name~, (p~?, p~!, p<?), {p<?}, Queue, {1^k}, Δ~, ∞, ∅).
pub fn make_buffer(
    name: &str,
    queue_cap: usize,
    msg_space: Arc<LabeledSpace>,
    max_k: usize,
) -> MachineDef {
    assert!(queue_cap >= 1, "queue capacity must be at least 1");
    assert!(max_k >= 1);
    let ports = vec![Port::buffer_in(name), Port::buffer_out(name), Port::clock_in(name)];
    let cports = [Port::clock_in(name)].into_iter().collect();
    let cstates = LabeledSpace::shared((1..=max_k).map(crate::qcore::unary_label))
        .expect("unary labels are distinct");
    MachineDef {
        name: format!("{name}~"),
        ports,
        cports,
        qstates: queue_space(&msg_space, queue_cap),
        cstates,
        delta: DeltaSpec::Buffer { queue_cap },
        lenfn_zero: BTreeSet::new(),
        fin: BTreeSet::new(),
        msg_space,
    }
}

/// The buffer's state-transition Δ~ as a measurement process:
///
/// 1. if p~? is nonempty, coherently append its content to the queue and
///    clear p~?;
/// 2. completely measure the clock in-port p<?, outcome i;
/// 3. prepare ε on p~!;
/// 4. measure the queue length n;
/// 5. if i is a natural number (unary) and i ≤ n, coherently move the
///    i-th message to p~!.
///
/// Appending beyond the queue capacity is a hard error.
pub(crate) fn transition(
    m: &MachineDef,
    queue_cap: usize,
    state: DensityState,
) -> Result<DensityState, MachineError> {
    let conn = &m.ports[0].name;
    let queue_reg = m.q_reg();
    let in_reg = MachineDef::port_reg(&Port::buffer_in(conn));
    let clock_reg = MachineDef::port_reg(&Port::clock_in(conn));
    let out_reg = MachineDef::port_reg(&Port::buffer_out(conn));
    let qspace = m.qstates.clone();
    let mspace = m.msg_space.clone();

    // Step 1: emptiness test on p~?, then the append isometry
    // |q⟩ ⊗ |in⟩ ↦ |q·in⟩ ⊗ |ε⟩ on the nonempty branch.
    let (in_branches, _pruned) = state.measure_emptiness(&in_reg).map_err(MachineError::from)?;
    let mut after_append = Vec::new();
    for (is_empty, st) in in_branches {
        if is_empty {
            after_append.push(st);
            continue;
        }
        // Overflow is detected before relabelling so it reports cleanly.
        let overflow = detect_overflow(&st, &queue_reg, &qspace, queue_cap)?;
        if overflow {
            return Err(MachineError::QueueOverflow { name: m.name.clone(), cap: queue_cap });
        }
        let (qs, ms) = (qspace.clone(), mspace.clone());
        let st = st
            .apply_basis_isometry(
                &[queue_reg.clone(), in_reg.clone()],
                |idx| {
                    let q = qs.label(idx[0] as usize);
                    let msg = ms.label(idx[1] as usize);
                    debug_assert!(!msg.is_empty());
                    let appended = if q.is_empty() { msg.to_string() } else { format!("{q},{msg}") };
                    let qi = qs.index_of(&appended)?;
                    Some(vec![qi as u16, 0])
                },
                "buffer append",
            )
            .map_err(MachineError::from)?;
        after_append.push(st);
    }

    // Steps 2–5 on each branch. The clock input is consumed by the
    // measurement (left as ε), like the in-port is consumed by the
    // append: a stale number would otherwise trigger a delivery at the
    // next enqueue switch and the message would be lost.
    let mut finished = Vec::new();
    for st in after_append {
        let (clock_outcomes, _) = st.measure_complete(&clock_reg).map_err(MachineError::from)?;
        for (i_label, st) in clock_outcomes {
            let st = st.prepare_epsilon(&clock_reg).map_err(MachineError::from)?;
            let st = st.prepare_epsilon(&out_reg).map_err(MachineError::from)?;
            let (len_outcomes, _) = st
                .measure_by(&queue_reg, queue_len)
                .map_err(MachineError::from)?;
            for (n, st) in len_outcomes {
                let deliver = matches!(parse_unary(&i_label), Some(i) if i >= 1 && i <= n);
                if !deliver {
                    finished.push(st);
                    continue;
                }
                let i = parse_unary(&i_label).unwrap();
                let (qs, ms) = (qspace.clone(), mspace.clone());
                let st = st
                    .apply_basis_isometry(
                        &[queue_reg.clone(), out_reg.clone()],
                        |idx| {
                            let mut parts = queue_parts(qs.label(idx[0] as usize))
                                .iter()
                                .map(|s| s.to_string())
                                .collect::<Vec<_>>();
                            debug_assert!(idx[1] == 0, "out-port was prepared to ε");
                            if parts.len() != n || i > parts.len() {
                                return None;
                            }
                            let msg = parts.remove(i - 1);
                            let qi = qs.index_of(&parts.join(","))?;
                            let mi = ms.index_of(&msg)?;
                            Some(vec![qi as u16, mi as u16])
                        },
                        "buffer extract",
                    )
                    .map_err(MachineError::from)?;
                finished.push(st);
            }
        }
    }
    DensityState::mix(finished).map_err(MachineError::from)
}

fn detect_overflow(
    st: &DensityState,
    queue_reg: &RegId,
    _qspace: &LabeledSpace,
    cap: usize,
) -> Result<bool, MachineError> {
    // The queue length is a classical observable here (the in-port is
    // known nonempty), so probing by measurement does not disturb.
    let (lens, _) = st.measure_by(queue_reg, queue_len).map_err(MachineError::from)?;
    Ok(lens.iter().any(|(n, _)| *n >= cap))
}
