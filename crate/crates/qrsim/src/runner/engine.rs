use std::collections::{BTreeMap, BTreeSet};

use crate::machine::{MachineDef, Port, PortLabel};
use crate::network::{BufferDefaults, Collection};
use crate::qcore::{DensityState, Distribution};

use super::trace::{Trace, TraceRecord};
use super::RunError;

/// Parameters of one run: the security parameter k, the activation
/// budget, and the probability floor below which branches are pruned
/// (their mass is booked, never silently dropped).
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    pub max_activations: usize,
    pub prune_eps: f64,
}

impl RunConfig {
    pub fn new(k: usize) -> Self {
        RunConfig { k, max_activations: 64, prune_eps: 1e-12 }
    }

    pub fn with_budget(mut self, max_activations: usize) -> Self {
        self.max_activations = max_activations;
        self
    }
}

/// The probability distribution over traces induced by running a closed
/// collection, together with the configuration that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct RunDistribution {
    pub traces: Distribution<Trace>,
    pub config: RunConfig,
}

impl RunDistribution {
    /// Probability mass sitting on budget-truncated traces.
    pub fn truncated_mass(&self) -> f64 {
        // `+ 0.0` normalises the empty sum's -0.0.
        self.traces
            .entries()
            .filter(|(t, _)| t.truncated)
            .map(|(_, p)| p)
            .sum::<f64>()
            + 0.0
    }

    pub fn pruned_mass(&self) -> f64 {
        self.traces.pruned_mass()
    }

    /// Pruned plus truncated mass: the part of the distribution the
    /// budgeted engine could not resolve exactly.
    pub fn defect(&self) -> f64 {
        self.pruned_mass() + self.truncated_mass()
    }
}

/// The initial state of a closed collection's completion: every machine
/// starts in quantum state ε and classical state 1^k, every port is
/// empty, and all factors are unentangled with total weight 1.
pub fn initial_state(
    collection: &Collection,
    k: usize,
    defaults: &BufferDefaults,
) -> Result<DensityState, RunError> {
    let completion = collection.completion(defaults);
    let mut state = DensityState::unit();
    for m in completion.machines() {
        if !m.supports_k(k) {
            return Err(RunError::MissingInitialState { machine: m.name.clone(), k });
        }
        let q = m.initial_qstate().map_err(RunError::from)?;
        let c = m.initial_cstate(k).map_err(RunError::from)?;
        state = state
            .tensor(DensityState::basis(m.q_reg(), m.qstates.clone(), &q)?)?
            .tensor(DensityState::basis(m.c_reg(), m.cstates.clone(), &c)?)?;
        for p in &m.ports {
            state = state.tensor(DensityState::basis(
                MachineDef::port_reg(p),
                m.msg_space.clone(),
                "",
            )?)?;
        }
    }
    Ok(state)
}

/// How close two step-2 snapshots must be to declare a silent loop.
const FIXPOINT_TOL: f64 = 1e-12;

struct Engine {
    machines: BTreeMap<String, MachineDef>,
    /// Owner machine of each simple in-port, for step 15.
    simple_in_owner: BTreeMap<Port, String>,
    master: String,
    cfg: RunConfig,
    leaves: Distribution<Trace>,
}

struct Branch {
    state: DensityState,
    trace: Vec<TraceRecord>,
    activations: usize,
    /// Snapshot of the state at the previous step-2 entry, with the trace
    /// length at that moment; a repeat means the run is silently looping
    /// and will never append another record, i.e. the trace is final.
    step2_snapshot: Option<(DensityState, usize)>,
    next: Step,
}

enum Step {
    ActivateMaster,
    Activate { mcs: String },
}

/// Runs a closed collection per the scheduling algorithm: initialise,
/// then loop activations of the current scheduler, moving messages
/// through buffers, until the master scheduler terminates or the budget
/// runs out. Every measurement forks the execution; the leaves form the
/// trace distribution.
pub fn run(
    collection: &Collection,
    cfg: &RunConfig,
    defaults: &BufferDefaults,
) -> Result<RunDistribution, RunError> {
    if cfg.prune_eps >= 1.0 || cfg.prune_eps < 0.0 {
        return Err(RunError::BadConfig("prune_eps must lie in [0, 1)".into()));
    }
    if cfg.k == 0 || cfg.max_activations == 0 {
        // A zero budget is still well-defined: everything truncates.
        if cfg.k == 0 {
            return Err(RunError::BadConfig("security parameter k must be ≥ 1".into()));
        }
    }
    if !collection.is_closed(defaults) {
        let dangling: Vec<Port> = collection
            .completion(defaults)
            .free()
            .into_iter()
            .filter(|p| !p.is_master_clock())
            .collect();
        return Err(RunError::NotClosed { dangling });
    }
    let completion = collection.completion(defaults);
    for m in completion.machines() {
        let report = m.validate();
        if !report.is_ok() {
            return Err(RunError::InvalidMachine {
                machine: m.name.clone(),
                report: report.violations,
            });
        }
    }
    let masters = completion.master_schedulers();
    if masters.len() != 1 {
        return Err(RunError::MasterCount {
            names: masters.iter().map(|m| m.name.clone()).collect(),
        });
    }
    let master = masters[0].name.clone();
    defaults
        .msg_space
        .require("1")
        .map_err(|_| RunError::BadConfig("the message alphabet must contain the word 1".into()))?;

    let mut simple_in_owner = BTreeMap::new();
    for m in completion.machines() {
        for p in m.in_ports() {
            if p.label == PortLabel::Simple {
                simple_in_owner.insert(p.clone(), m.name.clone());
            }
        }
    }

    let state = initial_state(collection, cfg.k, defaults)?;

    let mut engine = Engine {
        machines: completion.machines().map(|m| (m.name.clone(), m.clone())).collect(),
        simple_in_owner,
        master,
        cfg: cfg.clone(),
        leaves: Distribution::new(),
    };

    let mut stack = vec![Branch {
        state,
        trace: Vec::new(),
        activations: 0,
        step2_snapshot: None,
        next: Step::ActivateMaster,
    }];
    while let Some(branch) = stack.pop() {
        engine.step(branch, &mut stack)?;
    }

    Ok(RunDistribution { traces: engine.leaves, config: cfg.clone() })
}

impl Engine {
    fn machine(&self, name: &str) -> &MachineDef {
        &self.machines[name]
    }

    fn emit(&mut self, branch: Branch, truncated: bool) {
        self.leaves.add(
            Trace { records: branch.trace, truncated },
            branch.state.weight(),
        );
    }

    fn prune(&mut self, weight: f64) {
        self.leaves.add_pruned(weight);
    }

    fn step(&mut self, mut branch: Branch, stack: &mut Vec<Branch>) -> Result<(), RunError> {
        if branch.state.weight() < self.cfg.prune_eps {
            self.prune(branch.state.weight());
            return Ok(());
        }
        match std::mem::replace(&mut branch.next, Step::ActivateMaster) {
            Step::ActivateMaster => self.activate_master(branch, stack),
            Step::Activate { mcs } => self.activate(branch, mcs, stack),
        }
    }

    /// Step 2: the master scheduler becomes current and ⊤ is prepared to
    /// carry the constant input 1. A repeated snapshot here means the
    /// loop is silent and the trace already has its final value.
    fn activate_master(&mut self, mut branch: Branch, stack: &mut Vec<Branch>) -> Result<(), RunError> {
        if let Some((snap, len)) = &branch.step2_snapshot {
            if *len == branch.trace.len() && branch.state.approx_eq(snap, FIXPOINT_TOL) {
                self.emit(branch, false);
                return Ok(());
            }
        }
        branch.step2_snapshot = Some((branch.state.clone(), branch.trace.len()));
        let top = MachineDef::port_reg(&Port::master_clock());
        branch.state = branch.state.prepare(&top, "1")?;
        branch.next = Step::Activate { mcs: self.master.clone() };
        stack.push(branch);
        Ok(())
    }

    /// Steps 3–15: one activation of the current scheduler.
    fn activate(&mut self, branch: Branch, mcs: String, stack: &mut Vec<Branch>) -> Result<(), RunError> {
        if branch.activations >= self.cfg.max_activations {
            self.emit(branch, true);
            return Ok(());
        }
        let Branch { state, trace, activations, step2_snapshot, .. } = branch;
        let activations = activations + 1;
        let m = self.machine(&mcs).clone();

        // Step 3: measure the classical state.
        let (state_outcomes, pruned) = state.measure_complete(&m.c_reg())?;
        self.prune(pruned);
        for (s, state) in state_outcomes {
            // Step 4: termination test.
            if m.is_final(&s) {
                let branch = Branch {
                    state,
                    trace: trace.clone(),
                    activations,
                    step2_snapshot: step2_snapshot.clone(),
                    next: Step::ActivateMaster,
                };
                if mcs == self.master {
                    self.emit(branch, false);
                } else {
                    stack.push(branch);
                }
                continue;
            }

            // Step 5: erase ports switched off by the length function.
            let mut state = state;
            for p in m.in_ports() {
                if m.len_is_zero(&s, p) {
                    state = state.prepare_epsilon(&MachineDef::port_reg(p))?;
                }
            }

            // Step 6: measure the classical inputs.
            let mut pending: Vec<(BTreeMap<Port, String>, DensityState)> =
                vec![(BTreeMap::new(), state)];
            for p in m.in_cports() {
                let mut next = Vec::with_capacity(pending.len());
                for (inputs, state) in pending {
                    let (outs, pruned) = state.measure_complete(&MachineDef::port_reg(p))?;
                    self.prune(pruned);
                    for (label, state) in outs {
                        let mut inputs = inputs.clone();
                        inputs.insert(p.clone(), label);
                        next.push((inputs, state));
                    }
                }
                pending = next;
            }

            // Step 7: emptiness of every in-port; an all-empty activation
            // loses the token to the master scheduler.
            let mut with_ports: Vec<(BTreeMap<Port, String>, BTreeSet<Port>, DensityState)> =
                pending.into_iter().map(|(i, st)| (i, BTreeSet::new(), st)).collect();
            for p in m.in_ports() {
                let mut next = Vec::with_capacity(with_ports.len());
                for (inputs, nonempty, state) in with_ports {
                    let (outs, pruned) = state.measure_emptiness(&MachineDef::port_reg(p))?;
                    self.prune(pruned);
                    for (is_empty, state) in outs {
                        let mut nonempty = nonempty.clone();
                        if !is_empty {
                            nonempty.insert(p.clone());
                        }
                        next.push((inputs.clone(), nonempty.clone(), state));
                    }
                }
                with_ports = next;
            }

            for (inputs, nonempty, state) in with_ports {
                if nonempty.is_empty() {
                    stack.push(Branch {
                        state,
                        trace: trace.clone(),
                        activations,
                        step2_snapshot: step2_snapshot.clone(),
                        next: Step::ActivateMaster,
                    });
                    continue;
                }

                // Step 8: apply the state-transition operator.
                let state = m.apply_delta(state)?;

                // Step 9: measure the post-state and classical outputs.
                let (post_outcomes, pruned) = state.measure_complete(&m.c_reg())?;
                self.prune(pruned);
                for (s_prime, state) in post_outcomes {
                    let mut outs: Vec<(BTreeMap<Port, String>, DensityState)> =
                        vec![(BTreeMap::new(), state)];
                    for p in m.out_cports() {
                        let mut next = Vec::with_capacity(outs.len());
                        for (outputs, state) in outs {
                            let (o, pruned) = state.measure_complete(&MachineDef::port_reg(p))?;
                            self.prune(pruned);
                            for (label, state) in o {
                                let mut outputs = outputs.clone();
                                outputs.insert(p.clone(), label);
                                next.push((outputs, state));
                            }
                        }
                        outs = next;
                    }

                    for (outputs, state) in outs {
                        // Step 10: append the record.
                        let mut trace = trace.clone();
                        trace.push(TraceRecord {
                            machine: m.name.clone(),
                            pre_state: s.clone(),
                            inputs: inputs.clone(),
                            post_state: s_prime.clone(),
                            outputs: outputs.clone(),
                            nonempty: nonempty.clone(),
                        });

                        self.deliver(
                            Branch {
                                state,
                                trace,
                                activations,
                                step2_snapshot: step2_snapshot.clone(),
                                next: Step::ActivateMaster,
                            },
                            &m,
                            &outputs,
                            stack,
                        )?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Steps 11–15: move outputs into buffers, clear the ports, and hand
    /// the token over via the first scheduled connection.
    fn deliver(
        &mut self,
        branch: Branch,
        m: &MachineDef,
        outputs: &BTreeMap<Port, String>,
        stack: &mut Vec<Branch>,
    ) -> Result<(), RunError> {
        let Branch { state, trace, activations, step2_snapshot, .. } = branch;

        // Step 11: each nonempty simple out-port is moved into its buffer,
        // which is then switched to enqueue the message.
        let mut states = vec![state];
        for p in m.out_ports().filter(|p| p.label == PortLabel::Simple) {
            let buffer_name = format!("{}~", p.name);
            let buffer = self.machine(&buffer_name).clone();
            let mut next = Vec::with_capacity(states.len());
            for state in states {
                let (emptiness, pruned) = state.measure_emptiness(&MachineDef::port_reg(p))?;
                self.prune(pruned);
                for (is_empty, state) in emptiness {
                    if is_empty {
                        next.push(state);
                    } else {
                        let state = state.move_message(
                            &MachineDef::port_reg(p),
                            &MachineDef::port_reg(&Port::buffer_in(&p.name)),
                        )?;
                        next.push(buffer.apply_delta(state)?);
                    }
                }
            }
            states = next;
        }

        // Step 12: clear every port of the current scheduler.
        let mut cleared = Vec::with_capacity(states.len());
        for mut state in states {
            for p in &m.ports {
                state = state.prepare_epsilon(&MachineDef::port_reg(p))?;
            }
            cleared.push(state);
        }

        // Step 13: the first clock out-port with a nonempty measured
        // output decides which buffer gets switched; with none, the token
        // is lost.
        let scheduled = m
            .clock_out_ports()
            .find(|p| outputs.get(*p).map(|v| !v.is_empty()).unwrap_or(false))
            .cloned();
        let Some(clock_port) = scheduled else {
            for state in cleared {
                stack.push(Branch {
                    state,
                    trace: trace.clone(),
                    activations,
                    step2_snapshot: step2_snapshot.clone(),
                    next: Step::ActivateMaster,
                });
            }
            return Ok(());
        };
        let conn = &clock_port.name;
        let number = &outputs[&clock_port];
        let buffer = self.machine(&format!("{conn}~")).clone();
        let out_reg = MachineDef::port_reg(&Port::buffer_out(conn));

        for state in cleared {
            // Step 14: feed the number to the buffer's clock port and
            // switch it; an empty buffer out-port means the index was not
            // served and the token is lost.
            let state = state.prepare(&MachineDef::port_reg(&Port::clock_in(conn)), number)?;
            let state = buffer.apply_delta(state)?;
            let (emptiness, pruned) = state.measure_emptiness(&out_reg)?;
            self.prune(pruned);
            for (is_empty, state) in emptiness {
                if is_empty {
                    stack.push(Branch {
                        state,
                        trace: trace.clone(),
                        activations,
                        step2_snapshot: step2_snapshot.clone(),
                        next: Step::ActivateMaster,
                    });
                    continue;
                }
                // Step 15: the message reaches the recipient's simple
                // in-port; the recipient becomes the current scheduler.
                let recipient_port = Port::simple_in(conn);
                let recipient = self
                    .simple_in_owner
                    .get(&recipient_port)
                    .cloned()
                    .expect("closedness guarantees a recipient");
                let state =
                    state.move_message(&out_reg, &MachineDef::port_reg(&recipient_port))?;
                stack.push(Branch {
                    state,
                    trace: trace.clone(),
                    activations,
                    step2_snapshot: step2_snapshot.clone(),
                    next: Step::Activate { mcs: recipient },
                });
            }
        }
        Ok(())
    }
}
