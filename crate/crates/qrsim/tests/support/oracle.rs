//! An independent reference simulator for all-classical networks.
//!
//! This is a from-scratch transcription of the scheduling rules into
//! plain maps and queues: classical states and port contents are strings,
//! buffers are literal FIFOs, and the only branching comes from sampling
//! instructions. It deliberately shares no state-handling code with the
//! density-operator engine it is used to cross-check.

use std::collections::BTreeMap;

use qrsim::machine::{DeltaSpec, Instruction, MachineDef, Port, PortLabel, Program, RegRef};
use qrsim::network::{BufferDefaults, Collection};
use qrsim::qcore::Distribution;
use qrsim::runner::{RunConfig, Trace, TraceRecord};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
struct NetState {
    cstates: BTreeMap<String, String>,
    ports: BTreeMap<Port, String>,
    queues: BTreeMap<String, Vec<String>>,
}

struct ClassicalNet {
    machines: BTreeMap<String, MachineDef>,
    master: String,
    in_owner: BTreeMap<Port, String>,
    budget: usize,
}

struct Branch {
    prob: f64,
    state: NetState,
    trace: Vec<TraceRecord>,
    activations: usize,
    snapshot: Option<(NetState, usize)>,
}

/// Runs an all-classical collection exactly, enumerating every sampling
/// branch. Panics on quantum instructions: the oracle's domain is the
/// classical fragment only.
pub fn classical_run(
    collection: &Collection,
    cfg: &RunConfig,
    defaults: &BufferDefaults,
) -> Distribution<Trace> {
    let completion = collection.completion(defaults);
    let master = completion
        .master_schedulers()
        .first()
        .expect("a master scheduler")
        .name
        .clone();

    let mut machines = BTreeMap::new();
    let mut in_owner = BTreeMap::new();
    let mut state = NetState {
        cstates: BTreeMap::new(),
        ports: BTreeMap::new(),
        queues: BTreeMap::new(),
    };
    for m in completion.machines() {
        // Step 1: classical state 1^k, all ports empty, queues empty.
        if m.is_buffer() {
            state.queues.insert(m.ports[0].name.clone(), Vec::new());
        } else {
            state.cstates.insert(m.name.clone(), "1".repeat(cfg.k));
            for p in &m.ports {
                state.ports.insert(p.clone(), String::new());
                if p.is_in() && p.label == PortLabel::Simple {
                    in_owner.insert(p.clone(), m.name.clone());
                }
            }
            machines.insert(m.name.clone(), m.clone());
        }
    }

    let net = ClassicalNet { machines, master, in_owner, budget: cfg.max_activations };
    let mut out = Distribution::new();
    let mut stack = vec![(
        Branch { prob: 1.0, state, trace: Vec::new(), activations: 0, snapshot: None },
        true, // start at step 2
    )];
    while let Some((branch, at_master)) = stack.pop() {
        if at_master {
            step2(&net, branch, &mut stack, &mut out);
        }
    }
    out
}

fn emit(out: &mut Distribution<Trace>, branch: Branch, truncated: bool) {
    out.add(Trace { records: branch.trace, truncated }, branch.prob);
}

/// Step 2: activate the master scheduler; ⊤ gets the constant input 1.
/// A state identical to the previous visit with no new records means the
/// loop is silent forever, so the trace has reached its final value.
fn step2(
    net: &ClassicalNet,
    mut branch: Branch,
    stack: &mut Vec<(Branch, bool)>,
    out: &mut Distribution<Trace>,
) {
    if let Some((snap, len)) = &branch.snapshot {
        if *len == branch.trace.len() && *snap == branch.state {
            emit(out, branch, false);
            return;
        }
    }
    branch.snapshot = Some((branch.state.clone(), branch.trace.len()));
    branch
        .state
        .ports
        .insert(Port::master_clock(), "1".to_string());
    activate(net, branch, net.master.clone(), stack, out);
}

/// Steps 3–15 for one activation of `mcs`.
fn activate(
    net: &ClassicalNet,
    mut branch: Branch,
    mcs: String,
    stack: &mut Vec<(Branch, bool)>,
    out: &mut Distribution<Trace>,
) {
    // One loop iteration is one activation attempt against the budget.
    if branch.activations >= net.budget {
        emit(out, branch, true);
        return;
    }
    branch.activations += 1;
    let m = &net.machines[&mcs];

    // Step 3: read the classical state.
    let s = branch.state.cstates[&mcs].clone();

    // Step 4: final states hand the token back (or end the run).
    if m.fin.contains(&s) {
        if mcs == net.master {
            emit(out, branch, false);
        } else {
            stack.push((branch, true));
        }
        return;
    }

    // Step 5: erase inputs the length function switches off.
    for p in m.in_ports() {
        if m.len_is_zero(&s, p) {
            branch.state.ports.insert(p.clone(), String::new());
        }
    }

    // Step 6: classical inputs.
    let inputs: BTreeMap<Port, String> = m
        .in_cports()
        .map(|p| (p.clone(), branch.state.ports[p].clone()))
        .collect();

    // Step 7: nonempty ports; with none the token is lost.
    let nonempty: std::collections::BTreeSet<Port> = m
        .in_ports()
        .filter(|p| !branch.state.ports[*p].is_empty())
        .cloned()
        .collect();
    if nonempty.is_empty() {
        stack.push((branch, true));
        return;
    }

    // Step 8: the transition program, forking on samples.
    let DeltaSpec::Program(program) = &m.delta else {
        panic!("classical oracle only interprets program machines");
    };
    let forks = run_program(m, program, branch.state.clone());

    for (p_fork, state) in forks {
        // Step 9: post-state and classical outputs.
        let s_prime = state.cstates[&mcs].clone();
        let outputs: BTreeMap<Port, String> = m
            .out_cports()
            .map(|p| (p.clone(), state.ports[p].clone()))
            .collect();

        // Step 10: record the activation.
        let mut trace = branch.trace.clone();
        trace.push(TraceRecord {
            machine: mcs.clone(),
            pre_state: s.clone(),
            inputs: inputs.clone(),
            post_state: s_prime,
            outputs: outputs.clone(),
            nonempty: nonempty.clone(),
        });

        let mut state = state;

        // Step 11: nonempty simple out-ports are enqueued.
        for p in m.out_ports().filter(|p| p.label == PortLabel::Simple) {
            let content = state.ports[p].clone();
            if !content.is_empty() {
                state.queues.get_mut(&p.name).expect("buffer exists").push(content);
                state.ports.insert(p.clone(), String::new());
            }
        }

        // Step 12: clear all ports of the current scheduler.
        for p in &m.ports {
            state.ports.insert(p.clone(), String::new());
        }

        // Step 13: the first clock out-port with nonempty output.
        let clock = m
            .clock_out_ports()
            .find(|p| !outputs[*p].is_empty())
            .cloned();
        let next = Branch {
            prob: branch.prob * p_fork,
            state,
            trace,
            activations: branch.activations,
            snapshot: branch.snapshot.clone(),
        };
        let Some(clock) = clock else {
            stack.push((next, true));
            continue;
        };

        // Step 14: ask the buffer for message number i.
        let conn = clock.name.clone();
        let number = &outputs[&clock];
        let i = if number.chars().all(|c| c == '1') { number.len() } else { 0 };
        let mut next = next;
        let queue = next.state.queues.get_mut(&conn).expect("buffer exists");
        if i < 1 || i > queue.len() {
            stack.push((next, true));
            continue;
        }
        let msg = queue.remove(i - 1);

        // Step 15: deliver to the recipient, which is activated next.
        let rec_port = Port::simple_in(&conn);
        let recipient = net.in_owner[&rec_port].clone();
        next.state.ports.insert(rec_port, msg);
        activate(net, next, recipient, stack, out);
    }
}

/// Interprets the classical fragment of the instruction language over the
/// global state, returning (probability, state) forks.
fn run_program(m: &MachineDef, program: &Program, state: NetState) -> Vec<(f64, NetState)> {
    struct Env {
        vars: BTreeMap<String, String>,
        state: NetState,
        prob: f64,
    }

    fn reg_value(m: &MachineDef, r: &RegRef, env: &Env) -> String {
        match r {
            RegRef::CState => env.state.cstates[&m.name].clone(),
            RegRef::QState => panic!("classical oracle: quantum register access"),
            RegRef::Port(p) => env.state.ports[p].clone(),
        }
    }

    fn set_reg(m: &MachineDef, r: &RegRef, value: String, env: &mut Env) {
        match r {
            RegRef::CState => {
                env.state.cstates.insert(m.name.clone(), value);
            }
            RegRef::QState => panic!("classical oracle: quantum register access"),
            RegRef::Port(p) => {
                env.state.ports.insert(p.clone(), value);
            }
        }
    }

    fn eval_expr(e: &qrsim::machine::LabelExpr, vars: &BTreeMap<String, String>) -> String {
        use qrsim::machine::LabelExpr as E;
        match e {
            E::Lit(s) => s.clone(),
            E::Var(v) => vars[v].clone(),
            E::Concat(parts) => parts.iter().map(|p| eval_expr(p, vars)).collect(),
            E::Xor(a, b) => {
                let (a, b) = (eval_expr(a, vars), eval_expr(b, vars));
                a.bytes()
                    .zip(b.bytes())
                    .map(|(x, y)| if (x == b'1') ^ (y == b'1') { '1' } else { '0' })
                    .collect()
            }
            E::OnesLen(e) => "1".repeat(eval_expr(e, vars).len()),
            E::StripPrefix { expr, prefix } => eval_expr(expr, vars)
                .strip_prefix(prefix.as_str())
                .expect("prefix present")
                .to_string(),
        }
    }

    fn eval_pred(p: &qrsim::machine::Predicate, vars: &BTreeMap<String, String>) -> bool {
        use qrsim::machine::Predicate as P;
        match p {
            P::Eq { var, value } => &vars[var] == value,
            P::In { var, values } => values.contains(&vars[var]),
            P::Not(inner) => !eval_pred(inner, vars),
            P::All(ps) => ps.iter().all(|p| eval_pred(p, vars)),
            P::Any(ps) => ps.iter().any(|p| eval_pred(p, vars)),
        }
    }

    fn exec(m: &MachineDef, block: &[Instruction], mut envs: Vec<Env>) -> Vec<Env> {
        for instr in block {
            let mut next = Vec::with_capacity(envs.len());
            for mut env in envs {
                match instr {
                    Instruction::Unitary { .. } => {
                        panic!("classical oracle: unitary instruction")
                    }
                    Instruction::Measure { target, var } => {
                        let v = reg_value(m, target, &env);
                        env.vars.insert(var.clone(), v);
                        next.push(env);
                    }
                    Instruction::Prepare { target, value } => {
                        let v = eval_expr(value, &env.vars);
                        set_reg(m, target, v, &mut env);
                        next.push(env);
                    }
                    Instruction::CopyClassical { src, dst } => {
                        let v = reg_value(m, src, &env);
                        set_reg(m, dst, v, &mut env);
                        next.push(env);
                    }
                    Instruction::Sample { target, choices } => {
                        for (label, p) in choices {
                            if *p <= 0.0 {
                                continue;
                            }
                            let mut e = Env {
                                vars: env.vars.clone(),
                                state: env.state.clone(),
                                prob: env.prob * p,
                            };
                            set_reg(m, target, label.clone(), &mut e);
                            next.push(e);
                        }
                    }
                    Instruction::Branch { pred, then_branch, else_branch } => {
                        let taken = eval_pred(pred, &env.vars);
                        let block = if taken { then_branch } else { else_branch };
                        next.extend(exec(m, block, vec![env]));
                    }
                }
            }
            envs = next;
        }
        envs
    }

    let envs = exec(
        m,
        &program.instructions,
        vec![Env { vars: BTreeMap::new(), state, prob: 1.0 }],
    );
    envs.into_iter().map(|e| (e.prob, e.state)).collect()
}
