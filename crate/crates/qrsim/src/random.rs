//! Seeded random generators for states, channels, machines and small
//! closed networks, used by the lemma-validation harness and the
//! property-test suites.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::machine::{
    DeltaSpec, Instruction, LabelExpr, MachineDef, Port, Predicate, Program, RegRef,
};
use crate::network::{BufferDefaults, Collection};
use crate::qcore::{Alphabet, Distribution, KrausChannel, LabeledSpace};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box–Muller; plenty for test-grade randomness.
    let u: f64 = rng.random::<f64>().max(1e-12);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn random_complex_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| Complex64::new(gaussian(rng), gaussian(rng)))
}

/// A Haar-ish random unitary via QR of a complex Gaussian matrix.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let qr = random_complex_matrix(dim, dim, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..dim {
                q[(i, j)] *= phase.conj();
            }
        }
    }
    q
}

/// A random CPTP channel with `n_ops` Kraus operators, via a random
/// Stinespring isometry.
pub fn random_channel(dims: &[usize], n_ops: usize, rng: &mut impl Rng) -> KrausChannel {
    let d: usize = dims.iter().product();
    let big = random_complex_matrix(d * n_ops, d, rng);
    let q = big.qr().q(); // (d·n)×d isometry
    let ops: Vec<DMatrix<Complex64>> = (0..n_ops)
        .map(|i| q.rows(i * d, d).into_owned())
        .collect();
    KrausChannel::new(ops, dims.to_vec()).expect("Stinespring blocks are trace-preserving")
}

/// A random density matrix ρ = AA†/tr(AA†).
pub fn random_density_matrix(dim: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let a = random_complex_matrix(dim, dim, rng);
    let rho = &a * a.adjoint();
    let tr: f64 = rho.diagonal().iter().map(|c| c.re).sum();
    rho / Complex64::new(tr, 0.0)
}

/// A random distribution over outcomes labelled 0..n.
pub fn random_distribution(n: usize, rng: &mut impl Rng) -> Distribution<usize> {
    let mut weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Distribution::from_entries(weights.into_iter().enumerate())
}

/// Parameters of the random-network family used to validate the
/// canonisation and combination lemmas at desk scale.
#[derive(Clone, Debug)]
pub struct NetworkFamily {
    /// Number of simple machines besides the master scheduler (1–2).
    pub simple_machines: usize,
    /// Allow quantum state manipulation and quantum ports.
    pub quantum: bool,
    pub queue_cap: usize,
}

impl Default for NetworkFamily {
    fn default() -> Self {
        NetworkFamily { simple_machines: 2, quantum: true, queue_cap: 2 }
    }
}

/// One random closed collection from the family: a master scheduler X
/// driving up to two simple machines over randomly owned and randomly
/// scheduled connections, with random payloads, optional quantum
/// rotations and occasional out-of-range delivery indices.
pub fn random_closed_collection(
    family: &NetworkFamily,
    rng: &mut ChaCha8Rng,
) -> (Collection, BufferDefaults) {
    let alphabet = Alphabet::default(); // Σ = {0,1}, L = 2
    let defaults =
        BufferDefaults::new(alphabet.message_space()).with_queue_cap(family.queue_cap);
    let n_simple = rng.random_range(1..=family.simple_machines.max(1));

    // Connection plan: c0 always runs X → M1 and is scheduled by X.
    // An optional extra connection runs out of M1, with a random receiver
    // and scheduler.
    struct Conn {
        name: String,
        sender: usize,   // 0 = X, i = Mi
        receiver: usize, // 1-based simple machine
        scheduler: usize,
        quantum: bool,
    }
    let mut conns = vec![Conn {
        name: "c0".into(),
        sender: 0,
        receiver: 1,
        scheduler: 0,
        quantum: family.quantum && rng.random_bool(0.4),
    }];
    if rng.random_bool(0.7) {
        let receiver = rng.random_range(1..=n_simple);
        conns.push(Conn {
            name: "c1".into(),
            sender: 1,
            receiver,
            scheduler: if rng.random_bool(0.5) { 0 } else { 1 },
            quantum: family.quantum && rng.random_bool(0.4),
        });
    }

    let payloads = ["0", "1", "00", "01", "10", "11"];

    let names = ["X", "M1", "M2"];
    let mut machines = Vec::new();
    for (mi, name) in names.iter().enumerate().take(1 + n_simple) {
        let mut ports = Vec::new();
        let mut quantum_ports = BTreeSet::new();
        if mi == 0 {
            ports.push(Port::master_clock());
        }
        for c in &conns {
            if c.sender == mi {
                let p = Port::simple_out(&c.name);
                if c.quantum {
                    quantum_ports.insert(p.clone());
                }
                ports.push(p);
            }
            if c.receiver == mi && mi != 0 {
                let p = Port::simple_in(&c.name);
                if c.quantum {
                    quantum_ports.insert(p.clone());
                }
                ports.push(p);
            }
            if c.scheduler == mi {
                ports.push(Port::clock_out(&c.name));
            }
        }

        let quantum_state = family.quantum && rng.random_bool(0.6);
        let qdim = if quantum_state { rng.random_range(2..=4) } else { 1 };

        // One random block of message/scheduling activity for this machine.
        let actions = |rng: &mut ChaCha8Rng, late: bool| -> Vec<Instruction> {
            let mut block = Vec::new();
            for c in &conns {
                if c.sender == mi && rng.random_bool(0.8) {
                    let payload = payloads[rng.random_range(0..payloads.len())];
                    if c.quantum && quantum_state {
                        // A quantum message: rotate port ⊗ qstate jointly.
                        let dim = defaults.msg_space.dim() * qdim;
                        block.push(prepare_port(&c.name, payload));
                        block.push(Instruction::Unitary {
                            matrix: random_unitary(dim, rng),
                            targets: vec![
                                RegRef::Port(Port::simple_out(&c.name)),
                                RegRef::QState,
                            ],
                        });
                    } else if rng.random_bool(0.3) {
                        block.push(Instruction::Sample {
                            target: RegRef::Port(Port::simple_out(&c.name)),
                            choices: vec![("0".into(), 0.5), ("1".into(), 0.5)],
                        });
                    } else {
                        block.push(prepare_port(&c.name, payload));
                    }
                }
                if c.scheduler == mi && rng.random_bool(0.8) {
                    // Index 2 ("11") sometimes probes empty queue slots.
                    let idx = if late && rng.random_bool(0.3) { "11" } else { "1" };
                    block.push(Instruction::Prepare {
                        target: RegRef::Port(Port::clock_out(&c.name)),
                        value: LabelExpr::lit(idx),
                    });
                }
            }
            if quantum_state && rng.random_bool(0.5) {
                block.push(Instruction::Unitary {
                    matrix: random_unitary(qdim, rng),
                    targets: vec![RegRef::QState],
                });
            }
            block
        };

        let mut program = Vec::new();
        if quantum_state {
            program.push(Instruction::Unitary {
                matrix: random_unitary(qdim, rng),
                targets: vec![RegRef::QState],
            });
        }
        if mi == 0 {
            // X terminates on its second productive activation so every
            // run ends within the budget (or truncates deterministically).
            let first = actions(rng, false);
            let second = actions(rng, true);
            program.push(Instruction::Measure { target: RegRef::CState, var: "s".to_string() });
            program.push(Instruction::Branch {
                pred: Predicate::is_in("s", ["1", "11"]),
                then_branch: [first, vec![prepare_cstate("a")]].concat(),
                else_branch: [second, vec![prepare_cstate("done")]].concat(),
            });
        } else {
            let react = actions(rng, true);
            let halts = rng.random_bool(0.5);
            program.extend(react);
            if halts {
                program.push(prepare_cstate("done"));
            }
        }

        let qstates: Vec<String> = match qdim {
            1 => vec![String::new()],
            n => std::iter::once(String::new())
                .chain((1..n).map(|i| format!("x{i}")))
                .collect(),
        };
        let cports = ports
            .iter()
            .filter(|p| !quantum_ports.contains(*p))
            .cloned()
            .collect();
        machines.push(MachineDef {
            name: name.to_string(),
            ports,
            cports,
            qstates: LabeledSpace::shared(qstates).unwrap(),
            cstates: LabeledSpace::shared(["1", "11", "a", "done"]).unwrap(),
            delta: DeltaSpec::Program(Program::new(program)),
            lenfn_zero: BTreeSet::new(),
            fin: ["done".to_string()].into_iter().collect(),
            msg_space: defaults.msg_space.clone(),
        });
    }

    let collection = Collection::from_machines(machines).expect("ports are disjoint by plan");
    debug_assert!(collection.is_closed(&defaults));
    (collection, defaults)
}

fn prepare_port(conn: &str, payload: &str) -> Instruction {
    Instruction::Prepare {
        target: RegRef::Port(Port::simple_out(conn)),
        value: LabelExpr::lit(payload),
    }
}

fn prepare_cstate(label: &str) -> Instruction {
    Instruction::Prepare { target: RegRef::CState, value: LabelExpr::lit(label) }
}

/// All-classical variant of the family: no quantum registers, randomness
/// only through sampling instructions. Used against the independent
/// classical reference simulator.
pub fn random_classical_collection(rng: &mut ChaCha8Rng) -> (Collection, BufferDefaults) {
    let family = NetworkFamily { simple_machines: 2, quantum: false, queue_cap: 2 };
    random_closed_collection(&family, rng)
}
