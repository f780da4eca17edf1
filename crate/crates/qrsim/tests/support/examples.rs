//! The worked security examples: one-time-pad message transmission over
//! an adversarially scheduled channel (vs a length-leaking trusted host),
//! a plaintext negative control, an outer wrapper protocol for the
//! composition instance, and teleportation (vs an ideal qubit channel).

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;

use qrsim::machine::{Instruction, LabelExpr, MachineDef, Port, Predicate, RegRef};
use qrsim::network::{BufferDefaults, Collection, Structure};
use qrsim::qcore::{linalg, Alphabet};
use qrsim::security::Witness;

use super::{clock, inp, measure, out, prepare, prepare_expr, MachineBuilder};

pub fn otp_defaults() -> BufferDefaults {
    BufferDefaults::new(Alphabet::default().message_space()).with_queue_cap(2)
}

const INITS: [&str; 3] = ["1", "11", "111"];

fn base_cstates(extra: &[&str]) -> Vec<String> {
    INITS.iter().chain(extra.iter()).map(|s| s.to_string()).collect()
}

fn is_init(var: &str) -> Predicate {
    Predicate::is_in(var, INITS)
}

fn nonempty(var: &str) -> Predicate {
    Predicate::Not(Box::new(Predicate::eq(var, "")))
}

fn var(v: &str) -> LabelExpr {
    LabelExpr::var(v)
}

fn branch(pred: Predicate, then_branch: Vec<Instruction>, else_branch: Vec<Instruction>) -> Instruction {
    Instruction::Branch { pred, then_branch, else_branch }
}

/// All messages the honest user may send: both lengths, all bit values.
pub const MESSAGES: [&str; 6] = ["0", "1", "00", "01", "10", "11"];

// ---------------------------------------------------------------------
// One-time pad: real structure {KG, S, R}, service {tin~?, tin<?, tout~!}.
// ---------------------------------------------------------------------

/// Key generator: on a kick from the adversary, samples a uniform 2-bit
/// key, hands it to the sender (self-scheduled) and queues it for the
/// receiver (adversarially scheduled).
fn key_generator(d: &BufferDefaults) -> MachineDef {
    MachineBuilder::new("KG", d)
        .port(Port::simple_in("kk"))
        .port(Port::simple_out("key1"))
        .port(Port::clock_out("key1"))
        .port(Port::simple_out("key2"))
        .cstates(base_cstates(&["done"]))
        .fin(["done"])
        .program(vec![
            Instruction::Sample {
                target: out("key1"),
                choices: ["00", "01", "10", "11"].iter().map(|k| (k.to_string(), 0.25)).collect(),
            },
            Instruction::CopyClassical { src: out("key1"), dst: out("key2") },
            prepare(clock("key1"), "1"),
            prepare(RegRef::CState, "done"),
        ])
        .build()
}

/// Sender: stores the key, then encrypts the user's message with the key
/// prefix of matching length and emits the ciphertext towards the
/// adversary's tap.
fn otp_sender(d: &BufferDefaults) -> MachineDef {
    let keyed: Vec<String> = ["00", "01", "10", "11"].iter().map(|k| format!("k{k}")).collect();
    let mut cstates = base_cstates(&[]);
    cstates.extend(keyed);
    MachineBuilder::new("S", d)
        .port(Port::simple_in("key1"))
        .port(Port::simple_in("tin"))
        .port(Port::simple_out("eav"))
        .cstates(cstates)
        .program(vec![
            measure(inp("key1"), "kv"),
            measure(inp("tin"), "m"),
            measure(RegRef::CState, "s"),
            branch(
                nonempty("kv"),
                vec![prepare_expr(
                    RegRef::CState,
                    LabelExpr::Concat(vec![LabelExpr::lit("k"), var("kv")]),
                )],
                vec![branch(
                    nonempty("m"),
                    vec![prepare_expr(
                        out("eav"),
                        LabelExpr::Xor(
                            Box::new(var("m")),
                            Box::new(LabelExpr::StripPrefix {
                                expr: Box::new(var("s")),
                                prefix: "k".into(),
                            }),
                        ),
                    )],
                    vec![],
                )],
            ),
        ])
        .build()
}

/// Receiver: stores the key, then decrypts whatever the adversary
/// forwards and delivers it to the user.
fn otp_receiver(d: &BufferDefaults) -> MachineDef {
    let keyed: Vec<String> = ["00", "01", "10", "11"].iter().map(|k| format!("k{k}")).collect();
    let mut cstates = base_cstates(&["done"]);
    cstates.extend(keyed);
    MachineBuilder::new("R", d)
        .port(Port::simple_in("key2"))
        .port(Port::simple_in("inj"))
        .port(Port::simple_out("tout"))
        .port(Port::clock_out("tout"))
        .cstates(cstates)
        .fin(["done"])
        .program(vec![
            measure(inp("key2"), "kv"),
            measure(inp("inj"), "c"),
            measure(RegRef::CState, "s"),
            branch(
                nonempty("kv"),
                vec![prepare_expr(
                    RegRef::CState,
                    LabelExpr::Concat(vec![LabelExpr::lit("k"), var("kv")]),
                )],
                vec![branch(
                    nonempty("c"),
                    vec![
                        prepare_expr(
                            out("tout"),
                            LabelExpr::Xor(
                                Box::new(var("c")),
                                Box::new(LabelExpr::StripPrefix {
                                    expr: Box::new(var("s")),
                                    prefix: "k".into(),
                                }),
                            ),
                        ),
                        prepare(clock("tout"), "1"),
                        prepare(RegRef::CState, "done"),
                    ],
                    vec![],
                )],
            ),
        ])
        .build()
}

pub fn otp_real_structure(d: &BufferDefaults) -> Structure {
    let machines =
        Collection::from_machines([key_generator(d), otp_sender(d), otp_receiver(d)]).unwrap();
    Structure::new(
        machines,
        [Port::buffer_in("tin"), Port::clock_in("tin"), Port::buffer_out("tout")],
        d,
    )
    .unwrap()
}

/// The ideal secure channel: stores the message, leaks only its length
/// (in unary) to the adversary, and delivers on command.
fn trusted_host(d: &BufferDefaults) -> MachineDef {
    let holding: Vec<String> = MESSAGES.iter().map(|m| format!("h{m}")).collect();
    let mut cstates = base_cstates(&["done"]);
    cstates.extend(holding);
    MachineBuilder::new("TH", d)
        .port(Port::simple_in("tin"))
        .port(Port::simple_out("leak"))
        .port(Port::clock_out("leak"))
        .port(Port::simple_in("dlv"))
        .port(Port::simple_out("tout"))
        .port(Port::clock_out("tout"))
        .cstates(cstates)
        .fin(["done"])
        .program(vec![
            measure(inp("tin"), "m"),
            measure(inp("dlv"), "go"),
            measure(RegRef::CState, "s"),
            branch(
                nonempty("m"),
                vec![
                    prepare_expr(
                        RegRef::CState,
                        LabelExpr::Concat(vec![LabelExpr::lit("h"), var("m")]),
                    ),
                    prepare_expr(out("leak"), LabelExpr::OnesLen(Box::new(var("m")))),
                    prepare(clock("leak"), "1"),
                ],
                vec![branch(
                    nonempty("go"),
                    vec![
                        prepare_expr(
                            out("tout"),
                            LabelExpr::StripPrefix {
                                expr: Box::new(var("s")),
                                prefix: "h".into(),
                            },
                        ),
                        prepare(clock("tout"), "1"),
                        prepare(RegRef::CState, "done"),
                    ],
                    vec![],
                )],
            ),
        ])
        .build()
}

pub fn otp_ideal_structure(d: &BufferDefaults) -> Structure {
    let machines = Collection::from_machines([trusted_host(d)]).unwrap();
    Structure::new(
        machines,
        [Port::buffer_in("tin"), Port::clock_in("tin"), Port::buffer_out("tout")],
        d,
    )
    .unwrap()
}

/// The honest user: prompted on `go`, sends one uniformly random message
/// (over both lengths) into the channel, and observes the adversary's
/// echo and the delivered message through its view.
pub fn otp_user(d: &BufferDefaults, channel_in: &str, channel_out: &str) -> MachineDef {
    MachineBuilder::new("H", d)
        .port(Port::simple_in("go"))
        .port(Port::simple_out(channel_in))
        .port(Port::clock_out(channel_in))
        .port(Port::simple_in("echo"))
        .port(Port::simple_in(channel_out))
        .cstates(base_cstates(&["sent", "gotecho", "done"]))
        .fin(["done"])
        .program(vec![
            measure(RegRef::CState, "s"),
            branch(
                is_init("s"),
                vec![
                    Instruction::Sample {
                        target: out(channel_in),
                        choices: MESSAGES
                            .iter()
                            .map(|m| (m.to_string(), 1.0 / 6.0))
                            .collect(),
                    },
                    prepare(clock(channel_in), "1"),
                    prepare(RegRef::CState, "sent"),
                ],
                vec![branch(
                    Predicate::eq("s", "sent"),
                    vec![prepare(RegRef::CState, "gotecho")],
                    vec![prepare(RegRef::CState, "done")],
                )],
            ),
        ])
        .build()
}

/// A user sending one fixed message; used by the negative control.
pub fn fixed_user(d: &BufferDefaults, message: &str, channel_in: &str, channel_out: &str) -> MachineDef {
    MachineBuilder::new("H", d)
        .port(Port::simple_in("go"))
        .port(Port::simple_out(channel_in))
        .port(Port::clock_out(channel_in))
        .port(Port::simple_in("echo"))
        .port(Port::simple_in(channel_out))
        .cstates(base_cstates(&["sent", "gotecho", "done"]))
        .fin(["done"])
        .program(vec![
            measure(RegRef::CState, "s"),
            branch(
                is_init("s"),
                vec![
                    prepare(out(channel_in), message),
                    prepare(clock(channel_in), "1"),
                    prepare(RegRef::CState, "sent"),
                ],
                vec![branch(
                    Predicate::eq("s", "sent"),
                    vec![prepare(RegRef::CState, "gotecho")],
                    vec![prepare(RegRef::CState, "done")],
                )],
            ),
        ])
        .build()
}

/// The real adversary: master scheduler orchestrating key distribution,
/// then tapping the ciphertext, echoing it to the user (its attempt at
/// distinguishing) and forwarding it unchanged to the receiver.
pub fn otp_adversary(d: &BufferDefaults) -> MachineDef {
    MachineBuilder::new("A", d)
        .port(Port::master_clock())
        .port(Port::simple_out("kk"))
        .port(Port::clock_out("kk"))
        .port(Port::clock_out("key2"))
        .port(Port::simple_out("go"))
        .port(Port::clock_out("go"))
        .port(Port::simple_in("eav"))
        .port(Port::clock_out("eav"))
        .port(Port::simple_out("echo"))
        .port(Port::clock_out("echo"))
        .port(Port::simple_out("inj"))
        .port(Port::clock_out("inj"))
        .cstates(base_cstates(&["w1", "w2", "w3", "w4", "done"]))
        .fin(["done"])
        .program(vec![
            measure(inp("eav"), "c"),
            measure(RegRef::CState, "s"),
            branch(
                nonempty("c"),
                vec![
                    prepare_expr(out("echo"), var("c")),
                    prepare(clock("echo"), "1"),
                    prepare_expr(out("inj"), var("c")),
                    prepare(RegRef::CState, "w4"),
                ],
                vec![branch(
                    is_init("s"),
                    vec![
                        prepare(out("kk"), "1"),
                        prepare(clock("kk"), "1"),
                        prepare(RegRef::CState, "w1"),
                    ],
                    vec![branch(
                        Predicate::eq("s", "w1"),
                        vec![prepare(clock("key2"), "1"), prepare(RegRef::CState, "w2")],
                        vec![branch(
                            Predicate::eq("s", "w2"),
                            vec![
                                prepare(out("go"), "1"),
                                prepare(clock("go"), "1"),
                                prepare(RegRef::CState, "w3"),
                            ],
                            vec![branch(
                                Predicate::eq("s", "w3"),
                                vec![prepare(clock("eav"), "1")],
                                vec![branch(
                                    Predicate::eq("s", "w4"),
                                    vec![
                                        prepare(clock("inj"), "1"),
                                        prepare(RegRef::CState, "done"),
                                    ],
                                    vec![prepare(RegRef::CState, "done")],
                                )],
                            )],
                        )],
                    )],
                )],
            ),
        ])
        .build()
}

/// The simulator: drives the user exactly like the real adversary does,
/// but fabricates the echo from the leaked length alone.
pub fn otp_simulator(d: &BufferDefaults, random_echo: bool) -> MachineDef {
    let echo_block = if random_echo {
        branch(
            Predicate::eq("l", "1"),
            vec![Instruction::Sample {
                target: out("echo"),
                choices: vec![("0".into(), 0.5), ("1".into(), 0.5)],
            }],
            vec![Instruction::Sample {
                target: out("echo"),
                choices: ["00", "01", "10", "11"]
                    .iter()
                    .map(|m| (m.to_string(), 0.25))
                    .collect(),
            }],
        )
    } else {
        branch(
            Predicate::eq("l", "1"),
            vec![prepare(out("echo"), "0")],
            vec![prepare(out("echo"), "00")],
        )
    };
    MachineBuilder::new("A", d)
        .port(Port::master_clock())
        .port(Port::simple_out("go"))
        .port(Port::clock_out("go"))
        .port(Port::simple_in("leak"))
        .port(Port::simple_out("echo"))
        .port(Port::clock_out("echo"))
        .port(Port::simple_out("dlv"))
        .port(Port::clock_out("dlv"))
        .cstates(base_cstates(&["w1", "w2", "done"]))
        .fin(["done"])
        .program(vec![
            measure(inp("leak"), "l"),
            measure(RegRef::CState, "s"),
            branch(
                nonempty("l"),
                vec![echo_block, prepare(clock("echo"), "1"), prepare(RegRef::CState, "w2")],
                vec![branch(
                    is_init("s"),
                    vec![
                        prepare(out("go"), "1"),
                        prepare(clock("go"), "1"),
                        prepare(RegRef::CState, "w1"),
                    ],
                    vec![branch(
                        Predicate::eq("s", "w2"),
                        vec![
                            prepare(out("dlv"), "1"),
                            prepare(clock("dlv"), "1"),
                            prepare(RegRef::CState, "done"),
                        ],
                        vec![prepare(RegRef::CState, "done")],
                    )],
                )],
            ),
        ])
        .build()
}

pub fn otp_witness(d: &BufferDefaults) -> Witness {
    Witness {
        user: otp_user(d, "tin", "tout"),
        real_adversary: otp_adversary(d),
        simulator: otp_simulator(d, true),
    }
}

// ---------------------------------------------------------------------
// Plaintext negative control: the channel forwards the message in clear.
// ---------------------------------------------------------------------

pub fn plaintext_structure(d: &BufferDefaults) -> Structure {
    let sp = MachineBuilder::new("SP", d)
        .port(Port::simple_in("tin"))
        .port(Port::simple_out("eav"))
        .cstates(base_cstates(&[]))
        .program(vec![
            measure(inp("tin"), "m"),
            branch(nonempty("m"), vec![prepare_expr(out("eav"), var("m"))], vec![]),
        ])
        .build();
    let rp = MachineBuilder::new("RP", d)
        .port(Port::simple_in("inj"))
        .port(Port::simple_out("tout"))
        .port(Port::clock_out("tout"))
        .cstates(base_cstates(&["done"]))
        .fin(["done"])
        .program(vec![
            measure(inp("inj"), "c"),
            branch(
                nonempty("c"),
                vec![
                    prepare_expr(out("tout"), var("c")),
                    prepare(clock("tout"), "1"),
                    prepare(RegRef::CState, "done"),
                ],
                vec![],
            ),
        ])
        .build();
    let machines = Collection::from_machines([sp, rp]).unwrap();
    Structure::new(
        machines,
        [Port::buffer_in("tin"), Port::clock_in("tin"), Port::buffer_out("tout")],
        d,
    )
    .unwrap()
}

/// Adversary for the plaintext channel: same echo-and-forward behaviour,
/// minus the key bookkeeping.
pub fn plaintext_adversary(d: &BufferDefaults) -> MachineDef {
    MachineBuilder::new("A", d)
        .port(Port::master_clock())
        .port(Port::simple_out("go"))
        .port(Port::clock_out("go"))
        .port(Port::simple_in("eav"))
        .port(Port::clock_out("eav"))
        .port(Port::simple_out("echo"))
        .port(Port::clock_out("echo"))
        .port(Port::simple_out("inj"))
        .port(Port::clock_out("inj"))
        .cstates(base_cstates(&["w1", "w4", "done"]))
        .fin(["done"])
        .program(vec![
            measure(inp("eav"), "c"),
            measure(RegRef::CState, "s"),
            branch(
                nonempty("c"),
                vec![
                    prepare_expr(out("echo"), var("c")),
                    prepare(clock("echo"), "1"),
                    prepare_expr(out("inj"), var("c")),
                    prepare(RegRef::CState, "w4"),
                ],
                vec![branch(
                    is_init("s"),
                    vec![
                        prepare(out("go"), "1"),
                        prepare(clock("go"), "1"),
                        prepare(RegRef::CState, "w1"),
                    ],
                    vec![branch(
                        Predicate::eq("s", "w1"),
                        vec![prepare(clock("eav"), "1")],
                        vec![branch(
                            Predicate::eq("s", "w4"),
                            vec![prepare(clock("inj"), "1"), prepare(RegRef::CState, "done")],
                            vec![prepare(RegRef::CState, "done")],
                        )],
                    )],
                )],
            ),
        ])
        .build()
}

// ---------------------------------------------------------------------
// Wrapper protocol for the simple-composition instance.
// ---------------------------------------------------------------------

/// A forwarding protocol that consumes the channel's service ports: the
/// user talks to win/wout, the wrapper relays over tin/tout.
pub fn wrapper_machine(d: &BufferDefaults) -> MachineDef {
    MachineBuilder::new("W", d)
        .port(Port::simple_in("win"))
        .port(Port::simple_out("tin"))
        .port(Port::clock_out("tin"))
        .port(Port::simple_in("tout"))
        .port(Port::simple_out("wout"))
        .port(Port::clock_out("wout"))
        .cstates(base_cstates(&[]))
        .program(vec![
            measure(inp("win"), "x"),
            measure(inp("tout"), "y"),
            branch(
                nonempty("x"),
                vec![prepare_expr(out("tin"), var("x")), prepare(clock("tin"), "1")],
                vec![branch(
                    nonempty("y"),
                    vec![prepare_expr(out("wout"), var("y")), prepare(clock("wout"), "1")],
                    vec![],
                )],
            ),
        ])
        .build()
}

pub fn wrapper_structure(d: &BufferDefaults) -> Structure {
    let machines = Collection::from_machines([wrapper_machine(d)]).unwrap();
    Structure::new(
        machines,
        [
            Port::buffer_in("win"),
            Port::clock_in("win"),
            Port::buffer_out("wout"),
            // Where the inner channel plugs in.
            Port::buffer_out("tin"),
            Port::buffer_in("tout"),
            Port::clock_in("tout"),
        ],
        d,
    )
    .unwrap()
}

// ---------------------------------------------------------------------
// Teleportation vs an ideal one-qubit channel.
// ---------------------------------------------------------------------

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, 0.0) + Complex64::new(0.0, im)
}

/// A 2×2 unitary whose first column is the state to prepare from |0⟩.
fn qubit_preparation(alpha: Complex64, beta: Complex64) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[alpha, -beta.conj(), beta, alpha.conj()])
}

/// The six tomographically complete payload states.
pub fn tomography_states() -> Vec<(String, DMatrix<Complex64>)> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        ("zero".into(), qubit_preparation(c(1.0, 0.0), c(0.0, 0.0))),
        ("one".into(), qubit_preparation(c(0.0, 0.0), c(1.0, 0.0))),
        ("plus".into(), qubit_preparation(c(s, 0.0), c(s, 0.0))),
        ("minus".into(), qubit_preparation(c(s, 0.0), c(-s, 0.0))),
        ("plus-i".into(), qubit_preparation(c(s, 0.0), c(0.0, s))),
        ("minus-i".into(), qubit_preparation(c(s, 0.0), c(0.0, -s))),
    ]
}

/// Embeds a 2×2 payload unitary into the message space on the {0,1}
/// subspace (indices 1 and 2).
fn on_payload(d: &BufferDefaults, u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    linalg::embed_on_subspace(d.msg_space.dim(), &[1, 2], u).unwrap()
}

/// |p_m, q_ε⟩ ↦ |p_ε, q_m⟩: pulls a port payload into the machine state.
fn store_port_into_qstate(port_dim: usize, q_dim: usize) -> DMatrix<Complex64> {
    // Flat index = port · q_dim + qstate; payload labels sit at port
    // indices 1..q_dim and the machine encodes them at 1..q_dim too.
    let pairs: Vec<(usize, usize)> =
        (1..q_dim).map(|m| (m * q_dim, m)).collect();
    linalg::permutation_from_partial(port_dim * q_dim, &pairs).unwrap()
}

/// |q_m, p_ε⟩ ↦ |q_ε, p_m⟩: pushes the machine state onto a port.
fn move_qstate_to_port(q_dim: usize, port_dim: usize) -> DMatrix<Complex64> {
    let pairs: Vec<(usize, usize)> =
        (1..q_dim).map(|m| (m * port_dim, m)).collect();
    linalg::permutation_from_partial(q_dim * port_dim, &pairs).unwrap()
}

/// EPR source: builds (|00⟩+|11⟩)/√2 and emits the halves, scheduling
/// the first one itself; the adversary schedules the second.
fn epr_source(d: &BufferDefaults) -> MachineDef {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // qstate basis: ε, 00, 01, 10, 11.
    let mut bell = DMatrix::identity(5, 5);
    bell[(0, 0)] = c(0.0, 0.0);
    bell[(1, 0)] = c(s, 0.0);
    bell[(4, 0)] = c(s, 0.0);
    bell[(0, 1)] = c(1.0, 0.0);
    bell[(1, 1)] = c(0.0, 0.0);
    bell[(1, 4)] = c(s, 0.0);
    bell[(4, 4)] = c(-s, 0.0);
    assert!(linalg::is_unitary(&bell, 1e-12));

    // |q1q2, ε, ε⟩ → |ε, q1, q2⟩ over qstate ⊗ epr1! ⊗ epr2!.
    let md = d.msg_space.dim();
    let q_idx = |q1: usize, q2: usize| (1 + (q1 * 2 + q2)) * md * md;
    let p_idx = |q1: usize, q2: usize| (q1 + 1) * md + (q2 + 1);
    let pairs: Vec<(usize, usize)> = (0..2)
        .flat_map(|q1| (0..2).map(move |q2| (q_idx(q1, q2), p_idx(q1, q2))))
        .collect();
    let distribute = linalg::permutation_from_partial(5 * md * md, &pairs).unwrap();

    MachineBuilder::new("E", d)
        .port(Port::simple_in("kick"))
        .quantum_port(Port::simple_out("epr1"))
        .port(Port::clock_out("epr1"))
        .quantum_port(Port::simple_out("epr2"))
        .qstates(["", "00", "01", "10", "11"])
        .cstates(base_cstates(&["done"]))
        .fin(["done"])
        .program(vec![
            Instruction::Unitary { matrix: bell, targets: vec![RegRef::QState] },
            Instruction::Unitary {
                matrix: distribute,
                targets: vec![
                    RegRef::QState,
                    RegRef::Port(Port::simple_out("epr1")),
                    RegRef::Port(Port::simple_out("epr2")),
                ],
            },
            prepare(clock("epr1"), "1"),
            prepare(RegRef::CState, "done"),
        ])
        .build()
}

/// Sender: stores its EPR half, then Bell-measures it jointly with the
/// payload and broadcasts the two outcome bits.
fn teleport_sender(d: &BufferDefaults) -> MachineDef {
    let md = d.msg_space.dim();
    let store = store_port_into_qstate(md, 3);
    // CNOT with the payload port as control and the EPR half as target:
    // |t, a⟩ → |t, a⊕t⟩ on the {0,1} subspaces.
    let cnot = linalg::permutation_from_partial(md * 3, &[(2 * 3 + 1, 2 * 3 + 2), (2 * 3 + 2, 2 * 3 + 1)])
        .unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let h2 = DMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]);
    let hadamard = on_payload(d, &h2);

    MachineBuilder::new("TS", d)
        .quantum_port(Port::simple_in("epr1"))
        .quantum_port(Port::simple_in("tin"))
        .port(Port::simple_out("bell"))
        .qstates(["", "0", "1"])
        .cstates(base_cstates(&["armed", "done"]))
        .fin(["done"])
        .program(vec![
            measure(RegRef::CState, "s"),
            branch(
                is_init("s"),
                vec![
                    Instruction::Unitary {
                        matrix: store,
                        targets: vec![RegRef::Port(Port::simple_in("epr1")), RegRef::QState],
                    },
                    prepare(RegRef::CState, "armed"),
                ],
                vec![
                    Instruction::Unitary {
                        matrix: cnot,
                        targets: vec![RegRef::Port(Port::simple_in("tin")), RegRef::QState],
                    },
                    Instruction::Unitary {
                        matrix: hadamard,
                        targets: vec![RegRef::Port(Port::simple_in("tin"))],
                    },
                    measure(inp("tin"), "z"),
                    measure(RegRef::QState, "x"),
                    prepare_expr(out("bell"), LabelExpr::Concat(vec![var("z"), var("x")])),
                    prepare(RegRef::CState, "done"),
                ],
            ),
        ])
        .build()
}

/// Receiver: stores its EPR half, applies the Pauli correction selected
/// by the Bell bits and hands the recovered qubit to the user.
fn teleport_receiver(d: &BufferDefaults) -> MachineDef {
    let md = d.msg_space.dim();
    let store = store_port_into_qstate(md, 3);
    let push = move_qstate_to_port(3, md);

    let x2 = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let z2 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
    let on_q = |u: &DMatrix<Complex64>| linalg::embed_on_subspace(3, &[1, 2], u).unwrap();
    let apply_x = Instruction::Unitary { matrix: on_q(&x2), targets: vec![RegRef::QState] };
    let apply_z = Instruction::Unitary { matrix: on_q(&z2), targets: vec![RegRef::QState] };

    let correction = branch(
        Predicate::eq("b", "00"),
        vec![],
        vec![branch(
            Predicate::eq("b", "01"),
            vec![apply_x.clone()],
            vec![branch(
                Predicate::eq("b", "10"),
                vec![apply_z.clone()],
                vec![apply_x, apply_z],
            )],
        )],
    );

    MachineBuilder::new("TR", d)
        .quantum_port(Port::simple_in("epr2"))
        .port(Port::simple_in("bell"))
        .quantum_port(Port::simple_out("tout"))
        .port(Port::clock_out("tout"))
        .qstates(["", "0", "1"])
        .cstates(base_cstates(&["armed", "done"]))
        .fin(["done"])
        .program(vec![
            measure(RegRef::CState, "s"),
            branch(
                is_init("s"),
                vec![
                    Instruction::Unitary {
                        matrix: store,
                        targets: vec![RegRef::Port(Port::simple_in("epr2")), RegRef::QState],
                    },
                    prepare(RegRef::CState, "armed"),
                ],
                vec![
                    measure(inp("bell"), "b"),
                    correction,
                    Instruction::Unitary {
                        matrix: push,
                        targets: vec![RegRef::QState, RegRef::Port(Port::simple_out("tout"))],
                    },
                    prepare(clock("tout"), "1"),
                    prepare(RegRef::CState, "done"),
                ],
            ),
        ])
        .build()
}

pub fn teleport_real_structure(d: &BufferDefaults) -> Structure {
    let machines =
        Collection::from_machines([epr_source(d), teleport_sender(d), teleport_receiver(d)])
            .unwrap();
    Structure::new(
        machines,
        [Port::buffer_in("tin"), Port::clock_in("tin"), Port::buffer_out("tout")],
        d,
    )
    .unwrap()
}

/// The ideal one-qubit channel: stores the payload coherently, leaks the
/// bare fact of transmission, delivers on command.
fn quantum_trusted_host(d: &BufferDefaults) -> MachineDef {
    let md = d.msg_space.dim();
    let store = store_port_into_qstate(md, 3);
    let push = move_qstate_to_port(3, md);
    MachineBuilder::new("THQ", d)
        .quantum_port(Port::simple_in("tin"))
        .port(Port::simple_out("leak"))
        .port(Port::clock_out("leak"))
        .port(Port::simple_in("dlv"))
        .quantum_port(Port::simple_out("tout"))
        .port(Port::clock_out("tout"))
        .qstates(["", "0", "1"])
        .cstates(base_cstates(&["hold", "done"]))
        .fin(["done"])
        .program(vec![
            measure(RegRef::CState, "s"),
            branch(
                is_init("s"),
                vec![
                    Instruction::Unitary {
                        matrix: store,
                        targets: vec![RegRef::Port(Port::simple_in("tin")), RegRef::QState],
                    },
                    prepare(out("leak"), "1"),
                    prepare(clock("leak"), "1"),
                    prepare(RegRef::CState, "hold"),
                ],
                vec![
                    Instruction::Unitary {
                        matrix: push,
                        targets: vec![RegRef::QState, RegRef::Port(Port::simple_out("tout"))],
                    },
                    prepare(clock("tout"), "1"),
                    prepare(RegRef::CState, "done"),
                ],
            ),
        ])
        .build()
}

pub fn teleport_ideal_structure(d: &BufferDefaults) -> Structure {
    let machines = Collection::from_machines([quantum_trusted_host(d)]).unwrap();
    Structure::new(
        machines,
        [Port::buffer_in("tin"), Port::clock_in("tin"), Port::buffer_out("tout")],
        d,
    )
    .unwrap()
}

/// The honest user for teleportation: prepares one of the tomography
/// states, sends it, and on delivery un-rotates and measures — ending in
/// "ok" exactly with the channel's fidelity.
pub fn teleport_user(d: &BufferDefaults, preparation: &DMatrix<Complex64>) -> MachineDef {
    let prep = on_payload(d, preparation);
    let unprep = on_payload(d, &preparation.adjoint());
    MachineBuilder::new("H", d)
        .port(Port::simple_in("go"))
        .quantum_port(Port::simple_out("tin"))
        .port(Port::clock_out("tin"))
        .quantum_port(Port::simple_in("tout"))
        .cstates(base_cstates(&["sent", "ok", "bad"]))
        .fin(["ok", "bad"])
        .program(vec![
            measure(RegRef::CState, "s"),
            branch(
                is_init("s"),
                vec![
                    prepare(out("tin"), "0"),
                    Instruction::Unitary {
                        matrix: prep,
                        targets: vec![RegRef::Port(Port::simple_out("tin"))],
                    },
                    prepare(clock("tin"), "1"),
                    prepare(RegRef::CState, "sent"),
                ],
                vec![
                    Instruction::Unitary {
                        matrix: unprep,
                        targets: vec![RegRef::Port(Port::simple_in("tout"))],
                    },
                    measure(inp("tout"), "v"),
                    branch(
                        Predicate::eq("v", "0"),
                        vec![prepare(RegRef::CState, "ok")],
                        vec![prepare(RegRef::CState, "bad")],
                    ),
                ],
            ),
        ])
        .build()
}

/// Real adversary for teleportation: kicks the EPR source, schedules the
/// second half and the Bell bits, and prompts the user in between.
pub fn teleport_adversary(d: &BufferDefaults) -> MachineDef {
    MachineBuilder::new("A", d)
        .port(Port::master_clock())
        .port(Port::simple_out("kick"))
        .port(Port::clock_out("kick"))
        .port(Port::clock_out("epr2"))
        .port(Port::simple_out("go"))
        .port(Port::clock_out("go"))
        .port(Port::clock_out("bell"))
        .cstates(base_cstates(&["w1", "w2", "w3", "done"]))
        .fin(["done"])
        .program(vec![
            measure(RegRef::CState, "s"),
            branch(
                is_init("s"),
                vec![
                    prepare(out("kick"), "1"),
                    prepare(clock("kick"), "1"),
                    prepare(RegRef::CState, "w1"),
                ],
                vec![branch(
                    Predicate::eq("s", "w1"),
                    vec![prepare(clock("epr2"), "1"), prepare(RegRef::CState, "w2")],
                    vec![branch(
                        Predicate::eq("s", "w2"),
                        vec![
                            prepare(out("go"), "1"),
                            prepare(clock("go"), "1"),
                            prepare(RegRef::CState, "w3"),
                        ],
                        vec![branch(
                            Predicate::eq("s", "w3"),
                            vec![prepare(clock("bell"), "1"), prepare(RegRef::CState, "done")],
                            vec![prepare(RegRef::CState, "done")],
                        )],
                    )],
                )],
            ),
        ])
        .build()
}

/// Simulator for the ideal qubit channel: prompts the user, then delivers
/// when the leak arrives. It needs nothing but the leak's timing.
pub fn teleport_simulator(d: &BufferDefaults) -> MachineDef {
    MachineBuilder::new("A", d)
        .port(Port::master_clock())
        .port(Port::simple_out("go"))
        .port(Port::clock_out("go"))
        .port(Port::simple_in("leak"))
        .port(Port::simple_out("dlv"))
        .port(Port::clock_out("dlv"))
        .cstates(base_cstates(&["w1", "done"]))
        .fin(["done"])
        .program(vec![
            measure(inp("leak"), "l"),
            measure(RegRef::CState, "s"),
            branch(
                nonempty("l"),
                vec![
                    prepare(out("dlv"), "1"),
                    prepare(clock("dlv"), "1"),
                    prepare(RegRef::CState, "done"),
                ],
                vec![branch(
                    is_init("s"),
                    vec![
                        prepare(out("go"), "1"),
                        prepare(clock("go"), "1"),
                        prepare(RegRef::CState, "w1"),
                    ],
                    vec![prepare(RegRef::CState, "done")],
                )],
            ),
        ])
        .build()
}
