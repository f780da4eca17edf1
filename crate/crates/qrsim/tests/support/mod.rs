//! Shared builders for the integration tests: small machines, standard
//! unitaries and the worked example networks.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use qrsim::machine::{DeltaSpec, Instruction, LabelExpr, MachineDef, Port, Program, RegRef};
use qrsim::network::BufferDefaults;
use qrsim::qcore::{Alphabet, LabeledSpace};

/// Σ = {0,1}, L = 1: the smallest interesting message space {ε, 0, 1}.
pub fn tiny_alphabet() -> Alphabet {
    Alphabet::new(['0', '1'], 1).unwrap()
}

pub fn tiny_defaults() -> BufferDefaults {
    BufferDefaults::new(tiny_alphabet().message_space()).with_queue_cap(2)
}

/// Σ = {0,1}, L = 2 (the default): messages up to two bits.
pub fn default_defaults() -> BufferDefaults {
    BufferDefaults::new(Alphabet::default().message_space()).with_queue_cap(2)
}

pub struct MachineBuilder {
    name: String,
    ports: Vec<Port>,
    quantum_ports: BTreeSet<Port>,
    qstates: Vec<String>,
    cstates: Vec<String>,
    fin: Vec<String>,
    lenfn_zero: Vec<(String, Port)>,
    program: Vec<Instruction>,
    msg_space: Arc<LabeledSpace>,
}

impl MachineBuilder {
    pub fn new(name: &str, defaults: &BufferDefaults) -> Self {
        MachineBuilder {
            name: name.to_string(),
            ports: Vec::new(),
            quantum_ports: BTreeSet::new(),
            qstates: vec![String::new()],
            cstates: vec!["1".to_string()],
            fin: Vec::new(),
            lenfn_zero: Vec::new(),
            program: Vec::new(),
            msg_space: defaults.msg_space.clone(),
        }
    }

    pub fn port(mut self, p: Port) -> Self {
        self.ports.push(p);
        self
    }

    pub fn quantum_port(mut self, p: Port) -> Self {
        self.quantum_ports.insert(p.clone());
        self.ports.push(p);
        self
    }

    pub fn qstates<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Self {
        self.qstates = labels.into_iter().map(Into::into).collect();
        self
    }

    /// Classical states in addition to the initial states 1^k (k ≤ 3).
    pub fn cstates<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Self {
        self.cstates = labels.into_iter().map(Into::into).collect();
        self
    }

    pub fn fin<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Self {
        self.fin = labels.into_iter().map(Into::into).collect();
        self
    }

    pub fn len_zero(mut self, cstate: &str, port: Port) -> Self {
        self.lenfn_zero.push((cstate.to_string(), port));
        self
    }

    pub fn program(mut self, instructions: Vec<Instruction>) -> Self {
        self.program = instructions;
        self
    }

    pub fn build(self) -> MachineDef {
        let cports = self
            .ports
            .iter()
            .filter(|p| !self.quantum_ports.contains(*p))
            .cloned()
            .collect();
        let m = MachineDef {
            name: self.name,
            ports: self.ports,
            cports,
            qstates: LabeledSpace::shared(self.qstates).unwrap(),
            cstates: LabeledSpace::shared(self.cstates).unwrap(),
            delta: DeltaSpec::Program(Program::new(self.program)),
            lenfn_zero: self.lenfn_zero.into_iter().collect(),
            fin: self.fin.into_iter().collect(),
            msg_space: self.msg_space,
        };
        let report = m.validate();
        assert!(report.is_ok(), "{}: {:?}", m.name, report.violations);
        m
    }
}

/// Shorthand instruction constructors.
pub fn prepare(target: RegRef, label: &str) -> Instruction {
    Instruction::Prepare { target: target.clone(), value: LabelExpr::lit(label) }
}

pub fn prepare_expr(target: RegRef, value: LabelExpr) -> Instruction {
    Instruction::Prepare { target, value }
}

pub fn measure(target: RegRef, var: &str) -> Instruction {
    Instruction::Measure { target, var: var.to_string() }
}

pub fn out(name: &str) -> RegRef {
    RegRef::Port(Port::simple_out(name))
}

pub fn inp(name: &str) -> RegRef {
    RegRef::Port(Port::simple_in(name))
}

pub fn clock(name: &str) -> RegRef {
    RegRef::Port(Port::clock_out(name))
}

/// Writes a message and schedules it for immediate delivery.
pub fn send(conn: &str, label: &str) -> Vec<Instruction> {
    vec![prepare(out(conn), label), prepare(clock(conn), "1")]
}
pub mod oracle;
pub mod examples;
