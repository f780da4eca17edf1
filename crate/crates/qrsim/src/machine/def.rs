use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::qcore::{
    validate_channel, DensityState, KrausChannel, LabeledSpace, RegId, StateError,
};

use super::buffer;
use super::canon;
use super::combine;
use super::port::{Port, PortDir, PortLabel};
use super::program::Program;

/// Errors raised while constructing machines or applying their
/// state-transition operators.
#[derive(Debug, Error)]
pub enum MachineError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error("machine {name} does not fit any machine kind: {reason}")]
    Unclassifiable { name: String, reason: String },
    #[error("{op} expects a simple machine or a master scheduler, got the {kind:?} {name}")]
    WrongKind { op: &'static str, name: String, kind: MachineKind },
    #[error("machines {a} and {b} share port {port}")]
    PortOverlap { a: String, b: String, port: Port },
    #[error("buffer {name} queue overflow: capacity {cap} exceeded")]
    QueueOverflow { name: String, cap: usize },
    #[error("state-transition of {name} lost trace mass {defect:.3e}")]
    NotTracePreserving { name: String, defect: f64 },
    #[error("in machine {name}: {message}")]
    Program { name: String, message: String },
    #[error("machine {name} is invalid: {}", report.join("; "))]
    Invalid { name: String, report: Vec<String> },
}

/// Derived classification of a machine by its port shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MachineKind {
    /// Only simple in-/out-ports and clock out-ports.
    Simple,
    /// A simple machine that additionally owns the master-clock port ⊤.
    MasterScheduler,
    /// Exactly the three ports p~?, p~!, p<? of a queue between p! and p?.
    Buffer,
}

/// The state-transition operator Δ of a machine, in one of the forms the
/// engine can execute.
#[derive(Clone, Debug, PartialEq)]
pub enum DeltaSpec {
    /// A dense Kraus channel over qstates ⊗ cstates ⊗ in-ports ⊗ out-ports
    /// (ports in declared order). Only practical for small machines.
    Kraus(KrausChannel),
    /// An instruction program; compiled on the fly, semantically a CPTP map.
    Program(Program),
    /// The fixed buffer behaviour with the given queue capacity.
    Buffer { queue_cap: usize },
    /// The guarded wrapper Δ̃: measure state and port emptiness, erase
    /// switched-off ports, and apply the inner Δ only when non-final and
    /// some port was nonempty.
    Canonised(Box<DeltaSpec>),
    /// Δ of a combination: the tensor of the two (canonised) components'
    /// deltas acting on the paired state spaces.
    Combined { left: Box<MachineDef>, right: Box<MachineDef> },
}

/// A machine: name, port sequence, classical ports, quantum and classical
/// state bases, state-transition operator, length function and final
/// states.
#[derive(Clone, Debug, PartialEq)]
pub struct MachineDef {
    pub name: String,
    /// Ordered, duplicate-free port sequence.
    pub ports: Vec<Port>,
    /// The classical ports; clock ports must all be classical.
    pub cports: BTreeSet<Port>,
    pub qstates: Arc<LabeledSpace>,
    pub cstates: Arc<LabeledSpace>,
    pub delta: DeltaSpec,
    /// (classical state, in-port) pairs with length 0 — input on that port
    /// is erased before activation. Unlisted pairs default to ∞.
    pub lenfn_zero: BTreeSet<(String, Port)>,
    /// Final classical states; a machine in one is never activated again.
    pub fin: BTreeSet<String>,
    /// The shared per-port message space ℂ^{Σ^{≤L}}.
    pub msg_space: Arc<LabeledSpace>,
}

impl MachineDef {
    pub fn kind(&self) -> Result<MachineKind, MachineError> {
        let mut has_master = false;
        let mut buffer_shape = true;
        let mut simple_shape = true;
        for p in &self.ports {
            match (p.label, p.dir) {
                (PortLabel::Simple, _) | (PortLabel::Clock, PortDir::Out) => {
                    buffer_shape = false;
                }
                (PortLabel::Clock, PortDir::In) if p.is_master_clock() => {
                    has_master = true;
                    buffer_shape = false;
                }
                (PortLabel::Clock, PortDir::In) => {
                    simple_shape = false;
                }
                (PortLabel::Buffer, _) => {
                    simple_shape = false;
                }
            }
        }
        if simple_shape {
            return Ok(if has_master { MachineKind::MasterScheduler } else { MachineKind::Simple });
        }
        if buffer_shape && self.ports.len() == 3 {
            let name = &self.ports[0].name;
            let want = [Port::buffer_in(name), Port::buffer_out(name), Port::clock_in(name)];
            let have: BTreeSet<&Port> = self.ports.iter().collect();
            if want.iter().all(|p| have.contains(p)) {
                return Ok(MachineKind::Buffer);
            }
        }
        Err(MachineError::Unclassifiable {
            name: self.name.clone(),
            reason: "ports are neither a simple/master shape nor a buffer triple".into(),
        })
    }

    pub fn is_master_scheduler(&self) -> bool {
        matches!(self.kind(), Ok(MachineKind::MasterScheduler))
    }

    pub fn is_buffer(&self) -> bool {
        matches!(self.kind(), Ok(MachineKind::Buffer))
    }

    pub fn in_ports(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.is_in())
    }

    pub fn out_ports(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.is_out())
    }

    pub fn in_cports(&self) -> impl Iterator<Item = &Port> {
        self.in_ports().filter(|p| self.cports.contains(*p))
    }

    pub fn out_cports(&self) -> impl Iterator<Item = &Port> {
        self.out_ports().filter(|p| self.cports.contains(*p))
    }

    /// Clock out-ports in declared port order (the scheduling priority).
    pub fn clock_out_ports(&self) -> impl Iterator<Item = &Port> {
        self.ports
            .iter()
            .filter(|p| p.label == PortLabel::Clock && p.is_out())
    }

    /// Length function lookup; defaults to ∞ (false) for unlisted pairs.
    pub fn len_is_zero(&self, cstate: &str, port: &Port) -> bool {
        self.lenfn_zero.contains(&(cstate.to_string(), port.clone()))
    }

    pub fn is_final(&self, cstate: &str) -> bool {
        self.fin.contains(cstate)
    }

    /// Register id of the quantum state register in the global state.
    pub fn q_reg(&self) -> RegId {
        RegId::new(format!("q:{}", self.name))
    }

    /// Register id of the classical state register.
    pub fn c_reg(&self) -> RegId {
        RegId::new(format!("c:{}", self.name))
    }

    /// Register id carrying the contents of one port.
    pub fn port_reg(port: &Port) -> RegId {
        RegId::new(format!("p:{port}"))
    }

    pub fn supports_k(&self, k: usize) -> bool {
        self.initial_cstate(k).is_ok()
    }

    /// The components of a combination, seen through any canonisation
    /// wrappers around its delta.
    pub fn combined_components(&self) -> Option<(&MachineDef, &MachineDef)> {
        fn peel(spec: &DeltaSpec) -> &DeltaSpec {
            match spec {
                DeltaSpec::Canonised(inner) => peel(inner),
                other => other,
            }
        }
        match peel(&self.delta) {
            DeltaSpec::Combined { left, right } => Some((left, right)),
            _ => None,
        }
    }

    /// The classical state every machine starts in: 1^k, paired
    /// recursively for combinations.
    pub fn initial_cstate(&self, k: usize) -> Result<String, MachineError> {
        let label = match self.combined_components() {
            Some((left, right)) => crate::qcore::pair_label_of(
                &left.initial_cstate(k)?,
                &right.initial_cstate(k)?,
            ),
            None => crate::qcore::unary_label(k),
        };
        self.cstates.require(&label).map_err(MachineError::from)?;
        Ok(label)
    }

    /// The initial quantum state label: ε, paired for combinations.
    pub fn initial_qstate(&self) -> Result<String, MachineError> {
        let label = match self.combined_components() {
            Some((left, right)) => {
                crate::qcore::pair_label_of(&left.initial_qstate()?, &right.initial_qstate()?)
            }
            None => String::new(),
        };
        self.qstates.require(&label).map_err(MachineError::from)?;
        Ok(label)
    }

    /// Applies the state-transition operator Δ to the machine's registers
    /// within `state`. Always returns a single state: measurements inside
    /// Δ are classical branchings that get mixed back together.
    pub fn apply_delta(&self, state: DensityState) -> Result<DensityState, MachineError> {
        self.apply_delta_spec(&self.delta, state)
    }

    pub(crate) fn apply_delta_spec(
        &self,
        spec: &DeltaSpec,
        state: DensityState,
    ) -> Result<DensityState, MachineError> {
        match spec {
            DeltaSpec::Kraus(ch) => {
                let targets = self.kraus_targets();
                state.apply_channel(ch, &targets).map_err(MachineError::from)
            }
            DeltaSpec::Program(p) => super::program::execute(self, p, state),
            DeltaSpec::Buffer { queue_cap } => buffer::transition(self, *queue_cap, state),
            DeltaSpec::Canonised(inner) => canon::apply_guarded(self, inner, state),
            DeltaSpec::Combined { left, right } => combine::apply_combined(self, left, right, state),
        }
    }

    /// Register order a dense Kraus delta acts on: qstate, cstate, then
    /// in-ports and out-ports in declared order.
    pub fn kraus_targets(&self) -> Vec<RegId> {
        let mut t = vec![self.q_reg(), self.c_reg()];
        t.extend(self.in_ports().map(Self::port_reg));
        t.extend(self.out_ports().map(Self::port_reg));
        t
    }

    pub fn kraus_dims(&self) -> Vec<usize> {
        let mut d = vec![self.qstates.dim(), self.cstates.dim()];
        let n_ports = self.ports.len();
        d.extend(std::iter::repeat_n(self.msg_space.dim(), n_ports));
        d
    }

    /// Canonisation M̃: same machine with the guarded Δ̃ and the length
    /// function forced to 0 in final states.
    pub fn canonise(&self) -> Result<MachineDef, MachineError> {
        canon::canonise(self)
    }

    /// The combination Comb(self, other) of two canonised machines in one.
    pub fn combine(&self, other: &MachineDef) -> Result<MachineDef, MachineError> {
        combine::combine(self, other)
    }

    /// Checks every structural clause of the machine definition; returns
    /// all violations rather than stopping at the first.
    pub fn validate(&self) -> ValidationReport {
        let mut report = Vec::new();
        if self.name.is_empty() {
            report.push("machine name must be non-empty".to_string());
        }
        if let Some((left, right)) = self.combined_components() {
            let expect = format!("({}+{})", left.name, right.name);
            if self.name != expect {
                report.push(format!(
                    "combined machine is named {:?}, expected {expect:?}",
                    self.name
                ));
            }
        } else {
            for (i, c) in self.name.char_indices() {
                let last = i == self.name.len() - c.len_utf8();
                let ok = match c {
                    '(' | ')' | '+' | '|' => false,
                    '~' => last && self.is_buffer(),
                    c if c.is_whitespace() => false,
                    _ => true,
                };
                if !ok {
                    report.push(format!(
                        "machine name {:?} contains reserved character {c:?}",
                        self.name
                    ));
                    break;
                }
            }
        }
        let mut seen = BTreeSet::new();
        for p in &self.ports {
            if !seen.insert(p.clone()) {
                report.push(format!("port sequence lists {p} twice"));
            }
        }
        for p in &self.cports {
            if !seen.contains(p) {
                report.push(format!("classical port {p} is not in the port sequence"));
            }
        }
        for p in &self.ports {
            if p.label == PortLabel::Clock && !self.cports.contains(p) {
                report.push(format!("all clock-ports are classical, but {p} is quantum"));
            }
        }
        if self.initial_qstate().is_err() {
            report.push("quantum state basis must contain the initial state ε".to_string());
        }
        if !(1..=64).any(|k| self.supports_k(k)) {
            report.push("classical states must contain an initial state 1^k".to_string());
        }
        for s in &self.fin {
            if !self.cstates.contains(s) {
                report.push(format!("final state {s:?} is not a classical state"));
            }
        }
        for (s, p) in &self.lenfn_zero {
            if !self.cstates.contains(s) {
                report.push(format!("length function mentions unknown state {s:?}"));
            }
            if !(p.is_in() && self.ports.contains(p)) {
                report.push(format!("length function mentions {p}, not an in-port of this machine"));
            }
        }
        let kind = match self.kind() {
            Ok(k) => Some(k),
            Err(e) => {
                report.push(e.to_string());
                None
            }
        };
        self.validate_delta(&self.delta, kind, &mut report);
        ValidationReport { machine: self.name.clone(), violations: report }
    }

    fn validate_delta(&self, spec: &DeltaSpec, kind: Option<MachineKind>, report: &mut Vec<String>) {
        match spec {
            DeltaSpec::Kraus(ch) => {
                if ch.dims() != self.kraus_dims().as_slice() {
                    report.push(format!(
                        "Kraus delta dims {:?} do not match machine space dims {:?}",
                        ch.dims(),
                        self.kraus_dims()
                    ));
                }
                if let crate::qcore::ChannelReport::NotTracePreserving { defect } =
                    validate_channel(ch)
                {
                    report.push(format!(
                        "state-transition operator is not trace-preserving (defect {defect:.3e})"
                    ));
                }
            }
            DeltaSpec::Program(p) => {
                report.extend(p.check(self));
            }
            DeltaSpec::Buffer { queue_cap } => {
                if *queue_cap == 0 {
                    report.push("buffer queue capacity must be at least 1".to_string());
                }
                if kind != Some(MachineKind::Buffer) {
                    report.push("only buffers may use the built-in buffer delta".to_string());
                }
            }
            DeltaSpec::Canonised(inner) => self.validate_delta(inner, kind, report),
            DeltaSpec::Combined { left, right } => {
                for side in [left, right] {
                    let sub = side.validate();
                    if !sub.is_ok() {
                        report.push(format!("component {}: {}", side.name, sub.violations.join("; ")));
                    }
                }
            }
        }
    }

    /// Validation as a hard error, for call sites that need a good machine.
    pub fn validated(self) -> Result<Self, MachineError> {
        let report = self.validate();
        if report.is_ok() {
            Ok(self)
        } else {
            Err(MachineError::Invalid { name: self.name, report: report.violations })
        }
    }
}

/// Everything [`MachineDef::validate`] found wrong with a machine.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub machine: String,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}
