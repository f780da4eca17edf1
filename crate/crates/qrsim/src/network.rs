//! Collections of machines, their completion and closedness, structures
//! with service ports, configurations and composition of structures.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::machine::{make_buffer, MachineDef, MachineError, MachineKind, Port};
use crate::qcore::LabeledSpace;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error("collection already contains a machine named {0}")]
    DuplicateName(String),
    #[error("port {port} belongs to both {a} and {b}")]
    PortClash { a: String, b: String, port: Port },
    #[error("machine {0} not found")]
    NoSuchMachine(String),
    #[error("the user machine owns forbidden ports: {}", list_ports(.0))]
    ForbiddenPorts(Vec<Port>),
    #[error("the completion is not closed; dangling ports: {}", list_ports(.0))]
    NotClosed(Vec<Port>),
    #[error("expected exactly one master scheduler, found: {}", .0.join(", "))]
    MasterSchedulers(Vec<String>),
    #[error("structures are not composable: {0}")]
    NotComposable(String),
    #[error("service ports must be free ports of the structure: {}", list_ports(.0))]
    BadServicePorts(Vec<Port>),
    #[error("a structure may only contain simple machines; {name} is a {kind:?}")]
    NotSimple { name: String, kind: MachineKind },
}

fn list_ports(ports: &[Port]) -> String {
    ports.iter().map(Port::to_string).collect::<Vec<_>>().join(", ")
}

/// Buffer parameters used when a completion has to invent buffers.
#[derive(Clone, Debug)]
pub struct BufferDefaults {
    pub queue_cap: usize,
    pub max_k: usize,
    pub msg_space: Arc<LabeledSpace>,
}

impl BufferDefaults {
    pub fn new(msg_space: Arc<LabeledSpace>) -> Self {
        BufferDefaults { queue_cap: 4, max_k: 8, msg_space }
    }

    pub fn with_queue_cap(mut self, cap: usize) -> Self {
        self.queue_cap = cap;
        self
    }
}

/// A finite set of machines with pairwise distinct names and pairwise
/// disjoint port sets.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Collection {
    machines: BTreeMap<String, MachineDef>,
}

impl Collection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_machines(
        machines: impl IntoIterator<Item = MachineDef>,
    ) -> Result<Self, NetworkError> {
        let mut c = Collection::new();
        for m in machines {
            c.insert(m)?;
        }
        Ok(c)
    }

    pub fn insert(&mut self, m: MachineDef) -> Result<(), NetworkError> {
        if self.machines.contains_key(&m.name) {
            return Err(NetworkError::DuplicateName(m.name));
        }
        for (name, existing) in &self.machines {
            for p in &existing.ports {
                if m.ports.contains(p) {
                    return Err(NetworkError::PortClash {
                        a: name.clone(),
                        b: m.name.clone(),
                        port: p.clone(),
                    });
                }
            }
        }
        self.machines.insert(m.name.clone(), m);
        Ok(())
    }

    pub fn remove(&mut self, name: &str) -> Option<MachineDef> {
        self.machines.remove(name)
    }

    pub fn get(&self, name: &str) -> Option<&MachineDef> {
        self.machines.get(name)
    }

    pub fn machines(&self) -> impl Iterator<Item = &MachineDef> {
        self.machines.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.machines.keys()
    }

    pub fn len(&self) -> usize {
        self.machines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.machines.is_empty()
    }

    /// The set of all ports of all machines, buffers included.
    pub fn ports(&self) -> BTreeSet<Port> {
        self.machines
            .values()
            .flat_map(|m| m.ports.iter().cloned())
            .collect()
    }

    /// Free ports: ports without their low-level complement in the
    /// collection.
    pub fn free(&self) -> BTreeSet<Port> {
        let all = self.ports();
        all.iter()
            .filter(|p| !all.contains(&p.complement()))
            .cloned()
            .collect()
    }

    /// The completion \[Ĉ\]: for every port name occurring in the
    /// collection (except the master clock's), the buffer ñ is added if
    /// not yet present.
    pub fn completion(&self, defaults: &BufferDefaults) -> Collection {
        let mut out = self.clone();
        let have_buffers: BTreeSet<String> = self
            .machines
            .values()
            .filter(|m| m.is_buffer())
            .map(|m| m.ports[0].name.clone())
            .collect();
        let names: BTreeSet<String> = self
            .ports()
            .into_iter()
            .filter(|p| !p.is_master_clock())
            .map(|p| p.name)
            .collect();
        for name in names {
            if have_buffers.contains(&name) {
                continue;
            }
            let buffer = make_buffer(
                &name,
                defaults.queue_cap,
                defaults.msg_space.clone(),
                defaults.max_k,
            );
            let _ = out.insert(buffer);
        }
        out
    }

    /// Closed iff the completion's only free port is the master clock ⊤.
    pub fn is_closed(&self, defaults: &BufferDefaults) -> bool {
        let free = self.completion(defaults).free();
        free.len() == 1 && free.iter().all(Port::is_master_clock)
    }

    /// The machine holding `name<!`, i.e. the scheduler for buffer ñ.
    pub fn scheduler_of(&self, buffer_name: &str) -> Option<&MachineDef> {
        let clock_out = Port::clock_out(buffer_name);
        self.machines.values().find(|m| m.ports.contains(&clock_out))
    }

    /// The master schedulers present (a runnable network has exactly one).
    pub fn master_schedulers(&self) -> Vec<&MachineDef> {
        self.machines
            .values()
            .filter(|m| m.is_master_scheduler())
            .collect()
    }

    pub fn union(&self, other: &Collection) -> Result<Collection, NetworkError> {
        let mut out = self.clone();
        for m in other.machines.values() {
            out.insert(m.clone())?;
        }
        Ok(out)
    }
}

/// A protocol: a collection of simple machines plus the service ports an
/// honest user may connect to.
#[derive(Clone, Debug, PartialEq)]
pub struct Structure {
    pub machines: Collection,
    pub service: BTreeSet<Port>,
}

impl Structure {
    /// Builds and checks a structure: only simple machines, and
    /// S ⊆ free(\[M̂\]).
    pub fn new(
        machines: Collection,
        service: impl IntoIterator<Item = Port>,
        defaults: &BufferDefaults,
    ) -> Result<Self, NetworkError> {
        for m in machines.machines() {
            let kind = m.kind()?;
            if kind != MachineKind::Simple {
                return Err(NetworkError::NotSimple { name: m.name.clone(), kind });
            }
        }
        let service: BTreeSet<Port> = service.into_iter().collect();
        let free = machines.completion(defaults).free();
        let bad: Vec<Port> = service.iter().filter(|p| !free.contains(*p)).cloned().collect();
        if !bad.is_empty() {
            return Err(NetworkError::BadServicePorts(bad));
        }
        Ok(Structure { machines, service })
    }

    /// forb(M̂, S) = ports(M̂) ∪ S̄ᶜ: the protocol's own ports plus the
    /// low-level complements of the non-service free ports.
    pub fn forbidden(&self, defaults: &BufferDefaults) -> BTreeSet<Port> {
        let mut forb = self.machines.ports();
        let free = self.machines.completion(defaults).free();
        for p in free.difference(&self.service) {
            forb.insert(p.complement());
        }
        forb
    }
}

/// A structure together with an honest user H and an adversary A whose
/// completion is a closed collection with a unique master scheduler.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub structure: Structure,
    pub user: MachineDef,
    pub adversary: MachineDef,
}

impl Configuration {
    pub fn new(
        structure: Structure,
        user: MachineDef,
        adversary: MachineDef,
        defaults: &BufferDefaults,
    ) -> Result<Self, NetworkError> {
        let forb = structure.forbidden(defaults);
        let offending: Vec<Port> =
            user.ports.iter().filter(|p| forb.contains(*p)).cloned().collect();
        if !offending.is_empty() {
            return Err(NetworkError::ForbiddenPorts(offending));
        }
        let mut all = structure.machines.clone();
        all.insert(user.clone())?;
        all.insert(adversary.clone())?;
        let completion = all.completion(defaults);
        let dangling: Vec<Port> = completion
            .free()
            .into_iter()
            .filter(|p| !p.is_master_clock())
            .collect();
        if !dangling.is_empty() {
            return Err(NetworkError::NotClosed(dangling));
        }
        let masters: Vec<String> = completion
            .master_schedulers()
            .iter()
            .map(|m| m.name.clone())
            .collect();
        if masters.len() != 1 {
            return Err(NetworkError::MasterSchedulers(masters));
        }
        Ok(Configuration { structure, user, adversary })
    }

    /// The collection M̂ ∪ {H, A} this configuration runs as (the runner
    /// adds the buffers).
    pub fn collection(&self) -> Result<Collection, NetworkError> {
        let mut all = self.structure.machines.clone();
        all.insert(self.user.clone())?;
        all.insert(self.adversary.clone())?;
        Ok(all)
    }

    /// Suitability against another structure with the same service ports:
    /// the user must avoid that structure's forbidden ports too.
    pub fn is_suitable_for(&self, other: &Structure, defaults: &BufferDefaults) -> bool {
        let forb = other.forbidden(defaults);
        self.user.ports.iter().all(|p| !forb.contains(p))
    }
}

/// Checks composability: no port of one structure is forbidden for
/// another, and services agree on shared free ports.
pub fn composable(structures: &[&Structure], defaults: &BufferDefaults) -> Result<(), NetworkError> {
    for (i, a) in structures.iter().enumerate() {
        for (j, b) in structures.iter().enumerate() {
            if i == j {
                continue;
            }
            let forb_b = b.forbidden(defaults);
            if let Some(p) = a.machines.ports().iter().find(|p| forb_b.contains(*p)) {
                return Err(NetworkError::NotComposable(format!(
                    "port {p} of structure {i} is forbidden in structure {j}"
                )));
            }
            if i < j {
                let free_b = b.machines.completion(defaults).free();
                let free_a = a.machines.completion(defaults).free();
                let sa: BTreeSet<&Port> = a.service.iter().filter(|p| free_b.contains(*p)).collect();
                let sb: BTreeSet<&Port> = b.service.iter().filter(|p| free_a.contains(*p)).collect();
                if sa != sb {
                    return Err(NetworkError::NotComposable(format!(
                        "structures {i} and {j} disagree on shared service ports"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// The composition (M̂₁,S₁)∥…∥(M̂ₙ,Sₙ): machine union, with service ports
/// (S₁ ∪ … ∪ Sₙ) ∩ free(\[M̂\]).
pub fn compose(structures: &[&Structure], defaults: &BufferDefaults) -> Result<Structure, NetworkError> {
    composable(structures, defaults)?;
    let mut machines = Collection::new();
    for s in structures {
        for m in s.machines.machines() {
            machines.insert(m.clone())?;
        }
    }
    let free = machines.completion(defaults).free();
    let service: BTreeSet<Port> = structures
        .iter()
        .flat_map(|s| s.service.iter().cloned())
        .filter(|p| free.contains(p))
        .collect();
    Structure::new(machines, service, defaults)
}
