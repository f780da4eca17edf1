//! Conversion between the document model and the core types, with all
//! cross-references resolved and all embedded matrices validated.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::machine::{
    make_buffer, DeltaSpec, Instruction, LabelExpr, MachineDef, Port, Predicate, Program, RegRef,
};
use crate::network::{BufferDefaults, Collection, Configuration, Structure};
use crate::qcore::{Alphabet, LabeledSpace};
use crate::security::{ClaimFlavor, ClaimMode, SecurityClaim, Witness};

use super::model::*;
use super::DocError;

/// The visible spelling of the empty word in documents.
pub fn show_label(label: &str) -> String {
    if label.is_empty() {
        "ε".to_string()
    } else {
        label.to_string()
    }
}

pub fn read_label(text: &str) -> String {
    if text == "ε" {
        String::new()
    } else {
        text.to_string()
    }
}

fn parse_port(text: &str) -> Result<Port, DocError> {
    Port::parse(text).ok_or_else(|| DocError::Parse(format!("bad port syntax {text:?}")))
}

fn matrix_to_doc(m: &DMatrix<Complex64>) -> MatrixDoc {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| (m[(i, j)].re, m[(i, j)].im)).collect())
        .collect()
}

fn matrix_from_doc(doc: &MatrixDoc) -> Result<DMatrix<Complex64>, DocError> {
    let rows = doc.len();
    if rows == 0 {
        return Err(DocError::Parse("empty matrix".into()));
    }
    let cols = doc[0].len();
    if doc.iter().any(|r| r.len() != cols) {
        return Err(DocError::Parse("ragged matrix".into()));
    }
    for row in doc {
        for &(re, im) in row {
            if !re.is_finite() || !im.is_finite() {
                return Err(DocError::Parse("matrix entry is not finite".into()));
            }
        }
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| {
        Complex64::new(doc[i][j].0, doc[i][j].1)
    }))
}

fn regref_to_doc(r: &RegRef) -> String {
    match r {
        RegRef::QState => "qstate".to_string(),
        RegRef::CState => "cstate".to_string(),
        RegRef::Port(p) => p.to_string(),
    }
}

fn regref_from_doc(text: &str) -> Result<RegRef, DocError> {
    match text {
        "qstate" => Ok(RegRef::QState),
        "cstate" => Ok(RegRef::CState),
        other => Ok(RegRef::Port(parse_port(other)?)),
    }
}

fn expr_to_doc(e: &LabelExpr) -> ExprDoc {
    match e {
        LabelExpr::Lit(s) => ExprDoc::Lit(show_label(s)),
        LabelExpr::Var(v) => ExprDoc::Var(v.clone()),
        LabelExpr::Concat(parts) => ExprDoc::Concat(parts.iter().map(expr_to_doc).collect()),
        LabelExpr::Xor(a, b) => {
            ExprDoc::Xor(Box::new(expr_to_doc(a)), Box::new(expr_to_doc(b)))
        }
        LabelExpr::OnesLen(e) => ExprDoc::OnesLen(Box::new(expr_to_doc(e))),
        LabelExpr::StripPrefix { expr, prefix } => ExprDoc::StripPrefix {
            expr: Box::new(expr_to_doc(expr)),
            prefix: prefix.clone(),
        },
    }
}

fn expr_from_doc(e: &ExprDoc) -> LabelExpr {
    match e {
        ExprDoc::Lit(s) => LabelExpr::Lit(read_label(s)),
        ExprDoc::Var(v) => LabelExpr::Var(v.clone()),
        ExprDoc::Concat(parts) => LabelExpr::Concat(parts.iter().map(expr_from_doc).collect()),
        ExprDoc::Xor(a, b) => {
            LabelExpr::Xor(Box::new(expr_from_doc(a)), Box::new(expr_from_doc(b)))
        }
        ExprDoc::OnesLen(e) => LabelExpr::OnesLen(Box::new(expr_from_doc(e))),
        ExprDoc::StripPrefix { expr, prefix } => LabelExpr::StripPrefix {
            expr: Box::new(expr_from_doc(expr)),
            prefix: prefix.clone(),
        },
    }
}

fn pred_to_doc(p: &Predicate) -> PredDoc {
    match p {
        Predicate::Eq { var, value } => {
            PredDoc::Eq { var: var.clone(), value: show_label(value) }
        }
        Predicate::In { var, values } => PredDoc::In {
            var: var.clone(),
            values: values.iter().map(|v| show_label(v)).collect(),
        },
        Predicate::Not(inner) => PredDoc::Not(Box::new(pred_to_doc(inner))),
        Predicate::All(ps) => PredDoc::All(ps.iter().map(pred_to_doc).collect()),
        Predicate::Any(ps) => PredDoc::Any(ps.iter().map(pred_to_doc).collect()),
    }
}

fn pred_from_doc(p: &PredDoc) -> Predicate {
    match p {
        PredDoc::Eq { var, value } => {
            Predicate::Eq { var: var.clone(), value: read_label(value) }
        }
        PredDoc::In { var, values } => Predicate::In {
            var: var.clone(),
            values: values.iter().map(|v| read_label(v)).collect(),
        },
        PredDoc::Not(inner) => Predicate::Not(Box::new(pred_from_doc(inner))),
        PredDoc::All(ps) => Predicate::All(ps.iter().map(pred_from_doc).collect()),
        PredDoc::Any(ps) => Predicate::Any(ps.iter().map(pred_from_doc).collect()),
    }
}

fn instruction_to_doc(i: &Instruction) -> InstructionDoc {
    match i {
        Instruction::Unitary { matrix, targets } => InstructionDoc::Unitary {
            matrix: matrix_to_doc(matrix),
            targets: targets.iter().map(regref_to_doc).collect(),
        },
        Instruction::Measure { target, var } => {
            InstructionDoc::Measure { target: regref_to_doc(target), var: var.clone() }
        }
        Instruction::Prepare { target, value } => InstructionDoc::Prepare {
            target: regref_to_doc(target),
            value: expr_to_doc(value),
        },
        Instruction::CopyClassical { src, dst } => {
            InstructionDoc::Copy { src: regref_to_doc(src), dst: regref_to_doc(dst) }
        }
        Instruction::Sample { target, choices } => InstructionDoc::Sample {
            target: regref_to_doc(target),
            choices: choices.iter().map(|(l, p)| (show_label(l), *p)).collect(),
        },
        Instruction::Branch { pred, then_branch, else_branch } => InstructionDoc::Branch {
            pred: pred_to_doc(pred),
            then_branch: then_branch.iter().map(instruction_to_doc).collect(),
            else_branch: else_branch.iter().map(instruction_to_doc).collect(),
        },
    }
}

fn instruction_from_doc(i: &InstructionDoc) -> Result<Instruction, DocError> {
    Ok(match i {
        InstructionDoc::Unitary { matrix, targets } => Instruction::Unitary {
            matrix: matrix_from_doc(matrix)?,
            targets: targets
                .iter()
                .map(|t| regref_from_doc(t))
                .collect::<Result<_, _>>()?,
        },
        InstructionDoc::Measure { target, var } => {
            Instruction::Measure { target: regref_from_doc(target)?, var: var.clone() }
        }
        InstructionDoc::Prepare { target, value } => Instruction::Prepare {
            target: regref_from_doc(target)?,
            value: expr_from_doc(value),
        },
        InstructionDoc::Copy { src, dst } => Instruction::CopyClassical {
            src: regref_from_doc(src)?,
            dst: regref_from_doc(dst)?,
        },
        InstructionDoc::Sample { target, choices } => Instruction::Sample {
            target: regref_from_doc(target)?,
            choices: choices.iter().map(|(l, p)| (read_label(l), *p)).collect(),
        },
        InstructionDoc::Branch { pred, then_branch, else_branch } => Instruction::Branch {
            pred: pred_from_doc(pred),
            then_branch: then_branch
                .iter()
                .map(instruction_from_doc)
                .collect::<Result<_, _>>()?,
            else_branch: else_branch
                .iter()
                .map(instruction_from_doc)
                .collect::<Result<_, _>>()?,
        },
    })
}

fn delta_to_doc(d: &DeltaSpec) -> Result<DeltaDoc, DocError> {
    Ok(match d {
        DeltaSpec::Kraus(ch) => DeltaDoc::Kraus {
            operators: ch.operators().iter().map(matrix_to_doc).collect(),
        },
        DeltaSpec::Program(p) => DeltaDoc::Program {
            program: p.instructions.iter().map(instruction_to_doc).collect(),
        },
        DeltaSpec::Buffer { .. } => {
            return Err(DocError::Parse(
                "buffers are declared in their own section, not as machines".into(),
            ))
        }
        DeltaSpec::Canonised(inner) => {
            DeltaDoc::Canonised { inner: Box::new(delta_to_doc(inner)?) }
        }
        DeltaSpec::Combined { left, right } => DeltaDoc::Combined {
            left: Box::new(machine_to_doc(left)?),
            right: Box::new(machine_to_doc(right)?),
        },
    })
}

pub fn machine_to_doc(m: &MachineDef) -> Result<MachineDoc, DocError> {
    Ok(MachineDoc {
        name: m.name.clone(),
        ports: m.ports.iter().map(Port::to_string).collect(),
        quantum_ports: m
            .ports
            .iter()
            .filter(|p| !m.cports.contains(*p))
            .map(Port::to_string)
            .collect(),
        qstates: m.qstates.labels().iter().map(|l| show_label(l)).collect(),
        cstates: m.cstates.labels().iter().map(|l| show_label(l)).collect(),
        fin: m.fin.iter().map(|l| show_label(l)).collect(),
        len_zero: m
            .lenfn_zero
            .iter()
            .map(|(s, p)| (show_label(s), p.to_string()))
            .collect(),
        delta: delta_to_doc(&m.delta)?,
    })
}

fn delta_from_doc(
    d: &DeltaDoc,
    dims: &[usize],
    defaults: &BufferDefaults,
) -> Result<DeltaSpec, DocError> {
    Ok(match d {
        DeltaDoc::Kraus { operators } => {
            let ops = operators
                .iter()
                .map(matrix_from_doc)
                .collect::<Result<Vec<_>, _>>()?;
            let ch = crate::qcore::KrausChannel::new(ops, dims.to_vec())
                .map_err(|e| DocError::Parse(format!("bad Kraus delta: {e}")))?;
            DeltaSpec::Kraus(ch)
        }
        DeltaDoc::Program { program } => DeltaSpec::Program(Program::new(
            program
                .iter()
                .map(instruction_from_doc)
                .collect::<Result<_, _>>()?,
        )),
        DeltaDoc::Canonised { inner } => {
            DeltaSpec::Canonised(Box::new(delta_from_doc(inner, dims, defaults)?))
        }
        DeltaDoc::Combined { left, right } => DeltaSpec::Combined {
            left: Box::new(machine_from_doc(left, defaults)?),
            right: Box::new(machine_from_doc(right, defaults)?),
        },
    })
}

pub fn machine_from_doc(
    doc: &MachineDoc,
    defaults: &BufferDefaults,
) -> Result<MachineDef, DocError> {
    let ports: Vec<Port> = doc
        .ports
        .iter()
        .map(|p| parse_port(p))
        .collect::<Result<_, _>>()?;
    let quantum: BTreeSet<Port> = doc
        .quantum_ports
        .iter()
        .map(|p| parse_port(p))
        .collect::<Result<_, _>>()?;
    for q in &quantum {
        if !ports.contains(q) {
            return Err(DocError::Parse(format!(
                "machine {}: quantum port {q} is not in the port list",
                doc.name
            )));
        }
    }
    let cports: BTreeSet<Port> =
        ports.iter().filter(|p| !quantum.contains(*p)).cloned().collect();
    let qstates = LabeledSpace::shared(doc.qstates.iter().map(|l| read_label(l)))
        .map_err(|e| DocError::Parse(format!("machine {}: {e}", doc.name)))?;
    let cstates = LabeledSpace::shared(doc.cstates.iter().map(|l| read_label(l)))
        .map_err(|e| DocError::Parse(format!("machine {}: {e}", doc.name)))?;
    let mut dims = vec![qstates.dim(), cstates.dim()];
    let n_in = ports.iter().filter(|p| p.is_in()).count();
    let n_out = ports.len() - n_in;
    dims.extend(std::iter::repeat_n(defaults.msg_space.dim(), n_in + n_out));
    let delta = delta_from_doc(&doc.delta, &dims, defaults)?;
    Ok(MachineDef {
        name: doc.name.clone(),
        ports,
        cports,
        qstates,
        cstates,
        delta,
        lenfn_zero: doc
            .len_zero
            .iter()
            .map(|(s, p)| Ok((read_label(s), parse_port(p)?)))
            .collect::<Result<_, DocError>>()?,
        fin: doc.fin.iter().map(|l| read_label(l)).collect(),
        msg_space: defaults.msg_space.clone(),
    })
}

/// A fully resolved document: alphabet, buffer defaults, machines and all
/// named sections with their cross-references checked.
#[derive(Clone, Debug)]
pub struct Network {
    pub alphabet: Alphabet,
    pub defaults: BufferDefaults,
    pub machines: BTreeMap<String, MachineDef>,
    pub collections: BTreeMap<String, Collection>,
    pub structures: BTreeMap<String, Structure>,
    pub configurations: BTreeMap<String, (String, String, String)>,
    pub claims: BTreeMap<String, SecurityClaim>,
    doc: NetworkDoc,
}

impl Network {
    pub fn from_doc(doc: NetworkDoc) -> Result<Self, DocError> {
        if doc.format != NETWORK_FORMAT {
            return Err(DocError::Parse(format!(
                "unsupported format {:?}, expected {NETWORK_FORMAT:?}",
                doc.format
            )));
        }
        let alphabet = Alphabet::new(doc.alphabet.symbols.chars(), doc.alphabet.max_len)
            .map_err(|e| DocError::Parse(format!("bad alphabet: {e}")))?;
        let defaults = BufferDefaults {
            queue_cap: doc.defaults.queue_cap,
            max_k: doc.defaults.max_k,
            msg_space: alphabet.message_space(),
        };

        let mut machines = BTreeMap::new();
        for m in &doc.machines {
            if machines
                .insert(m.name.clone(), machine_from_doc(m, &defaults)?)
                .is_some()
            {
                return Err(DocError::Parse(format!("machine {} defined twice", m.name)));
            }
        }
        for b in &doc.buffers {
            let m = make_buffer(&b.name, b.queue_cap, defaults.msg_space.clone(), defaults.max_k);
            if machines.insert(m.name.clone(), m).is_some() {
                return Err(DocError::Parse(format!("buffer {} defined twice", b.name)));
            }
        }

        let lookup = |name: &str| -> Result<MachineDef, DocError> {
            machines
                .get(name)
                .cloned()
                .ok_or_else(|| DocError::Unresolved(format!("machine {name:?}")))
        };

        let mut collections = BTreeMap::new();
        for c in &doc.collections {
            let members = c
                .machines
                .iter()
                .map(|n| lookup(n))
                .collect::<Result<Vec<_>, _>>()?;
            let collection = Collection::from_machines(members)
                .map_err(|e| DocError::Parse(format!("collection {}: {e}", c.name)))?;
            collections.insert(c.name.clone(), collection);
        }

        let mut structures = BTreeMap::new();
        for s in &doc.structures {
            let members = s
                .machines
                .iter()
                .map(|n| lookup(n))
                .collect::<Result<Vec<_>, _>>()?;
            let collection = Collection::from_machines(members)
                .map_err(|e| DocError::Parse(format!("structure {}: {e}", s.name)))?;
            let service = s
                .service
                .iter()
                .map(|p| parse_port(p))
                .collect::<Result<Vec<_>, _>>()?;
            let structure = Structure::new(collection, service, &defaults)
                .map_err(|e| DocError::Parse(format!("structure {}: {e}", s.name)))?;
            structures.insert(s.name.clone(), structure);
        }

        let mut configurations = BTreeMap::new();
        for c in &doc.configurations {
            if !structures.contains_key(&c.structure) {
                return Err(DocError::Unresolved(format!("structure {:?}", c.structure)));
            }
            lookup(&c.user)?;
            lookup(&c.adversary)?;
            configurations.insert(
                c.name.clone(),
                (c.structure.clone(), c.user.clone(), c.adversary.clone()),
            );
        }

        let mut claims = BTreeMap::new();
        for c in &doc.claims {
            let real = structures
                .get(&c.real)
                .cloned()
                .ok_or_else(|| DocError::Unresolved(format!("structure {:?}", c.real)))?;
            let ideal = structures
                .get(&c.ideal)
                .cloned()
                .ok_or_else(|| DocError::Unresolved(format!("structure {:?}", c.ideal)))?;
            let mode = match c.mode.as_str() {
                "perfect" => ClaimMode::Perfect,
                "statistical" => {
                    let mut bounds = BTreeMap::new();
                    for (k, b) in &c.bounds {
                        let k: usize = k
                            .parse()
                            .map_err(|_| DocError::Parse(format!("bad k {k:?} in bounds")))?;
                        bounds.insert(k, *b);
                    }
                    ClaimMode::Statistical { bounds }
                }
                other => return Err(DocError::Parse(format!("unknown claim mode {other:?}"))),
            };
            let flavor = match c.flavor.as_str() {
                "standard" => ClaimFlavor::Standard,
                "universal" => ClaimFlavor::Universal,
                other => return Err(DocError::Parse(format!("unknown claim flavor {other:?}"))),
            };
            let witnesses = c
                .witnesses
                .iter()
                .map(|w| {
                    Ok(Witness {
                        user: lookup(&w.user)?,
                        real_adversary: lookup(&w.real_adversary)?,
                        simulator: lookup(&w.simulator)?,
                    })
                })
                .collect::<Result<Vec<_>, DocError>>()?;
            claims.insert(
                c.name.clone(),
                SecurityClaim { real, ideal, mode, flavor, witnesses },
            );
        }

        Ok(Network {
            alphabet,
            defaults,
            machines,
            collections,
            structures,
            configurations,
            claims,
            doc,
        })
    }

    pub fn doc(&self) -> &NetworkDoc {
        &self.doc
    }

    pub fn configuration(&self, name: &str) -> Result<Configuration, DocError> {
        let (s, u, a) = self
            .configurations
            .get(name)
            .ok_or_else(|| DocError::Unresolved(format!("configuration {name:?}")))?;
        Configuration::new(
            self.structures[s].clone(),
            self.machines[u].clone(),
            self.machines[a].clone(),
            &self.defaults,
        )
        .map_err(|e| DocError::Parse(format!("configuration {name}: {e}")))
    }

    /// Runs every validator over the document: machine definitions,
    /// configuration construction, and claim-witness configurations.
    /// Returns all violations found; empty means the document is clean.
    pub fn validate_all(&self) -> Vec<String> {
        let mut report = Vec::new();
        for m in self.machines.values() {
            let r = m.validate();
            for v in &r.violations {
                report.push(format!("machine {}: {v}", r.machine));
            }
        }
        for name in self.configurations.keys() {
            if let Err(e) = self.configuration(name) {
                report.push(e.to_string());
            }
        }
        for (name, claim) in &self.claims {
            if claim.real.service != claim.ideal.service {
                report.push(format!(
                    "claim {name}: real and ideal structures expose different service ports"
                ));
                continue;
            }
            for (i, w) in claim.witnesses.iter().enumerate() {
                let real_cfg = Configuration::new(
                    claim.real.clone(),
                    w.user.clone(),
                    w.real_adversary.clone(),
                    &self.defaults,
                );
                match real_cfg {
                    Err(e) => report.push(format!("claim {name}, witness {i}: real side: {e}")),
                    Ok(cfg) => {
                        if !cfg.is_suitable_for(&claim.ideal, &self.defaults) {
                            report.push(format!(
                                "claim {name}, witness {i}: user {} owns ports forbidden by the ideal structure",
                                w.user.name
                            ));
                        }
                    }
                }
                if let Err(e) = Configuration::new(
                    claim.ideal.clone(),
                    w.user.clone(),
                    w.simulator.clone(),
                    &self.defaults,
                ) {
                    report.push(format!("claim {name}, witness {i}: ideal side: {e}"));
                }
            }
        }
        report
    }
}
