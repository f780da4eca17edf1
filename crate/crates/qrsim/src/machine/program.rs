//! The instruction language used to author state-transition operators.
//!
//! A dense Kraus channel over qstates ⊗ cstates ⊗ inputs ⊗ outputs is
//! unwieldy beyond toy dimensions, so machines are usually written as
//! short programs over their own registers. A program denotes a CPTP map:
//! measurement instructions branch classically inside the program and the
//! branches are mixed back together at the end, which is exactly
//! ρ ↦ Σᵢ Eᵢ Pᵢ ρ Pᵢ Eᵢ†.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::qcore::{linalg, DensityState, RegId, TRACE_TOL};

use super::def::{MachineDef, MachineError};
use super::port::Port;

/// Names a register of the owning machine.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RegRef {
    QState,
    CState,
    Port(Port),
}

impl std::fmt::Display for RegRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegRef::QState => f.write_str("qstate"),
            RegRef::CState => f.write_str("cstate"),
            RegRef::Port(p) => write!(f, "port {p}"),
        }
    }
}

/// A classical label computed from literals and previously measured
/// variables.
#[derive(Clone, Debug, PartialEq)]
pub enum LabelExpr {
    Lit(String),
    Var(String),
    Concat(Vec<LabelExpr>),
    /// Bitwise XOR over {0,1}: the second operand must be at least as
    /// long as the first; the result has the first operand's length.
    Xor(Box<LabelExpr>, Box<LabelExpr>),
    /// The unary length encoding 1^len of the operand.
    OnesLen(Box<LabelExpr>),
    /// Strips a literal prefix; fails if the value does not start with it.
    StripPrefix { expr: Box<LabelExpr>, prefix: String },
}

impl LabelExpr {
    pub fn lit(s: impl Into<String>) -> Self {
        LabelExpr::Lit(s.into())
    }

    pub fn var(s: impl Into<String>) -> Self {
        LabelExpr::Var(s.into())
    }

    fn eval(&self, env: &BTreeMap<String, String>) -> Result<String, String> {
        match self {
            LabelExpr::Lit(s) => Ok(s.clone()),
            LabelExpr::Var(v) => env
                .get(v)
                .cloned()
                .ok_or_else(|| format!("variable {v:?} is not bound")),
            LabelExpr::Concat(parts) => {
                let mut out = String::new();
                for p in parts {
                    out.push_str(&p.eval(env)?);
                }
                Ok(out)
            }
            LabelExpr::Xor(a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                if b.len() < a.len() {
                    return Err(format!("xor: {b:?} is shorter than {a:?}"));
                }
                a.bytes()
                    .zip(b.bytes())
                    .map(|(x, y)| match (x, y) {
                        (b'0' | b'1', b'0' | b'1') => {
                            Ok(if (x == b'1') ^ (y == b'1') { '1' } else { '0' })
                        }
                        _ => Err(format!("xor: {a:?} ⊕ {b:?} is not over {{0,1}}")),
                    })
                    .collect()
            }
            LabelExpr::OnesLen(e) => {
                let v = e.eval(env)?;
                Ok("1".repeat(v.chars().count()))
            }
            LabelExpr::StripPrefix { expr, prefix } => {
                let v = expr.eval(env)?;
                v.strip_prefix(prefix.as_str())
                    .map(str::to_string)
                    .ok_or_else(|| format!("{v:?} does not start with {prefix:?}"))
            }
        }
    }

    fn vars(&self, out: &mut Vec<String>) {
        match self {
            LabelExpr::Lit(_) => {}
            LabelExpr::Var(v) => out.push(v.clone()),
            LabelExpr::Concat(parts) => parts.iter().for_each(|p| p.vars(out)),
            LabelExpr::Xor(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            LabelExpr::OnesLen(e) | LabelExpr::StripPrefix { expr: e, .. } => e.vars(out),
        }
    }
}

/// A classical condition over measured variables.
#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    Eq { var: String, value: String },
    In { var: String, values: Vec<String> },
    Not(Box<Predicate>),
    All(Vec<Predicate>),
    Any(Vec<Predicate>),
}

impl Predicate {
    pub fn eq(var: impl Into<String>, value: impl Into<String>) -> Self {
        Predicate::Eq { var: var.into(), value: value.into() }
    }

    pub fn is_in<S: Into<String>>(var: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        Predicate::In { var: var.into(), values: values.into_iter().map(Into::into).collect() }
    }

    fn eval(&self, env: &BTreeMap<String, String>) -> Result<bool, String> {
        let lookup = |v: &String| {
            env.get(v).ok_or_else(|| format!("variable {v:?} is not bound"))
        };
        match self {
            Predicate::Eq { var, value } => Ok(lookup(var)? == value),
            Predicate::In { var, values } => Ok(values.contains(lookup(var)?)),
            Predicate::Not(p) => Ok(!p.eval(env)?),
            Predicate::All(ps) => {
                for p in ps {
                    if !p.eval(env)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Predicate::Any(ps) => {
                for p in ps {
                    if p.eval(env)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    fn vars(&self, out: &mut Vec<String>) {
        match self {
            Predicate::Eq { var, .. } | Predicate::In { var, .. } => out.push(var.clone()),
            Predicate::Not(p) => p.vars(out),
            Predicate::All(ps) | Predicate::Any(ps) => ps.iter().for_each(|p| p.vars(out)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    /// Applies a unitary to the listed registers (matrix over their
    /// product space, targets-major order).
    Unitary { matrix: DMatrix<Complex64>, targets: Vec<RegRef> },
    /// Complete measurement; binds the outcome label to a variable.
    Measure { target: RegRef, var: String },
    /// Discards the register's content and prepares a basis label.
    Prepare { target: RegRef, value: LabelExpr },
    /// Classical copy: measures `src` and prepares `dst` to the outcome.
    CopyClassical { src: RegRef, dst: RegRef },
    /// Prepares a register to a random basis label: ρ ↦ Σᵢ pᵢ|ℓᵢ⟩⟨ℓᵢ| ⊗ tr ρ.
    Sample { target: RegRef, choices: Vec<(String, f64)> },
    /// Classical branching on previously measured variables.
    Branch { pred: Predicate, then_branch: Vec<Instruction>, else_branch: Vec<Instruction> },
}

/// An ordered list of instructions denoting one CPTP map.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Program {
    pub instructions: Vec<Instruction>,
}

impl Program {
    pub fn new(instructions: Vec<Instruction>) -> Self {
        Program { instructions }
    }

    /// Static validation: register references resolve, unitaries are
    /// unitary with matching dimensions, sampling distributions are
    /// normalised and variables are bound before use.
    pub fn check(&self, m: &MachineDef) -> Vec<String> {
        let mut report = Vec::new();
        let mut bound = std::collections::BTreeSet::new();
        check_block(&self.instructions, m, &mut bound, &mut report);
        report
    }
}

fn check_block(
    block: &[Instruction],
    m: &MachineDef,
    bound: &mut std::collections::BTreeSet<String>,
    report: &mut Vec<String>,
) {
    let dim_of = |r: &RegRef| -> Option<usize> {
        match r {
            RegRef::QState => Some(m.qstates.dim()),
            RegRef::CState => Some(m.cstates.dim()),
            RegRef::Port(p) => m.ports.contains(p).then(|| m.msg_space.dim()),
        }
    };
    let check_ref = |r: &RegRef, report: &mut Vec<String>| -> bool {
        if dim_of(r).is_none() {
            report.push(format!("{r} does not resolve on machine {}", m.name));
            false
        } else {
            true
        }
    };
    let check_vars = |vars: Vec<String>, bound: &std::collections::BTreeSet<String>, report: &mut Vec<String>| {
        for v in vars {
            if !bound.contains(&v) {
                report.push(format!("variable {v:?} used before being measured"));
            }
        }
    };
    for instr in block {
        match instr {
            Instruction::Unitary { matrix, targets } => {
                let mut dim = 1usize;
                let mut ok = true;
                let mut seen = std::collections::BTreeSet::new();
                for t in targets {
                    ok &= check_ref(t, report);
                    if !seen.insert(t.clone()) {
                        report.push(format!("unitary lists target {t} twice"));
                        ok = false;
                    }
                    dim *= dim_of(t).unwrap_or(1);
                }
                if ok && (matrix.nrows() != dim || matrix.ncols() != dim) {
                    report.push(format!(
                        "unitary is {}×{} but targets span dimension {dim}",
                        matrix.nrows(),
                        matrix.ncols()
                    ));
                } else if ok && !linalg::is_unitary(matrix, TRACE_TOL) {
                    report.push("matrix is not unitary within 1e-9".to_string());
                }
            }
            Instruction::Measure { target, var } => {
                check_ref(target, report);
                bound.insert(var.clone());
            }
            Instruction::Prepare { target, value } => {
                check_ref(target, report);
                let mut vars = Vec::new();
                value.vars(&mut vars);
                check_vars(vars, bound, report);
            }
            Instruction::CopyClassical { src, dst } => {
                check_ref(src, report);
                check_ref(dst, report);
                if src == dst {
                    report.push("copy-classical source and destination coincide".to_string());
                }
            }
            Instruction::Sample { target, choices } => {
                check_ref(target, report);
                if choices.is_empty() {
                    report.push("sample needs at least one choice".to_string());
                }
                let total: f64 = choices.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > TRACE_TOL {
                    report.push(format!("sample probabilities sum to {total}, not 1"));
                }
                if choices.iter().any(|(_, p)| *p < 0.0) {
                    report.push("sample probabilities must be non-negative".to_string());
                }
            }
            Instruction::Branch { pred, then_branch, else_branch } => {
                let mut vars = Vec::new();
                pred.vars(&mut vars);
                check_vars(vars, bound, report);
                let mut then_bound = bound.clone();
                let mut else_bound = bound.clone();
                check_block(then_branch, m, &mut then_bound, report);
                check_block(else_branch, m, &mut else_bound, report);
                // Only variables bound on both paths stay bound.
                *bound = then_bound.intersection(&else_bound).cloned().collect();
            }
        }
    }
}

struct Branch {
    env: BTreeMap<String, String>,
    state: DensityState,
}

/// Runs a program on the machine's registers inside `state`, mixing all
/// classical branches back into one state. The result is checked to be
/// trace-preserving within 1e-9.
pub(crate) fn execute(
    m: &MachineDef,
    program: &Program,
    state: DensityState,
) -> Result<DensityState, MachineError> {
    let weight_in = state.weight();
    let branches = vec![Branch { env: BTreeMap::new(), state }];
    let branches = exec_block(m, &program.instructions, branches)?;
    let mixed = DensityState::mix(branches.into_iter().map(|b| b.state).collect())
        .map_err(MachineError::from)?;
    let defect = (mixed.weight() - weight_in).abs();
    if defect > TRACE_TOL {
        return Err(MachineError::NotTracePreserving { name: m.name.clone(), defect });
    }
    Ok(mixed)
}

fn exec_block(
    m: &MachineDef,
    block: &[Instruction],
    mut branches: Vec<Branch>,
) -> Result<Vec<Branch>, MachineError> {
    for instr in block {
        let mut next = Vec::with_capacity(branches.len());
        for branch in branches {
            next.extend(exec_instr(m, instr, branch)?);
        }
        branches = next;
    }
    Ok(branches)
}

fn exec_instr(m: &MachineDef, instr: &Instruction, branch: Branch) -> Result<Vec<Branch>, MachineError> {
    let err = |message: String| MachineError::Program { name: m.name.clone(), message };
    let reg_of = |r: &RegRef| -> Result<RegId, MachineError> {
        match r {
            RegRef::QState => Ok(m.q_reg()),
            RegRef::CState => Ok(m.c_reg()),
            RegRef::Port(p) => {
                if m.ports.contains(p) {
                    Ok(MachineDef::port_reg(p))
                } else {
                    Err(err(format!("port {p} does not belong to this machine")))
                }
            }
        }
    };
    let Branch { env, state } = branch;
    match instr {
        Instruction::Unitary { matrix, targets } => {
            let regs: Vec<RegId> = targets.iter().map(&reg_of).collect::<Result<_, _>>()?;
            let state = state
                .apply_kraus_raw(std::slice::from_ref(matrix), &regs)
                .map_err(MachineError::from)?;
            state.expect_trace_preserved("unitary instruction").map_err(MachineError::from)?;
            Ok(vec![Branch { env, state }])
        }
        Instruction::Measure { target, var } => {
            let reg = reg_of(target)?;
            let (outcomes, _pruned) = state.measure_complete(&reg).map_err(MachineError::from)?;
            Ok(outcomes
                .into_iter()
                .map(|(label, state)| {
                    let mut env = env.clone();
                    env.insert(var.clone(), label);
                    Branch { env, state }
                })
                .collect())
        }
        Instruction::Prepare { target, value } => {
            let reg = reg_of(target)?;
            let label = value.eval(&env).map_err(err)?;
            let state = state.prepare(&reg, &label).map_err(MachineError::from)?;
            Ok(vec![Branch { env, state }])
        }
        Instruction::CopyClassical { src, dst } => {
            let (src, dst) = (reg_of(src)?, reg_of(dst)?);
            let (outcomes, _pruned) = state.measure_complete(&src).map_err(MachineError::from)?;
            let mut out = Vec::with_capacity(outcomes.len());
            for (label, state) in outcomes {
                let state = state.prepare(&dst, &label).map_err(MachineError::from)?;
                out.push(Branch { env: env.clone(), state });
            }
            Ok(out)
        }
        Instruction::Sample { target, choices } => {
            let reg = reg_of(target)?;
            let mut out = Vec::with_capacity(choices.len());
            for (label, p) in choices {
                if *p <= 0.0 {
                    continue;
                }
                let mut state = state.prepare(&reg, label).map_err(MachineError::from)?;
                state.scale_weight(*p);
                out.push(Branch { env: env.clone(), state });
            }
            Ok(out)
        }
        Instruction::Branch { pred, then_branch, else_branch } => {
            let taken = pred.eval(&env).map_err(err)?;
            let block = if taken { then_branch } else { else_branch };
            exec_block(m, block, vec![Branch { env, state }])
        }
    }
}
