use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use super::channel::KrausChannel;
use super::linalg::{self, CMatrix};
use super::space::LabeledSpace;
use super::{HERMITICITY_TOL, PRUNE_EPS, TRACE_TOL};

/// Entries this small are numerically dead and dropped from supports.
const SUPPORT_EPS: f64 = 1e-30;

/// Identifier of a registered subsystem of the global state.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegId(String);

impl RegId {
    pub fn new(id: impl Into<String>) -> Self {
        RegId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RegId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for RegId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "reg({})", self.0)
    }
}

#[derive(Debug, Error)]
pub enum StateError {
    #[error("label {label:?} is not in space {space}")]
    UnknownLabel { label: String, space: String },
    #[error("space has no labels")]
    EmptySpace,
    #[error("duplicate label {label:?}")]
    DuplicateLabel { label: String },
    #[error("alphabet symbol {symbol:?} is not alphanumeric")]
    BadSymbol { symbol: char },
    #[error("subsystem {0} is not registered")]
    UnknownRegister(RegId),
    #[error("subsystem {0} registered twice")]
    DuplicateRegister(RegId),
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("subsystems {src} and {dst} have different bases")]
    BasisMismatch { src: RegId, dst: RegId },
    #[error("operation is not trace-preserving here (trace drifted by {defect:.3e}): {context}")]
    TraceLost { defect: f64, context: String },
    #[error("cannot mix an empty set of states")]
    EmptyMix,
    #[error("invalid state: {0}")]
    Invalid(String),
}

/// One entanglement group: a trace-1 density matrix over the part of the
/// product basis of `regs` that carries support.
#[derive(Clone, Debug, PartialEq)]
struct Factor {
    /// Sorted register ids.
    regs: Vec<RegId>,
    /// Sorted multi-labels (one basis index per register, in `regs` order).
    support: Vec<Vec<u16>>,
    /// Density matrix indexed by `support`.
    mat: CMatrix,
}

impl Factor {
    fn basis(reg: RegId, idx: u16) -> Self {
        Factor {
            regs: vec![reg],
            support: vec![vec![idx]],
            mat: CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
        }
    }

    fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|c| c.re).sum()
    }

    fn reg_pos(&self, reg: &RegId) -> Option<usize> {
        self.regs.iter().position(|r| r == reg)
    }

    /// Tensor product of two factors, re-sorted into canonical order.
    fn merge(&self, other: &Factor) -> Factor {
        let mut regs: Vec<RegId> = self.regs.iter().chain(other.regs.iter()).cloned().collect();
        let n_left = self.regs.len();
        let mut order: Vec<usize> = (0..regs.len()).collect();
        order.sort_by(|a, b| regs[*a].cmp(&regs[*b]));
        regs.sort();

        let mut support = Vec::with_capacity(self.support.len() * other.support.len());
        for sa in &self.support {
            for sb in &other.support {
                let mut entry = Vec::with_capacity(regs.len());
                for &src in &order {
                    entry.push(if src < n_left { sa[src] } else { sb[src - n_left] });
                }
                support.push(entry);
            }
        }
        let mat = linalg::kron(&self.mat, &other.mat);
        let mut f = Factor { regs, support, mat };
        f.sort_support();
        f
    }

    /// Re-sorts the support lexicographically, permuting the matrix.
    fn sort_support(&mut self) {
        let n = self.support.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|a, b| self.support[*a].cmp(&self.support[*b]));
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return;
        }
        let support = perm.iter().map(|&p| self.support[p].clone()).collect();
        let mut mat = CMatrix::zeros(n, n);
        for (i, &pi) in perm.iter().enumerate() {
            for (j, &pj) in perm.iter().enumerate() {
                mat[(i, j)] = self.mat[(pi, pj)];
            }
        }
        self.support = support;
        self.mat = mat;
    }

    /// Drops support entries whose entire row and column are numerically dead.
    fn compact(&mut self) {
        let n = self.support.len();
        let keep: Vec<usize> = (0..n)
            .filter(|&i| {
                (0..n).any(|j| self.mat[(i, j)].norm() > SUPPORT_EPS || self.mat[(j, i)].norm() > SUPPORT_EPS)
            })
            .collect();
        if keep.len() == n {
            return;
        }
        if keep.is_empty() {
            // Keep one entry so the factor stays well-formed; callers check
            // traces and weights separately.
            self.support.truncate(1);
            self.mat = CMatrix::zeros(1, 1);
            return;
        }
        let support = keep.iter().map(|&i| self.support[i].clone()).collect();
        let mut mat = CMatrix::zeros(keep.len(), keep.len());
        for (i, &pi) in keep.iter().enumerate() {
            for (j, &pj) in keep.iter().enumerate() {
                mat[(i, j)] = self.mat[(pi, pj)];
            }
        }
        self.support = support;
        self.mat = mat;
    }

    /// Traces out one register; returns None if it was the only one.
    fn trace_out(&self, reg: &RegId) -> Option<Factor> {
        let pos = self.reg_pos(reg)?;
        if self.regs.len() == 1 {
            return None;
        }
        let mut regs = self.regs.clone();
        regs.remove(pos);

        let mut reduced_support: Vec<Vec<u16>> = Vec::new();
        let mut lookup: BTreeMap<Vec<u16>, usize> = BTreeMap::new();
        let strip = |entry: &Vec<u16>| {
            let mut e = entry.clone();
            e.remove(pos);
            e
        };
        for entry in &self.support {
            let key = strip(entry);
            if !lookup.contains_key(&key) {
                lookup.insert(key.clone(), reduced_support.len());
                reduced_support.push(key);
            }
        }
        let mut mat = CMatrix::zeros(reduced_support.len(), reduced_support.len());
        for (i, si) in self.support.iter().enumerate() {
            for (j, sj) in self.support.iter().enumerate() {
                if si[pos] == sj[pos] {
                    let (ri, rj) = (lookup[&strip(si)], lookup[&strip(sj)]);
                    mat[(ri, rj)] += self.mat[(i, j)];
                }
            }
        }
        let mut f = Factor { regs, support: reduced_support, mat };
        f.compact();
        Some(f)
    }
}

/// Outcome of a projective measurement: the outcome key and the
/// renormalised post-measurement state, whose weight already carries the
/// outcome probability.
pub type MeasureOutcome<K> = (K, DensityState);

fn factors_approx_eq(a: &Factor, b: &Factor, tol: f64) -> bool {
    let mut support: BTreeSet<&Vec<u16>> = a.support.iter().collect();
    support.extend(b.support.iter());
    let entry = |f: &Factor, si: &Vec<u16>, sj: &Vec<u16>| -> Complex64 {
        match (
            f.support.binary_search(si).ok(),
            f.support.binary_search(sj).ok(),
        ) {
            (Some(i), Some(j)) => f.mat[(i, j)],
            _ => Complex64::new(0.0, 0.0),
        }
    };
    for si in &support {
        for sj in &support {
            if (entry(a, si, sj) - entry(b, si, sj)).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// A density operator over a set of registered, labelled subsystems,
/// stored factor-wise with an overall probability weight.
#[derive(Clone, Debug)]
pub struct DensityState {
    regs: BTreeMap<RegId, Arc<LabeledSpace>>,
    factors: Vec<Factor>,
    weight: f64,
}

impl DensityState {
    /// A weight-1 state over no subsystems; the unit for [`Self::tensor`].
    pub fn unit() -> Self {
        DensityState { regs: BTreeMap::new(), factors: Vec::new(), weight: 1.0 }
    }

    /// The rank-1 projector |label⟩⟨label| on a fresh subsystem.
    pub fn basis(reg: RegId, space: Arc<LabeledSpace>, label: &str) -> Result<Self, StateError> {
        let idx = space.require(label)?;
        let mut regs = BTreeMap::new();
        regs.insert(reg.clone(), space);
        Ok(DensityState { regs, factors: vec![Factor::basis(reg, idx as u16)], weight: 1.0 })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub(crate) fn scale_weight(&mut self, by: f64) {
        self.weight *= by;
    }

    /// The conditional state: the same operator content with the
    /// probability weight reset to 1.
    pub fn normalized(mut self) -> Self {
        self.weight = 1.0;
        self
    }

    pub fn registers(&self) -> impl Iterator<Item = &RegId> {
        self.regs.keys()
    }

    pub fn has_register(&self, reg: &RegId) -> bool {
        self.regs.contains_key(reg)
    }

    pub fn space_of(&self, reg: &RegId) -> Result<&Arc<LabeledSpace>, StateError> {
        self.regs.get(reg).ok_or_else(|| StateError::UnknownRegister(reg.clone()))
    }

    /// Tensor product; subsystem sets must be disjoint. Weights multiply.
    pub fn tensor(mut self, other: DensityState) -> Result<Self, StateError> {
        for (reg, space) in other.regs {
            if self.regs.insert(reg.clone(), space).is_some() {
                return Err(StateError::DuplicateRegister(reg));
            }
        }
        self.factors.extend(other.factors);
        self.weight *= other.weight;
        Ok(self)
    }

    fn factor_of(&self, reg: &RegId) -> Option<usize> {
        self.factors.iter().position(|f| f.regs.iter().any(|r| r == reg))
    }

    /// Merges all factors containing any of `targets` into a single factor
    /// and returns its index. Creates nothing for unknown registers.
    fn merge_targets(&mut self, targets: &[RegId]) -> Result<usize, StateError> {
        let mut involved: BTreeSet<usize> = BTreeSet::new();
        for t in targets {
            if !self.regs.contains_key(t) {
                return Err(StateError::UnknownRegister(t.clone()));
            }
            involved.insert(self.factor_of(t).expect("registered ⇒ in some factor"));
        }
        let mut iter = involved.into_iter().rev();
        let last = iter.next().expect("targets nonempty");
        let mut merged = self.factors.remove(last);
        for idx in iter {
            let f = self.factors.remove(idx);
            merged = merged.merge(&f);
        }
        self.factors.push(merged);
        Ok(self.factors.len() - 1)
    }

    fn dims_of(&self, targets: &[RegId]) -> Result<Vec<usize>, StateError> {
        targets.iter().map(|t| self.space_of(t).map(|s| s.dim())).collect()
    }

    /// Applies a unitary to `targets` (matrix over their product space).
    pub fn apply_unitary(&self, u: &CMatrix, targets: &[RegId]) -> Result<Self, StateError> {
        if !linalg::is_unitary(u, TRACE_TOL) {
            return Err(StateError::Invalid("matrix is not unitary".into()));
        }
        self.apply_kraus_raw(std::slice::from_ref(u), targets)
    }

    /// Applies a validated Kraus channel to `targets` (identity elsewhere).
    pub fn apply_channel(&self, ch: &KrausChannel, targets: &[RegId]) -> Result<Self, StateError> {
        let dims = self.dims_of(targets)?;
        if dims != ch.dims() {
            return Err(StateError::DimensionMismatch {
                context: format!("channel dims {:?} vs target dims {:?}", ch.dims(), dims),
            });
        }
        let out = self.apply_kraus_raw(ch.operators(), targets)?;
        out.expect_trace_preserved("apply_channel")?;
        Ok(out)
    }

    /// Applies raw Kraus operators without the CPTP precondition.
    ///
    /// Used internally for partial isometries (buffer append/extract)
    /// whose domain covers the current support; callers are responsible
    /// for checking the trace afterwards.
    pub(crate) fn apply_kraus_raw(
        &self,
        ops: &[CMatrix],
        targets: &[RegId],
    ) -> Result<Self, StateError> {
        if targets.is_empty() {
            return Ok(self.clone());
        }
        let mut dedup = BTreeSet::new();
        for t in targets {
            if !dedup.insert(t.clone()) {
                return Err(StateError::DuplicateRegister(t.clone()));
            }
        }
        let dims = self.dims_of(targets)?;
        let full_dim: usize = dims.iter().product();
        for k in ops {
            if k.nrows() != full_dim || k.ncols() != full_dim {
                return Err(StateError::DimensionMismatch {
                    context: format!("operator is {}×{}, expected {full_dim}", k.nrows(), k.ncols()),
                });
            }
        }

        let mut out = self.clone();
        let fi = out.merge_targets(targets)?;
        let factor = &out.factors[fi];

        // Positions of the target registers inside the merged factor.
        let pos: Vec<usize> = targets.iter().map(|t| factor.reg_pos(t).unwrap()).collect();
        let flat = |entry: &[u16]| -> usize {
            let mut acc = 0usize;
            for (k, &p) in pos.iter().enumerate() {
                acc = acc * dims[k] + entry[p] as usize;
            }
            acc
        };
        let unflat = |mut idx: usize| -> Vec<u16> {
            let mut digits = vec![0u16; dims.len()];
            for k in (0..dims.len()).rev() {
                digits[k] = (idx % dims[k]) as u16;
                idx /= dims[k];
            }
            digits
        };

        // Reachable output support: for every input entry, every operator
        // row with a nonzero coefficient against that entry's column.
        let mut new_support: BTreeSet<Vec<u16>> = BTreeSet::new();
        for entry in &factor.support {
            let col = flat(entry);
            for k in ops {
                for row in 0..full_dim {
                    if k[(row, col)].norm() > SUPPORT_EPS {
                        let digits = unflat(row);
                        let mut e = entry.clone();
                        for (d, &p) in pos.iter().enumerate() {
                            e[p] = digits[d];
                        }
                        new_support.insert(e);
                    }
                }
            }
        }
        let new_support: Vec<Vec<u16>> = new_support.into_iter().collect();
        let n_new = new_support.len();
        let n_old = factor.support.len();

        // Lift each Kraus operator onto the support bases and accumulate.
        let rest_of = |entry: &[u16]| -> Vec<u16> {
            entry
                .iter()
                .enumerate()
                .filter(|(i, _)| !pos.contains(i))
                .map(|(_, &v)| v)
                .collect()
        };
        let mut acc = CMatrix::zeros(n_new, n_new);
        for k in ops {
            let mut lifted = CMatrix::zeros(n_new, n_old);
            for (j, sj) in factor.support.iter().enumerate() {
                let col = flat(sj);
                let rest_j = rest_of(sj);
                for (i, si) in new_support.iter().enumerate() {
                    if rest_of(si) == rest_j {
                        lifted[(i, j)] = k[(flat(si), col)];
                    }
                }
            }
            acc += &lifted * &factor.mat * lifted.adjoint();
        }

        let mut f = Factor { regs: factor.regs.clone(), support: new_support, mat: acc };
        f.compact();
        out.factors[fi] = f;
        Ok(out)
    }

    /// Applies a basis-relabelling partial isometry on `targets`: each
    /// support entry's target components are rewritten by `map` (indices
    /// in `targets` order). The map must be defined and injective on the
    /// current support; matrix entries are untouched, so the operation is
    /// exact. Used for structured moves such as queue append/extract.
    pub(crate) fn apply_basis_isometry(
        &self,
        targets: &[RegId],
        map: impl Fn(&[u16]) -> Option<Vec<u16>>,
        context: &str,
    ) -> Result<Self, StateError> {
        let dims = self.dims_of(targets)?;
        let mut out = self.clone();
        let fi = out.merge_targets(targets)?;
        let factor = &mut out.factors[fi];
        let pos: Vec<usize> = targets.iter().map(|t| factor.reg_pos(t).unwrap()).collect();
        let mut seen: BTreeSet<Vec<u16>> = BTreeSet::new();
        for entry in factor.support.iter_mut() {
            let components: Vec<u16> = pos.iter().map(|&p| entry[p]).collect();
            let new = map(&components).ok_or_else(|| StateError::Invalid(format!(
                "{context}: no image for basis state"
            )))?;
            if new.len() != pos.len() {
                return Err(StateError::Invalid(format!("{context}: arity mismatch")));
            }
            if new.iter().zip(dims.iter()).any(|(&v, &d)| v as usize >= d) {
                return Err(StateError::Invalid(format!("{context}: image out of range")));
            }
            for (&p, &v) in pos.iter().zip(new.iter()) {
                entry[p] = v;
            }
            if !seen.insert(entry.clone()) {
                return Err(StateError::Invalid(format!("{context}: map is not injective")));
            }
        }
        factor.sort_support();
        Ok(out)
    }

    pub(crate) fn expect_trace_preserved(&self, context: &str) -> Result<(), StateError> {
        for f in &self.factors {
            let defect = (f.trace() - 1.0).abs();
            if defect > TRACE_TOL {
                return Err(StateError::TraceLost { defect, context: context.to_string() });
            }
        }
        Ok(())
    }

    /// Projective measurement of one register, grouped by a key function
    /// on labels. Complete measurements use the label itself as the key;
    /// emptiness tests key on `label.is_empty()`.
    ///
    /// Returns the surviving outcomes (each with weight multiplied by its
    /// probability) and the total probability mass pruned below
    /// [`PRUNE_EPS`]. Coherence within each key class is preserved.
    pub fn measure_by<K: Ord + Clone>(
        &self,
        target: &RegId,
        key_of: impl Fn(&str) -> K,
    ) -> Result<(Vec<MeasureOutcome<K>>, f64), StateError> {
        let space = self.space_of(target)?.clone();
        let fi = self
            .factor_of(target)
            .ok_or_else(|| StateError::UnknownRegister(target.clone()))?;
        let factor = &self.factors[fi];
        let pos = factor.reg_pos(target).unwrap();

        let mut classes: BTreeMap<K, Vec<usize>> = BTreeMap::new();
        for (i, entry) in factor.support.iter().enumerate() {
            let key = key_of(space.label(entry[pos] as usize));
            classes.entry(key).or_default().push(i);
        }

        let mut outcomes = Vec::new();
        let mut pruned = 0.0;
        for (key, rows) in classes {
            let p_cond: f64 = rows.iter().map(|&i| factor.mat[(i, i)].re).sum();
            let p = p_cond * self.weight;
            if p < PRUNE_EPS {
                pruned += p.max(0.0);
                continue;
            }
            let mut sub = CMatrix::zeros(rows.len(), rows.len());
            for (a, &i) in rows.iter().enumerate() {
                for (b, &j) in rows.iter().enumerate() {
                    sub[(a, b)] = factor.mat[(i, j)] / Complex64::new(p_cond, 0.0);
                }
            }
            let support = rows.iter().map(|&i| factor.support[i].clone()).collect();
            let mut new_factor = Factor { regs: factor.regs.clone(), support, mat: sub };
            new_factor.compact();
            let mut st = self.clone();
            st.factors[fi] = new_factor;
            st.weight = p;
            outcomes.push((key, st));
        }
        Ok((outcomes, pruned))
    }

    /// Complete von-Neumann measurement in the computational basis.
    pub fn measure_complete(&self, target: &RegId) -> Result<(Vec<MeasureOutcome<String>>, f64), StateError> {
        self.measure_by(target, |l| l.to_string())
    }

    /// Two-outcome measurement {P_ε, 1−P_ε}: is the register empty?
    /// The key is `true` for the empty outcome.
    pub fn measure_emptiness(&self, target: &RegId) -> Result<(Vec<MeasureOutcome<bool>>, f64), StateError> {
        let space = self.space_of(target)?;
        space.require("")?;
        self.measure_by(target, |l| l.is_empty())
    }

    /// Traces out the target and re-prepares it in |label⟩⟨label| as a
    /// fresh unentangled factor.
    pub fn prepare(&self, target: &RegId, label: &str) -> Result<Self, StateError> {
        let space = self.space_of(target)?.clone();
        let idx = space.require(label)?;
        let fi = self
            .factor_of(target)
            .ok_or_else(|| StateError::UnknownRegister(target.clone()))?;
        let mut out = self.clone();
        match out.factors[fi].trace_out(target) {
            Some(reduced) => out.factors[fi] = reduced,
            None => {
                out.factors.remove(fi);
            }
        }
        out.factors.push(Factor::basis(target.clone(), idx as u16));
        Ok(out)
    }

    /// Prepares the empty word ε on the target.
    pub fn prepare_epsilon(&self, target: &RegId) -> Result<Self, StateError> {
        self.prepare(target, "")
    }

    /// The MOVE superoperator: ρ ↦ |ε⟩⟨ε| ⊗ tr₂ ρ on src ⊗ dst. The
    /// destination's previous content is discarded, the destination takes
    /// over the source's state (including any entanglement with third
    /// parties) and the source is left in |ε⟩⟨ε|.
    pub fn move_message(&self, src: &RegId, dst: &RegId) -> Result<Self, StateError> {
        let src_space = self.space_of(src)?.clone();
        let dst_space = self.space_of(dst)?.clone();
        if src_space != dst_space {
            return Err(StateError::BasisMismatch { src: src.clone(), dst: dst.clone() });
        }
        src_space.require("")?;
        // Discard dst, then relabel src's register as dst.
        let mut out = self.prepare_epsilon(dst)?;
        let fi = out.factor_of(dst).unwrap();
        out.factors.remove(fi);
        let fs = out.factor_of(src).unwrap();
        let factor = &mut out.factors[fs];
        let pos = factor.reg_pos(src).unwrap();
        factor.regs[pos] = dst.clone();
        let order: Vec<usize> = {
            let mut idx: Vec<usize> = (0..factor.regs.len()).collect();
            idx.sort_by(|a, b| factor.regs[*a].cmp(&factor.regs[*b]));
            idx
        };
        factor.regs.sort();
        for entry in factor.support.iter_mut() {
            let reordered: Vec<u16> = order.iter().map(|&i| entry[i]).collect();
            *entry = reordered;
        }
        factor.sort_support();
        out.factors.push(Factor::basis(src.clone(), 0));
        Ok(out)
    }

    /// Weighted sum of states over identical register sets.
    ///
    /// Factors that are bitwise-identical across all inputs are kept
    /// factored; everything else is merged into one group before adding.
    /// The result's weight is the sum of the input weights.
    pub fn mix(states: Vec<DensityState>) -> Result<Self, StateError> {
        let mut states: Vec<DensityState> =
            states.into_iter().filter(|s| s.weight > 0.0).collect();
        if states.is_empty() {
            return Err(StateError::EmptyMix);
        }
        if states.len() == 1 {
            return Ok(states.pop().unwrap());
        }
        let regs = states[0].regs.clone();
        for s in &states[1..] {
            if s.regs.keys().ne(regs.keys()) {
                return Err(StateError::Invalid("mixing states over different registers".into()));
            }
        }

        // Shared factors: identical (regs, support, matrix) in every state.
        let mut shared: Vec<Factor> = Vec::new();
        let mut diff_regs: BTreeSet<RegId> = BTreeSet::new();
        for f in &states[0].factors {
            let everywhere = states[1..].iter().all(|s| {
                s.factors.iter().any(|g| g == f)
            });
            if everywhere {
                shared.push(f.clone());
            } else {
                diff_regs.extend(f.regs.iter().cloned());
            }
        }
        // Any register that is in a differing factor in ANY state joins
        // the merged group.
        for s in &states[1..] {
            for f in &s.factors {
                if !shared.iter().any(|g| g == f) {
                    diff_regs.extend(f.regs.iter().cloned());
                }
            }
        }
        // A factor counted as shared may still contain a register that
        // another state groups differently; demote such factors.
        loop {
            let before = diff_regs.len();
            shared.retain(|f| {
                if f.regs.iter().any(|r| diff_regs.contains(r)) {
                    diff_regs.extend(f.regs.iter().cloned());
                    false
                } else {
                    true
                }
            });
            if diff_regs.len() == before {
                break;
            }
        }

        let total: f64 = states.iter().map(|s| s.weight).sum();
        if diff_regs.is_empty() {
            let mut out = states.swap_remove(0);
            out.weight = total;
            return Ok(out);
        }

        let merged_targets: Vec<RegId> = diff_regs.iter().cloned().collect();
        let mut lifted: Vec<(f64, Factor)> = Vec::new();
        for mut s in states {
            let fi = s.merge_targets(&merged_targets)?;
            let mut f = s.factors.swap_remove(fi);
            f.sort_support();
            lifted.push((s.weight, f));
        }

        // Union of supports, then weighted sum of matrices.
        let mut support_set: BTreeSet<Vec<u16>> = BTreeSet::new();
        for (_, f) in &lifted {
            support_set.extend(f.support.iter().cloned());
        }
        let support: Vec<Vec<u16>> = support_set.into_iter().collect();
        let lookup: BTreeMap<&Vec<u16>, usize> =
            support.iter().enumerate().map(|(i, e)| (e, i)).collect();
        let mut mat = CMatrix::zeros(support.len(), support.len());
        for (w, f) in &lifted {
            let scale = Complex64::new(w / total, 0.0);
            for (i, si) in f.support.iter().enumerate() {
                for (j, sj) in f.support.iter().enumerate() {
                    mat[(lookup[si], lookup[sj])] += f.mat[(i, j)] * scale;
                }
            }
        }
        let merged = Factor { regs: lifted[0].1.regs.clone(), support, mat };

        let mut factors = shared;
        factors.push(merged);
        Ok(DensityState { regs, factors, weight: total })
    }

    /// Splits a product register into its two components. The register's
    /// space must be ordered a-major as produced by [`LabeledSpace::product`].
    pub fn split_register(
        &self,
        reg: &RegId,
        left: (RegId, Arc<LabeledSpace>),
        right: (RegId, Arc<LabeledSpace>),
    ) -> Result<Self, StateError> {
        let space = self.space_of(reg)?.clone();
        let (dl, dr) = (left.1.dim(), right.1.dim());
        if space.dim() != dl * dr {
            return Err(StateError::DimensionMismatch {
                context: format!("cannot split dim {} into {}×{}", space.dim(), dl, dr),
            });
        }
        if self.regs.contains_key(&left.0) || self.regs.contains_key(&right.0) {
            return Err(StateError::DuplicateRegister(left.0));
        }
        let mut out = self.clone();
        out.regs.remove(reg);
        out.regs.insert(left.0.clone(), left.1);
        out.regs.insert(right.0.clone(), right.1);
        let fi = out.factors.iter().position(|f| f.regs.iter().any(|r| r == reg)).unwrap();
        let factor = &mut out.factors[fi];
        let pos = factor.reg_pos(reg).unwrap();
        let mut regs = factor.regs.clone();
        regs.splice(pos..=pos, [left.0, right.0.clone()]);
        for entry in factor.support.iter_mut() {
            let v = entry[pos] as usize;
            entry.splice(pos..=pos, [(v / dr) as u16, (v % dr) as u16]);
        }
        factor.regs = regs;
        // Re-sort registers (splice keeps relative order; ids may interleave).
        let mut order: Vec<usize> = (0..factor.regs.len()).collect();
        order.sort_by(|a, b| factor.regs[*a].cmp(&factor.regs[*b]));
        factor.regs.sort();
        for entry in factor.support.iter_mut() {
            let reordered: Vec<u16> = order.iter().map(|&i| entry[i]).collect();
            *entry = reordered;
        }
        factor.sort_support();
        Ok(out)
    }

    /// Fuses two registers into one product register (inverse of
    /// [`Self::split_register`]); `fused_space` must be the a-major
    /// product of the two component spaces.
    pub fn fuse_registers(
        &self,
        left: &RegId,
        right: &RegId,
        fused: RegId,
        fused_space: Arc<LabeledSpace>,
    ) -> Result<Self, StateError> {
        let dl = self.space_of(left)?.dim();
        let dr = self.space_of(right)?.dim();
        if fused_space.dim() != dl * dr {
            return Err(StateError::DimensionMismatch {
                context: format!("fused space dim {} ≠ {}×{}", fused_space.dim(), dl, dr),
            });
        }
        if self.regs.contains_key(&fused) && fused != *left && fused != *right {
            return Err(StateError::DuplicateRegister(fused));
        }
        let mut out = self.clone();
        let fi = out.merge_targets(&[left.clone(), right.clone()])?;
        out.regs.remove(left);
        out.regs.remove(right);
        out.regs.insert(fused.clone(), fused_space);
        let factor = &mut out.factors[fi];
        let pl = factor.reg_pos(left).unwrap();
        let pr = factor.reg_pos(right).unwrap();
        let (first, second) = if pl < pr { (pl, pr) } else { (pr, pl) };
        for entry in factor.support.iter_mut() {
            let (a, b) = (entry[pl] as usize, entry[pr] as usize);
            let v = (a * dr + b) as u16;
            entry.remove(second);
            entry.remove(first);
            entry.insert(first, v);
        }
        factor.regs.remove(second);
        factor.regs.remove(first);
        factor.regs.insert(first, fused);
        let mut order: Vec<usize> = (0..factor.regs.len()).collect();
        order.sort_by(|a, b| factor.regs[*a].cmp(&factor.regs[*b]));
        factor.regs.sort();
        for entry in factor.support.iter_mut() {
            let reordered: Vec<u16> = order.iter().map(|&i| entry[i]).collect();
            *entry = reordered;
        }
        factor.sort_support();
        Ok(out)
    }

    /// The reduced density matrix over `regs` (in the given order), as a
    /// dense matrix over the full product basis. Intended for small
    /// subsystems in tests and tomography.
    pub fn reduced_matrix(&self, regs: &[RegId]) -> Result<CMatrix, StateError> {
        if regs.is_empty() {
            return Err(StateError::Invalid("reduced_matrix over no registers".into()));
        }
        let dims = self.dims_of(regs)?;
        let full: usize = dims.iter().product();
        let mut work = self.clone();
        let fi = work.merge_targets(regs)?;
        // Trace out everything else in the merged factor.
        let others: Vec<RegId> = work.factors[fi]
            .regs
            .iter()
            .filter(|r| !regs.contains(r))
            .cloned()
            .collect();
        for r in others {
            if let Some(f) = work.factors[fi].trace_out(&r) {
                work.factors[fi] = f;
            }
        }
        let factor = &work.factors[fi];
        let pos: Vec<usize> = regs.iter().map(|r| factor.reg_pos(r).unwrap()).collect();
        let flat = |entry: &[u16]| -> usize {
            let mut acc = 0usize;
            for (k, &p) in pos.iter().enumerate() {
                acc = acc * dims[k] + entry[p] as usize;
            }
            acc
        };
        let mut mat = CMatrix::zeros(full, full);
        for (i, si) in factor.support.iter().enumerate() {
            for (j, sj) in factor.support.iter().enumerate() {
                mat[(flat(si), flat(sj))] += factor.mat[(i, j)];
            }
        }
        Ok(mat)
    }

    /// Checks Hermiticity, positivity, per-factor unit trace, register
    /// partitioning and the weight range.
    pub fn check_invariants(&self) -> Result<(), StateError> {
        if !(0.0..=1.0 + TRACE_TOL).contains(&self.weight) {
            return Err(StateError::Invalid(format!("weight {} out of [0,1]", self.weight)));
        }
        let mut seen: BTreeSet<&RegId> = BTreeSet::new();
        for f in &self.factors {
            for r in &f.regs {
                if !self.regs.contains_key(r) {
                    return Err(StateError::UnknownRegister(r.clone()));
                }
                if !seen.insert(r) {
                    return Err(StateError::DuplicateRegister(r.clone()));
                }
            }
            if !linalg::is_hermitian(&f.mat, HERMITICITY_TOL) {
                return Err(StateError::Invalid("factor is not Hermitian".into()));
            }
            if linalg::min_eigenvalue(&f.mat) < -HERMITICITY_TOL {
                return Err(StateError::Invalid(format!(
                    "factor has negative eigenvalue {:.3e}",
                    linalg::min_eigenvalue(&f.mat)
                )));
            }
            let t = f.trace();
            if (t - 1.0).abs() > TRACE_TOL {
                return Err(StateError::Invalid(format!("factor trace {t} ≠ 1")));
            }
        }
        if seen.len() != self.regs.len() {
            return Err(StateError::Invalid("registers missing from factors".into()));
        }
        Ok(())
    }

    fn partition(&self) -> Vec<&Vec<RegId>> {
        let mut p: Vec<&Vec<RegId>> = self.factors.iter().map(|f| &f.regs).collect();
        p.sort();
        p
    }

    /// Physical equality within an entrywise tolerance.
    ///
    /// When both sides share the same factor partition the comparison is
    /// factor-wise over the union of supports; otherwise factors are
    /// joined group-wise first (groups beyond a size cap compare unequal
    /// rather than materialising a huge joint matrix).
    pub fn approx_eq(&self, other: &DensityState, tol: f64) -> bool {
        if self.regs.keys().ne(other.regs.keys()) || self.regs.values().ne(other.regs.values()) {
            return false;
        }
        if (self.weight - other.weight).abs() > tol {
            return false;
        }
        if self.regs.is_empty() {
            return true;
        }
        if self.partition() == other.partition() {
            for f in &self.factors {
                let g = other
                    .factors
                    .iter()
                    .find(|g| g.regs == f.regs)
                    .expect("partitions match");
                if !factors_approx_eq(f, g, tol) {
                    return false;
                }
            }
            return true;
        }
        // Join partition: connected components of the union of both
        // partitions' grouping relations.
        const JOIN_DIM_CAP: usize = 1 << 14;
        let mut groups: Vec<BTreeSet<RegId>> = Vec::new();
        for regs in self.partition().into_iter().chain(other.partition()) {
            let set: BTreeSet<RegId> = regs.iter().cloned().collect();
            let (mut merged, rest): (Vec<_>, Vec<_>) =
                groups.into_iter().partition(|g| !g.is_disjoint(&set));
            let mut acc = set;
            for g in merged.drain(..) {
                acc.extend(g);
            }
            groups = rest;
            groups.push(acc);
        }
        for group in groups {
            let regs: Vec<RegId> = group.into_iter().collect();
            let dim: usize = regs.iter().map(|r| self.regs[r].dim()).product();
            if dim > JOIN_DIM_CAP {
                return false;
            }
            match (self.reduced_matrix(&regs), other.reduced_matrix(&regs)) {
                (Ok(a), Ok(b)) => {
                    if linalg::max_abs(&(a - b)) > tol {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        true
    }
}
