//! Small dense complex-matrix helpers shared across the crate.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    max_abs(&(m - dagger(m))) <= tol
}

pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs(&(dagger(m) * m - identity(m.nrows()))) <= tol
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    // Symmetrise first so tiny numerical skew cannot upset the solver.
    let h = (m + dagger(m)).scale(0.5);
    let eig = h.symmetric_eigenvalues();
    eig.iter().fold(f64::INFINITY, |acc, v| acc.min(*v))
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// ‖ΣᵢKᵢ†Kᵢ − 1‖_max, the trace-preservation defect of a Kraus family.
pub fn kraus_defect(ops: &[CMatrix]) -> f64 {
    let dim = ops[0].ncols();
    let mut acc = CMatrix::zeros(dim, dim);
    for k in ops {
        acc += dagger(k) * k;
    }
    max_abs(&(acc - identity(dim)))
}

/// Completes a partial injective basis map into a full permutation matrix.
///
/// `pairs` lists (source index, target index) mappings; unmapped sources
/// are matched with unused targets in ascending order. Useful for
/// authoring isometric register shuffles as honest unitaries.
pub fn permutation_from_partial(dim: usize, pairs: &[(usize, usize)]) -> Result<CMatrix, String> {
    let mut target_of = vec![None; dim];
    let mut used = vec![false; dim];
    for &(src, dst) in pairs {
        if src >= dim || dst >= dim {
            return Err(format!("index out of range for dimension {dim}"));
        }
        if target_of[src].is_some() {
            return Err(format!("source {src} mapped twice"));
        }
        if used[dst] {
            return Err(format!("target {dst} mapped twice"));
        }
        target_of[src] = Some(dst);
        used[dst] = true;
    }
    let mut free = (0..dim).filter(|i| !used[*i]);
    for t in target_of.iter_mut() {
        if t.is_none() {
            *t = Some(free.next().expect("counts match"));
        }
    }
    let mut m = CMatrix::zeros(dim, dim);
    for (src, dst) in target_of.into_iter().enumerate() {
        m[(dst.unwrap(), src)] = Complex64::new(1.0, 0.0);
    }
    Ok(m)
}

/// Embeds a small unitary acting on the listed basis indices, identity on
/// the rest.
pub fn embed_on_subspace(dim: usize, indices: &[usize], block: &CMatrix) -> Result<CMatrix, String> {
    if block.nrows() != indices.len() || block.ncols() != indices.len() {
        return Err("block dimension does not match index count".into());
    }
    let mut m = identity(dim);
    for (bi, &i) in indices.iter().enumerate() {
        for (bj, &j) in indices.iter().enumerate() {
            if i >= dim || j >= dim {
                return Err(format!("index out of range for dimension {dim}"));
            }
            m[(i, j)] = block[(bi, bj)];
        }
    }
    Ok(m)
}
