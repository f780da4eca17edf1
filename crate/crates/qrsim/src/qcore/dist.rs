use std::collections::BTreeMap;

use super::TRACE_TOL;

/// A discrete probability distribution over ordered outcomes, with an
/// explicit account of probability mass pruned away by the engine.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<T: Ord> {
    entries: BTreeMap<T, f64>,
    pruned_mass: f64,
}

impl<T: Ord> Default for Distribution<T> {
    fn default() -> Self {
        Distribution { entries: BTreeMap::new(), pruned_mass: 0.0 }
    }
}

impl<T: Ord> Distribution<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds probability mass to an outcome, aggregating duplicates.
    pub fn add(&mut self, outcome: T, p: f64) {
        debug_assert!(p >= 0.0);
        *self.entries.entry(outcome).or_insert(0.0) += p;
    }

    pub fn add_pruned(&mut self, mass: f64) {
        debug_assert!(mass >= 0.0);
        self.pruned_mass += mass;
    }

    pub fn entries(&self) -> impl Iterator<Item = (&T, f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prob(&self, outcome: &T) -> f64 {
        self.entries.get(outcome).copied().unwrap_or(0.0)
    }

    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum::<f64>() + self.pruned_mass
    }

    /// Checks Σ probabilities + pruned mass = 1 within tolerance.
    pub fn check_normalized(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= TRACE_TOL
    }

    /// Re-keys the distribution, aggregating outcomes that collide.
    pub fn map<U: Ord>(&self, mut f: impl FnMut(&T) -> U) -> Distribution<U> {
        let mut out = Distribution::new();
        for (k, v) in self.entries() {
            out.add(f(k), v);
        }
        out.pruned_mass = self.pruned_mass;
        out
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (T, f64)>) -> Self {
        let mut d = Self::new();
        for (k, v) in entries {
            d.add(k, v);
        }
        d
    }

    /// ½ Σ |p₁(x) − p₂(x)| over the union of the supports.
    pub fn statistical_distance(&self, other: &Self) -> f64 {
        statistical_distance(self, other)
    }
}

/// The total-variation distance ½ Σ |p₁(x) − p₂(x)|.
///
/// Pruned mass does not participate; with defective inputs the result can
/// exceed 1 by at most the larger pruned mass.
pub fn statistical_distance<T: Ord>(a: &Distribution<T>, b: &Distribution<T>) -> f64 {
    let mut sum = 0.0;
    let mut ia = a.entries.iter().peekable();
    let mut ib = b.entries.iter().peekable();
    loop {
        match (ia.peek(), ib.peek()) {
            (Some((ka, va)), Some((kb, vb))) => match ka.cmp(kb) {
                std::cmp::Ordering::Less => {
                    sum += va.abs();
                    ia.next();
                }
                std::cmp::Ordering::Greater => {
                    sum += vb.abs();
                    ib.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += (*va - *vb).abs();
                    ia.next();
                    ib.next();
                }
            },
            (Some((_, va)), None) => {
                sum += va.abs();
                ia.next();
            }
            (None, Some((_, vb))) => {
                sum += vb.abs();
                ib.next();
            }
            (None, None) => break,
        }
    }
    0.5 * sum
}
