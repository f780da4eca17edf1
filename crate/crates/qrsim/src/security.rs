//! Witnessed security-claim checking: indistinguishability of the honest
//! user's view between a real and an ideal protocol.
//!
//! The security definitions quantify over all users and adversaries,
//! which no simulation can decide; this harness checks *witnessed*
//! claims — explicit (user, real adversary, simulator) triples — and its
//! verdicts are witness verifications, never security proofs.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::network::{BufferDefaults, Configuration, NetworkError, Structure};
use crate::qcore::statistical_distance;
use crate::runner::{run, view, RunConfig, RunError};

#[derive(Debug, Error)]
pub enum SecurityError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("configurations have different users ({0} vs {1})")]
    UserMismatch(String, String),
    #[error("the user machine differs between the two configurations")]
    UserDiffers,
    #[error("real and ideal structures expose different service ports")]
    ServiceMismatch,
    #[error("claim is malformed: {0}")]
    Malformed(String),
    #[error("verdicts cover different k sets")]
    KMismatch,
}

/// perfect: views must coincide (within the numerical floor);
/// strict-statistical: per-k statistical-distance bounds, supplied
/// explicitly since asymptotic smallness is untestable at finite k.
#[derive(Clone, Debug, PartialEq)]
pub enum ClaimMode {
    Perfect,
    Statistical { bounds: BTreeMap<usize, f64> },
}

/// Standard security lets the simulator depend on the user; universal
/// security keys the simulator by the real adversary alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClaimFlavor {
    Standard,
    Universal,
}

/// One witness triple: an honest user, a real adversary and the simulator
/// answering for it.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub user: crate::machine::MachineDef,
    pub real_adversary: crate::machine::MachineDef,
    pub simulator: crate::machine::MachineDef,
}

/// A witnessed claim that `real` is as secure as `ideal`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecurityClaim {
    pub real: Structure,
    pub ideal: Structure,
    pub mode: ClaimMode,
    pub flavor: ClaimFlavor,
    pub witnesses: Vec<Witness>,
}

/// Distinguishes true zero from floating-point residue at desk scale.
pub const PERFECT_TOL: f64 = 1e-9;

/// Per-k comparison data: the measured statistical distance and each
/// side's unresolved (pruned + truncated) mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerK {
    pub sd: f64,
    pub real_defect: f64,
    pub ideal_defect: f64,
}

/// The outcome of comparing a user's views across two configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub user: String,
    pub per_k: BTreeMap<usize, PerK>,
    pub pass: bool,
    /// Set when some side's defect mass exceeded the ceiling: the sd
    /// numbers are then not conclusive and pass is withheld.
    pub unreliable: bool,
}

/// Options for view comparison.
#[derive(Clone, Debug)]
pub struct CompareOpts {
    pub run: RunConfig,
    pub ks: Vec<usize>,
    /// Defect mass above this marks the verdict unreliable.
    pub defect_ceiling: f64,
}

impl CompareOpts {
    pub fn new(ks: impl IntoIterator<Item = usize>) -> Self {
        CompareOpts {
            run: RunConfig::new(1),
            ks: ks.into_iter().collect(),
            defect_ceiling: PERFECT_TOL,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.run = self.run.with_budget(budget);
        self
    }
}

/// Runs both configurations for every k and measures the statistical
/// distance between the named user's view distributions.
///
/// The pass flag is left true; claim checking overrides it against the
/// claim's tolerance. Defects are recorded per side.
pub fn compare_views(
    cfg1: &Configuration,
    cfg2: &Configuration,
    user_name: &str,
    opts: &CompareOpts,
    defaults: &BufferDefaults,
) -> Result<Verdict, SecurityError> {
    if cfg1.user.name != user_name || cfg2.user.name != user_name {
        return Err(SecurityError::UserMismatch(cfg1.user.name.clone(), cfg2.user.name.clone()));
    }
    if cfg1.user != cfg2.user {
        return Err(SecurityError::UserDiffers);
    }
    let mut per_k = BTreeMap::new();
    let mut unreliable = false;
    for &k in &opts.ks {
        let rc = RunConfig { k, ..opts.run.clone() };
        let d1 = run(&cfg1.collection()?, &rc, defaults)?;
        let d2 = run(&cfg2.collection()?, &rc, defaults)?;
        let v1 = view(&d1.traces, user_name);
        let v2 = view(&d2.traces, user_name);
        let sd = statistical_distance(&v1, &v2);
        let entry = PerK { sd, real_defect: d1.defect(), ideal_defect: d2.defect() };
        if entry.real_defect > opts.defect_ceiling || entry.ideal_defect > opts.defect_ceiling {
            unreliable = true;
        }
        per_k.insert(k, entry);
    }
    Ok(Verdict { user: user_name.to_string(), per_k, pass: !unreliable, unreliable })
}

/// Checks every witness triple of a claim and returns one verdict per
/// witness, in witness order.
pub fn check_claim(
    claim: &SecurityClaim,
    opts: &CompareOpts,
    defaults: &BufferDefaults,
) -> Result<Vec<Verdict>, SecurityError> {
    if claim.real.service != claim.ideal.service {
        return Err(SecurityError::ServiceMismatch);
    }
    if claim.witnesses.is_empty() {
        return Err(SecurityError::Malformed("a witnessed claim needs at least one witness".into()));
    }
    if claim.flavor == ClaimFlavor::Universal {
        // The simulator may depend on the real adversary only.
        let mut by_adversary: BTreeMap<String, &crate::machine::MachineDef> = BTreeMap::new();
        for w in &claim.witnesses {
            match by_adversary.get(&w.real_adversary.name) {
                None => {
                    by_adversary.insert(w.real_adversary.name.clone(), &w.simulator);
                }
                Some(existing) if **existing == w.simulator => {}
                Some(_) => {
                    return Err(SecurityError::Malformed(format!(
                        "universal claim maps adversary {} to two different simulators",
                        w.real_adversary.name
                    )))
                }
            }
        }
    }
    if let ClaimMode::Statistical { bounds } = &claim.mode {
        for k in &opts.ks {
            if !bounds.contains_key(k) {
                return Err(SecurityError::Malformed(format!(
                    "statistical claim has no bound for k = {k}"
                )));
            }
        }
    }

    let mut verdicts = Vec::with_capacity(claim.witnesses.len());
    for w in &claim.witnesses {
        let real_cfg =
            Configuration::new(claim.real.clone(), w.user.clone(), w.real_adversary.clone(), defaults)?;
        // The real configuration must be suitable for the ideal structure.
        if !real_cfg.is_suitable_for(&claim.ideal, defaults) {
            return Err(SecurityError::Malformed(format!(
                "user {} owns ports forbidden by the ideal structure",
                w.user.name
            )));
        }
        let ideal_cfg =
            Configuration::new(claim.ideal.clone(), w.user.clone(), w.simulator.clone(), defaults)?;
        let mut verdict = compare_views(&real_cfg, &ideal_cfg, &w.user.name, opts, defaults)?;
        let tolerance_ok = verdict.per_k.iter().all(|(k, entry)| match &claim.mode {
            ClaimMode::Perfect => entry.sd <= PERFECT_TOL,
            ClaimMode::Statistical { bounds } => entry.sd <= bounds[k],
        });
        verdict.pass = tolerance_ok && !verdict.unreliable;
        verdicts.push(verdict);
    }
    Ok(verdicts)
}

/// Transitivity: chains two verdicts over the same user and k set into a
/// bound for the outer pair via the triangle inequality.
pub fn chain_verdicts(v12: &Verdict, v23: &Verdict) -> Result<Verdict, SecurityError> {
    if v12.user != v23.user {
        return Err(SecurityError::UserMismatch(v12.user.clone(), v23.user.clone()));
    }
    if v12.per_k.keys().ne(v23.per_k.keys()) {
        return Err(SecurityError::KMismatch);
    }
    let per_k = v12
        .per_k
        .iter()
        .map(|(k, a)| {
            let b = &v23.per_k[k];
            (
                *k,
                PerK {
                    sd: a.sd + b.sd,
                    real_defect: a.real_defect + b.real_defect,
                    ideal_defect: a.ideal_defect + b.ideal_defect,
                },
            )
        })
        .collect();
    Ok(Verdict {
        user: v12.user.clone(),
        per_k,
        pass: v12.pass && v23.pass,
        unreliable: v12.unreliable || v23.unreliable,
    })
}
