//! The network-description document format and the structured output
//! documents (run distributions, views, verdicts), all rendered as TOML
//! with a format-version header.

mod convert;
mod model;

use thiserror::Error;

pub use convert::{machine_from_doc, machine_to_doc, read_label, show_label, Network};
pub use model::*;

use crate::qcore::Distribution;
use crate::runner::{RunDistribution, Trace, TraceRecord, View};
use crate::security::Verdict;

#[derive(Debug, Error)]
pub enum DocError {
    #[error("cannot parse document: {0}")]
    Parse(String),
    #[error("unresolved reference to {0}")]
    Unresolved(String),
    #[error("cannot serialize document: {0}")]
    Serialize(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses a network-description document and resolves all references.
pub fn parse_network(text: &str) -> Result<Network, DocError> {
    let doc: NetworkDoc =
        toml::from_str(text).map_err(|e| DocError::Parse(e.to_string()))?;
    Network::from_doc(doc)
}

pub fn serialize_network(doc: &NetworkDoc) -> Result<String, DocError> {
    toml::to_string_pretty(doc).map_err(|e| DocError::Serialize(e.to_string()))
}

fn record_to_doc(r: &TraceRecord) -> RecordDoc {
    RecordDoc {
        machine: r.machine.clone(),
        pre: show_label(&r.pre_state),
        post: show_label(&r.post_state),
        inputs: r
            .inputs
            .iter()
            .map(|(p, v)| (p.to_string(), show_label(v)))
            .collect(),
        outputs: r
            .outputs
            .iter()
            .map(|(p, v)| (p.to_string(), show_label(v)))
            .collect(),
        nonempty: r.nonempty.iter().map(|p| p.to_string()).collect(),
    }
}

fn record_from_doc(r: &RecordDoc) -> Result<TraceRecord, DocError> {
    let port = |s: &String| {
        crate::machine::Port::parse(s)
            .ok_or_else(|| DocError::Parse(format!("bad port {s:?}")))
    };
    Ok(TraceRecord {
        machine: r.machine.clone(),
        pre_state: read_label(&r.pre),
        post_state: read_label(&r.post),
        inputs: r
            .inputs
            .iter()
            .map(|(p, v)| Ok((port(p)?, read_label(v))))
            .collect::<Result<_, DocError>>()?,
        outputs: r
            .outputs
            .iter()
            .map(|(p, v)| Ok((port(p)?, read_label(v))))
            .collect::<Result<_, DocError>>()?,
        nonempty: r.nonempty.iter().map(port).collect::<Result<_, _>>()?,
    })
}

/// Renders a run distribution as a structured document; traces appear in
/// canonical order so the output is byte-stable.
pub fn run_to_doc(run: &RunDistribution, collection: &str) -> RunDoc {
    RunDoc {
        format: RUN_FORMAT.to_string(),
        collection: collection.to_string(),
        k: run.config.k,
        max_activations: run.config.max_activations,
        prune_eps: run.config.prune_eps,
        pruned_mass: run.pruned_mass(),
        truncated_mass: run.truncated_mass(),
        traces: run
            .traces
            .entries()
            .map(|(t, p)| TraceDoc {
                probability: p,
                truncated: t.truncated,
                records: t.records.iter().map(record_to_doc).collect(),
            })
            .collect(),
    }
}

/// Reads the trace distribution back out of a run document.
pub fn traces_from_doc(doc: &RunDoc) -> Result<Distribution<Trace>, DocError> {
    let mut dist = Distribution::new();
    for t in &doc.traces {
        let records = t
            .records
            .iter()
            .map(record_from_doc)
            .collect::<Result<_, _>>()?;
        dist.add(Trace { records, truncated: t.truncated }, t.probability);
    }
    dist.add_pruned(doc.pruned_mass);
    Ok(dist)
}

pub fn view_to_doc(views: &Distribution<View>, machine: &str) -> ViewDoc {
    ViewDoc {
        format: VIEW_FORMAT.to_string(),
        machine: machine.to_string(),
        pruned_mass: views.pruned_mass(),
        views: views
            .entries()
            .map(|(v, p)| TraceDoc {
                probability: p,
                truncated: v.truncated,
                records: v.records.iter().map(record_to_doc).collect(),
            })
            .collect(),
    }
}

pub fn verdicts_to_doc(
    claim_name: &str,
    claim: &crate::security::SecurityClaim,
    verdicts: &[Verdict],
) -> VerdictDoc {
    let mode = match &claim.mode {
        crate::security::ClaimMode::Perfect => "perfect".to_string(),
        crate::security::ClaimMode::Statistical { .. } => "statistical".to_string(),
    };
    let flavor = match claim.flavor {
        crate::security::ClaimFlavor::Standard => "standard".to_string(),
        crate::security::ClaimFlavor::Universal => "universal".to_string(),
    };
    VerdictDoc {
        format: VERDICT_FORMAT.to_string(),
        claim: claim_name.to_string(),
        mode,
        flavor,
        pass: verdicts.iter().all(|v| v.pass),
        witnesses: claim
            .witnesses
            .iter()
            .zip(verdicts)
            .map(|(w, v)| WitnessVerdictDoc {
                user: w.user.name.clone(),
                real_adversary: w.real_adversary.name.clone(),
                simulator: w.simulator.name.clone(),
                pass: v.pass,
                unreliable: v.unreliable,
                per_k: v
                    .per_k
                    .iter()
                    .map(|(k, e)| PerKDoc {
                        k: *k,
                        sd: e.sd,
                        real_defect: e.real_defect,
                        ideal_defect: e.ideal_defect,
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn to_toml<T: serde::Serialize>(value: &T) -> Result<String, DocError> {
    toml::to_string_pretty(value).map_err(|e| DocError::Serialize(e.to_string()))
}

pub fn from_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, DocError> {
    toml::from_str(text).map_err(|e| DocError::Parse(e.to_string()))
}
