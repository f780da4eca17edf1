//! Serde model of the network-description document; a thin, readable
//! layer over the core types with ports as strings, ε spelled out, and
//! matrices as row-major arrays of (re, im) pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const NETWORK_FORMAT: &str = "qrsim-network/1";
pub const RUN_FORMAT: &str = "qrsim-run/1";
pub const VIEW_FORMAT: &str = "qrsim-view/1";
pub const VERDICT_FORMAT: &str = "qrsim-verdict/1";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NetworkDoc {
    pub format: String,
    pub alphabet: AlphabetDoc,
    #[serde(default)]
    pub defaults: DefaultsDoc,
    #[serde(default, rename = "machine")]
    pub machines: Vec<MachineDoc>,
    #[serde(default, rename = "buffer")]
    pub buffers: Vec<BufferDoc>,
    #[serde(default, rename = "collection")]
    pub collections: Vec<CollectionDoc>,
    #[serde(default, rename = "structure")]
    pub structures: Vec<StructureDoc>,
    #[serde(default, rename = "configuration")]
    pub configurations: Vec<ConfigurationDoc>,
    #[serde(default, rename = "claim")]
    pub claims: Vec<ClaimDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AlphabetDoc {
    /// The symbols of Σ, as one string of characters.
    pub symbols: String,
    pub max_len: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DefaultsDoc {
    pub queue_cap: usize,
    pub max_k: usize,
}

impl Default for DefaultsDoc {
    fn default() -> Self {
        DefaultsDoc { queue_cap: 4, max_k: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MachineDoc {
    pub name: String,
    /// Ordered port list, e.g. ["clk<?", "p!", "p<!"].
    pub ports: Vec<String>,
    /// Ports carrying quantum payloads (everything else is classical).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quantum_ports: Vec<String>,
    pub qstates: Vec<String>,
    pub cstates: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fin: Vec<String>,
    /// (state, in-port) pairs whose length function is 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub len_zero: Vec<(String, String)>,
    pub delta: DeltaDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaDoc {
    /// Dense Kraus channel over qstates ⊗ cstates ⊗ in-ports ⊗ out-ports.
    Kraus { operators: Vec<MatrixDoc> },
    Program { program: Vec<InstructionDoc> },
    Canonised { inner: Box<DeltaDoc> },
    Combined { left: Box<MachineDoc>, right: Box<MachineDoc> },
}

/// Row-major complex matrix: rows of (re, im) pairs.
pub type MatrixDoc = Vec<Vec<(f64, f64)>>;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum InstructionDoc {
    Unitary { matrix: MatrixDoc, targets: Vec<String> },
    Measure { target: String, var: String },
    Prepare { target: String, value: ExprDoc },
    Copy { src: String, dst: String },
    Sample { target: String, choices: Vec<(String, f64)> },
    Branch {
        pred: PredDoc,
        #[serde(default, skip_serializing_if = "Vec::is_empty", rename = "then")]
        then_branch: Vec<InstructionDoc>,
        #[serde(default, skip_serializing_if = "Vec::is_empty", rename = "else")]
        else_branch: Vec<InstructionDoc>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ExprDoc {
    Lit(String),
    Var(String),
    Concat(Vec<ExprDoc>),
    Xor(Box<ExprDoc>, Box<ExprDoc>),
    OnesLen(Box<ExprDoc>),
    StripPrefix { expr: Box<ExprDoc>, prefix: String },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum PredDoc {
    Eq { var: String, value: String },
    In { var: String, values: Vec<String> },
    Not(Box<PredDoc>),
    All(Vec<PredDoc>),
    Any(Vec<PredDoc>),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BufferDoc {
    /// Connection name; the buffer machine is called `name~`.
    pub name: String,
    pub queue_cap: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CollectionDoc {
    pub name: String,
    pub machines: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StructureDoc {
    pub name: String,
    pub machines: Vec<String>,
    pub service: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConfigurationDoc {
    pub name: String,
    pub structure: String,
    pub user: String,
    pub adversary: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClaimDoc {
    pub name: String,
    pub real: String,
    pub ideal: String,
    /// "perfect" or "statistical".
    pub mode: String,
    /// Per-k statistical-distance bounds (statistical mode only).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bounds: BTreeMap<String, f64>,
    /// "standard" or "universal".
    pub flavor: String,
    #[serde(rename = "witness")]
    pub witnesses: Vec<WitnessDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WitnessDoc {
    pub user: String,
    pub real_adversary: String,
    pub simulator: String,
}

// --- structured output documents -------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunDoc {
    pub format: String,
    pub collection: String,
    pub k: usize,
    pub max_activations: usize,
    pub prune_eps: f64,
    pub pruned_mass: f64,
    pub truncated_mass: f64,
    #[serde(rename = "trace")]
    pub traces: Vec<TraceDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TraceDoc {
    pub probability: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
    #[serde(default, rename = "record")]
    pub records: Vec<RecordDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RecordDoc {
    pub machine: String,
    pub pre: String,
    pub post: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nonempty: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ViewDoc {
    pub format: String,
    pub machine: String,
    pub pruned_mass: f64,
    #[serde(rename = "view")]
    pub views: Vec<TraceDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerdictDoc {
    pub format: String,
    pub claim: String,
    pub mode: String,
    pub flavor: String,
    pub pass: bool,
    #[serde(rename = "witness")]
    pub witnesses: Vec<WitnessVerdictDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WitnessVerdictDoc {
    pub user: String,
    pub real_adversary: String,
    pub simulator: String,
    pub pass: bool,
    pub unreliable: bool,
    #[serde(rename = "per_k")]
    pub per_k: Vec<PerKDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PerKDoc {
    pub k: usize,
    pub sd: f64,
    pub real_defect: f64,
    pub ideal_defect: f64,
}
