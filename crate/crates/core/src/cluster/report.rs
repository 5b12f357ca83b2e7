use serde::{Deserialize, Serialize};

/// Evaluation summary written as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
    /// Loss terms switched off for this run, e.g. `["mi"]`.
    pub ablation: Vec<String>,
    /// Present only when the dataset has no labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStats {
    pub n: usize,
    pub dim: usize,
    pub inertia: f64,
    pub cluster_sizes: Vec<usize>,
}
