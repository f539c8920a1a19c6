use serde::{Deserialize, Serialize};

use super::{BlufsConfig, SparsityMode};

/// Degenerate variants of the model used to isolate each level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationCase {
    /// Feature level only: no spectral term, `Y` frozen at the spectral start.
    FeatureOnly,
    /// Clustering level only: no graph term, top-`s` rows picked after solving.
    ClusteringOnly,
    /// Everything except the adaptive graph term.
    NoGraph,
    Full,
}

pub fn ablation_variant(cfg: &BlufsConfig, case: AblationCase) -> BlufsConfig {
    let mut out = cfg.clone();
    match case {
        AblationCase::FeatureOnly => {
            out.alpha = 0.0;
            out.freeze_labels = true;
        }
        AblationCase::ClusteringOnly => {
            out.beta = 0.0;
            out.sparsity = SparsityMode::PostHoc;
        }
        AblationCase::NoGraph => out.beta = 0.0,
        AblationCase::Full => {}
    }
    out
}
