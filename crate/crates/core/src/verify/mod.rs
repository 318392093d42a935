//! Exact oracles and statistical cross-checks.

pub mod chain_law;
pub mod dist;
pub mod figure1;
pub mod lf;
pub mod suite;
pub mod tree_law;
pub mod weight;
pub mod witness;

use serde::Serialize;

pub use chain_law::{exact_chain_law, exact_chain_prefix_law, exact_d_chain_law};
pub use dist::{exact_tv, tv_distance, tv_upper_bound, DistTable};
pub use tree_law::{brute_force_tree_law, exact_tree_law};
pub use weight::{rational_available, Weight};

/// Budgets for the enumeration oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumOptions {
    /// Largest number of trees or live states before giving up.
    pub max_states: usize,
    /// Paths lighter than this are dropped (inexact weights only).
    pub prune: f64,
    /// Tail mass at which infinite offspring laws are cut.
    pub law_tail: f64,
    /// Tail mass at which infinite `eta` laws are cut.
    pub eta_tail: f64,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { max_states: 2_000_000, prune: 1e-18, law_tail: 1e-16, eta_tail: 1e-16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub env_digest: String,
    pub metric: f64,
    pub threshold: f64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckReport {
    /// A check that passes when `metric < threshold`.
    pub fn below(check: &str, env_digest: &str, metric: f64, threshold: f64) -> Self {
        let status = if metric < threshold { Status::Pass } else { Status::Fail };
        CheckReport {
            check: check.into(),
            env_digest: env_digest.into(),
            metric,
            threshold,
            status,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
