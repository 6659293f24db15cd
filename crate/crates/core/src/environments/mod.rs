//! Task environments: the Cobb-Douglas exchange economy and the
//! distributed-table rating-prediction task.

pub mod economy;
pub mod optimize;
pub mod rating;

use serde::{Deserialize, Serialize};

pub use economy::{
    cobb_douglas, econ_metrics, group_total, Allocation, CobbDouglasUtility, EconMetrics,
    EconomyEnv, UtilitySetPreset, GOOD_QUANTITY,
};
pub use optimize::{u_max, OptimizerConfig, UMaxError, UMaxResult};
pub use rating::{ingest_tables, rating_metrics, RatingEnv, RatingMetrics, RatingTask};

/// Which task environment a simulation runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentId {
    Economy,
    Rating,
}

impl EnvironmentId {
    pub fn name(self) -> &'static str {
        match self {
            EnvironmentId::Economy => "economy",
            EnvironmentId::Rating => "rating",
        }
    }
}

/// Environment-specific decision payload carried by a proposal.
///
/// Two bodies are the same proposal iff their canonical bytes are equal:
/// fixed field order, 6 decimal places for allocation amounts, 2 for
/// ratings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProposalBody {
    Allocation { rows: Vec<Vec<f64>> },
    Rating { value: f64 },
}

impl ProposalBody {
    /// Normalized serialized form used for proposal equality and merging.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        match self {
            ProposalBody::Allocation { rows } => {
                let mut out = String::from("alloc:");
                out.push('[');
                for (i, row) in rows.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('[');
                    for (j, amount) in row.iter().enumerate() {
                        if j > 0 {
                            out.push(',');
                        }
                        out.push_str(&format!("{amount:.6}"));
                    }
                    out.push(']');
                }
                out.push(']');
                out.into_bytes()
            }
            ProposalBody::Rating { value } => format!("rating:{value:.2}").into_bytes(),
        }
    }

    pub fn as_allocation(&self) -> Option<Allocation> {
        match self {
            ProposalBody::Allocation { rows } => Allocation::from_rows_unchecked(rows.clone()).ok(),
            ProposalBody::Rating { .. } => None,
        }
    }

    pub fn as_rating(&self) -> Option<f64> {
        match self {
            ProposalBody::Rating { value } => Some(*value),
            ProposalBody::Allocation { .. } => None,
        }
    }
}

/// Problems with a proposal body reported by an environment.
#[derive(Debug, Clone, thiserror::Error)]
pub enum BodyError {
    #[error("expected an {expected} proposal body")]
    WrongKind { expected: &'static str },
    #[error("allocation shape must be {agents} agents x {goods} goods")]
    BadShape { agents: usize, goods: usize },
    #[error("allocation has a negative amount at agent {agent}, good {good}")]
    NegativeAmount { agent: usize, good: usize },
    #[error("good {good} column sums to {sum}, expected {expected}")]
    NotConserved { good: usize, sum: f64, expected: f64 },
    #[error("rating {value} outside [1, 5]")]
    RatingOutOfRange { value: f64 },
    #[error("malformed proposal payload: {0}")]
    Malformed(String),
}

/// Behavior one environment contributes to the engine and the prompts.
pub trait Environment: Send + Sync {
    fn id(&self) -> EnvironmentId;

    /// Number of agents this environment is configured for.
    fn agent_count(&self) -> usize;

    /// Task description shown to every agent.
    fn task_description(&self, roster: &crate::engine::Roster) -> String;

    /// Agent-specific goal/background text.
    fn agent_background(&self, agent: u32, roster: &crate::engine::Roster) -> String;

    /// Own utility description, when the environment defines one.
    fn agent_utility_text(&self, _agent: u32) -> Option<String> {
        None
    }

    /// Display names the environment prefers for its agents.
    fn preferred_names(&self) -> Option<Vec<String>> {
        None
    }

    /// The `proposal_format_text` fragment of the proposal-phase prompt.
    fn proposal_format_text(&self, roster: &crate::engine::Roster) -> String;

    /// Checks a body against the environment's feasibility rules.
    fn validate_body(&self, body: &ProposalBody) -> Result<(), BodyError>;

    /// Parses the `proposal` field of an agent reply into a body.
    fn parse_proposal_payload(
        &self,
        value: &serde_json::Value,
        roster: &crate::engine::Roster,
    ) -> Result<ProposalBody, BodyError>;

    /// Human-readable rendering used in candidate lists.
    fn render_body(&self, body: &ProposalBody, roster: &crate::engine::Roster) -> String;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_bytes_fix_numeric_formatting() {
        let a = ProposalBody::Allocation {
            rows: vec![vec![100.0 / 3.0, 50.0], vec![200.0 / 3.0, 50.0]],
        };
        assert_eq!(
            String::from_utf8(a.canonical_bytes()).unwrap(),
            "alloc:[[33.333333,50.000000],[66.666667,50.000000]]"
        );
        let r = ProposalBody::Rating { value: 3.5 };
        assert_eq!(String::from_utf8(r.canonical_bytes()).unwrap(), "rating:3.50");
    }

    #[test]
    fn bodies_equal_iff_canonical_bytes_equal() {
        let a = ProposalBody::Rating { value: 3.501 };
        let b = ProposalBody::Rating { value: 3.49 };
        let c = ProposalBody::Rating { value: 3.5 };
        assert_eq!(a.canonical_bytes(), c.canonical_bytes());
        assert_ne!(b.canonical_bytes(), c.canonical_bytes());
    }
}
