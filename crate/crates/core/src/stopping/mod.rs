//! Early-stopping evaluators: the six rules, the dialogue-act OLS rule
//! with its greedy hyperparameter search, and 5-fold cross-validation.

pub mod dialogue_rule;
pub mod kfold;
pub mod ols;
pub mod rules;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::linguistics::DialogueAct;

pub use dialogue_rule::{da_pair_features, da_rule_search, DaHyperParams, DaRule, PairFeatureRow};
pub use kfold::{kfold_evaluate, FoldAssignment, KfoldError, KfoldReport, RuleFoldOutcome};
pub use ols::{ols_fit, two_sided_p, OlsError, OlsResult, OlsTerm};
pub use rules::{
    consecutive_agreements, first_agreement, info_diff_rule, oracle_round, validation_checkpoint,
};

/// Whether larger or smaller per-round values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Economy: normalized group utility.
    HigherBetter,
    /// Recommendation: absolute error.
    LowerBetter,
}

impl Direction {
    /// True when `a` is at least as good as `b`.
    pub fn at_least(self, a: f64, b: f64) -> bool {
        match self {
            Direction::HigherBetter => a >= b,
            Direction::LowerBetter => a <= b,
        }
    }

    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::HigherBetter => a > b,
            Direction::LowerBetter => a < b,
        }
    }
}

/// Per-round performance of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSeries {
    pub values: Vec<f64>,
    pub direction: Direction,
}

impl PerformanceSeries {
    pub fn rounds(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn at_round(&self, round: u32) -> f64 {
        self.values[round as usize - 1]
    }
}

/// Where a rule stopped one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopDecision {
    pub stopped_round: u32,
    /// True when the rule's condition fired; false on fallback to R.
    pub triggered: bool,
}

impl StopDecision {
    pub fn triggered_at(round: u32) -> Self {
        StopDecision {
            stopped_round: round,
            triggered: true,
        }
    }

    pub fn fallback(final_round: u32) -> Self {
        StopDecision {
            stopped_round: final_round,
            triggered: false,
        }
    }
}

/// The stopping evaluators compared by the cross-validation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoppingRule {
    AtFinal,
    FirstAgreement,
    ConsecutiveAgreements,
    ValidationCheckpoint,
    InfoDifference,
    DialogueAct,
    Oracle,
}

impl StoppingRule {
    pub const ALL: [StoppingRule; 7] = [
        StoppingRule::AtFinal,
        StoppingRule::FirstAgreement,
        StoppingRule::ConsecutiveAgreements,
        StoppingRule::ValidationCheckpoint,
        StoppingRule::InfoDifference,
        StoppingRule::DialogueAct,
        StoppingRule::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StoppingRule::AtFinal => "at-final",
            StoppingRule::FirstAgreement => "first-agreement",
            StoppingRule::ConsecutiveAgreements => "consecutive-agreements",
            StoppingRule::ValidationCheckpoint => "validation-checkpoint",
            StoppingRule::InfoDifference => "info-difference",
            StoppingRule::DialogueAct => "dialogue-act",
            StoppingRule::Oracle => "oracle",
        }
    }
}

/// Everything the rules need to know about one finished simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub simulation: u64,
    pub series: PerformanceSeries,
    /// Rounds whose voting outcome selected a proposal.
    pub selected_rounds: Vec<u32>,
    /// Per round, whether any agent made a new proposal.
    pub proposal_activity: Vec<bool>,
    /// Information difference per round; round 1 is undefined.
    pub info_difference: Vec<Option<f64>>,
    /// Dialogue acts per round per agent (empty when unlabeled).
    pub labels: Vec<Vec<BTreeSet<DialogueAct>>>,
}

impl SimRecord {
    pub fn rounds(&self) -> u32 {
        self.series.rounds()
    }
}
