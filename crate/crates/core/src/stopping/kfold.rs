//! Seeded k-fold cross-validation over simulations, comparing the
//! stopping rules against the Oracle and final-round baselines.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dialogue_rule::da_rule_search;
use super::rules::{
    consecutive_agreements, first_agreement, info_diff_rule, info_diff_threshold, oracle_round,
    validation_checkpoint,
};
use super::{Direction, SimRecord, StopDecision, StoppingRule};

#[derive(Debug, thiserror::Error)]
pub enum KfoldError {
    #[error("need at least {k} simulations for {k}-fold evaluation, got {n}")]
    TooFewSimulations { k: usize, n: usize },
    #[error("simulations disagree on round count or direction")]
    Inconsistent,
}

/// Deterministic fold assignment: a seeded shuffle chunked into k folds
/// whose sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    pub fn new(n: usize, k: usize, seed: u64) -> Self {
        let mut indices: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        indices.shuffle(&mut rng);
        let base = n / k;
        let extra = n % k;
        let mut fold_of = vec![0usize; n];
        let mut cursor = 0;
        for fold in 0..k {
            let size = base + usize::from(fold < extra);
            for _ in 0..size {
                fold_of[indices[cursor]] = fold;
                cursor += 1;
            }
        }
        FoldAssignment { fold_of, k }
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|i| self.fold_of[*i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|i| self.fold_of[*i] != fold)
            .collect()
    }
}

/// Per-rule, per-fold aggregate over the fold's test simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFoldOutcome {
    pub rule: StoppingRule,
    pub fold: usize,
    pub mean_performance: f64,
    pub mean_stopped_round: f64,
    /// Fraction of test simulations where the rule fired before round R.
    pub effective_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training_note: Option<String>,
}

/// Whole-run aggregate per rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSummary {
    pub mean_performance: f64,
    pub mean_stopped_round: f64,
    pub effective_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfoldReport {
    pub k: usize,
    pub seed: u64,
    pub outcomes: Vec<RuleFoldOutcome>,
    pub summary: BTreeMap<StoppingRule, RuleSummary>,
}

/// Trains each rule on k-1 folds and records test performance at the
/// stopped round, per rule and fold.
pub fn kfold_evaluate(
    records: &[SimRecord],
    k: usize,
    seed: u64,
    rules: &[StoppingRule],
) -> Result<KfoldReport, KfoldError> {
    let n = records.len();
    if n < k || k < 2 {
        return Err(KfoldError::TooFewSimulations { k, n });
    }
    let rounds = records[0].rounds();
    let direction = records[0].series.direction;
    if records
        .iter()
        .any(|r| r.rounds() != rounds || r.series.direction != direction)
    {
        return Err(KfoldError::Inconsistent);
    }

    let assignment = FoldAssignment::new(n, k, seed);
    let mut outcomes = Vec::new();
    // Per rule: (performance sum, stopped-round sum, effective count, sims).
    let mut totals: BTreeMap<StoppingRule, (f64, f64, usize, usize)> = BTreeMap::new();
    let mut threshold_sums: BTreeMap<StoppingRule, (f64, usize)> = BTreeMap::new();

    for fold in 0..k {
        let train: Vec<&SimRecord> = assignment
            .train_indices(fold)
            .into_iter()
            .map(|i| &records[i])
            .collect();
        let test: Vec<&SimRecord> = assignment
            .test_indices(fold)
            .into_iter()
            .map(|i| &records[i])
            .collect();
        for rule in rules {
            let (decisions, threshold, note) = decide_rule(*rule, &train, &test, direction);
            let sims = test.len();
            let mut performance_sum = 0.0;
            let mut round_sum = 0.0;
            let mut effective = 0usize;
            for (record, decision) in test.iter().zip(&decisions) {
                performance_sum += record.series.at_round(decision.stopped_round);
                round_sum += decision.stopped_round as f64;
                if decision.triggered && decision.stopped_round < rounds {
                    effective += 1;
                }
            }
            let outcome = RuleFoldOutcome {
                rule: *rule,
                fold,
                mean_performance: performance_sum / sims as f64,
                mean_stopped_round: round_sum / sims as f64,
                effective_ratio: effective as f64 / sims as f64,
                threshold,
                training_note: note,
            };
            let entry = totals.entry(*rule).or_insert((0.0, 0.0, 0, 0));
            entry.0 += performance_sum;
            entry.1 += round_sum;
            entry.2 += effective;
            entry.3 += sims;
            if let Some(t) = threshold {
                let sums = threshold_sums.entry(*rule).or_insert((0.0, 0));
                sums.0 += t;
                sums.1 += 1;
            }
            outcomes.push(outcome);
        }
    }

    let summary = totals
        .into_iter()
        .map(|(rule, (perf, rounds_sum, effective, sims))| {
            let mean_threshold = threshold_sums
                .get(&rule)
                .map(|(sum, count)| sum / *count as f64);
            (
                rule,
                RuleSummary {
                    mean_performance: perf / sims as f64,
                    mean_stopped_round: rounds_sum / sims as f64,
                    effective_ratio: effective as f64 / sims as f64,
                    mean_threshold,
                },
            )
        })
        .collect();

    Ok(KfoldReport {
        k,
        seed,
        outcomes,
        summary,
    })
}

/// Applies one rule: trains on `train` where the rule needs it, then
/// produces a decision for every test simulation.
pub fn decide_rule(
    rule: StoppingRule,
    train: &[&SimRecord],
    test: &[&SimRecord],
    direction: Direction,
) -> (Vec<StopDecision>, Option<f64>, Option<String>) {
    match rule {
        StoppingRule::AtFinal => (
            test.iter()
                .map(|r| StopDecision::fallback(r.rounds()))
                .collect(),
            None,
            None,
        ),
        StoppingRule::Oracle => (
            test.iter()
                .map(|r| StopDecision::triggered_at(oracle_round(&r.series)))
                .collect(),
            None,
            None,
        ),
        StoppingRule::FirstAgreement => {
            (test.iter().map(|r| first_agreement(r)).collect(), None, None)
        }
        StoppingRule::ConsecutiveAgreements => (
            test.iter().map(|r| consecutive_agreements(r)).collect(),
            None,
            None,
        ),
        StoppingRule::ValidationCheckpoint => match validation_checkpoint(train) {
            Ok(checkpoint) => (
                test.iter()
                    .map(|_| StopDecision::triggered_at(checkpoint))
                    .collect(),
                None,
                None,
            ),
            Err(error) => (
                test.iter()
                    .map(|r| StopDecision::fallback(r.rounds()))
                    .collect(),
                None,
                Some(error.to_string()),
            ),
        },
        StoppingRule::InfoDifference => match info_diff_threshold(train) {
            Ok(threshold) => (
                test.iter().map(|r| info_diff_rule(threshold, r)).collect(),
                Some(threshold),
                None,
            ),
            Err(error) => (
                test.iter()
                    .map(|r| StopDecision::fallback(r.rounds()))
                    .collect(),
                None,
                Some(error.to_string()),
            ),
        },
        StoppingRule::DialogueAct => match da_rule_search(train, direction) {
            Ok(rule) => {
                let note = if rule.selected_pairs.is_empty() {
                    Some("no candidate pairs; rule untriggered".to_string())
                } else {
                    None
                };
                (test.iter().map(|r| rule.apply(r)).collect(), None, note)
            }
            Err(error) => (
                test.iter()
                    .map(|r| StopDecision::fallback(r.rounds()))
                    .collect(),
                None,
                Some(error.to_string()),
            ),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_disjoint_covering_and_balanced() {
        let assignment = FoldAssignment::new(23, 5, 99);
        let mut counts = vec![0usize; 5];
        for fold in &assignment.fold_of {
            counts[*fold] += 1;
        }
        let total: usize = counts.iter().sum();
        assert_eq!(total, 23);
        let max = counts.iter().max().unwrap();
        let min = counts.iter().min().unwrap();
        assert!(max - min <= 1, "sizes {counts:?}");
    }

    #[test]
    fn fold_assignment_is_seed_reproducible() {
        let a = FoldAssignment::new(50, 5, 1234);
        let b = FoldAssignment::new(50, 5, 1234);
        let c = FoldAssignment::new(50, 5, 4321);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn too_few_simulations_is_an_error() {
        let records: Vec<SimRecord> = Vec::new();
        assert!(matches!(
            kfold_evaluate(&records, 5, 0, &[StoppingRule::Oracle]),
            Err(KfoldError::TooFewSimulations { .. })
        ));
    }
}
