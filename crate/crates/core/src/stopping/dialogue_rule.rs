//! The dialogue-act stopping rule: OLS over one-hot act-pair features,
//! then a greedy hyperparameter search for the stop trigger.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ols::{ols_fit, OlsError};
use super::{Direction, SimRecord, StopDecision};
use crate::linguistics::DialogueAct;

/// An ordered act pair: one act from round r-1, another from round r.
pub type ActPair = (DialogueAct, DialogueAct);

/// The Appendix-style hyperparameter grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaHyperParams {
    /// Number of top-coefficient pairs used as stop candidates, 1..=5.
    pub top_da: usize,
    /// p-value gate for candidate pairs; `None` admits every pair.
    pub p_value_threshold: Option<f64>,
    /// Occurrences of a candidate pair needed within a round, 1..=3.
    pub count_per_round: u64,
    /// Score a round must reach to stop, 1..=top_da.
    pub score_threshold: usize,
}

pub const P_VALUE_GRID: [Option<f64>; 4] = [Some(0.05), Some(0.1), Some(0.2), None];
pub const TOP_DA_RANGE: std::ops::RangeInclusive<usize> = 1..=5;
pub const COUNT_PER_ROUND_RANGE: std::ops::RangeInclusive<u64> = 1..=3;

/// One regression row: pair indicators for (round r-1, round r) and the
/// performance at round r.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatureRow {
    pub simulation: u64,
    pub round: u32,
    pub pairs: BTreeSet<ActPair>,
    pub performance: f64,
}

/// Collects one row per (simulation, round r in [2, R]). A pair (A, B)
/// is set when some agent i had A at r-1 and some other agent had B at r.
pub fn da_pair_features(record: &SimRecord) -> Vec<PairFeatureRow> {
    let rounds = record.rounds();
    let mut rows = Vec::new();
    for round in 2..=rounds {
        rows.push(PairFeatureRow {
            simulation: record.simulation,
            round,
            pairs: pairs_in_round(record, round),
            performance: record.series.at_round(round),
        });
    }
    rows
}

/// The distinct pairs present at round r (sources from r-1).
fn pairs_in_round(record: &SimRecord, round: u32) -> BTreeSet<ActPair> {
    pair_counts_in_round(record, round).into_keys().collect()
}

/// Occurrence counts per pair at round r, counting (i, j) agent tuples.
pub fn pair_counts_in_round(record: &SimRecord, round: u32) -> BTreeMap<ActPair, u64> {
    let mut counts = BTreeMap::new();
    if round < 2 || round > record.rounds() {
        return counts;
    }
    let previous = &record.labels[round as usize - 2];
    let current = &record.labels[round as usize - 1];
    let agents = previous.len();
    for i in 0..agents {
        for j in 0..agents {
            if i == j {
                continue;
            }
            for a in &previous[i] {
                for b in &current[j] {
                    *counts.entry((*a, *b)).or_insert(0) += 1;
                }
            }
        }
    }
    counts
}

/// A trained dialogue-act stop rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DaRule {
    pub params: DaHyperParams,
    /// Stop-signal pairs, strongest first. Empty means never triggered.
    pub selected_pairs: Vec<ActPair>,
}

impl DaRule {
    /// Untriggered rule: always falls back to the final round.
    pub fn untriggered() -> Self {
        DaRule {
            params: DaHyperParams {
                top_da: 1,
                p_value_threshold: None,
                count_per_round: 1,
                score_threshold: 1,
            },
            selected_pairs: Vec::new(),
        }
    }

    /// Applies the trained trigger to one simulation.
    pub fn apply(&self, record: &SimRecord) -> StopDecision {
        if self.selected_pairs.is_empty() {
            return StopDecision::fallback(record.rounds());
        }
        for round in 2..=record.rounds() {
            let counts = pair_counts_in_round(record, round);
            let score = self
                .selected_pairs
                .iter()
                .filter(|pair| {
                    counts.get(*pair).copied().unwrap_or(0) >= self.params.count_per_round
                })
                .count();
            if score >= self.params.score_threshold {
                return StopDecision::triggered_at(round);
            }
        }
        StopDecision::fallback(record.rounds())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DaSearchError {
    #[error("no feature rows in the training set")]
    NoRows,
    #[error(transparent)]
    Ols(#[from] OlsError),
}

/// Fits OLS on the training rows and greedily searches the grid,
/// keeping the combination with the best mean training performance.
/// Ties prefer smaller `top_da`, then lower `score_threshold`. A rule
/// that cannot beat the untriggered @R policy on its own training set is
/// replaced by the untriggered rule.
pub fn da_rule_search(train: &[&SimRecord], direction: Direction) -> Result<DaRule, DaSearchError> {
    let rows: Vec<PairFeatureRow> = train
        .iter()
        .flat_map(|record| da_pair_features(record))
        .collect();
    if rows.is_empty() {
        return Err(DaSearchError::NoRows);
    }

    // Column layout: intercept, then one indicator per observed pair.
    let observed: Vec<ActPair> = {
        let mut set = BTreeSet::new();
        for row in &rows {
            set.extend(row.pairs.iter().copied());
        }
        set.into_iter().collect()
    };
    if observed.is_empty() {
        return Ok(DaRule::untriggered());
    }
    let design: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| {
            let mut features = vec![1.0];
            features.extend(
                observed
                    .iter()
                    .map(|pair| if row.pairs.contains(pair) { 1.0 } else { 0.0 }),
            );
            features
        })
        .collect();
    let response: Vec<f64> = rows.iter().map(|row| row.performance).collect();
    let fit = match ols_fit(&design, &response) {
        Ok(fit) => fit,
        // Degenerate training sets cannot support the rule.
        Err(OlsError::TooFewObservations { .. } | OlsError::Singular) => {
            return Ok(DaRule::untriggered())
        }
        Err(error) => return Err(error.into()),
    };

    let baseline = mean_performance_at(train, |record| StopDecision::fallback(record.rounds()));
    let mut best: Option<(f64, DaRule)> = None;

    for p_threshold in P_VALUE_GRID {
        // Candidates passing the p gate, ranked by coefficient in the
        // stop-favorable direction: most negative for higher-better
        // performance, most positive for lower-better.
        let mut candidates: Vec<(ActPair, f64)> = observed
            .iter()
            .enumerate()
            .filter_map(|(index, pair)| {
                let term = fit.term(index + 1)?;
                match p_threshold {
                    Some(gate) if term.p_value >= gate => None,
                    _ => Some((*pair, term.beta)),
                }
            })
            .collect();
        candidates.sort_by(|a, b| match direction {
            Direction::HigherBetter => a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal),
            Direction::LowerBetter => b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal),
        });
        if candidates.is_empty() {
            continue;
        }
        for top_da in TOP_DA_RANGE {
            let selected: Vec<ActPair> = candidates
                .iter()
                .take(top_da)
                .map(|(pair, _)| *pair)
                .collect();
            if selected.is_empty() {
                continue;
            }
            for count_per_round in COUNT_PER_ROUND_RANGE {
                for score_threshold in 1..=top_da.min(selected.len()) {
                    let rule = DaRule {
                        params: DaHyperParams {
                            top_da,
                            p_value_threshold: p_threshold,
                            count_per_round,
                            score_threshold,
                        },
                        selected_pairs: selected.clone(),
                    };
                    let mean = mean_performance_at(train, |record| rule.apply(record));
                    let better = match &best {
                        None => true,
                        Some((best_mean, best_rule)) => {
                            if direction.better(mean, *best_mean) {
                                true
                            } else if mean == *best_mean {
                                (top_da, score_threshold)
                                    < (best_rule.params.top_da, best_rule.params.score_threshold)
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        best = Some((mean, rule));
                    }
                }
            }
        }
    }

    match best {
        Some((mean, rule)) if direction.at_least(mean, baseline) => Ok(rule),
        _ => Ok(DaRule::untriggered()),
    }
}

fn mean_performance_at(
    records: &[&SimRecord],
    stop: impl Fn(&SimRecord) -> StopDecision,
) -> f64 {
    let total: f64 = records
        .iter()
        .map(|record| record.series.at_round(stop(record).stopped_round))
        .sum();
    total / records.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stopping::PerformanceSeries;

    fn acts(list: &[DialogueAct]) -> BTreeSet<DialogueAct> {
        list.iter().copied().collect()
    }

    fn planted_record(simulation: u64, peak: u32) -> SimRecord {
        // V-shaped utility peaking at `peak`; the Accept act joins the
        // conversation from the peak round onward, so late pairs like
        // (Accept -> Accept) precede the decay.
        let rounds = 10u32;
        let values: Vec<f64> = (1..=rounds)
            .map(|r| {
                if r <= peak {
                    0.2 + 0.15 * r as f64
                } else {
                    0.2 + 0.15 * peak as f64 - 0.05 * (r - peak) as f64
                }
            })
            .collect();
        let labels: Vec<Vec<BTreeSet<DialogueAct>>> = (1..=rounds)
            .map(|r| {
                let base = if r >= peak {
                    acts(&[DialogueAct::Inform, DialogueAct::Request, DialogueAct::Accept])
                } else {
                    acts(&[DialogueAct::Inform, DialogueAct::Request])
                };
                vec![base.clone(), base.clone(), base]
            })
            .collect();
        SimRecord {
            simulation,
            series: PerformanceSeries {
                values,
                direction: Direction::HigherBetter,
            },
            selected_rounds: vec![peak],
            proposal_activity: vec![true; rounds as usize],
            info_difference: vec![None; rounds as usize],
            labels,
        }
    }

    #[test]
    fn pair_rule_example_two_agents() {
        // Agents hold ({Inform}, {Request}) in both rounds, so only the
        // cross pairs appear.
        let mut record = planted_record(0, 4);
        record.labels = vec![
            vec![acts(&[DialogueAct::Inform]), acts(&[DialogueAct::Request])],
            vec![acts(&[DialogueAct::Inform]), acts(&[DialogueAct::Request])],
        ];
        record.series = PerformanceSeries {
            values: vec![0.5, 0.6],
            direction: Direction::HigherBetter,
        };
        let rows = da_pair_features(&record);
        assert_eq!(rows.len(), 1);
        let pairs = &rows[0].pairs;
        assert_eq!(
            pairs,
            &BTreeSet::from([
                (DialogueAct::Inform, DialogueAct::Request),
                (DialogueAct::Request, DialogueAct::Inform),
            ])
        );
    }

    #[test]
    fn all_agents_sharing_an_act_sets_the_self_pair() {
        let mut record = planted_record(0, 4);
        record.labels = vec![
            vec![acts(&[DialogueAct::Inform]), acts(&[DialogueAct::Inform])],
            vec![acts(&[DialogueAct::Inform]), acts(&[DialogueAct::Inform])],
        ];
        record.series = PerformanceSeries {
            values: vec![0.5, 0.6],
            direction: Direction::HigherBetter,
        };
        let rows = da_pair_features(&record);
        assert!(rows[0]
            .pairs
            .contains(&(DialogueAct::Inform, DialogueAct::Inform)));
    }

    #[test]
    fn search_finds_planted_stop_signal() {
        // Peaks vary across simulations so the late-pair indicators are
        // not collinear with the intercept.
        let train: Vec<SimRecord> = (0..12)
            .map(|s| planted_record(s, 3 + (s % 3) as u32))
            .collect();
        let refs: Vec<&SimRecord> = train.iter().collect();
        let rule = da_rule_search(&refs, Direction::HigherBetter).unwrap();
        assert!(
            rule.selected_pairs
                .iter()
                .any(|(a, b)| *a == DialogueAct::Accept || *b == DialogueAct::Accept),
            "selected {:?}",
            rule.selected_pairs
        );
        // The trigger fires at or right after the peak on every training sim.
        for record in &train {
            let peak = oracle_round_of(record);
            let decision = rule.apply(record);
            assert!(decision.triggered);
            assert!(
                decision.stopped_round >= peak && decision.stopped_round <= peak + 1,
                "peak {peak}, stopped {}",
                decision.stopped_round
            );
        }
    }

    fn oracle_round_of(record: &SimRecord) -> u32 {
        crate::stopping::rules::oracle_round(&record.series)
    }

    #[test]
    fn search_never_loses_to_the_final_round_baseline_on_train() {
        let train: Vec<SimRecord> = (0..8).map(|s| planted_record(s, 4)).collect();
        let refs: Vec<&SimRecord> = train.iter().collect();
        let rule = da_rule_search(&refs, Direction::HigherBetter).unwrap();
        let rule_mean = refs
            .iter()
            .map(|r| r.series.at_round(rule.apply(r).stopped_round))
            .sum::<f64>()
            / refs.len() as f64;
        let baseline = refs
            .iter()
            .map(|r| r.series.at_round(r.rounds()))
            .sum::<f64>()
            / refs.len() as f64;
        assert!(rule_mean >= baseline);
    }

    #[test]
    fn all_identical_features_fall_back_to_untriggered() {
        // Every round shows the same single pair, so the indicator is
        // constant and collinear with the intercept.
        let mut train = Vec::new();
        for s in 0..6 {
            let mut record = planted_record(s, 4);
            record.labels = (0..10)
                .map(|_| vec![acts(&[DialogueAct::Inform]); 3])
                .collect();
            train.push(record);
        }
        let refs: Vec<&SimRecord> = train.iter().collect();
        let rule = da_rule_search(&refs, Direction::HigherBetter).unwrap();
        // The lone pair indicator is constant, collinear with the
        // intercept, so no candidate survives.
        assert!(rule.selected_pairs.is_empty());
    }
}
