//! The per-simulation stopping rules. Every rule is total: when its
//! condition never fires it falls back to the final round, untriggered.

use super::{Direction, PerformanceSeries, SimRecord, StopDecision};

/// Best achievable round for one series: argmax (argmin for error
/// metrics), earliest on ties.
pub fn oracle_round(series: &PerformanceSeries) -> u32 {
    let mut best_round = 1u32;
    let mut best_value = series.values[0];
    for (index, value) in series.values.iter().enumerate().skip(1) {
        let better = match series.direction {
            Direction::HigherBetter => *value > best_value,
            Direction::LowerBetter => *value < best_value,
        };
        if better {
            best_value = *value;
            best_round = index as u32 + 1;
        }
    }
    best_round
}

/// Stops at the first round whose outcome selected a proposal.
pub fn first_agreement(record: &SimRecord) -> StopDecision {
    match record.selected_rounds.first() {
        Some(round) => StopDecision::triggered_at(*round),
        None => StopDecision::fallback(record.rounds()),
    }
}

/// Stops at the first round r >= 2 where the previous round accepted a
/// proposal and nobody proposed anything new in round r.
pub fn consecutive_agreements(record: &SimRecord) -> StopDecision {
    for round in 2..=record.rounds() {
        let previous_selected = record.selected_rounds.contains(&(round - 1));
        let quiet = !record
            .proposal_activity
            .get(round as usize - 1)
            .copied()
            .unwrap_or(false);
        if previous_selected && quiet {
            return StopDecision::triggered_at(round);
        }
    }
    StopDecision::fallback(record.rounds())
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("empty training set")]
    EmptyTrain,
    #[error("threshold undefined: every training oracle round is 1")]
    ThresholdUndefined,
}

/// Mean of the per-simulation oracle rounds on the training set, rounded
/// half-up into [1, R].
pub fn validation_checkpoint(train: &[&SimRecord]) -> Result<u32, RuleError> {
    if train.is_empty() {
        return Err(RuleError::EmptyTrain);
    }
    let rounds = train[0].rounds();
    let mean: f64 = train
        .iter()
        .map(|record| oracle_round(&record.series) as f64)
        .sum::<f64>()
        / train.len() as f64;
    let rounded = (mean + 0.5).floor() as u32;
    Ok(rounded.clamp(1, rounds))
}

/// Threshold for the information-difference rule: the mean training
/// info-difference at each simulation's oracle round. Simulations whose
/// oracle round is 1 are excluded since the feature is undefined there.
pub fn info_diff_threshold(train: &[&SimRecord]) -> Result<f64, RuleError> {
    if train.is_empty() {
        return Err(RuleError::EmptyTrain);
    }
    let mut values = Vec::new();
    for record in train {
        let round = oracle_round(&record.series);
        if round < 2 {
            continue;
        }
        if let Some(Some(value)) = record.info_difference.get(round as usize - 1) {
            values.push(*value);
        }
    }
    if values.is_empty() {
        return Err(RuleError::ThresholdUndefined);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Stops at the first round r >= 2 whose information difference drops
/// strictly below the trained threshold.
pub fn info_diff_rule(threshold: f64, test: &SimRecord) -> StopDecision {
    for round in 2..=test.rounds() {
        if let Some(Some(value)) = test.info_difference.get(round as usize - 1) {
            if *value < threshold {
                return StopDecision::triggered_at(round);
            }
        }
    }
    StopDecision::fallback(test.rounds())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn record(values: Vec<f64>, direction: Direction) -> SimRecord {
        let rounds = values.len();
        SimRecord {
            simulation: 0,
            series: PerformanceSeries { values, direction },
            selected_rounds: vec![],
            proposal_activity: vec![true; rounds],
            info_difference: vec![None; rounds],
            labels: vec![vec![BTreeSet::new()]; rounds],
        }
    }

    #[test]
    fn oracle_takes_earliest_peak() {
        let series = PerformanceSeries {
            values: vec![0.2, 0.8, 0.8, 0.5],
            direction: Direction::HigherBetter,
        };
        assert_eq!(oracle_round(&series), 2);
    }

    #[test]
    fn oracle_monotone_series_ends_at_final_round() {
        let series = PerformanceSeries {
            values: (1..=10).map(|r| r as f64).collect(),
            direction: Direction::HigherBetter,
        };
        assert_eq!(oracle_round(&series), 10);
    }

    #[test]
    fn oracle_respects_direction_flag() {
        let series = PerformanceSeries {
            values: vec![0.9, 0.7, 0.4, 0.6],
            direction: Direction::LowerBetter,
        };
        assert_eq!(oracle_round(&series), 3);
    }

    #[test]
    fn first_agreement_examples() {
        let mut r = record(vec![0.0; 10], Direction::HigherBetter);
        r.selected_rounds = vec![4, 7];
        assert_eq!(first_agreement(&r), StopDecision::triggered_at(4));

        r.selected_rounds = vec![];
        assert_eq!(first_agreement(&r), StopDecision::fallback(10));

        r.selected_rounds = vec![1];
        assert_eq!(first_agreement(&r), StopDecision::triggered_at(1));
    }

    #[test]
    fn consecutive_agreements_needs_quiet_round_after_acceptance() {
        let mut r = record(vec![0.0; 10], Direction::HigherBetter);
        r.selected_rounds = vec![3];
        r.proposal_activity = vec![true, true, true, false, true, true, true, true, true, true];
        assert_eq!(consecutive_agreements(&r), StopDecision::triggered_at(4));

        // A new proposal in round 4 suppresses the trigger.
        r.proposal_activity = vec![true; 10];
        assert_eq!(consecutive_agreements(&r), StopDecision::fallback(10));

        r.selected_rounds = vec![];
        r.proposal_activity = vec![false; 10];
        assert_eq!(consecutive_agreements(&r), StopDecision::fallback(10));
    }

    #[test]
    fn checkpoint_rounds_half_up() {
        let a = record(vec![0.1, 0.9, 0.3, 0.2], Direction::HigherBetter); // oracle 2
        let b = record(vec![0.1, 0.2, 0.9, 0.2], Direction::HigherBetter); // oracle 3
        let c = record(vec![0.1, 0.2, 0.3, 0.9], Direction::HigherBetter); // oracle 4
        assert_eq!(validation_checkpoint(&[&a, &b, &c]).unwrap(), 3);
        // Mean 2.5 rounds half-up to 3.
        assert_eq!(validation_checkpoint(&[&a, &b]).unwrap(), 3);
        // Single simulation.
        assert_eq!(validation_checkpoint(&[&c]).unwrap(), 4);
    }

    #[test]
    fn info_diff_rule_first_crossing() {
        let mut r = record(vec![0.0; 4], Direction::HigherBetter);
        r.info_difference = vec![None, Some(0.30), Some(0.20), Some(0.15)];
        assert_eq!(info_diff_rule(0.17, &r), StopDecision::triggered_at(4));
        assert_eq!(info_diff_rule(0.10, &r), StopDecision::fallback(4));
    }

    #[test]
    fn info_diff_threshold_averages_oracle_round_values() {
        let mut a = record(vec![0.1, 0.9, 0.3, 0.2], Direction::HigherBetter);
        a.info_difference = vec![None, Some(0.20), Some(0.10), Some(0.05)];
        let mut b = record(vec![0.1, 0.2, 0.9, 0.2], Direction::HigherBetter);
        b.info_difference = vec![None, Some(0.30), Some(0.14), Some(0.05)];
        let threshold = info_diff_threshold(&[&a, &b]).unwrap();
        assert!((threshold - 0.17).abs() < 1e-12);
    }

    #[test]
    fn info_diff_threshold_excludes_round_one_oracles() {
        let mut early = record(vec![0.9, 0.1, 0.1, 0.1], Direction::HigherBetter);
        early.info_difference = vec![None, Some(0.5), Some(0.5), Some(0.5)];
        assert!(matches!(
            info_diff_threshold(&[&early]),
            Err(RuleError::ThresholdUndefined)
        ));
    }
}
