//! Ballot shapes and the six tally mechanisms.
//!
//! All six mechanisms map a candidate slate plus one ballot per agent to
//! either `Selected(candidate)` or `Deferred`. Score totals are kept as
//! exact rationals so that ranked-ballot comparisons like `1 + 1/3`
//! versus `1/2 + 1/2 + 1/3` never go through floating point.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};
use serde::{Deserialize, Serialize};

/// Candidate identifier inside a slate; equal to the proposal id.
pub type CandidateId = u64;

/// Agent index inside a simulation, `0..K`.
pub type AgentIndex = u32;

/// Absolute tolerance for cumulative-ballot budget checks and top-score ties.
pub const CUMULATIVE_TOLERANCE: f64 = 1e-9;

/// The six group decision mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Unanimous,
    Majority,
    Plurality,
    Rated,
    Ranked,
    Cumulative,
}

impl Mechanism {
    pub const ALL: [Mechanism; 6] = [
        Mechanism::Unanimous,
        Mechanism::Majority,
        Mechanism::Plurality,
        Mechanism::Rated,
        Mechanism::Ranked,
        Mechanism::Cumulative,
    ];

    /// One-vote mechanisms take single-choice ballots; the rest are score-based.
    pub fn is_single_choice(self) -> bool {
        matches!(
            self,
            Mechanism::Unanimous | Mechanism::Majority | Mechanism::Plurality
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Unanimous => "unanimous",
            Mechanism::Majority => "majority",
            Mechanism::Plurality => "plurality",
            Mechanism::Rated => "rated",
            Mechanism::Ranked => "ranked",
            Mechanism::Cumulative => "cumulative",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Error naming all six valid mechanism spellings.
#[derive(Debug, thiserror::Error)]
#[error("unknown mechanism `{0}`; expected one of unanimous, majority, plurality, rated, ranked, cumulative")]
pub struct UnknownMechanism(pub String);

impl FromStr for Mechanism {
    type Err = UnknownMechanism;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "unanimous" => Ok(Mechanism::Unanimous),
            "majority" => Ok(Mechanism::Majority),
            "plurality" => Ok(Mechanism::Plurality),
            "rated" => Ok(Mechanism::Rated),
            "ranked" => Ok(Mechanism::Ranked),
            "cumulative" => Ok(Mechanism::Cumulative),
            _ => Err(UnknownMechanism(s.to_string())),
        }
    }
}

/// One agent's expressed preference over a slate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ballot {
    /// Whole-ballot abstention ("vote None").
    Abstain,
    /// Vote for exactly one candidate.
    SingleChoice { candidate: CandidateId },
    /// 5-point Likert score for every slate candidate.
    Rated { scores: BTreeMap<CandidateId, u8> },
    /// Total order over the slate, most preferred first.
    Ranked { order: Vec<CandidateId> },
    /// Nonnegative points per candidate summing to the per-agent budget.
    Cumulative { points: BTreeMap<CandidateId, f64> },
}

impl Ballot {
    pub fn is_abstain(&self) -> bool {
        matches!(self, Ballot::Abstain)
    }
}

/// Machine-readable reason a ballot was disqualified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum DisqualifyReason {
    #[error("ballot shape does not match the {mechanism} mechanism")]
    WrongShape { mechanism: Mechanism },
    #[error("candidate {candidate} is not on the slate")]
    UnknownCandidate { candidate: CandidateId },
    #[error("score {score} for candidate {candidate} outside [1, 5]")]
    ScoreOutOfRange { candidate: CandidateId, score: u8 },
    #[error("ballot does not cover slate candidate {candidate}")]
    MissingCandidate { candidate: CandidateId },
    #[error("ranking is not a permutation of the slate")]
    NotAPermutation,
    #[error("points sum {sum} does not match budget {budget}")]
    BudgetMismatch { sum: f64, budget: f64 },
    #[error("negative points for candidate {candidate}")]
    NegativePoints { candidate: CandidateId },
}

/// Result of validating one ballot against a slate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BallotValidity {
    Valid,
    Disqualified { reason: DisqualifyReason },
}

impl BallotValidity {
    pub fn is_valid(&self) -> bool {
        matches!(self, BallotValidity::Valid)
    }
}

/// Outcome of one voting phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Selected { candidate: CandidateId },
    Deferred,
}

impl Outcome {
    pub fn selected(&self) -> Option<CandidateId> {
        match self {
            Outcome::Selected { candidate } => Some(*candidate),
            Outcome::Deferred => None,
        }
    }
}

/// Per-candidate totals and ballot accounting for one voting phase.
///
/// Totals are exact rationals; they serialize as `"num/den"` strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    #[serde(with = "rational_map_serde")]
    pub totals: BTreeMap<CandidateId, BigRational>,
    pub valid_ballot_count: usize,
    pub abstain_count: usize,
    pub disqualified_count: usize,
}

/// How each agent's ballot was treated in the tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BallotDisposition {
    Counted,
    Abstained,
    Disqualified { reason: DisqualifyReason },
}

/// Full result of a tally: the outcome plus the recorded accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct TallyResult {
    pub outcome: Outcome,
    pub tally: Tally,
    pub dispositions: BTreeMap<AgentIndex, BallotDisposition>,
}

/// Points a ranked ballot assigns to the candidate at `position` (1-based):
/// 1, 1/2, 1/3, ...
pub fn borda_points(position: usize) -> BigRational {
    assert!(position >= 1, "rank position must be >= 1");
    BigRational::new(BigInt::from(1), BigInt::from(position))
}

/// Per-agent point budget for cumulative voting: one point per slate candidate.
pub fn cumulative_budget(slate_size: usize) -> f64 {
    assert!(slate_size >= 1, "slate must be nonempty");
    slate_size as f64
}

/// Validates one ballot against a slate. Total function: malformed ballots
/// come back `Disqualified` with a reason, never an error.
pub fn validate_ballot(
    mechanism: Mechanism,
    slate: &[CandidateId],
    ballot: &Ballot,
    budget: f64,
) -> BallotValidity {
    debug_assert!(!slate.is_empty(), "slate must be nonempty");
    let on_slate = |c: CandidateId| slate.contains(&c);
    let reason = match (mechanism, ballot) {
        (_, Ballot::Abstain) => None,
        (Mechanism::Unanimous | Mechanism::Majority | Mechanism::Plurality, b) => match b {
            Ballot::SingleChoice { candidate } if on_slate(*candidate) => None,
            Ballot::SingleChoice { candidate } => Some(DisqualifyReason::UnknownCandidate {
                candidate: *candidate,
            }),
            _ => Some(DisqualifyReason::WrongShape { mechanism }),
        },
        (Mechanism::Rated, Ballot::Rated { scores }) => validate_rated(slate, scores),
        (Mechanism::Ranked, Ballot::Ranked { order }) => validate_ranked(slate, order),
        (Mechanism::Cumulative, Ballot::Cumulative { points }) => {
            validate_cumulative(slate, points, budget)
        }
        (mechanism, _) => Some(DisqualifyReason::WrongShape { mechanism }),
    };
    match reason {
        None => BallotValidity::Valid,
        Some(reason) => BallotValidity::Disqualified { reason },
    }
}

fn validate_rated(
    slate: &[CandidateId],
    scores: &BTreeMap<CandidateId, u8>,
) -> Option<DisqualifyReason> {
    for (candidate, score) in scores {
        if !slate.contains(candidate) {
            return Some(DisqualifyReason::UnknownCandidate {
                candidate: *candidate,
            });
        }
        if !(1..=5).contains(score) {
            return Some(DisqualifyReason::ScoreOutOfRange {
                candidate: *candidate,
                score: *score,
            });
        }
    }
    // Rated ballots must cover every slate candidate.
    for candidate in slate {
        if !scores.contains_key(candidate) {
            return Some(DisqualifyReason::MissingCandidate {
                candidate: *candidate,
            });
        }
    }
    None
}

fn validate_ranked(slate: &[CandidateId], order: &[CandidateId]) -> Option<DisqualifyReason> {
    for candidate in order {
        if !slate.contains(candidate) {
            return Some(DisqualifyReason::UnknownCandidate {
                candidate: *candidate,
            });
        }
    }
    let mut seen = order.to_vec();
    seen.sort_unstable();
    seen.dedup();
    // Partial rankings and repeats both fail the permutation requirement.
    if seen.len() != order.len() || seen.len() != slate.len() {
        return Some(DisqualifyReason::NotAPermutation);
    }
    None
}

fn validate_cumulative(
    slate: &[CandidateId],
    points: &BTreeMap<CandidateId, f64>,
    budget: f64,
) -> Option<DisqualifyReason> {
    for (candidate, value) in points {
        if !slate.contains(candidate) {
            return Some(DisqualifyReason::UnknownCandidate {
                candidate: *candidate,
            });
        }
        if *value < 0.0 || !value.is_finite() {
            return Some(DisqualifyReason::NegativePoints {
                candidate: *candidate,
            });
        }
    }
    let sum: f64 = points.values().sum();
    if (sum - budget).abs() > CUMULATIVE_TOLERANCE {
        return Some(DisqualifyReason::BudgetMismatch { sum, budget });
    }
    None
}

/// Tallies one voting phase.
///
/// Disqualified ballots are recorded and count as abstentions; the
/// acceptance denominators for unanimous and majority voting are all `K`
/// agents, so abstentions work against acceptance. Any top-score tie
/// defers the decision.
pub fn tally(
    mechanism: Mechanism,
    slate: &[CandidateId],
    ballots: &BTreeMap<AgentIndex, Ballot>,
    total_agents: u32,
) -> TallyResult {
    let budget = cumulative_budget(slate.len());
    let mut totals: BTreeMap<CandidateId, BigRational> = slate
        .iter()
        .map(|c| (*c, BigRational::zero()))
        .collect();
    let mut dispositions = BTreeMap::new();
    let mut valid = 0usize;
    let mut abstained = 0usize;
    let mut disqualified = 0usize;

    for (agent, ballot) in ballots {
        if ballot.is_abstain() {
            abstained += 1;
            dispositions.insert(*agent, BallotDisposition::Abstained);
            continue;
        }
        match validate_ballot(mechanism, slate, ballot, budget) {
            BallotValidity::Disqualified { reason } => {
                disqualified += 1;
                dispositions.insert(*agent, BallotDisposition::Disqualified { reason });
            }
            BallotValidity::Valid => {
                valid += 1;
                dispositions.insert(*agent, BallotDisposition::Counted);
                accumulate(&mut totals, ballot);
            }
        }
    }
    // Agents missing from the map never voted; treat as abstentions.
    abstained += (total_agents as usize).saturating_sub(ballots.len());

    let outcome = decide(mechanism, &totals, valid, total_agents);
    TallyResult {
        outcome,
        tally: Tally {
            totals,
            valid_ballot_count: valid,
            abstain_count: abstained,
            disqualified_count: disqualified,
        },
        dispositions,
    }
}

fn accumulate(totals: &mut BTreeMap<CandidateId, BigRational>, ballot: &Ballot) {
    match ballot {
        Ballot::Abstain => {}
        Ballot::SingleChoice { candidate } => {
            *totals.get_mut(candidate).expect("validated") += BigRational::from_integer(1.into());
        }
        Ballot::Rated { scores } => {
            for (candidate, score) in scores {
                *totals.get_mut(candidate).expect("validated") +=
                    BigRational::from_integer(BigInt::from(*score));
            }
        }
        Ballot::Ranked { order } => {
            for (position, candidate) in order.iter().enumerate() {
                *totals.get_mut(candidate).expect("validated") += borda_points(position + 1);
            }
        }
        Ballot::Cumulative { points } => {
            for (candidate, value) in points {
                // Finite nonnegative f64 values convert exactly.
                *totals.get_mut(candidate).expect("validated") +=
                    BigRational::from_f64(*value).expect("validated finite");
            }
        }
    }
}

fn decide(
    mechanism: Mechanism,
    totals: &BTreeMap<CandidateId, BigRational>,
    valid: usize,
    total_agents: u32,
) -> Outcome {
    if valid == 0 {
        return Outcome::Deferred;
    }
    match mechanism {
        Mechanism::Unanimous => {
            let all = BigRational::from_integer(BigInt::from(total_agents));
            // At most one candidate can hold every agent's vote; if an
            // upstream merge ever passed several, the guarded defer keeps
            // the "multiple proposals passed" rule.
            select_by_threshold(totals, |t| *t == all)
        }
        Mechanism::Majority => {
            let half = BigRational::new(BigInt::from(total_agents), BigInt::from(2));
            select_by_threshold(totals, |t| *t > half)
        }
        Mechanism::Plurality | Mechanism::Rated | Mechanism::Ranked => {
            select_argmax(totals, None)
        }
        Mechanism::Cumulative => {
            let tolerance = BigRational::new(BigInt::from(1), BigInt::from(1_000_000_000u64));
            select_argmax(totals, Some(tolerance))
        }
    }
}

fn select_by_threshold<F: Fn(&BigRational) -> bool>(
    totals: &BTreeMap<CandidateId, BigRational>,
    passes: F,
) -> Outcome {
    let mut passed = totals.iter().filter(|(_, t)| passes(t));
    match (passed.next(), passed.next()) {
        (Some((c, _)), None) => Outcome::Selected { candidate: *c },
        _ => Outcome::Deferred,
    }
}

fn select_argmax(
    totals: &BTreeMap<CandidateId, BigRational>,
    tie_tolerance: Option<BigRational>,
) -> Outcome {
    let (best, top) = match totals.iter().max_by(|a, b| a.1.cmp(b.1)) {
        Some((c, t)) => (*c, t.clone()),
        None => return Outcome::Deferred,
    };
    if top.is_zero() {
        // Nothing received support; "receives the most votes" implies at least one.
        return Outcome::Deferred;
    }
    let tied = totals.iter().filter(|(c, t)| {
        **c != best
            && match &tie_tolerance {
                Some(tol) => (&top - *t).abs() <= *tol,
                None => **t == top,
            }
    });
    if tied.count() > 0 {
        Outcome::Deferred
    } else {
        Outcome::Selected { candidate: best }
    }
}

mod rational_map_serde {
    //! Exact rationals serialize as "num/den" strings keyed by candidate id.

    use std::collections::BTreeMap;
    use std::str::FromStr;

    use num_bigint::BigInt;
    use num_rational::BigRational;
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::CandidateId;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<CandidateId, BigRational>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        let as_strings: BTreeMap<String, String> = map
            .iter()
            .map(|(c, r)| (c.to_string(), format!("{}/{}", r.numer(), r.denom())))
            .collect();
        serde::Serialize::serialize(&as_strings, ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<BTreeMap<CandidateId, BigRational>, D::Error> {
        let as_strings: BTreeMap<String, String> = Deserialize::deserialize(de)?;
        as_strings
            .into_iter()
            .map(|(c, r)| {
                let candidate: CandidateId = c.parse().map_err(D::Error::custom)?;
                let (num, den) = r
                    .split_once('/')
                    .ok_or_else(|| D::Error::custom("expected num/den"))?;
                let num = BigInt::from_str(num).map_err(D::Error::custom)?;
                let den = BigInt::from_str(den).map_err(D::Error::custom)?;
                Ok((candidate, BigRational::new(num, den)))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(c: CandidateId) -> Ballot {
        Ballot::SingleChoice { candidate: c }
    }

    #[test]
    fn majority_worked_example_selects_apple() {
        // Apple=1, Banana=2, Carrot=3; votes Apple, Apple, Banana.
        let slate = vec![1, 2, 3];
        let ballots = BTreeMap::from([(0, single(1)), (1, single(1)), (2, single(2))]);
        let result = tally(Mechanism::Majority, &slate, &ballots, 3);
        assert_eq!(result.outcome, Outcome::Selected { candidate: 1 });
    }

    #[test]
    fn unanimous_counts_all_agents_not_just_voters() {
        let slate = vec![1, 2];
        let ballots = BTreeMap::from([(0, single(1)), (1, single(1)), (2, Ballot::Abstain)]);
        let result = tally(Mechanism::Unanimous, &slate, &ballots, 3);
        assert_eq!(result.outcome, Outcome::Deferred);
        assert_eq!(result.tally.abstain_count, 1);
        assert_eq!(result.tally.valid_ballot_count, 2);
    }

    #[test]
    fn plurality_tie_defers() {
        let slate = vec![1, 2, 3];
        let ballots = BTreeMap::from([(0, single(1)), (1, single(2)), (2, Ballot::Abstain)]);
        let result = tally(Mechanism::Plurality, &slate, &ballots, 3);
        assert_eq!(result.outcome, Outcome::Deferred);
    }

    #[test]
    fn plurality_zero_votes_defers_even_with_single_candidate() {
        let slate = vec![7];
        let ballots = BTreeMap::from([(0, Ballot::Abstain), (1, Ballot::Abstain)]);
        let result = tally(Mechanism::Plurality, &slate, &ballots, 2);
        assert_eq!(result.outcome, Outcome::Deferred);
    }

    #[test]
    fn rated_ballot_validation() {
        let slate = vec![1, 2];
        let ok = Ballot::Rated {
            scores: BTreeMap::from([(1, 5), (2, 3)]),
        };
        assert!(validate_ballot(Mechanism::Rated, &slate, &ok, 2.0).is_valid());

        let out_of_range = Ballot::Rated {
            scores: BTreeMap::from([(1, 6), (2, 3)]),
        };
        assert_eq!(
            validate_ballot(Mechanism::Rated, &slate, &out_of_range, 2.0),
            BallotValidity::Disqualified {
                reason: DisqualifyReason::ScoreOutOfRange {
                    candidate: 1,
                    score: 6
                }
            }
        );

        let partial = Ballot::Rated {
            scores: BTreeMap::from([(1, 4)]),
        };
        assert_eq!(
            validate_ballot(Mechanism::Rated, &slate, &partial, 2.0),
            BallotValidity::Disqualified {
                reason: DisqualifyReason::MissingCandidate { candidate: 2 }
            }
        );
    }

    #[test]
    fn cumulative_budget_mismatch_disqualifies() {
        let slate = vec![1, 2, 3];
        let ballot = Ballot::Cumulative {
            points: BTreeMap::from([(1, 2.0), (2, 0.5)]),
        };
        let validity = validate_ballot(Mechanism::Cumulative, &slate, &ballot, 3.0);
        assert_eq!(
            validity,
            BallotValidity::Disqualified {
                reason: DisqualifyReason::BudgetMismatch {
                    sum: 2.5,
                    budget: 3.0
                }
            }
        );
    }

    #[test]
    fn ranked_partial_ranking_disqualified() {
        let slate = vec![1, 2, 3];
        let ballot = Ballot::Ranked { order: vec![2, 1] };
        assert_eq!(
            validate_ballot(Mechanism::Ranked, &slate, &ballot, 3.0),
            BallotValidity::Disqualified {
                reason: DisqualifyReason::NotAPermutation
            }
        );
    }

    #[test]
    fn borda_points_follow_reciprocal_rule() {
        assert_eq!(borda_points(1), BigRational::from_integer(1.into()));
        assert_eq!(
            borda_points(2),
            BigRational::new(BigInt::from(1), BigInt::from(2))
        );
        assert_eq!(
            borda_points(7),
            BigRational::new(BigInt::from(1), BigInt::from(7))
        );
    }

    #[test]
    fn cumulative_budget_matches_slate_size() {
        assert_eq!(cumulative_budget(3), 3.0);
        assert_eq!(cumulative_budget(1), 1.0);
        assert_eq!(cumulative_budget(4), 4.0);
    }

    #[test]
    fn ranked_exact_comparison_has_no_float_drift() {
        // 1 + 1/3 > 1/2 + 1/2 + 1/3 must hold exactly.
        let lhs = borda_points(1) + borda_points(3);
        let rhs = borda_points(2) + borda_points(2) + borda_points(3);
        assert!(lhs == rhs);
        let lhs = borda_points(1) + borda_points(2);
        let rhs = borda_points(2) + borda_points(3) + borda_points(6);
        assert!(lhs > rhs);
    }

    #[test]
    fn disqualified_counts_as_abstention_but_is_recorded() {
        let slate = vec![1, 2];
        let ballots = BTreeMap::from([
            (0, single(1)),
            (1, single(1)),
            (
                2,
                Ballot::Rated {
                    scores: BTreeMap::from([(1, 3), (2, 3)]),
                },
            ),
        ]);
        let result = tally(Mechanism::Majority, &slate, &ballots, 3);
        assert_eq!(result.outcome, Outcome::Selected { candidate: 1 });
        assert_eq!(result.tally.disqualified_count, 1);
        assert!(matches!(
            result.dispositions.get(&2),
            Some(BallotDisposition::Disqualified { .. })
        ));
    }

    #[test]
    fn cumulative_near_tie_defers() {
        let slate = vec![1, 2];
        let ballots = BTreeMap::from([
            (
                0,
                Ballot::Cumulative {
                    points: BTreeMap::from([(1, 1.0), (2, 1.0)]),
                },
            ),
            (
                1,
                Ballot::Cumulative {
                    points: BTreeMap::from([(1, 1.0 + 4e-10), (2, 1.0 - 4e-10)]),
                },
            ),
        ]);
        let result = tally(Mechanism::Cumulative, &slate, &ballots, 2);
        assert_eq!(result.outcome, Outcome::Deferred);
    }

    #[test]
    fn mechanism_parse_errors_name_all_six() {
        let err = "approval".parse::<Mechanism>().unwrap_err();
        let text = err.to_string();
        for name in Mechanism::ALL {
            assert!(text.contains(name.name()));
        }
    }
}
