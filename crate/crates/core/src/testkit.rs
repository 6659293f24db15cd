//! Independent reference implementations and synthetic fixtures used by
//! the test suites. Everything here deliberately avoids the production
//! code paths it is used to check.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linguistics::transition::SimulationLabels;
use crate::linguistics::DialogueAct;
use crate::social_choice::{Ballot, CandidateId, Mechanism, Outcome};
use crate::stopping::{Direction, PerformanceSeries, SimRecord};

/// Naive counting oracle for the one-vote mechanisms, written straight
/// from the quoted rules.
pub fn naive_single_choice_outcome(
    mechanism: Mechanism,
    slate: &[CandidateId],
    ballots: &[Ballot],
    total_agents: u32,
) -> Outcome {
    let mut counts: BTreeMap<CandidateId, u32> = slate.iter().map(|c| (*c, 0)).collect();
    for ballot in ballots {
        if let Ballot::SingleChoice { candidate } = ballot {
            if let Some(entry) = counts.get_mut(candidate) {
                *entry += 1;
            }
        }
    }
    let passing: Vec<CandidateId> = match mechanism {
        Mechanism::Unanimous => counts
            .iter()
            .filter(|(_, votes)| **votes == total_agents)
            .map(|(c, _)| *c)
            .collect(),
        Mechanism::Majority => counts
            .iter()
            .filter(|(_, votes)| 2 * **votes > total_agents)
            .map(|(c, _)| *c)
            .collect(),
        Mechanism::Plurality => {
            let top = counts.values().copied().max().unwrap_or(0);
            if top == 0 {
                Vec::new()
            } else {
                counts
                    .iter()
                    .filter(|(_, votes)| **votes == top)
                    .map(|(c, _)| *c)
                    .collect()
            }
        }
        _ => panic!("single-choice oracle only covers one-vote mechanisms"),
    };
    match passing.as_slice() {
        [single] => Outcome::Selected { candidate: *single },
        _ => Outcome::Deferred,
    }
}

/// Exact fraction on i128, independent of the num crates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac {
    pub num: i128,
    pub den: i128,
}

impl Frac {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den > 0);
        let g = gcd(num.abs(), den);
        Frac {
            num: num / g,
            den: den / g,
        }
    }

    pub fn zero() -> Self {
        Frac { num: 0, den: 1 }
    }

    pub fn add(self, other: Frac) -> Frac {
        Frac::new(
            self.num * other.den + other.num * self.den,
            self.den * other.den,
        )
    }

    pub fn cmp_frac(self, other: Frac) -> std::cmp::Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

/// Ranked-ballot oracle: harmonic points 1, 1/2, 1/3... accumulated with
/// exact i128 fractions; ties defer.
pub fn ranked_oracle_outcome(slate: &[CandidateId], ballots: &[Vec<CandidateId>]) -> Outcome {
    let mut totals: BTreeMap<CandidateId, Frac> =
        slate.iter().map(|c| (*c, Frac::zero())).collect();
    let mut any_valid = false;
    for ballot in ballots {
        let mut sorted = ballot.clone();
        sorted.sort_unstable();
        let mut slate_sorted = slate.to_vec();
        slate_sorted.sort_unstable();
        if sorted != slate_sorted {
            continue;
        }
        any_valid = true;
        for (position, candidate) in ballot.iter().enumerate() {
            let points = Frac::new(1, position as i128 + 1);
            let entry = totals.get_mut(candidate).expect("on slate");
            *entry = entry.add(points);
        }
    }
    if !any_valid {
        return Outcome::Deferred;
    }
    let mut best: Option<(CandidateId, Frac)> = None;
    let mut tied = false;
    for (candidate, total) in &totals {
        match best {
            None => best = Some((*candidate, *total)),
            Some((_, best_total)) => match total.cmp_frac(best_total) {
                std::cmp::Ordering::Greater => {
                    best = Some((*candidate, *total));
                    tied = false;
                }
                std::cmp::Ordering::Equal => tied = true,
                std::cmp::Ordering::Less => {}
            },
        }
    }
    match best {
        Some((candidate, _)) if !tied => Outcome::Selected { candidate },
        _ => Outcome::Deferred,
    }
}

/// Desk-scale grid oracle for the achievable group-total maximum.
///
/// For these presets the objective is concave and invariant under a
/// permutation symmetry, so averaging any maximizer over the group keeps
/// the value; a symmetric maximizer therefore exists, and the search can
/// walk a one-parameter symmetric family: a 2%-step grid followed by
/// golden-section polish.
pub fn econ_grid_oracle(preset: crate::environments::UtilitySetPreset, k: usize) -> f64 {
    use crate::environments::economy::{group_total, Allocation, UtilitySetPreset, GOOD_QUANTITY};
    let utilities = preset.utilities(k);
    let value_at = |x: f64| -> f64 {
        let rows = match preset {
            UtilitySetPreset::AsymmetricLiteral | UtilitySetPreset::AsymmetricNormalized => {
                // Simultaneous agent/good permutations: agent i holds x of
                // its own good and (100-x)/(k-1) of each other good.
                let other = (GOOD_QUANTITY - x) / (k as f64 - 1.0);
                (0..k)
                    .map(|i| {
                        (0..k)
                            .map(|good| if good == i { x } else { other })
                            .collect()
                    })
                    .collect::<Vec<Vec<f64>>>()
            }
            UtilitySetPreset::Symmetric | UtilitySetPreset::Uniform => {
                // Identical agents: rows may be averaged equal, leaving a
                // probe along agent 0's share of good 0.
                let rest = (GOOD_QUANTITY - x) / (k as f64 - 1.0);
                let even = GOOD_QUANTITY / k as f64;
                (0..k)
                    .map(|i| {
                        (0..k)
                            .map(|good| {
                                if good == 0 {
                                    if i == 0 {
                                        x
                                    } else {
                                        rest
                                    }
                                } else {
                                    even
                                }
                            })
                            .collect()
                    })
                    .collect::<Vec<Vec<f64>>>()
            }
        };
        let alloc = Allocation::new(rows).expect("family is feasible");
        group_total(&alloc, &utilities)
    };

    // 2% grid.
    let mut best_x = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut x = 0.0;
    while x <= GOOD_QUANTITY + 1e-9 {
        let value = value_at(x);
        if value > best {
            best = value;
            best_x = x;
        }
        x += 2.0;
    }
    // Golden-section polish on the bracketing interval.
    let mut lo = (best_x - 2.0).max(0.0);
    let mut hi = (best_x + 2.0).min(GOOD_QUANTITY);
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if value_at(a) < value_at(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    best.max(value_at((lo + hi) / 2.0))
}

/// One synthetic V-shaped simulation with a planted peak near round 4.
///
/// Carries everything the stopping rules need: an acceptance at the
/// peak, a quiet round right after it, a decaying info-difference
/// series, and act labels that add `Accept` from the peak onward.
pub fn synthetic_vshape_record(simulation: u64, seed: u64) -> SimRecord {
    let rounds = 10u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ simulation.wrapping_mul(0x9e3779b97f4a7c15));
    let peak = 4i64 + rng.gen_range(-1i64..=1);
    let peak = peak.clamp(2, 9) as u32;

    let values: Vec<f64> = (1..=rounds)
        .map(|r| {
            let jitter = rng.gen_range(-0.005..0.005);
            let base = if r <= peak {
                0.2 + 0.15 * r as f64
            } else {
                0.2 + 0.15 * peak as f64 - 0.05 * (r - peak) as f64
            };
            base + jitter
        })
        .collect();

    let info_difference: Vec<Option<f64>> = (1..=rounds)
        .map(|r| {
            if r == 1 {
                None
            } else {
                let jitter = rng.gen_range(-0.004..0.004);
                Some((0.35 - 0.05 * (r as f64 - 1.0) + jitter).max(0.01))
            }
        })
        .collect();

    let base_acts: BTreeSet<DialogueAct> =
        [DialogueAct::Inform, DialogueAct::Request].into_iter().collect();
    let late_acts: BTreeSet<DialogueAct> = [
        DialogueAct::Inform,
        DialogueAct::Request,
        DialogueAct::Accept,
    ]
    .into_iter()
    .collect();
    let labels: Vec<Vec<BTreeSet<DialogueAct>>> = (1..=rounds)
        .map(|r| {
            let acts = if r >= peak {
                late_acts.clone()
            } else {
                base_acts.clone()
            };
            vec![acts.clone(), acts.clone(), acts]
        })
        .collect();

    let proposal_activity: Vec<bool> = (1..=rounds).map(|r| r != peak + 1).collect();

    SimRecord {
        simulation,
        series: PerformanceSeries {
            values,
            direction: Direction::HigherBetter,
        },
        selected_rounds: vec![peak],
        proposal_activity,
        info_difference,
        labels,
    }
}

pub fn synthetic_vshape_records(count: usize, seed: u64) -> Vec<SimRecord> {
    (0..count)
        .map(|s| synthetic_vshape_record(s as u64, seed))
        .collect()
}

/// Planted peak of a synthetic record (recomputed, not stored).
pub fn planted_peak(record: &SimRecord) -> u32 {
    record.selected_rounds[0]
}

/// Independent transition-graph count: materializes the virtual rounds
/// and walks every (simulation, round, source, target) tuple explicitly.
pub fn naive_transition_counts(
    simulations: &[SimulationLabels],
    rounds: u32,
) -> (
    BTreeMap<(DialogueAct, DialogueAct), u64>,
    BTreeMap<DialogueAct, u64>,
) {
    let mut pair_counts: BTreeMap<(DialogueAct, DialogueAct), u64> = BTreeMap::new();
    let mut source_counts: BTreeMap<DialogueAct, u64> = BTreeMap::new();
    for sim in simulations {
        let agents = sim.labels.first().map(Vec::len).unwrap_or(0);
        // Materialize rounds 0..=R+1 with the virtual Start/End rows.
        let mut full: Vec<Vec<BTreeSet<DialogueAct>>> = Vec::with_capacity(rounds as usize + 2);
        full.push(vec![BTreeSet::from([DialogueAct::Start]); agents]);
        for round in &sim.labels {
            full.push(round.clone());
        }
        full.push(vec![BTreeSet::from([DialogueAct::End]); agents]);

        for r in 1..full.len() {
            for i in 0..agents {
                for a in &full[r - 1][i] {
                    *source_counts.entry(*a).or_insert(0) += 1;
                    let mut seen: BTreeSet<DialogueAct> = BTreeSet::new();
                    for j in 0..agents {
                        if j == i {
                            continue;
                        }
                        for b in &full[r][j] {
                            seen.insert(*b);
                        }
                    }
                    for b in seen {
                        *pair_counts.entry((*a, b)).or_insert(0) += 1;
                    }
                }
            }
        }
    }
    (pair_counts, source_counts)
}

/// Uniform random single-choice-or-abstain ballot.
pub fn random_single_choice(
    slate: &[CandidateId],
    rng: &mut ChaCha8Rng,
    abstain_weight: f64,
) -> Ballot {
    if rng.gen::<f64>() < abstain_weight {
        Ballot::Abstain
    } else {
        let index = rng.gen_range(0..slate.len());
        Ballot::SingleChoice {
            candidate: slate[index],
        }
    }
}
