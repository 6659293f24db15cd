//! Deterministic scripted policies: stand-ins for `f_p` and `f_v` that
//! exercise the agree/deadlock spectrum without an LLM.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    AgentPolicy, BallotDraft, ContextView, MessageDraft, Phase, PolicyError, ProposalAction,
};
use crate::engine::{AgentId, CandidateSlate};
use crate::environments::economy::{Allocation, CobbDouglasUtility, GOOD_QUANTITY};
use crate::environments::ProposalBody;
use crate::social_choice::{cumulative_budget, Ballot, CandidateId, Mechanism};

/// The four scripted behaviors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScriptedPolicyKind {
    /// Re-proposes its own-utility argmax every round.
    Selfish,
    /// Proposes the even split once, then stands pat.
    EvenSplit,
    /// Moves `rate` of the way from its previous proposal toward the
    /// coordinate-wise mean of the others' latest proposals.
    Concessive { rate: f64 },
    /// Proposes seeded random feasible bodies.
    RandomSeeded,
}

/// What a scripted agent wants, per environment.
#[derive(Debug, Clone)]
pub enum ScriptedUtility {
    Economy {
        theta: CobbDouglasUtility,
        agents: usize,
        goods: usize,
    },
    Rating {
        anchor: f64,
    },
}

impl ScriptedUtility {
    fn utility_of(&self, me: AgentId, body: &ProposalBody) -> Option<f64> {
        match self {
            ScriptedUtility::Economy { theta, .. } => {
                let alloc = body.as_allocation()?;
                if me.index() >= alloc.agents() {
                    return None;
                }
                Some(theta.eval(alloc.row(me.index())))
            }
            ScriptedUtility::Rating { anchor } => {
                let value = body.as_rating()?;
                Some(-(value - anchor).abs())
            }
        }
    }
}

/// A scripted agent: pure given the context view and its seed.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    pub kind: ScriptedPolicyKind,
    pub me: AgentId,
    pub seed: u64,
    pub utility: ScriptedUtility,
}

impl ScriptedPolicy {
    pub fn new(kind: ScriptedPolicyKind, me: AgentId, seed: u64, utility: ScriptedUtility) -> Self {
        if let ScriptedPolicyKind::Concessive { rate } = kind {
            assert!(rate > 0.0 && rate <= 1.0, "concession rate must be in (0, 1]");
        }
        ScriptedPolicy {
            kind,
            me,
            seed,
            utility,
        }
    }

    fn rng(&self, round: u32, phase: Phase) -> ChaCha8Rng {
        let phase_tag = match phase {
            Phase::Message => 1u64,
            Phase::Proposal => 2,
            Phase::Voting => 3,
        };
        let stream = self
            .seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add((round as u64) << 8)
            .wrapping_add(phase_tag);
        ChaCha8Rng::seed_from_u64(stream)
    }

    fn economy_proposal(&self, ctx: &ContextView) -> ProposalAction {
        let (agents, goods) = match &self.utility {
            ScriptedUtility::Economy { agents, goods, .. } => (*agents, *goods),
            ScriptedUtility::Rating { .. } => return ProposalAction::Skip,
        };
        let own_latest = ctx.shared.latest_proposals.get(&self.me);
        let body = match self.kind {
            ScriptedPolicyKind::Selfish => {
                Some(Allocation::all_to(self.me.index(), agents, goods).into_body())
            }
            ScriptedPolicyKind::EvenSplit => {
                if own_latest.is_some() {
                    None
                } else {
                    Some(Allocation::even_split(agents, goods).into_body())
                }
            }
            ScriptedPolicyKind::Concessive { rate } => {
                concessive_allocation(ctx, self.me, rate, agents, goods)
            }
            ScriptedPolicyKind::RandomSeeded => {
                let mut rng = self.rng(ctx.shared.round, Phase::Proposal);
                Some(random_allocation(agents, goods, &mut rng).into_body())
            }
        };
        match body {
            Some(body) => ProposalAction::Propose { body, reason: None },
            None => ProposalAction::Skip,
        }
    }

    fn rating_proposal(&self, ctx: &ContextView) -> ProposalAction {
        let anchor = match &self.utility {
            ScriptedUtility::Rating { anchor } => *anchor,
            ScriptedUtility::Economy { .. } => return ProposalAction::Skip,
        };
        let own_latest = ctx
            .shared
            .latest_proposals
            .get(&self.me)
            .and_then(|p| p.body.as_rating());
        let value = match self.kind {
            ScriptedPolicyKind::Selfish => Some(anchor),
            ScriptedPolicyKind::EvenSplit => {
                if own_latest.is_some() {
                    None
                } else {
                    Some(4.0)
                }
            }
            ScriptedPolicyKind::Concessive { rate } => {
                let others: Vec<f64> = ctx
                    .shared
                    .latest_proposals
                    .iter()
                    .filter(|(agent, _)| **agent != self.me)
                    .filter_map(|(_, p)| p.body.as_rating())
                    .collect();
                match (own_latest, others.is_empty()) {
                    (None, _) => Some(anchor),
                    (Some(_), true) => None,
                    (Some(own), false) => {
                        let mean = others.iter().sum::<f64>() / others.len() as f64;
                        Some(own + rate * (mean - own))
                    }
                }
            }
            ScriptedPolicyKind::RandomSeeded => {
                let mut rng = self.rng(ctx.shared.round, Phase::Proposal);
                Some(rng.gen_range(1.0..=5.0))
            }
        };
        match value {
            Some(v) => ProposalAction::Propose {
                body: ProposalBody::Rating {
                    value: (v.clamp(1.0, 5.0) * 100.0).round() / 100.0,
                },
                reason: None,
            },
            None => ProposalAction::Skip,
        }
    }
}

fn concessive_allocation(
    ctx: &ContextView,
    me: AgentId,
    rate: f64,
    agents: usize,
    goods: usize,
) -> Option<ProposalBody> {
    let own = match ctx
        .shared
        .latest_proposals
        .get(&me)
        .and_then(|p| p.body.as_allocation())
    {
        Some(own) => own,
        // Nothing on the table yet: stake out the selfish claim.
        None => return Some(Allocation::all_to(me.index(), agents, goods).into_body()),
    };
    let others: Vec<Allocation> = ctx
        .shared
        .latest_proposals
        .iter()
        .filter(|(agent, _)| **agent != me)
        .filter_map(|(_, p)| p.body.as_allocation())
        .collect();
    if others.is_empty() {
        return None;
    }
    let mut rows = vec![vec![0.0; goods]; agents];
    for (i, row) in rows.iter_mut().enumerate() {
        for (k, value) in row.iter_mut().enumerate() {
            let mean: f64 =
                others.iter().map(|a| a.row(i)[k]).sum::<f64>() / others.len() as f64;
            let own_value = own.row(i)[k];
            // Convex combination of feasible allocations stays feasible.
            *value = own_value + rate * (mean - own_value);
        }
    }
    Some(ProposalBody::Allocation { rows })
}

fn random_allocation(agents: usize, goods: usize, rng: &mut ChaCha8Rng) -> Allocation {
    let mut rows = vec![vec![0.0; goods]; agents];
    for good in 0..goods {
        let draws: Vec<f64> = (0..agents)
            .map(|_| -(rng.gen::<f64>().max(f64::MIN_POSITIVE)).ln())
            .collect();
        let total: f64 = draws.iter().sum();
        for (agent, draw) in draws.iter().enumerate() {
            rows[agent][good] = GOOD_QUANTITY * draw / total;
        }
    }
    Allocation::new(rows).expect("normalized columns are feasible")
}

impl AgentPolicy for ScriptedPolicy {
    fn decide_message(&self, _ctx: &ContextView) -> Result<MessageDraft, PolicyError> {
        let text = match self.kind {
            ScriptedPolicyKind::Selfish => {
                "I propose to keep the largest share for myself; I will defend that position."
            }
            ScriptedPolicyKind::EvenSplit => {
                "I propose an even split so that everyone benefits equally."
            }
            ScriptedPolicyKind::Concessive { .. } => {
                "I can compromise and move my proposal toward the group's preferences."
            }
            ScriptedPolicyKind::RandomSeeded => {
                "Let me inform everyone that I will explore a fresh allocation this round."
            }
        };
        Ok(MessageDraft {
            targets: Vec::new(),
            text: text.to_string(),
        })
    }

    fn decide_proposal(&self, ctx: &ContextView) -> Result<ProposalAction, PolicyError> {
        Ok(match &self.utility {
            ScriptedUtility::Economy { .. } => self.economy_proposal(ctx),
            ScriptedUtility::Rating { .. } => self.rating_proposal(ctx),
        })
    }

    fn decide_ballot(
        &self,
        _ctx: &ContextView,
        slate: &CandidateSlate,
        mechanism: Mechanism,
    ) -> Result<BallotDraft, PolicyError> {
        let mut utilities: Vec<(CandidateId, f64)> = Vec::with_capacity(slate.len());
        for candidate in slate.iter() {
            match self.utility.utility_of(self.me, &candidate.body) {
                Some(value) => utilities.push((candidate.id, value)),
                // Utility evaluation failure abstains.
                None => {
                    return Ok(BallotDraft {
                        ballot: Ballot::Abstain,
                        reason: None,
                    })
                }
            }
        }
        Ok(BallotDraft {
            ballot: scripted_ballot(&utilities, mechanism),
            reason: None,
        })
    }
}

/// Ballot a utility-maximizing agent casts.
///
/// Single-choice votes go to the own-utility argmax (ties to the lowest
/// candidate id). Rated min-max normalizes utilities onto 1..5 (all equal
/// maps to 3). Ranked orders by descending utility with id tie-breaks.
/// Cumulative splits the budget proportionally to utility shares, with a
/// uniform split when every utility is zero.
pub fn scripted_ballot(utilities: &[(CandidateId, f64)], mechanism: Mechanism) -> Ballot {
    if utilities.is_empty() {
        return Ballot::Abstain;
    }
    match mechanism {
        Mechanism::Unanimous | Mechanism::Majority | Mechanism::Plurality => {
            let mut best = utilities[0];
            for entry in &utilities[1..] {
                if entry.1 > best.1 || (entry.1 == best.1 && entry.0 < best.0) {
                    best = *entry;
                }
            }
            Ballot::SingleChoice { candidate: best.0 }
        }
        Mechanism::Rated => {
            let min = utilities.iter().map(|(_, u)| *u).fold(f64::INFINITY, f64::min);
            let max = utilities
                .iter()
                .map(|(_, u)| *u)
                .fold(f64::NEG_INFINITY, f64::max);
            let scores: BTreeMap<CandidateId, u8> = utilities
                .iter()
                .map(|(id, u)| {
                    let score = if max > min {
                        1 + ((u - min) / (max - min) * 4.0).round() as u8
                    } else {
                        3
                    };
                    (*id, score.clamp(1, 5))
                })
                .collect();
            Ballot::Rated { scores }
        }
        Mechanism::Ranked => {
            let mut order: Vec<(CandidateId, f64)> = utilities.to_vec();
            order.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            });
            Ballot::Ranked {
                order: order.into_iter().map(|(id, _)| id).collect(),
            }
        }
        Mechanism::Cumulative => {
            let budget = cumulative_budget(utilities.len());
            // Shift negatives so shares stay meaningful for error-style utilities.
            let floor = utilities.iter().map(|(_, u)| *u).fold(0.0_f64, f64::min);
            let shifted: Vec<f64> = utilities.iter().map(|(_, u)| u - floor).collect();
            let total: f64 = shifted.iter().sum();
            let mut points: BTreeMap<CandidateId, f64> = BTreeMap::new();
            if total > 0.0 {
                let mut assigned = 0.0;
                for (index, ((id, _), share)) in utilities.iter().zip(&shifted).enumerate() {
                    let value = if index + 1 == utilities.len() {
                        budget - assigned
                    } else {
                        budget * share / total
                    };
                    assigned += value;
                    points.insert(*id, value);
                }
            } else {
                let even = budget / utilities.len() as f64;
                let mut assigned = 0.0;
                for (index, (id, _)) in utilities.iter().enumerate() {
                    let value = if index + 1 == utilities.len() {
                        budget - assigned
                    } else {
                        even
                    };
                    assigned += value;
                    points.insert(*id, value);
                }
            }
            Ballot::Cumulative { points }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_choice_takes_argmax() {
        let ballot = scripted_ballot(&[(1, 10.0), (2, 30.0)], Mechanism::Plurality);
        assert_eq!(ballot, Ballot::SingleChoice { candidate: 2 });
    }

    #[test]
    fn single_choice_tie_breaks_to_lowest_id() {
        let ballot = scripted_ballot(&[(4, 5.0), (2, 5.0)], Mechanism::Majority);
        assert_eq!(ballot, Ballot::SingleChoice { candidate: 2 });
    }

    #[test]
    fn cumulative_points_are_proportional_shares() {
        let ballot = scripted_ballot(&[(1, 10.0), (2, 30.0)], Mechanism::Cumulative);
        match ballot {
            Ballot::Cumulative { points } => {
                assert!((points[&1] - 0.5).abs() < 1e-12);
                assert!((points[&2] - 1.5).abs() < 1e-12);
            }
            other => panic!("expected cumulative ballot, got {other:?}"),
        }
    }

    #[test]
    fn ranked_ties_break_by_id() {
        let ballot = scripted_ballot(&[(1, 7.0), (2, 7.0)], Mechanism::Ranked);
        assert_eq!(ballot, Ballot::Ranked { order: vec![1, 2] });
    }

    #[test]
    fn rated_all_equal_maps_to_three() {
        let ballot = scripted_ballot(&[(1, 2.0), (2, 2.0)], Mechanism::Rated);
        assert_eq!(
            ballot,
            Ballot::Rated {
                scores: BTreeMap::from([(1, 3), (2, 3)])
            }
        );
    }

    #[test]
    fn rated_min_max_normalizes_onto_likert() {
        let ballot = scripted_ballot(&[(1, 0.0), (2, 5.0), (3, 10.0)], Mechanism::Rated);
        assert_eq!(
            ballot,
            Ballot::Rated {
                scores: BTreeMap::from([(1, 1), (2, 3), (3, 5)])
            }
        );
    }

    #[test]
    fn argmax_invariant_under_monotone_transform() {
        let base = [(1u64, 1.0), (2, 4.0), (3, 2.5)];
        let transformed: Vec<(CandidateId, f64)> =
            base.iter().map(|(id, u)| (*id, f64::exp(*u))).collect();
        assert_eq!(
            scripted_ballot(&base, Mechanism::Plurality),
            scripted_ballot(&transformed, Mechanism::Plurality)
        );
    }

    #[test]
    fn zero_utilities_split_cumulative_budget_evenly() {
        let ballot = scripted_ballot(&[(1, 0.0), (2, 0.0), (3, 0.0)], Mechanism::Cumulative);
        match ballot {
            Ballot::Cumulative { points } => {
                for value in points.values() {
                    assert!((value - 1.0).abs() < 1e-12);
                }
            }
            other => panic!("expected cumulative ballot, got {other:?}"),
        }
    }
}
