//! Deterministic round-based state machine: Message -> Proposal -> Voting,
//! repeated for R rounds, emitting a [`Transcript`].

mod runner;

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::environments::{EnvironmentId, ProposalBody};
use crate::social_choice::{Ballot, BallotDisposition, CandidateId, Mechanism, Outcome, Tally};

pub use runner::{run_collaboration, run_with_options, EngineError, QueryOrder, RunOptions};

/// Index of one agent, `0..K`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Display names for the agent roster; indices are contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roster {
    names: Vec<String>,
}

impl Roster {
    pub fn new(names: Vec<String>) -> Result<Self, String> {
        if names.is_empty() {
            return Err("roster must not be empty".to_string());
        }
        if names.iter().any(String::is_empty) {
            return Err("display names must be nonempty".to_string());
        }
        let mut unique: Vec<&String> = names.iter().collect();
        unique.sort();
        unique.dedup();
        if unique.len() != names.len() {
            return Err("display names must be unique".to_string());
        }
        Ok(Roster { names })
    }

    /// `Agent1..AgentK`.
    pub fn default_names(k: usize) -> Self {
        Roster {
            names: (1..=k).map(|i| format!("Agent{i}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, agent: AgentId) -> &str {
        &self.names[agent.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id_of(&self, name: &str) -> Option<AgentId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| AgentId(i as u32))
    }

    pub fn ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        (0..self.names.len() as u32).map(AgentId)
    }
}

/// One agent-to-agents message. Targets are metadata; the text is visible
/// to everyone once the phase commits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub sender: AgentId,
    pub targets: Vec<AgentId>,
    pub text: String,
}

/// A proposed state of the world. Ids are assigned in creation order;
/// byte-identical bodies merge into the existing proposal, growing its
/// author set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: u64,
    pub round: u32,
    pub authors: BTreeSet<AgentId>,
    pub body: ProposalBody,
}

/// Candidate list for one voting phase, ascending by proposal id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSlate {
    candidates: Vec<Proposal>,
}

impl CandidateSlate {
    pub fn ids(&self) -> Vec<CandidateId> {
        self.candidates.iter().map(|c| c.id).collect()
    }

    pub fn get(&self, id: CandidateId) -> Option<&Proposal> {
        self.candidates.iter().find(|c| c.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Proposal> {
        self.candidates.iter()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// The deduplicated union of each agent's most recent proposal plus the
/// latest accepted proposal. Byte-identical bodies merge with unioned
/// authors; the earliest id represents the merged candidate.
pub fn assemble_candidates(
    latest_proposals: &BTreeMap<AgentId, Proposal>,
    latest_accepted: Option<&Proposal>,
) -> CandidateSlate {
    let mut merged: BTreeMap<u64, Proposal> = BTreeMap::new();
    let mut by_body: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    let mut add = |proposal: &Proposal| {
        let bytes = proposal.body.canonical_bytes();
        match by_body.get(&bytes).copied() {
            Some(existing_id) if proposal.id < existing_id => {
                // The earliest id represents the merged candidate.
                let prior = merged.remove(&existing_id).expect("present");
                let mut replacement = proposal.clone();
                replacement.authors.extend(prior.authors);
                by_body.insert(bytes, proposal.id);
                merged.insert(proposal.id, replacement);
            }
            Some(existing_id) => {
                merged
                    .get_mut(&existing_id)
                    .expect("present")
                    .authors
                    .extend(proposal.authors.iter().copied());
            }
            None => {
                by_body.insert(bytes, proposal.id);
                merged.insert(proposal.id, proposal.clone());
            }
        }
    };
    if let Some(accepted) = latest_accepted {
        add(accepted);
    }
    for proposal in latest_proposals.values() {
        add(proposal);
    }
    CandidateSlate {
        candidates: merged.into_values().collect(),
    }
}

/// One agent's recorded ballot with how the tally treated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallotRecord {
    pub ballot: Ballot,
    pub disposition: BallotDisposition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub messages: Vec<Message>,
    pub new_proposals: BTreeMap<AgentId, Option<Proposal>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub proposal_reasons: BTreeMap<AgentId, String>,
    pub slate: CandidateSlate,
    pub ballots: BTreeMap<AgentId, BallotRecord>,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tally: Option<Tally>,
}

/// A proposal acceptance event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedEntry {
    pub round: u32,
    pub proposal: Proposal,
}

/// Simulation configuration snapshot carried inside every transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub rounds: u32,
    pub agents: u32,
    pub mechanism: Mechanism,
    pub environment: EnvironmentId,
    /// Utility-set preset name or rating-task id.
    pub scenario: String,
    pub seed: u64,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.rounds < 1 {
            return Err("rounds must be >= 1".to_string());
        }
        if self.agents < 2 {
            return Err("need at least 2 agents".to_string());
        }
        Ok(())
    }
}

/// Full record of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    /// Record-format version.
    pub v: u32,
    pub config: EngineConfig,
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    pub accepted_history: Vec<AcceptedEntry>,
    pub final_decision: Option<Proposal>,
}

pub const TRANSCRIPT_VERSION: u32 = 1;

impl Transcript {
    /// Structural invariants every finished transcript satisfies.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.rounds.len() != self.config.rounds as usize {
            return Err(format!(
                "expected {} rounds, found {}",
                self.config.rounds,
                self.rounds.len()
            ));
        }
        match (&self.final_decision, self.accepted_history.last()) {
            (None, None) => {}
            (Some(decision), Some(last)) if *decision == last.proposal => {}
            _ => return Err("final_decision must be the last accepted proposal".to_string()),
        }
        for record in &self.rounds {
            if record.messages.len() != self.config.agents as usize {
                return Err(format!(
                    "round {}: expected one message per agent",
                    record.round
                ));
            }
            for ballot_agent in record.ballots.keys() {
                if ballot_agent.0 >= self.config.agents {
                    return Err(format!(
                        "round {}: ballot from unknown agent {}",
                        record.round, ballot_agent
                    ));
                }
            }
        }
        // Every accepted proposal appears in its round's slate.
        for entry in &self.accepted_history {
            let record = self
                .rounds
                .iter()
                .find(|r| r.round == entry.round)
                .ok_or_else(|| format!("accepted entry for unknown round {}", entry.round))?;
            if record.slate.get(entry.proposal.id).is_none() {
                return Err(format!(
                    "accepted proposal {} missing from round {} slate",
                    entry.proposal.id, entry.round
                ));
            }
        }
        Ok(())
    }

    /// Rounds whose outcome selected a proposal.
    pub fn selected_rounds(&self) -> Vec<u32> {
        self.rounds
            .iter()
            .filter(|r| r.outcome.selected().is_some())
            .map(|r| r.round)
            .collect()
    }

    /// Per round, whether any agent submitted a new proposal.
    pub fn proposal_activity(&self) -> Vec<bool> {
        self.rounds
            .iter()
            .map(|r| r.new_proposals.values().any(Option::is_some))
            .collect()
    }
}

/// Applies a voting outcome to the accepted history: `Selected` appends,
/// `Deferred` keeps the standing decision.
pub fn commit_outcome(
    accepted_history: &mut Vec<AcceptedEntry>,
    round: u32,
    outcome: Outcome,
    slate: &CandidateSlate,
) {
    if let Outcome::Selected { candidate } = outcome {
        let proposal = slate
            .get(candidate)
            .expect("selected candidate must be on the slate")
            .clone();
        accepted_history.push(AcceptedEntry { round, proposal });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::ProposalBody;

    fn proposal(id: u64, round: u32, author: u32, value: f64) -> Proposal {
        Proposal {
            id,
            round,
            authors: BTreeSet::from([AgentId(author)]),
            body: ProposalBody::Rating { value },
        }
    }

    #[test]
    fn identical_bodies_merge_with_unioned_authors() {
        let latest = BTreeMap::from([
            (AgentId(0), proposal(1, 1, 0, 3.0)),
            (AgentId(1), proposal(2, 1, 1, 3.0)),
            (AgentId(2), proposal(3, 1, 2, 4.0)),
        ]);
        let slate = assemble_candidates(&latest, None);
        assert_eq!(slate.ids(), vec![1, 3]);
        let merged = slate.get(1).unwrap();
        assert_eq!(merged.authors, BTreeSet::from([AgentId(0), AgentId(1)]));
    }

    #[test]
    fn accepted_only_slate() {
        let accepted = proposal(5, 2, 1, 2.5);
        let slate = assemble_candidates(&BTreeMap::new(), Some(&accepted));
        assert_eq!(slate.ids(), vec![5]);
    }

    #[test]
    fn accepted_deduplicates_against_latest() {
        let p = proposal(1, 1, 0, 3.0);
        let latest = BTreeMap::from([(AgentId(0), p.clone())]);
        let slate = assemble_candidates(&latest, Some(&p));
        assert_eq!(slate.ids(), vec![1]);
    }

    #[test]
    fn slate_orders_by_ascending_id() {
        let latest = BTreeMap::from([
            (AgentId(0), proposal(9, 3, 0, 1.0)),
            (AgentId(1), proposal(2, 1, 1, 2.0)),
        ]);
        let slate = assemble_candidates(&latest, None);
        assert_eq!(slate.ids(), vec![2, 9]);
    }

    #[test]
    fn commit_outcome_appends_only_on_selected() {
        let slate = assemble_candidates(
            &BTreeMap::from([(AgentId(0), proposal(1, 1, 0, 3.0))]),
            None,
        );
        let mut history = vec![];
        commit_outcome(&mut history, 1, Outcome::Deferred, &slate);
        assert!(history.is_empty());
        commit_outcome(&mut history, 2, Outcome::Selected { candidate: 1 }, &slate);
        assert_eq!(history.len(), 1);
        // Re-acceptance is recorded again.
        commit_outcome(&mut history, 7, Outcome::Selected { candidate: 1 }, &slate);
        assert_eq!(history.len(), 2);
        assert_eq!(history[1].round, 7);
    }
}
