//! The agent policy contract plus scripted and LLM-backed policies.

pub mod llm;
pub mod parse;
pub mod prompts;
pub mod scripted;
pub mod wire;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{AcceptedEntry, AgentId, BallotRecord, CandidateSlate, Message, Proposal, Roster};
use crate::environments::ProposalBody;
use crate::social_choice::{Ballot, Mechanism, Outcome};

/// Which of the three per-round phases is being decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Message,
    Proposal,
    Voting,
}

/// The most recent completed voting phase, as agents see it.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteView {
    pub round: u32,
    pub ballots: BTreeMap<AgentId, BallotRecord>,
    pub outcome: Outcome,
}

/// Shared phase-start snapshot; identical for every agent queried within
/// a phase. Commits happen only after all policies respond, so policies
/// can never observe each other's in-flight actions.
#[derive(Debug, Clone)]
pub struct PhaseSnapshot {
    pub round: u32,
    pub total_rounds: u32,
    pub phase: Phase,
    pub mechanism: Mechanism,
    pub roster: Roster,
    pub task_description: String,
    /// Messages visible so far, grouped by round.
    pub conversation: Vec<Vec<Message>>,
    /// The most recent candidate slate and the round it was assembled in.
    pub latest_slate: Option<(u32, CandidateSlate)>,
    pub latest_votes: Option<VoteView>,
    pub latest_accepted: Option<AcceptedEntry>,
    /// Each agent's most recent proposal, as of the phase start.
    pub latest_proposals: BTreeMap<AgentId, Proposal>,
}

/// Read-only context one policy sees for one decision.
#[derive(Debug, Clone)]
pub struct ContextView<'a> {
    pub shared: &'a PhaseSnapshot,
    pub me: AgentId,
    /// Agent-specific background/goal text.
    pub background: String,
    /// Own utility description, when the environment defines one.
    pub utility: Option<String>,
}

impl ContextView<'_> {
    pub fn my_name(&self) -> &str {
        self.shared.roster.name(self.me)
    }
}

/// A drafted message before the engine sanitizes and commits it.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageDraft {
    pub targets: Vec<AgentId>,
    pub text: String,
}

/// Proposal-phase decision.
#[derive(Debug, Clone, PartialEq)]
pub enum ProposalAction {
    Skip,
    Propose {
        body: ProposalBody,
        reason: Option<String>,
    },
}

/// Voting-phase decision.
#[derive(Debug, Clone, PartialEq)]
pub struct BallotDraft {
    pub ballot: Ballot,
    pub reason: Option<String>,
}

/// Why a policy failed to produce an action for one attempt.
#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("provider transport failure: {0}")]
    Transport(String),
    #[error("could not parse agent reply: {0}")]
    Parse(String),
    #[error("policy cannot act: {0}")]
    Internal(String),
}

/// The agent decision functions. Implementations must be pure given the
/// context view and their internal seed, and must not mutate shared state.
pub trait AgentPolicy: Send + Sync {
    fn decide_message(&self, ctx: &ContextView) -> Result<MessageDraft, PolicyError>;

    fn decide_proposal(&self, ctx: &ContextView) -> Result<ProposalAction, PolicyError>;

    fn decide_ballot(
        &self,
        ctx: &ContextView,
        slate: &CandidateSlate,
        mechanism: Mechanism,
    ) -> Result<BallotDraft, PolicyError>;
}
