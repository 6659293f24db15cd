//! The collaboration loop: snapshot, query, commit, for each phase of
//! each round.

use std::collections::{BTreeMap, HashMap};

use log::warn;

use super::{
    assemble_candidates, commit_outcome, AcceptedEntry, AgentId, BallotRecord, CandidateSlate,
    EngineConfig, Message, Proposal, RoundRecord, Roster, Transcript, TRANSCRIPT_VERSION,
};
use crate::agents::{
    AgentPolicy, BallotDraft, ContextView, MessageDraft, Phase, PhaseSnapshot, ProposalAction,
    VoteView,
};
use crate::environments::Environment;
use crate::social_choice::{tally, Ballot, Outcome};

/// Placeholder recorded when an agent fails the message phase.
pub const SILENT_MESSAGE: &str = "(no message)";

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Order in which policies are queried within a phase. Commits always
/// happen in ascending agent order against the phase-start snapshot, so
/// the order must never change the transcript; tests exercise that.
#[derive(Debug, Clone, Default)]
pub enum QueryOrder {
    #[default]
    Ascending,
    Permuted(Vec<u32>),
}

impl QueryOrder {
    fn sequence(&self, k: u32) -> Vec<u32> {
        match self {
            QueryOrder::Ascending => (0..k).collect(),
            QueryOrder::Permuted(order) => {
                debug_assert_eq!(order.len(), k as usize);
                order.clone()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Attempts per policy decision before degrading to skip/abstain.
    pub attempts: u32,
    pub query_order: QueryOrder,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            attempts: 3,
            query_order: QueryOrder::Ascending,
        }
    }
}

/// Runs one full collaboration and returns its transcript.
///
/// The run is a pure function of the configuration, the policies, and the
/// seed: identical inputs serialize to byte-identical transcripts. Policy
/// failures degrade to skip/abstain after the configured attempts; they
/// never abort the run.
pub fn run_collaboration(
    config: &EngineConfig,
    policies: &[Box<dyn AgentPolicy>],
    env: &dyn Environment,
) -> Result<Transcript, EngineError> {
    run_with_options(config, policies, env, &RunOptions::default())
}

pub fn run_with_options(
    config: &EngineConfig,
    policies: &[Box<dyn AgentPolicy>],
    env: &dyn Environment,
    options: &RunOptions,
) -> Result<Transcript, EngineError> {
    config.validate().map_err(EngineError::Config)?;
    if policies.len() != config.agents as usize {
        return Err(EngineError::Config(format!(
            "expected {} policies, got {}",
            config.agents,
            policies.len()
        )));
    }
    if env.agent_count() != config.agents as usize {
        return Err(EngineError::Config(format!(
            "environment expects {} agents, config has {}",
            env.agent_count(),
            config.agents
        )));
    }

    let k = config.agents;
    let roster = Roster::default_roster_for(env, k as usize);
    let task_description = env.task_description(&roster);

    let mut registry: Vec<Proposal> = Vec::new();
    let mut body_index: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut latest_proposal: BTreeMap<AgentId, usize> = BTreeMap::new();
    let mut accepted_history: Vec<AcceptedEntry> = Vec::new();
    let mut conversation: Vec<Vec<Message>> = Vec::new();
    let mut latest_slate: Option<(u32, CandidateSlate)> = None;
    let mut latest_votes: Option<VoteView> = None;
    let mut records: Vec<RoundRecord> = Vec::new();

    let query_sequence = options.query_order.sequence(k);

    for round in 1..=config.rounds {
        // Message phase.
        let snapshot = PhaseSnapshot {
            round,
            total_rounds: config.rounds,
            phase: Phase::Message,
            mechanism: config.mechanism,
            roster: roster.clone(),
            task_description: task_description.clone(),
            conversation: conversation.clone(),
            latest_slate: latest_slate.clone(),
            latest_votes: latest_votes.clone(),
            latest_accepted: accepted_history.last().cloned(),
            latest_proposals: materialize_latest(&registry, &latest_proposal),
        };
        let mut drafts: BTreeMap<AgentId, MessageDraft> = BTreeMap::new();
        for agent_index in &query_sequence {
            let me = AgentId(*agent_index);
            let ctx = context_for(&snapshot, me, env, &roster);
            let draft = retried(options.attempts, || policies[me.index()].decide_message(&ctx))
                .unwrap_or_else(|| MessageDraft {
                    targets: Vec::new(),
                    text: SILENT_MESSAGE.to_string(),
                });
            drafts.insert(me, draft);
        }
        let messages: Vec<Message> = drafts
            .into_iter()
            .map(|(sender, draft)| sanitize_message(sender, draft, k))
            .collect();
        conversation.push(messages.clone());

        // Proposal phase; the snapshot now includes this round's messages.
        let snapshot = PhaseSnapshot {
            phase: Phase::Proposal,
            conversation: conversation.clone(),
            ..snapshot
        };
        let mut actions: BTreeMap<AgentId, ProposalAction> = BTreeMap::new();
        for agent_index in &query_sequence {
            let me = AgentId(*agent_index);
            let ctx = context_for(&snapshot, me, env, &roster);
            let action = retried(options.attempts, || {
                policies[me.index()].decide_proposal(&ctx)
            })
            .unwrap_or(ProposalAction::Skip);
            actions.insert(me, action);
        }
        let mut proposal_reasons: BTreeMap<AgentId, String> = BTreeMap::new();
        let mut proposed_this_round: BTreeMap<AgentId, bool> = BTreeMap::new();
        for (me, action) in actions {
            match action {
                ProposalAction::Skip => {
                    proposed_this_round.insert(me, false);
                }
                ProposalAction::Propose { body, reason } => {
                    if let Err(error) = env.validate_body(&body) {
                        // Malformed bodies degrade to a recorded skip.
                        warn!("round {round}: agent {me} proposal rejected: {error}");
                        proposed_this_round.insert(me, false);
                        continue;
                    }
                    if let Some(reason) = reason {
                        proposal_reasons.insert(me, reason);
                    }
                    let bytes = body.canonical_bytes();
                    let index = match body_index.get(&bytes) {
                        Some(index) => {
                            registry[*index].authors.insert(me);
                            *index
                        }
                        None => {
                            let index = registry.len();
                            registry.push(Proposal {
                                id: index as u64 + 1,
                                round,
                                authors: [me].into_iter().collect(),
                                body,
                            });
                            body_index.insert(bytes, index);
                            index
                        }
                    };
                    latest_proposal.insert(me, index);
                    proposed_this_round.insert(me, true);
                }
            }
        }
        let new_proposals: BTreeMap<AgentId, Option<Proposal>> = proposed_this_round
            .iter()
            .map(|(me, proposed)| {
                let entry = proposed
                    .then(|| latest_proposal.get(me).map(|i| registry[*i].clone()))
                    .flatten();
                (*me, entry)
            })
            .collect();

        // Voting phase.
        let latest_map = materialize_latest(&registry, &latest_proposal);
        let slate = assemble_candidates(
            &latest_map,
            accepted_history.last().map(|e| &e.proposal),
        );
        let (outcome, ballots, round_tally) = if slate.is_empty() {
            // No candidates: the phase is skipped and the decision deferred.
            (Outcome::Deferred, BTreeMap::new(), None)
        } else {
            let snapshot = PhaseSnapshot {
                phase: Phase::Voting,
                latest_slate: Some((round, slate.clone())),
                conversation: conversation.clone(),
                ..snapshot
            };
            let mut drafts: BTreeMap<AgentId, BallotDraft> = BTreeMap::new();
            for agent_index in &query_sequence {
                let me = AgentId(*agent_index);
                let ctx = context_for(&snapshot, me, env, &roster);
                let draft = retried(options.attempts, || {
                    policies[me.index()].decide_ballot(&ctx, &slate, config.mechanism)
                })
                .unwrap_or(BallotDraft {
                    ballot: Ballot::Abstain,
                    reason: None,
                });
                drafts.insert(me, draft);
            }
            let raw: BTreeMap<u32, Ballot> = drafts
                .iter()
                .map(|(a, d)| (a.0, d.ballot.clone()))
                .collect();
            let result = tally(config.mechanism, &slate.ids(), &raw, k);
            let ballots: BTreeMap<AgentId, BallotRecord> = drafts
                .into_iter()
                .map(|(agent, draft)| {
                    let disposition = result
                        .dispositions
                        .get(&agent.0)
                        .cloned()
                        .unwrap_or(crate::social_choice::BallotDisposition::Abstained);
                    (
                        agent,
                        BallotRecord {
                            ballot: draft.ballot,
                            disposition,
                            reason: draft.reason,
                        },
                    )
                })
                .collect();
            (result.outcome, ballots, Some(result.tally))
        };
        commit_outcome(&mut accepted_history, round, outcome, &slate);
        latest_slate = Some((round, slate.clone()));
        latest_votes = Some(VoteView {
            round,
            ballots: ballots.clone(),
            outcome,
        });

        records.push(RoundRecord {
            round,
            messages,
            new_proposals,
            proposal_reasons,
            slate,
            ballots,
            outcome,
            tally: round_tally,
        });
    }

    let transcript = Transcript {
        v: TRANSCRIPT_VERSION,
        config: config.clone(),
        seed: config.seed,
        rounds: records,
        accepted_history: accepted_history.clone(),
        final_decision: accepted_history.last().map(|e| e.proposal.clone()),
    };
    debug_assert_eq!(transcript.check_invariants(), Ok(()));
    Ok(transcript)
}

fn retried<T>(
    attempts: u32,
    mut attempt: impl FnMut() -> Result<T, crate::agents::PolicyError>,
) -> Option<T> {
    for n in 0..attempts.max(1) {
        match attempt() {
            Ok(value) => return Some(value),
            Err(error) => warn!("policy attempt {} failed: {error}", n + 1),
        }
    }
    None
}

fn context_for<'a>(
    snapshot: &'a PhaseSnapshot,
    me: AgentId,
    env: &dyn Environment,
    roster: &Roster,
) -> ContextView<'a> {
    ContextView {
        shared: snapshot,
        me,
        background: env.agent_background(me.0, roster),
        utility: env.agent_utility_text(me.0),
    }
}

fn materialize_latest(
    registry: &[Proposal],
    latest: &BTreeMap<AgentId, usize>,
) -> BTreeMap<AgentId, Proposal> {
    latest
        .iter()
        .map(|(agent, index)| (*agent, registry[*index].clone()))
        .collect()
}

/// Messages are globally visible; targets are metadata only. Unknown
/// targets are dropped, an empty target list broadcasts to all others,
/// and empty text degrades to the silent placeholder.
fn sanitize_message(sender: AgentId, draft: MessageDraft, k: u32) -> Message {
    let mut targets: Vec<AgentId> = draft
        .targets
        .into_iter()
        .filter(|t| t.0 < k && *t != sender)
        .collect();
    targets.sort();
    targets.dedup();
    if targets.is_empty() {
        targets = (0..k).map(AgentId).filter(|t| *t != sender).collect();
    }
    let text = if draft.text.is_empty() {
        SILENT_MESSAGE.to_string()
    } else {
        draft.text
    };
    Message {
        sender,
        targets,
        text,
    }
}

impl Roster {
    /// Environment-preferred names when available, `Agent1..K` otherwise.
    fn default_roster_for(env: &dyn Environment, k: usize) -> Roster {
        match env.preferred_names() {
            Some(names) if names.len() == k => {
                Roster::new(names).unwrap_or_else(|_| Roster::default_names(k))
            }
            _ => Roster::default_names(k),
        }
    }
}
