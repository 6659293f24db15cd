//! LLM-backed policy: renders the phase prompts, calls the provider, and
//! parses structured actions out of the reply.

use std::collections::BTreeMap;

use super::parse::{parse_agent_reply, ParsedReply};
use super::prompts::{render_prompt, TemplateId};
use super::wire::{ChatClient, ChatMessage};
use super::{
    AgentPolicy, BallotDraft, ContextView, MessageDraft, Phase, PolicyError, ProposalAction,
};
use crate::engine::{AgentId, CandidateSlate, Message, Roster};
use crate::environments::Environment;
use crate::social_choice::Mechanism;

/// One LLM-driven agent. Holds no shared mutable state.
pub struct LlmPolicy<'e> {
    pub me: AgentId,
    client: ChatClient,
    env: &'e dyn Environment,
}

impl<'e> LlmPolicy<'e> {
    pub fn new(me: AgentId, client: ChatClient, env: &'e dyn Environment) -> Self {
        LlmPolicy { me, client, env }
    }

    fn initialization_prompt(&self, ctx: &ContextView) -> Result<String, PolicyError> {
        let shared = ctx.shared;
        let roster = &shared.roster;
        let mut vars = BTreeMap::new();
        vars.insert("my_name".to_string(), ctx.my_name().to_string());
        vars.insert(
            "task_description".to_string(),
            shared.task_description.clone(),
        );
        vars.insert(
            "mechanism".to_string(),
            shared.mechanism.name().to_string(),
        );
        vars.insert("max_rounds".to_string(), shared.total_rounds.to_string());
        vars.insert("my_background".to_string(), ctx.background.clone());

        let (candidates_round, candidates) = match &shared.latest_slate {
            Some((round, slate)) if !slate.is_empty() => {
                (round.to_string(), render_slate(slate, self.env, roster))
            }
            _ => ("0".to_string(), "None".to_string()),
        };
        vars.insert("latest_candidates_round".to_string(), candidates_round);
        vars.insert("latest_candidates".to_string(), candidates);

        let (vote_round, votes) = match &shared.latest_votes {
            Some(view) => (view.round.to_string(), render_votes(view, roster)),
            None => ("0".to_string(), "None".to_string()),
        };
        vars.insert("vote_history_length".to_string(), vote_round);
        vars.insert("latest_vote_history".to_string(), votes);

        let (approved_id, approved_round, approved_detail) = match &shared.latest_accepted {
            Some(entry) => (
                entry.proposal.id.to_string(),
                entry.round.to_string(),
                self.env.render_body(&entry.proposal.body, roster),
            ),
            None => ("None".to_string(), "None".to_string(), "None".to_string()),
        };
        vars.insert("latest_approved_proposal_id".to_string(), approved_id);
        vars.insert("latest_approved_proposal_round".to_string(), approved_round);
        vars.insert(
            "latest_approved_proposal_detail".to_string(),
            approved_detail,
        );

        let history_rounds = shared.conversation.len();
        vars.insert(
            "conversation_history_length".to_string(),
            history_rounds.to_string(),
        );
        vars.insert(
            "conversation_history".to_string(),
            render_conversation(&shared.conversation, roster),
        );

        render_prompt(TemplateId::Initialization, &vars)
            .map_err(|e| PolicyError::Internal(e.to_string()))
    }

    fn phase_prompt(
        &self,
        ctx: &ContextView,
        slate: Option<&CandidateSlate>,
        mechanism: Mechanism,
    ) -> Result<String, PolicyError> {
        let mut vars = BTreeMap::new();
        vars.insert("my_name".to_string(), ctx.my_name().to_string());
        vars.insert("round_num".to_string(), ctx.shared.round.to_string());
        let template = match ctx.shared.phase {
            Phase::Message => TemplateId::MessagePhase,
            Phase::Proposal => {
                vars.insert(
                    "proposal_format_text".to_string(),
                    self.env.proposal_format_text(&ctx.shared.roster),
                );
                TemplateId::ProposalPhase
            }
            Phase::Voting => {
                let slate = slate.expect("voting prompt needs a slate");
                vars.insert(
                    "proposal_list".to_string(),
                    render_slate(slate, self.env, &ctx.shared.roster),
                );
                TemplateId::VotingPhase(mechanism)
            }
        };
        render_prompt(template, &vars).map_err(|e| PolicyError::Internal(e.to_string()))
    }

    fn ask(&self, ctx: &ContextView, phase_prompt: String) -> Result<String, PolicyError> {
        let messages = vec![
            ChatMessage {
                role: "system".to_string(),
                content: self.initialization_prompt(ctx)?,
            },
            ChatMessage {
                role: "user".to_string(),
                content: phase_prompt,
            },
        ];
        self.client
            .complete(messages)
            .map_err(|e| PolicyError::Transport(e.to_string()))
    }
}

fn render_slate(slate: &CandidateSlate, env: &dyn Environment, roster: &Roster) -> String {
    slate
        .iter()
        .map(|candidate| {
            let authors: Vec<&str> = candidate
                .authors
                .iter()
                .map(|a| roster.name(*a))
                .collect();
            format!(
                "Proposal {} (from {}): {}",
                candidate.id,
                authors.join(", "),
                env.render_body(&candidate.body, roster)
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_votes(view: &super::VoteView, roster: &Roster) -> String {
    let mut lines: Vec<String> = view
        .ballots
        .iter()
        .map(|(agent, record)| {
            let vote = match &record.ballot {
                crate::social_choice::Ballot::Abstain => "None".to_string(),
                other => serde_json::to_string(other).unwrap_or_else(|_| "?".to_string()),
            };
            format!("{} voted {}", roster.name(*agent), vote)
        })
        .collect();
    let outcome = match view.outcome.selected() {
        Some(candidate) => format!("Result: Proposal {candidate} was selected."),
        None => "Result: no proposal was selected.".to_string(),
    };
    lines.push(outcome);
    lines.join("\n")
}

fn render_conversation(conversation: &[Vec<Message>], roster: &Roster) -> String {
    if conversation.is_empty() {
        return "None".to_string();
    }
    let mut lines = Vec::new();
    for (index, round) in conversation.iter().enumerate() {
        lines.push(format!("Round {}:", index + 1));
        for message in round {
            let targets: Vec<&str> = message.targets.iter().map(|t| roster.name(*t)).collect();
            lines.push(format!(
                "{} to {}: {}",
                roster.name(message.sender),
                targets.join(", "),
                message.text
            ));
        }
    }
    lines.join("\n")
}

impl AgentPolicy for LlmPolicy<'_> {
    fn decide_message(&self, ctx: &ContextView) -> Result<MessageDraft, PolicyError> {
        let prompt = self.phase_prompt(ctx, None, ctx.shared.mechanism)?;
        let raw = self.ask(ctx, prompt)?;
        match parse_agent_reply(Phase::Message, ctx.shared.mechanism, &raw)
            .map_err(|e| PolicyError::Parse(e.to_string()))?
        {
            ParsedReply::Message { targets, text } => {
                let ids = targets
                    .iter()
                    .filter_map(|name| ctx.shared.roster.id_of(name))
                    .collect();
                Ok(MessageDraft { targets: ids, text })
            }
            _ => Err(PolicyError::Parse("expected a message reply".to_string())),
        }
    }

    fn decide_proposal(&self, ctx: &ContextView) -> Result<ProposalAction, PolicyError> {
        let prompt = self.phase_prompt(ctx, None, ctx.shared.mechanism)?;
        let raw = self.ask(ctx, prompt)?;
        match parse_agent_reply(Phase::Proposal, ctx.shared.mechanism, &raw)
            .map_err(|e| PolicyError::Parse(e.to_string()))?
        {
            ParsedReply::Proposal { reason, payload } => match payload {
                None => Ok(ProposalAction::Skip),
                Some(value) => {
                    let body = self
                        .env
                        .parse_proposal_payload(&value, &ctx.shared.roster)
                        .map_err(|e| PolicyError::Parse(e.to_string()))?;
                    Ok(ProposalAction::Propose { body, reason })
                }
            },
            _ => Err(PolicyError::Parse("expected a proposal reply".to_string())),
        }
    }

    fn decide_ballot(
        &self,
        ctx: &ContextView,
        slate: &CandidateSlate,
        mechanism: Mechanism,
    ) -> Result<BallotDraft, PolicyError> {
        let prompt = self.phase_prompt(ctx, Some(slate), mechanism)?;
        let raw = self.ask(ctx, prompt)?;
        match parse_agent_reply(Phase::Voting, mechanism, &raw)
            .map_err(|e| PolicyError::Parse(e.to_string()))?
        {
            ParsedReply::Vote { reason, ballot } => Ok(BallotDraft { ballot, reason }),
            _ => Err(PolicyError::Parse("expected a vote reply".to_string())),
        }
    }
}
