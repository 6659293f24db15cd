//! Prompt templates for the LLM-backed policy.
//!
//! The rendered text is frozen byte-for-byte by golden files; variables
//! are substituted with a single pass, and unbound variables are a
//! configuration error.

use std::collections::BTreeMap;

use crate::social_choice::Mechanism;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateId {
    Initialization,
    MessagePhase,
    ProposalPhase,
    VotingPhase(Mechanism),
}

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("unbound template variable `{0}`")]
    Unbound(String),
}

pub const INITIALIZATION_TEMPLATE: &str = "\
# Agent Initialization
You are {my_name}, an agent in a recurring collaboration environment designed to address and solve complex problems.

# Task Description
{task_description}

# Collaboration Rules
You start with nothing decided. The intermediate result will be decided by the social choice function at the end of each round.
In each round, the collaboration runs in 3 phases with the following order:
1. Message Phase: At the beginning of each round, you can send one message to a shared channel for either Talking to one or more agents. All agents will send messages simultaneously. You will be able to see all messages from all agents after the end of the message phase.
2. Proposal Phase: After the end of the message phase, you will have the opportunity to propose potential solution. If you don't propose in this phase, your latest proposal will be used for voting.
3. Voting Phase: At the end of the round, all agents' latest proposal will be voted. When agents didn't propose in this round, their latest proposal will be used for voting. All votes will be processed with the social choice function: {name_of_social_choice}, where {explanation_of_social_choice}. If the social choice function selects a proposal, the intermediate result will be updated accordingly. After each round, each agent will be able to see the result of the vote from the previous round and the conversation history from all rounds.

The collaboration will run for {max_rounds} rounds. After the last round, the latest result will be the final result.

# Your Background
{my_background}

# Game History
## Latest Candidates at Round {latest_candidates_round}:
{latest_candidates}

## Latest Voting Result at Round {vote_history_length}:
{latest_vote_history}

## Latest Approved Proposal:
Proposal {latest_approved_proposal_id} from Round {latest_approved_proposal_round}.

Proposal {latest_approved_proposal_id} Detail:
{latest_approved_proposal_detail}

## Conversation History until Round {conversation_history_length}:
{conversation_history}
";

pub const MESSAGE_PHASE_TEMPLATE: &str = "\
You are {my_name}, currently in the message phase of round {round_num}. In this phase, you can:
1. Answer questions posed by others.
2. Share your findings or insights.
3. Ask questions to further the discussion.
You may engage in multiple activities using multiple sentences.

Please type your message in the following JSON format: {\"target\": <list of agent names>, \"message\": <str, your message>}
Don't generate anything except the JSON format.
";

pub const PROPOSAL_PHASE_TEMPLATE: &str = "\
You are {my_name}, currently in the proposal phase of round {round_num}. You have an opportunity to make a proposal of the potential solution. Whether or not you submit a new proposal, your latest proposal will be considered as a candidate proposal for the voting phase.

You have two options:
1. Make a proposal:
    - You can propose a potential solution by the provided format.
2. Do not make a proposal:
    - If you do not want to propose a solution, you can return None as your proposal.

Please type your proposal in the following JSON format: {\"reason_for_decision\": <your step by step reasoning for your decision>, \"proposal\": {proposal_format_text}, or None}
Don't generate anything except the JSON format.
";

pub const VOTING_PHASE_TEMPLATE: &str = "\
You are {my_name}, at the voting phase at round {round_num}.
In this phase, all agents' latest proposal will be voted by {name_of_social_choice}, where {explanation_of_social_choice}. If the social choice function selects a proposal, the intermediate result will be updated accordingly.

You have two actions to choose: vote or not vote.
1. For vote:
{vote_action}
2. For not vote:
    - You should vote None.
    - If you do not want to vote for any of the proposals, you can vote None.
    - If there is no proposal, you vote None.

The same proposal proposed by multiple agents will be merged as one proposal.
If there are multiple proposals passed, none of the proposals will be selected.
If no proposals are passed, the current intermediate result will be kept.

The current candidate proposals are as follows:
{proposal_list}

What is your vote? Please answer in the following JSON format: {\"reason_for_decision\": <your step by step reasoning for your decision>, \"decision\": {decision_format}}
Don't generate anything except the JSON format.
";

/// Verbatim mechanism description embedded into voting prompts.
pub fn mechanism_description(mechanism: Mechanism) -> &'static str {
    match mechanism {
        Mechanism::Unanimous => {
            "The proposal that receives votes from all agents will be selected. If no proposal receives votes from all agents, no proposal will be selected."
        }
        Mechanism::Majority => {
            "The proposal that receives votes from more than half of all agents will be selected. If no proposal meets this condition, none will be selected."
        }
        Mechanism::Plurality => "The proposal that receives the most votes will be selected.",
        Mechanism::Rated => {
            "Each agent assigns ratings on a 5-point Likert scale to all candidate proposals, with 1 being the lowest and 5 being the highest. The proposal with the highest total score will be selected."
        }
        Mechanism::Ranked => {
            "Each agent ranks all candidate proposals from the most preferred to the least preferred. Social Choice will assign 1, 1/2, 1/3... points to the 1st, 2nd, 3rd... candidates on each ballot. The proposal with the highest total points will be selected."
        }
        Mechanism::Cumulative => {
            "For X candidate proposals, each agent is given X points to distribute among the proposals as they see fit. The proposal with the highest total points will be selected."
        }
    }
}

/// Display name of the mechanism inside prompts.
pub fn mechanism_title(mechanism: Mechanism) -> &'static str {
    match mechanism {
        Mechanism::Unanimous => "Unanimous Voting",
        Mechanism::Majority => "Majority Voting",
        Mechanism::Plurality => "Plurality Voting",
        Mechanism::Rated => "Rated Voting",
        Mechanism::Ranked => "Ranked Voting",
        Mechanism::Cumulative => "Cumulative Voting",
    }
}

fn vote_action(mechanism: Mechanism) -> &'static str {
    match mechanism {
        Mechanism::Unanimous | Mechanism::Majority | Mechanism::Plurality => {
            "    - You can only vote for one of the proposals from the candidate list."
        }
        Mechanism::Rated => {
            "    - You should rate every proposal from the candidate list on a 5-point scale."
        }
        Mechanism::Ranked => {
            "    - You should rank all proposals from the candidate list from the most preferred to the least preferred."
        }
        Mechanism::Cumulative => {
            "    - You should distribute your points among the proposals from the candidate list."
        }
    }
}

fn decision_format(mechanism: Mechanism) -> &'static str {
    match mechanism {
        Mechanism::Unanimous | Mechanism::Majority | Mechanism::Plurality => {
            "<id of the proposal from the candidates you want to vote, or None>"
        }
        Mechanism::Rated => {
            "<JSON object mapping each candidate proposal id to an integer rating from 1 to 5, or None>"
        }
        Mechanism::Ranked => {
            "<JSON list of all candidate proposal ids ordered from the most preferred to the least preferred, or None>"
        }
        Mechanism::Cumulative => {
            "<JSON object mapping candidate proposal ids to nonnegative points that sum to your point budget, or None>"
        }
    }
}

/// Renders a template with every variable bound.
pub fn render_prompt(
    id: TemplateId,
    vars: &BTreeMap<String, String>,
) -> Result<String, PromptError> {
    let mut vars = vars.clone();
    let template = match id {
        TemplateId::Initialization => {
            bind_mechanism_vars(&mut vars);
            INITIALIZATION_TEMPLATE
        }
        TemplateId::MessagePhase => MESSAGE_PHASE_TEMPLATE,
        TemplateId::ProposalPhase => PROPOSAL_PHASE_TEMPLATE,
        TemplateId::VotingPhase(mechanism) => {
            vars.insert(
                "name_of_social_choice".to_string(),
                mechanism_title(mechanism).to_string(),
            );
            vars.insert(
                "explanation_of_social_choice".to_string(),
                mechanism_description(mechanism).to_string(),
            );
            vars.insert("vote_action".to_string(), vote_action(mechanism).to_string());
            vars.insert(
                "decision_format".to_string(),
                decision_format(mechanism).to_string(),
            );
            VOTING_PHASE_TEMPLATE
        }
    };
    substitute(template, &vars)
}

fn bind_mechanism_vars(vars: &mut BTreeMap<String, String>) {
    if let Some(name) = vars.get("mechanism").cloned() {
        if let Ok(mechanism) = name.parse::<Mechanism>() {
            vars.entry("name_of_social_choice".to_string())
                .or_insert_with(|| mechanism_title(mechanism).to_string());
            vars.entry("explanation_of_social_choice".to_string())
                .or_insert_with(|| mechanism_description(mechanism).to_string());
        }
    }
}

/// Single-pass `{variable}` substitution. Braces not wrapping a known
/// identifier shape (lowercase and underscores) are literal text, so the
/// embedded JSON examples survive untouched.
fn substitute(template: &str, vars: &BTreeMap<String, String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let bytes = template.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                let name = &template[i + 1..j];
                let value = vars
                    .get(name)
                    .ok_or_else(|| PromptError::Unbound(name.to_string()))?;
                out.push_str(value);
                i = j + 1;
                continue;
            }
        }
        // Advance one full UTF-8 character.
        let ch = template[i..].chars().next().expect("valid utf8");
        out.push(ch);
        i += ch.len_utf8();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn message_phase_contains_exact_format_sentence() {
        let rendered = render_prompt(
            TemplateId::MessagePhase,
            &vars(&[("my_name", "A1"), ("round_num", "2")]),
        )
        .unwrap();
        assert!(rendered.contains("Please type your message in the following JSON format"));
        assert!(rendered.contains("Don't generate anything except the JSON format."));
        assert!(rendered.contains("You are A1, currently in the message phase of round 2."));
    }

    #[test]
    fn rated_voting_prompt_embeds_likert_description() {
        let rendered = render_prompt(
            TemplateId::VotingPhase(Mechanism::Rated),
            &vars(&[
                ("my_name", "A1"),
                ("round_num", "3"),
                ("proposal_list", "Proposal 1: x"),
            ]),
        )
        .unwrap();
        assert!(rendered.contains("5-point Likert scale"));
    }

    #[test]
    fn initialization_names_the_round_budget() {
        let rendered = render_prompt(
            TemplateId::Initialization,
            &vars(&[
                ("my_name", "A1"),
                ("task_description", "t"),
                ("mechanism", "majority"),
                ("max_rounds", "10"),
                ("my_background", "b"),
                ("latest_candidates_round", "0"),
                ("latest_candidates", "None"),
                ("vote_history_length", "0"),
                ("latest_vote_history", "None"),
                ("latest_approved_proposal_id", "None"),
                ("latest_approved_proposal_round", "None"),
                ("latest_approved_proposal_detail", "None"),
                ("conversation_history_length", "0"),
                ("conversation_history", "None"),
            ]),
        )
        .unwrap();
        assert!(rendered.contains("will run for 10 rounds"));
    }

    #[test]
    fn unbound_variable_is_a_configuration_error() {
        let error = render_prompt(TemplateId::MessagePhase, &vars(&[("my_name", "A1")]));
        assert!(matches!(error, Err(PromptError::Unbound(name)) if name == "round_num"));
    }

    #[test]
    fn rendering_is_injective_over_distinct_bindings() {
        let a = render_prompt(
            TemplateId::MessagePhase,
            &vars(&[("my_name", "A1"), ("round_num", "2")]),
        )
        .unwrap();
        let b = render_prompt(
            TemplateId::MessagePhase,
            &vars(&[("my_name", "A2"), ("round_num", "2")]),
        )
        .unwrap();
        let c = render_prompt(
            TemplateId::MessagePhase,
            &vars(&[("my_name", "A1"), ("round_num", "3")]),
        )
        .unwrap();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
    }

    #[test]
    fn json_braces_survive_substitution() {
        let rendered = render_prompt(
            TemplateId::MessagePhase,
            &vars(&[("my_name", "A1"), ("round_num", "1")]),
        )
        .unwrap();
        assert!(rendered.contains("{\"target\": <list of agent names>"));
    }
}
