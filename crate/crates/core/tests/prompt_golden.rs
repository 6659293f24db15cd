//! Byte-for-byte golden checks of the rendered prompt templates.
//!
//! Regenerate with:
//! `cargo test -p roundtable-core --test prompt_golden -- --ignored regen`

use std::collections::BTreeMap;
use std::path::PathBuf;

use roundtable_core::agents::prompts::{render_prompt, TemplateId};
use roundtable_core::social_choice::Mechanism;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn vars(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn cases() -> Vec<(&'static str, TemplateId, BTreeMap<String, String>)> {
    let initialization = vars(&[
        ("my_name", "Agent1"),
        (
            "task_description",
            "You will collaborate with other agents in a recurring exchange market game.",
        ),
        ("mechanism", "majority"),
        ("max_rounds", "10"),
        (
            "my_background",
            "Your goal is to maximize your individual utility function by communicating, proposing, and voting with other agents. Your utility function is u = a_Good1^0.8000 * a_Good2^0.0667 * a_Good3^0.0667",
        ),
        ("latest_candidates_round", "2"),
        (
            "latest_candidates",
            "Proposal 1 (from Agent1, Agent2): Agent1 receives Good1: 33.33, Good2: 33.33, Good3: 33.33; Agent2 receives Good1: 33.33, Good2: 33.33, Good3: 33.33; Agent3 receives Good1: 33.33, Good2: 33.33, Good3: 33.33",
        ),
        ("vote_history_length", "2"),
        (
            "latest_vote_history",
            "Agent1 voted 1\nAgent2 voted 1\nAgent3 voted None\nResult: Proposal 1 was selected.",
        ),
        ("latest_approved_proposal_id", "1"),
        ("latest_approved_proposal_round", "2"),
        (
            "latest_approved_proposal_detail",
            "Agent1 receives Good1: 33.33, Good2: 33.33, Good3: 33.33; Agent2 receives Good1: 33.33, Good2: 33.33, Good3: 33.33; Agent3 receives Good1: 33.33, Good2: 33.33, Good3: 33.33",
        ),
        ("conversation_history_length", "2"),
        (
            "conversation_history",
            "Round 1:\nAgent1 to Agent2, Agent3: I propose an even split so that everyone benefits equally.\nAgent2 to Agent1, Agent3: I can compromise and move my proposal toward the group's preferences.\nAgent3 to Agent1, Agent2: I propose to keep the largest share for myself; I will defend that position.",
        ),
    ]);
    let phase = |name: &str, round: &str| vars(&[("my_name", name), ("round_num", round)]);
    let mut proposal = phase("Agent1", "3");
    proposal.insert(
        "proposal_format_text".to_string(),
        "{\"Agent1\": {\"Good1\": <number>, \"Good2\": <number>, \"Good3\": <number>}, \"Agent2\": {\"Good1\": <number>, \"Good2\": <number>, \"Good3\": <number>}, \"Agent3\": {\"Good1\": <number>, \"Good2\": <number>, \"Good3\": <number>}}".to_string(),
    );
    let voting = |mechanism: &str| {
        let mut v = phase("Agent1", "4");
        v.insert(
            "proposal_list".to_string(),
            "Proposal 1 (from Agent1): Agent1 receives Good1: 100.00, Good2: 100.00, Good3: 100.00; Agent2 receives Good1: 0.00, Good2: 0.00, Good3: 0.00; Agent3 receives Good1: 0.00, Good2: 0.00, Good3: 0.00\nProposal 2 (from Agent2, Agent3): Agent1 receives Good1: 33.33, Good2: 33.33, Good3: 33.33; Agent2 receives Good1: 33.33, Good2: 33.33, Good3: 33.33; Agent3 receives Good1: 33.33, Good2: 33.33, Good3: 33.33".to_string(),
        );
        let _ = mechanism;
        v
    };
    vec![
        ("initialization.txt", TemplateId::Initialization, initialization),
        ("message_phase.txt", TemplateId::MessagePhase, phase("Agent1", "2")),
        ("proposal_phase.txt", TemplateId::ProposalPhase, proposal),
        (
            "voting_phase_unanimous.txt",
            TemplateId::VotingPhase(Mechanism::Unanimous),
            voting("unanimous"),
        ),
        (
            "voting_phase_majority.txt",
            TemplateId::VotingPhase(Mechanism::Majority),
            voting("majority"),
        ),
        (
            "voting_phase_plurality.txt",
            TemplateId::VotingPhase(Mechanism::Plurality),
            voting("plurality"),
        ),
        (
            "voting_phase_rated.txt",
            TemplateId::VotingPhase(Mechanism::Rated),
            voting("rated"),
        ),
        (
            "voting_phase_ranked.txt",
            TemplateId::VotingPhase(Mechanism::Ranked),
            voting("ranked"),
        ),
        (
            "voting_phase_cumulative.txt",
            TemplateId::VotingPhase(Mechanism::Cumulative),
            voting("cumulative"),
        ),
    ]
}

#[test]
fn rendered_templates_match_golden_files() {
    for (file, template, bindings) in cases() {
        let rendered = render_prompt(template, &bindings).expect("all variables bound");
        let path = golden_dir().join(file);
        let golden = std::fs::read_to_string(&path)
            .unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
        assert_eq!(rendered, golden, "golden drift in {file}");
    }
}

#[test]
fn golden_files_carry_the_exact_paper_sentences() {
    let dir = golden_dir();
    let message = std::fs::read_to_string(dir.join("message_phase.txt")).unwrap();
    assert!(message.contains("Please type your message in the following JSON format"));
    assert!(message.contains("Don't generate anything except the JSON format."));
    let initialization = std::fs::read_to_string(dir.join("initialization.txt")).unwrap();
    assert!(initialization.contains("will run for 10 rounds"));
    let rated = std::fs::read_to_string(dir.join("voting_phase_rated.txt")).unwrap();
    assert!(rated.contains("5-point Likert scale"));
    let voting = std::fs::read_to_string(dir.join("voting_phase_majority.txt")).unwrap();
    assert!(voting.contains("The same proposal proposed by multiple agents will be merged as one proposal."));
    assert!(voting.contains("If there are multiple proposals passed, none of the proposals will be selected."));
    assert!(voting.contains("If no proposals are passed, the current intermediate result will be kept."));
}

/// Rewrites the golden files from the current templates.
#[test]
#[ignore]
fn regen() {
    let dir = golden_dir();
    std::fs::create_dir_all(&dir).unwrap();
    for (file, template, bindings) in cases() {
        let rendered = render_prompt(template, &bindings).expect("all variables bound");
        std::fs::write(dir.join(file), rendered).unwrap();
    }
}
