//! Frozen-value check of the five economy metrics on a fixed scripted
//! transcript, against values computed independently with 40-digit
//! arithmetic.

use roundtable_core::agents::scripted::{ScriptedPolicy, ScriptedPolicyKind, ScriptedUtility};
use roundtable_core::agents::AgentPolicy;
use roundtable_core::engine::{run_collaboration, AgentId, EngineConfig};
use roundtable_core::environments::economy::{econ_metrics, EconomyEnv, UtilitySetPreset};
use roundtable_core::environments::EnvironmentId;
use roundtable_core::social_choice::Mechanism;

/// Analytic maximum for the literal asymmetric preset at K=3: the
/// objective is concave and symmetric under simultaneous agent/good
/// permutation, so the optimum lies on the one-parameter family
/// `a_ii = x`, maximized at x = 600/7.
const U_MAX_ASYMMETRIC_LITERAL: f64 = 137.21873719536385;

const TOLERANCE: f64 = 1e-9;

fn scripted_transcript(seed: u64) -> (roundtable_core::engine::Transcript, EconomyEnv) {
    let env = EconomyEnv::new(3, UtilitySetPreset::AsymmetricLiteral);
    let config = EngineConfig {
        rounds: 10,
        agents: 3,
        mechanism: Mechanism::Majority,
        environment: EnvironmentId::Economy,
        scenario: UtilitySetPreset::AsymmetricLiteral.name().to_string(),
        seed,
    };
    let kinds = [
        ScriptedPolicyKind::EvenSplit,
        ScriptedPolicyKind::EvenSplit,
        ScriptedPolicyKind::Selfish,
    ];
    let policies: Vec<Box<dyn AgentPolicy>> = kinds
        .iter()
        .enumerate()
        .map(|(index, kind)| {
            Box::new(ScriptedPolicy::new(
                *kind,
                AgentId(index as u32),
                seed.wrapping_add(index as u64),
                ScriptedUtility::Economy {
                    theta: env.utilities[index].clone(),
                    agents: 3,
                    goods: 3,
                },
            )) as Box<dyn AgentPolicy>
        })
        .collect();
    let transcript = run_collaboration(&config, &policies, &env).unwrap();
    (transcript, env)
}

#[test]
fn metrics_match_the_hand_computed_golden() {
    let (transcript, env) = scripted_transcript(424242);
    let metrics = econ_metrics(&transcript, &env, U_MAX_ASYMMETRIC_LITERAL).unwrap();

    // Two even-split agents outvote the selfish one in round 1 and every
    // round after, so the standing allocation is the even split
    // throughout. Golden values from 40-digit arithmetic:
    //   u_i(even) = (100/3)^(0.8 + 2*(0.2/3)) = 26.384781110271234...
    //   U_r = 3 * u_i(even) / U_max = 0.5768479214184756...
    let expected_u = 0.5768479214184756;
    assert_eq!(metrics.u_series.len(), 10);
    for (round, u) in metrics.u_series.iter().enumerate() {
        assert!(
            (u - expected_u).abs() < TOLERANCE,
            "round {}: U_r = {u}",
            round + 1
        );
    }
    assert!((metrics.auc[&3] - 1.7305437642554269).abs() < TOLERANCE);
    assert!((metrics.auc[&5] - 2.884239607092378).abs() < TOLERANCE);
    assert!((metrics.auc[&10] - 5.768479214184756).abs() < TOLERANCE);

    // The final standing allocation is the even split: all individual
    // utilities equal.
    assert!((metrics.minmax - 1.0).abs() < TOLERANCE);

    // Proposal events: round 1 has 3 (two even splits, one selfish);
    // rounds 2..10 only the selfish re-proposal. The even-split proposals
    // match the endowment utility exactly (not strictly better), the
    // selfish ones strictly improve the proposer's utility: 10/12.
    assert!((metrics.rationality - 10.0 / 12.0).abs() < TOLERANCE);

    // U never changes: rigidity 1.0.
    assert!((metrics.rigidity - 1.0).abs() < TOLERANCE);
}

#[test]
fn never_accepting_transcript_has_rigidity_one() {
    let env = EconomyEnv::new(3, UtilitySetPreset::AsymmetricLiteral);
    let config = EngineConfig {
        rounds: 10,
        agents: 3,
        mechanism: Mechanism::Unanimous,
        environment: EnvironmentId::Economy,
        scenario: UtilitySetPreset::AsymmetricLiteral.name().to_string(),
        seed: 99,
    };
    let policies: Vec<Box<dyn AgentPolicy>> = (0..3)
        .map(|index| {
            Box::new(ScriptedPolicy::new(
                ScriptedPolicyKind::Selfish,
                AgentId(index),
                99,
                ScriptedUtility::Economy {
                    theta: env.utilities[index as usize].clone(),
                    agents: 3,
                    goods: 3,
                },
            )) as Box<dyn AgentPolicy>
        })
        .collect();
    let transcript = run_collaboration(&config, &policies, &env).unwrap();
    assert!(transcript.accepted_history.is_empty());
    let metrics = econ_metrics(&transcript, &env, U_MAX_ASYMMETRIC_LITERAL).unwrap();
    assert_eq!(metrics.rigidity, 1.0);
    // Rationality: every selfish proposal strictly beats the endowment.
    assert_eq!(metrics.rationality, 1.0);
    // U stays at the endowment level all run.
    let u0 = metrics.u_series[0];
    assert!(metrics.u_series.iter().all(|u| *u == u0));
}

#[test]
fn recomputation_reproduces_metrics_bit_for_bit() {
    let (transcript, env) = scripted_transcript(7);
    let a = econ_metrics(&transcript, &env, U_MAX_ASYMMETRIC_LITERAL).unwrap();
    let b = econ_metrics(&transcript, &env, U_MAX_ASYMMETRIC_LITERAL).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}
