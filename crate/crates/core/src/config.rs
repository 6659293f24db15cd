//! Run configuration file: a TOML document naming the mechanism,
//! environment, agent roster, rounds, and seed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environments::economy::UtilitySetPreset;
use crate::environments::EnvironmentId;
use crate::social_choice::Mechanism;

/// Top-level configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub run: RunSection,
    pub environment: EnvironmentSection,
    #[serde(default, rename = "agent")]
    pub agents: Vec<AgentSection>,
    #[serde(default)]
    pub llm: LlmSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSection {
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    pub mechanism: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_rounds() -> u32 {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentSection {
    pub kind: String,
    /// Economy: utility-set preset name.
    #[serde(default)]
    pub preset: Option<String>,
    /// Rating: directory holding the five table files.
    #[serde(default)]
    pub tables_dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentSection {
    pub name: String,
    pub policy: String,
    /// Concession rate for the concessive policy.
    #[serde(default)]
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LlmSection {
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
}

/// Validated view of the configuration.
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub rounds: u32,
    pub mechanism: Mechanism,
    pub environment: EnvironmentId,
    pub preset: Option<UtilitySetPreset>,
    pub tables_dir: Option<String>,
    pub seed: u64,
    pub agents: Vec<AgentSection>,
    pub llm: LlmSection,
}

impl ValidatedConfig {
    pub fn uses_llm(&self) -> bool {
        self.agents.iter().any(|a| a.policy == "llm")
    }
}

pub const SCRIPTED_POLICIES: [&str; 4] = ["selfish", "even-split", "concessive", "random"];

#[derive(Debug, thiserror::Error)]
#[error("invalid configuration:\n{}", .0.join("\n"))]
pub struct ConfigErrors(pub Vec<String>);

/// Parses and validates a config file, reporting every problem at once.
pub fn load_config(path: &Path) -> Result<ValidatedConfig, ConfigErrors> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
    let parsed: RunConfig =
        toml::from_str(&raw).map_err(|e| ConfigErrors(vec![format!("parse error: {e}")]))?;
    validate_config(&parsed)
}

/// Validation separated from IO so tests can exercise it directly.
pub fn validate_config(config: &RunConfig) -> Result<ValidatedConfig, ConfigErrors> {
    let mut errors = Vec::new();

    if config.run.rounds < 1 {
        errors.push("run.rounds must be >= 1".to_string());
    }
    let mechanism = match config.run.mechanism.parse::<Mechanism>() {
        Ok(mechanism) => Some(mechanism),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };

    let environment = match config.environment.kind.as_str() {
        "economy" => Some(EnvironmentId::Economy),
        "rating" => Some(EnvironmentId::Rating),
        other => {
            errors.push(format!(
                "environment.kind `{other}` must be `economy` or `rating`"
            ));
            None
        }
    };

    let preset = match (&environment, &config.environment.preset) {
        (Some(EnvironmentId::Economy), Some(name)) => match UtilitySetPreset::parse(name) {
            Some(preset) => Some(preset),
            None => {
                errors.push(format!(
                    "unknown preset `{name}`; expected one of asymmetric-literal, asymmetric-normalized, symmetric, uniform"
                ));
                None
            }
        },
        (Some(EnvironmentId::Economy), None) => Some(UtilitySetPreset::AsymmetricLiteral),
        _ => None,
    };

    if environment == Some(EnvironmentId::Rating) && config.environment.tables_dir.is_none() {
        errors.push("rating environment requires environment.tables_dir".to_string());
    }

    if config.agents.len() < 2 {
        errors.push("need at least 2 [[agent]] entries".to_string());
    }
    let mut names: Vec<&str> = config.agents.iter().map(|a| a.name.as_str()).collect();
    names.sort();
    names.dedup();
    if names.len() != config.agents.len() {
        errors.push("agent names must be unique".to_string());
    }
    for agent in &config.agents {
        if agent.name.is_empty() {
            errors.push("agent names must be nonempty".to_string());
        }
        let known = agent.policy == "llm" || SCRIPTED_POLICIES.contains(&agent.policy.as_str());
        if !known {
            errors.push(format!(
                "agent {}: unknown policy `{}`; expected llm, selfish, even-split, concessive, or random",
                agent.name, agent.policy
            ));
        }
        if agent.policy == "concessive" {
            match agent.rate {
                Some(rate) if rate > 0.0 && rate <= 1.0 => {}
                _ => errors.push(format!(
                    "agent {}: concessive policy needs rate in (0, 1]",
                    agent.name
                )),
            }
        }
    }
    if environment == Some(EnvironmentId::Rating) && config.agents.len() != 3 {
        errors.push("rating environment requires exactly 3 agents".to_string());
    }

    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    Ok(ValidatedConfig {
        rounds: config.run.rounds,
        mechanism: mechanism.expect("validated"),
        environment: environment.expect("validated"),
        preset,
        tables_dir: config.environment.tables_dir.clone(),
        seed: config.run.seed,
        agents: config.agents.clone(),
        llm: config.llm.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn economy_toml() -> &'static str {
        r#"
            [run]
            rounds = 10
            mechanism = "majority"
            seed = 42

            [environment]
            kind = "economy"
            preset = "asymmetric-literal"

            [[agent]]
            name = "Agent1"
            policy = "selfish"

            [[agent]]
            name = "Agent2"
            policy = "even-split"

            [[agent]]
            name = "Agent3"
            policy = "concessive"
            rate = 0.5
        "#
    }

    #[test]
    fn valid_economy_config_parses() {
        let parsed: RunConfig = toml::from_str(economy_toml()).unwrap();
        let validated = validate_config(&parsed).unwrap();
        assert_eq!(validated.mechanism, Mechanism::Majority);
        assert_eq!(validated.agents.len(), 3);
        assert!(!validated.uses_llm());
    }

    #[test]
    fn all_errors_reported_at_once() {
        let parsed: RunConfig = toml::from_str(
            r#"
                [run]
                rounds = 0
                mechanism = "approval"

                [environment]
                kind = "voting"

                [[agent]]
                name = "Solo"
                policy = "mystery"
            "#,
        )
        .unwrap();
        let errors = validate_config(&parsed).unwrap_err();
        assert!(errors.0.len() >= 4, "errors: {:?}", errors.0);
        assert!(errors.0.iter().any(|e| e.contains("unanimous")));
    }
}
