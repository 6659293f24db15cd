//! Dialogue-act labeling: the pluggable labeler interface, the
//! deterministic keyword stub, the wire-backed labeler, and the
//! append-only label cache.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use log::warn;
use serde::{Deserialize, Serialize};

use super::DialogueAct;
use crate::agents::wire::{ChatClient, ChatMessage};

#[derive(Debug, thiserror::Error)]
pub enum LabelError {
    #[error("labeler request failed: {0}")]
    Request(String),
}

/// Maps one message (with the previous round as context) to a nonempty
/// set of dialogue acts.
pub trait Labeler: Send + Sync {
    fn label(
        &self,
        message: &str,
        previous_round: &[String],
    ) -> Result<BTreeSet<DialogueAct>, LabelError>;
}

/// Labels a message, degrading to `{Others}` with a warning when the
/// labeler fails.
pub fn label_dialogue_acts(
    message: &str,
    previous_round: &[String],
    labeler: &dyn Labeler,
) -> BTreeSet<DialogueAct> {
    match labeler.label(message, previous_round) {
        Ok(acts) if !acts.is_empty() => acts,
        Ok(_) => BTreeSet::from([DialogueAct::Others]),
        Err(error) => {
            warn!("dialogue-act labeler failed: {error}; falling back to Others");
            BTreeSet::from([DialogueAct::Others])
        }
    }
}

/// Deterministic keyword labeler for tests and offline runs.
#[derive(Debug, Clone, Default)]
pub struct StubLabeler;

impl Labeler for StubLabeler {
    fn label(
        &self,
        message: &str,
        _previous_round: &[String],
    ) -> Result<BTreeSet<DialogueAct>, LabelError> {
        let lower = message.to_lowercase();
        let mut acts = BTreeSet::new();
        let keyword_map = [
            ("propose", DialogueAct::Propose),
            ("suggest", DialogueAct::Propose),
            ("compromise", DialogueAct::Compromise),
            ("accept", DialogueAct::Accept),
            ("agree", DialogueAct::Accept),
            ("decline", DialogueAct::Decline),
            ("refuse", DialogueAct::Decline),
            ("defend", DialogueAct::Defend),
            ("confirm", DialogueAct::Confirm),
            ("verify", DialogueAct::Confirm),
            ("summar", DialogueAct::Summarize),
            ("evaluat", DialogueAct::Evaluate),
            ("assess", DialogueAct::Evaluate),
            ("?", DialogueAct::Request),
            ("request", DialogueAct::Request),
            ("inform", DialogueAct::Inform),
            ("share", DialogueAct::Inform),
        ];
        for (keyword, act) in keyword_map {
            if lower.contains(keyword) {
                acts.insert(act);
            }
        }
        if acts.is_empty() {
            acts.insert(DialogueAct::Inform);
        }
        Ok(acts)
    }
}

/// The annotation prompt: act definitions plus the target message and
/// the previous round as context.
pub fn labeling_prompt(message: &str, previous_round: &[String]) -> String {
    let context = if previous_round.is_empty() {
        "None".to_string()
    } else {
        previous_round.join("\n")
    };
    format!(
        "You annotate dialogue acts in multi-agent collaboration messages.\n\
         \n\
         Conversation Acts (Informational):\n\
         - Inform - Shares new information that wasn't previously known.\n\
         - Request - Asks for information that the speaker doesn't have.\n\
         - Confirm - Asks to verify or validate shared information.\n\
         - Summarize - Provides a brief overview of the main points.\n\
         - Evaluate - Gives an opinion or judgment about the information.\n\
         \n\
         Collaboration Acts (Decision-Making):\n\
         - Propose - Introduce a new solution in the discussion.\n\
         - Compromise - Offers a balanced solution that incorporates parts of different parties' preferences.\n\
         - Defend - Maintain support for an idea or solution after consideration or challenge.\n\
         - Accept - Agrees to or accept an idea or solution.\n\
         - Decline - Refuses or disagrees with an idea or solution.\n\
         \n\
         Messages from the previous round:\n\
         {context}\n\
         \n\
         Target message:\n\
         {message}\n\
         \n\
         Reply with a comma-separated list of every act the target message performs."
    )
}

/// Wire-backed labeler using the chat-completion protocol.
pub struct HttpLabeler {
    pub client: ChatClient,
}

impl Labeler for HttpLabeler {
    fn label(
        &self,
        message: &str,
        previous_round: &[String],
    ) -> Result<BTreeSet<DialogueAct>, LabelError> {
        let prompt = labeling_prompt(message, previous_round);
        let reply = self
            .client
            .complete(vec![ChatMessage {
                role: "user".to_string(),
                content: prompt,
            }])
            .map_err(|e| LabelError::Request(e.to_string()))?;
        Ok(parse_label_reply(&reply))
    }
}

/// Unknown labels map to `Others`; an empty reply becomes `{Others}`.
pub fn parse_label_reply(reply: &str) -> BTreeSet<DialogueAct> {
    let acts: BTreeSet<DialogueAct> = reply
        .split(|c: char| c == ',' || c == '\n' || c == ';')
        .map(str::trim)
        .filter(|part| !part.is_empty())
        .map(|part| part.parse().unwrap_or(DialogueAct::Others))
        .collect();
    if acts.is_empty() {
        BTreeSet::from([DialogueAct::Others])
    } else {
        acts
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheEntry {
    simulation: u64,
    round: u32,
    agent: u32,
    acts: BTreeSet<DialogueAct>,
}

/// Append-only label cache keyed by (simulation, round, agent), so
/// re-running analysis never re-bills the provider.
pub struct LabelCache {
    path: PathBuf,
    entries: Mutex<BTreeMap<(u64, u32, u32), BTreeSet<DialogueAct>>>,
}

impl LabelCache {
    pub fn open(path: PathBuf) -> std::io::Result<Self> {
        let mut entries = BTreeMap::new();
        if path.exists() {
            let contents = std::fs::read_to_string(&path)?;
            for line in contents.lines() {
                if line.trim().is_empty() {
                    continue;
                }
                if let Ok(entry) = serde_json::from_str::<CacheEntry>(line) {
                    entries.insert((entry.simulation, entry.round, entry.agent), entry.acts);
                }
            }
        }
        Ok(LabelCache {
            path,
            entries: Mutex::new(entries),
        })
    }

    pub fn get(&self, simulation: u64, round: u32, agent: u32) -> Option<BTreeSet<DialogueAct>> {
        self.entries
            .lock()
            .expect("cache lock")
            .get(&(simulation, round, agent))
            .cloned()
    }

    pub fn put(
        &self,
        simulation: u64,
        round: u32,
        agent: u32,
        acts: BTreeSet<DialogueAct>,
    ) -> std::io::Result<()> {
        let mut entries = self.entries.lock().expect("cache lock");
        if entries.contains_key(&(simulation, round, agent)) {
            return Ok(());
        }
        let entry = CacheEntry {
            simulation,
            round,
            agent,
            acts: acts.clone(),
        };
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        writeln!(file, "{}", serde_json::to_string(&entry)?)?;
        entries.insert((simulation, round, agent), acts);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stub_labeler_keys_on_propose() {
        let acts = StubLabeler.label("I propose an even split", &[]).unwrap();
        assert!(acts.contains(&DialogueAct::Propose));
    }

    #[test]
    fn provider_reply_parses_known_labels() {
        let acts = parse_label_reply("Inform, Request");
        assert_eq!(
            acts,
            BTreeSet::from([DialogueAct::Inform, DialogueAct::Request])
        );
    }

    #[test]
    fn unknown_labels_map_to_others() {
        let acts = parse_label_reply("Negotiate");
        assert_eq!(acts, BTreeSet::from([DialogueAct::Others]));
    }

    #[test]
    fn cache_round_trips_and_deduplicates() {
        let dir = std::env::temp_dir().join(format!("rt-label-cache-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("labels.jsonl");
        let _ = std::fs::remove_file(&path);
        let cache = LabelCache::open(path.clone()).unwrap();
        let acts = BTreeSet::from([DialogueAct::Propose]);
        cache.put(1, 2, 0, acts.clone()).unwrap();
        cache.put(1, 2, 0, acts.clone()).unwrap();
        assert_eq!(cache.get(1, 2, 0), Some(acts.clone()));
        drop(cache);
        let reopened = LabelCache::open(path.clone()).unwrap();
        assert_eq!(reopened.get(1, 2, 0), Some(acts));
        let lines = std::fs::read_to_string(&path).unwrap();
        assert_eq!(lines.lines().count(), 1);
        let _ = std::fs::remove_file(&path);
    }
}
