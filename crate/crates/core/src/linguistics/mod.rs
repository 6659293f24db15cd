//! Message-level conversation features: length, readability, information
//! difference, dialogue acts, and the act transition graph.

pub mod acts;
pub mod embed;
pub mod features;
pub mod transition;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use acts::{HttpLabeler, LabelCache, Labeler, StubLabeler};
pub use embed::{info_difference, Embedder, EmbeddingVector, HttpEmbedder, StubEmbedder};
pub use features::{fk_grade, word_count};
pub use transition::{most_probable_edges, transition_graph, NumeratorMode, TransitionGraph};

/// Communicative function labels, multi-label per message, plus the
/// virtual `Start` and `End` acts used by the transition graph.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum DialogueAct {
    Inform,
    Request,
    Confirm,
    Summarize,
    Evaluate,
    Propose,
    Compromise,
    Defend,
    Accept,
    Decline,
    Others,
    /// Virtual act at round 0 only.
    Start,
    /// Virtual act at round R+1 only.
    End,
}

impl DialogueAct {
    /// The eleven content labels a message may carry.
    pub const CONTENT: [DialogueAct; 11] = [
        DialogueAct::Inform,
        DialogueAct::Request,
        DialogueAct::Confirm,
        DialogueAct::Summarize,
        DialogueAct::Evaluate,
        DialogueAct::Propose,
        DialogueAct::Compromise,
        DialogueAct::Defend,
        DialogueAct::Accept,
        DialogueAct::Decline,
        DialogueAct::Others,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DialogueAct::Inform => "Inform",
            DialogueAct::Request => "Request",
            DialogueAct::Confirm => "Confirm",
            DialogueAct::Summarize => "Summarize",
            DialogueAct::Evaluate => "Evaluate",
            DialogueAct::Propose => "Propose",
            DialogueAct::Compromise => "Compromise",
            DialogueAct::Defend => "Defend",
            DialogueAct::Accept => "Accept",
            DialogueAct::Decline => "Decline",
            DialogueAct::Others => "Others",
            DialogueAct::Start => "Start",
            DialogueAct::End => "End",
        }
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Unknown labeler outputs map to `Others`.
impl FromStr for DialogueAct {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized = s.trim();
        Ok(Self::CONTENT
            .into_iter()
            .find(|act| act.name().eq_ignore_ascii_case(normalized))
            .unwrap_or(DialogueAct::Others))
    }
}

/// Dialogue-act annotation of one message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledMessage {
    pub simulation: u64,
    pub round: u32,
    pub agent: u32,
    pub acts: BTreeSet<DialogueAct>,
}

impl LabeledMessage {
    pub fn check(&self) -> Result<(), String> {
        if self.acts.is_empty() {
            return Err("act set must be nonempty".to_string());
        }
        if self
            .acts
            .iter()
            .any(|a| matches!(a, DialogueAct::Start | DialogueAct::End))
        {
            return Err("content labels only; Start/End are virtual".to_string());
        }
        Ok(())
    }
}
