//! Parsing structured actions out of raw provider replies.
//!
//! Providers are asked to answer with a single JSON object; the parser
//! extracts the first balanced brace block that parses, tolerating
//! preambles and trailing prose around it.

use std::collections::BTreeMap;

use serde_json::Value;

use super::Phase;
use crate::social_choice::{Ballot, CandidateId, Mechanism};

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("no JSON object found in reply")]
    NoJson,
    #[error("reply schema mismatch: {0}")]
    Schema(String),
}

/// A structured action recovered from a raw reply.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedReply {
    Message {
        targets: Vec<String>,
        text: String,
    },
    /// `payload: None` means the agent skipped proposing.
    Proposal {
        reason: Option<String>,
        payload: Option<Value>,
    },
    Vote {
        reason: Option<String>,
        ballot: Ballot,
    },
}

/// Scans for the first balanced `{...}` block that parses as JSON.
pub fn extract_first_json(raw: &str) -> Option<Value> {
    let bytes = raw.as_bytes();
    let mut start = 0;
    while let Some(open) = raw[start..].find('{').map(|p| p + start) {
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        let mut end = None;
        for (offset, byte) in bytes[open..].iter().enumerate() {
            match byte {
                b'\\' if in_string => escaped = !escaped,
                b'"' if !escaped => in_string = !in_string,
                b'{' if !in_string => depth += 1,
                b'}' if !in_string => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(open + offset + 1);
                        break;
                    }
                }
                _ => escaped = false,
            }
            if *byte != b'\\' {
                escaped = false;
            }
        }
        match end {
            Some(end) => {
                if let Ok(value) = serde_json::from_str::<Value>(&raw[open..end]) {
                    return Some(value);
                }
                start = open + 1;
            }
            None => {
                start = open + 1;
            }
        }
    }
    None
}

fn is_none_marker(value: &Value) -> bool {
    match value {
        Value::Null => true,
        Value::String(s) => s.eq_ignore_ascii_case("none"),
        _ => false,
    }
}

fn reason_text(value: Option<&Value>) -> Option<String> {
    match value {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => Some(other.to_string()),
    }
}

/// Maps the provider's full text reply to a structured action, or a parse
/// error that drives the engine's retry-then-skip policy.
pub fn parse_agent_reply(
    phase: Phase,
    mechanism: Mechanism,
    raw: &str,
) -> Result<ParsedReply, ParseError> {
    let value = extract_first_json(raw).ok_or(ParseError::NoJson)?;
    let object = value
        .as_object()
        .ok_or_else(|| ParseError::Schema("reply is not an object".to_string()))?;
    match phase {
        Phase::Message => {
            let text = object
                .get("message")
                .and_then(Value::as_str)
                .ok_or_else(|| ParseError::Schema("missing string `message`".to_string()))?
                .to_string();
            let targets = match object.get("target") {
                Some(Value::Array(items)) => items
                    .iter()
                    .filter_map(Value::as_str)
                    .map(str::to_string)
                    .collect(),
                Some(Value::String(single)) => vec![single.clone()],
                _ => Vec::new(),
            };
            Ok(ParsedReply::Message { targets, text })
        }
        Phase::Proposal => {
            if !object.contains_key("reason_for_decision") {
                return Err(ParseError::Schema(
                    "missing `reason_for_decision`".to_string(),
                ));
            }
            let payload = object
                .get("proposal")
                .ok_or_else(|| ParseError::Schema("missing `proposal`".to_string()))?;
            let payload = if is_none_marker(payload) {
                None
            } else {
                Some(payload.clone())
            };
            Ok(ParsedReply::Proposal {
                reason: reason_text(object.get("reason_for_decision")),
                payload,
            })
        }
        Phase::Voting => {
            let decision = object
                .get("decision")
                .ok_or_else(|| ParseError::Schema("missing `decision`".to_string()))?;
            let ballot = if is_none_marker(decision) {
                Ballot::Abstain
            } else {
                parse_decision(mechanism, decision)?
            };
            Ok(ParsedReply::Vote {
                reason: reason_text(object.get("reason_for_decision")),
                ballot,
            })
        }
    }
}

fn parse_candidate_id(value: &Value) -> Result<CandidateId, ParseError> {
    match value {
        Value::Number(n) => n
            .as_u64()
            .ok_or_else(|| ParseError::Schema(format!("candidate id {n} is not an integer"))),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| ParseError::Schema(format!("candidate id `{s}` is not an integer"))),
        other => Err(ParseError::Schema(format!(
            "candidate id must be an integer, got {other}"
        ))),
    }
}

fn parse_key_id(key: &str) -> Result<CandidateId, ParseError> {
    key.trim()
        .parse()
        .map_err(|_| ParseError::Schema(format!("candidate key `{key}` is not an integer")))
}

fn parse_decision(mechanism: Mechanism, decision: &Value) -> Result<Ballot, ParseError> {
    match mechanism {
        Mechanism::Unanimous | Mechanism::Majority | Mechanism::Plurality => {
            Ok(Ballot::SingleChoice {
                candidate: parse_candidate_id(decision)?,
            })
        }
        Mechanism::Rated => {
            let object = decision
                .as_object()
                .ok_or_else(|| ParseError::Schema("rated decision must be an object".into()))?;
            let mut scores = BTreeMap::new();
            for (key, value) in object {
                let score = value
                    .as_u64()
                    .ok_or_else(|| ParseError::Schema(format!("score for `{key}` not an integer")))?;
                scores.insert(parse_key_id(key)?, score.min(u8::MAX as u64) as u8);
            }
            Ok(Ballot::Rated { scores })
        }
        Mechanism::Ranked => {
            let items = decision
                .as_array()
                .ok_or_else(|| ParseError::Schema("ranked decision must be a list".into()))?;
            let order = items
                .iter()
                .map(parse_candidate_id)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Ballot::Ranked { order })
        }
        Mechanism::Cumulative => {
            let object = decision
                .as_object()
                .ok_or_else(|| ParseError::Schema("cumulative decision must be an object".into()))?;
            let mut points = BTreeMap::new();
            for (key, value) in object {
                let amount = value
                    .as_f64()
                    .ok_or_else(|| ParseError::Schema(format!("points for `{key}` not a number")))?;
                points.insert(parse_key_id(key)?, amount);
            }
            Ok(Ballot::Cumulative { points })
        }
    }
}

/// Encodes a message action in the reply schema (used by tests and fakes).
pub fn serialize_message_reply(targets: &[String], text: &str) -> String {
    serde_json::json!({ "target": targets, "message": text }).to_string()
}

/// Encodes a proposal action in the reply schema.
pub fn serialize_proposal_reply(reason: &str, payload: Option<&Value>) -> String {
    match payload {
        Some(value) => {
            serde_json::json!({ "reason_for_decision": reason, "proposal": value }).to_string()
        }
        None => {
            serde_json::json!({ "reason_for_decision": reason, "proposal": "None" }).to_string()
        }
    }
}

/// Encodes a ballot in the reply schema.
pub fn serialize_vote_reply(reason: &str, ballot: &Ballot) -> String {
    let decision = match ballot {
        Ballot::Abstain => Value::String("None".to_string()),
        Ballot::SingleChoice { candidate } => Value::from(*candidate),
        Ballot::Rated { scores } => {
            let map: serde_json::Map<String, Value> = scores
                .iter()
                .map(|(id, score)| (id.to_string(), Value::from(*score)))
                .collect();
            Value::Object(map)
        }
        Ballot::Ranked { order } => Value::Array(order.iter().map(|id| Value::from(*id)).collect()),
        Ballot::Cumulative { points } => {
            let map: serde_json::Map<String, Value> = points
                .iter()
                .map(|(id, value)| (id.to_string(), Value::from(*value)))
                .collect();
            Value::Object(map)
        }
    };
    serde_json::json!({ "reason_for_decision": reason, "decision": decision }).to_string()
}
