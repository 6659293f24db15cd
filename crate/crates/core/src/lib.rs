//! RoundTable: a decentralized multi-agent collaboration laboratory.
//!
//! Agents exchange messages, propose solutions, and vote under six
//! social-choice mechanisms in a deterministic round-based engine. The
//! crate also computes quality/efficiency/fairness metrics for the
//! exchange-economy and rating-prediction environments, extracts
//! linguistic collaboration indicators from transcripts, and evaluates
//! early-stopping rules with 5-fold cross-validation.

pub mod agents;
pub mod config;
pub mod engine;
pub mod environments;
pub mod linguistics;
pub mod persist;
pub mod report;
pub mod social_choice;
pub mod stopping;

#[doc(hidden)]
pub mod testkit;

pub use engine::{
    AgentId, CandidateSlate, EngineConfig, Message, Proposal, RoundRecord, Roster, Transcript,
};
pub use environments::{Allocation, ProposalBody};
pub use social_choice::{Ballot, Mechanism, Outcome, Tally};
