//! Contextual-bandit harness for measuring relative value bias in chat
//! models.
//!
//! The pipeline: [`task`] defines the eight-option bandit and its schedules;
//! [`prompt`] renders condition-specific prompts and [`parse`] turns replies
//! back into structured choices; [`agents`] provides simulated absolute /
//! relative / hybrid decision-makers as analytic oracles; [`gateway`] talks
//! to chat-completion endpoints with record/replay cassettes; [`engine`]
//! orchestrates sessions and persists transcripts; [`analysis`] and
//! [`report`] compute choice rates, the linear contrast, learning curves,
//! and diagnostic-pair tests.

pub mod agents;
pub mod analysis;
pub mod engine;
pub mod error;
pub mod gateway;
pub mod parse;
pub mod prompt;
pub mod report;
pub mod rng;
pub mod stats;
pub mod task;
pub mod transcript;
