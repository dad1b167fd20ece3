//! LLM side of the tactical decision protocol.
//!
//! A [`Gateway`] sends prompts to any OpenAI-compatible endpoint, answers
//! them in-process from a [`MockBehavior`], or replays them from a cassette.
//! [`LlmPolicy`] turns gateway replies into validated tactical actions.

mod cassette;
mod client;
mod config;
mod mock;
mod parse;
mod policy;
mod prompt;

pub use cassette::{load_cassette, CallRecord, Cassette, Transport};
pub use client::{global_network_ops, Gateway, QueryOutcome, QueryResult};
pub use config::{ApiStyle, GatewayConfig, Mode, ReasoningEffort};
pub use mock::{mock_serve, MockBehavior, MockReply, MockResponder, MockServer};
pub use parse::{extract_content, parse_response};
pub use policy::{LlmPolicy, LlmPolicyProvider};
pub use prompt::{build_prompt, request_body, Prompt, PROMPT_VERSION, SYSTEM_INSTRUCTION};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("gateway misconfigured: {0}")]
    Config(String),
    #[error("missing credential: {0}")]
    Credential(String),
    #[error("no cassette entry for request: {0}")]
    ReplayMiss(String),
    #[error("mock server: {0}")]
    Server(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
