use serde::Serialize;

use forage_core::policy::DecisionEvent;

use crate::config::{ApiStyle, GatewayConfig};

/// Stamped into every logged exchange so prompt changes are traceable.
pub const PROMPT_VERSION: &str = "tactical-v1";

pub const SYSTEM_INSTRUCTION: &str = "You are the tactical decision module of one robot in a \
foraging swarm. The user message is the robot's local state as JSON. Reply with exactly one \
JSON object with two string fields: \"action\", which must be one of the values in \
allowed_actions, and \"rationale\", one or two sentences explaining the choice. Output nothing \
else.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Prompt {
    pub version: &'static str,
    pub system: &'static str,
    /// The decision event as compact JSON.
    pub user: String,
}

pub fn build_prompt(event: &DecisionEvent) -> Prompt {
    Prompt {
        version: PROMPT_VERSION,
        system: SYSTEM_INSTRUCTION,
        user: serde_json::to_string(event).expect("decision events serialize"),
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    reasoning_effort: &'static str,
    max_completion_tokens: u32,
}

#[derive(Serialize)]
struct Reasoning {
    effort: &'static str,
}

#[derive(Serialize)]
struct ResponsesRequest<'a> {
    model: &'a str,
    input: [Message<'a>; 2],
    reasoning: Reasoning,
    max_output_tokens: u32,
}

/// The HTTP request body. Field order is fixed so identical events give
/// byte-identical bodies, which is what cassettes key on.
pub fn request_body(prompt: &Prompt, config: &GatewayConfig) -> String {
    let messages = [
        Message {
            role: "system",
            content: prompt.system,
        },
        Message {
            role: "user",
            content: &prompt.user,
        },
    ];
    let effort = config.reasoning_effort.as_str();
    let body = match config.api_style {
        ApiStyle::Chat => serde_json::to_string(&ChatRequest {
            model: &config.model_name,
            messages,
            reasoning_effort: effort,
            max_completion_tokens: config.max_output_tokens,
        }),
        ApiStyle::Responses => serde_json::to_string(&ResponsesRequest {
            model: &config.model_name,
            input: messages,
            reasoning: Reasoning { effort },
            max_output_tokens: config.max_output_tokens,
        }),
    };
    body.expect("request bodies serialize")
}

/// Pulls the decision event back out of a request body, for mock responders.
pub(crate) fn event_from_request(body: &str) -> Option<DecisionEvent> {
    let v: serde_json::Value = serde_json::from_str(body).ok()?;
    let msgs = v.get("messages").or_else(|| v.get("input"))?.as_array()?;
    let user = msgs
        .iter()
        .rev()
        .find(|m| m.get("role").and_then(|r| r.as_str()) == Some("user"))?;
    serde_json::from_str(user.get("content")?.as_str()?).ok()
}

pub(crate) fn style_of_request(body: &str) -> ApiStyle {
    match serde_json::from_str::<serde_json::Value>(body) {
        Ok(v) if v.get("input").is_some() => ApiStyle::Responses,
        _ => ApiStyle::Chat,
    }
}
