use std::sync::Arc;

use forage_core::policy::{
    validate_with, BuiltinPolicies, CallOutcome, DecisionEvent, DecisionSource, FallbackReason,
    LlmExchange, PolicyKind, PolicyProvider, PolicyReply, ReplyOutcome, TacticalPolicy,
};
use forage_core::Error;

use crate::cassette::{CallRecord, Transport};
use crate::client::{Gateway, QueryOutcome};
use crate::parse::{extract_content, parse_response};
use crate::prompt::{build_prompt, request_body, PROMPT_VERSION};

/// One robot's LLM client. No context is kept between calls.
pub struct LlmPolicy {
    gateway: Arc<Gateway>,
    robot_id: String,
}

impl LlmPolicy {
    pub fn new(gateway: Arc<Gateway>, robot_id: &str) -> Self {
        Self {
            gateway,
            robot_id: robot_id.to_string(),
        }
    }
}

impl TacticalPolicy for LlmPolicy {
    fn uses_starvation(&self) -> bool {
        true
    }

    fn decide(&mut self, event: &DecisionEvent) -> Result<PolicyReply, Error> {
        let config = self.gateway.config();
        let request = request_body(&build_prompt(event), config);
        let result = self
            .gateway
            .query(&request)
            .map_err(|e| Error::Policy(e.to_string()))?;

        let (transport, response, mut error) = match &result.outcome {
            QueryOutcome::Body(b) => (Transport::Ok, Some(b.clone()), None),
            QueryOutcome::Timeout => (Transport::Timeout, None, Some("request timed out".to_string())),
            QueryOutcome::Failed(msg) => (Transport::Failed, None, Some(msg.clone())),
        };
        let (outcome, reply) = match &response {
            None => (CallOutcome::Timeout, ReplyOutcome::Fallback(FallbackReason::Timeout)),
            Some(body) => match extract_content(body, config.api_style).and_then(|t| parse_response(&t)) {
                Err(e) => {
                    error = Some(e);
                    (CallOutcome::ParseError, ReplyOutcome::Fallback(FallbackReason::ParseError))
                }
                Ok(parsed) => match validate_with(&parsed, event, config.lenient) {
                    Ok(action) => (
                        CallOutcome::Ok,
                        ReplyOutcome::Action {
                            action,
                            rationale: Some(parsed.rationale),
                            source: DecisionSource::Llm,
                        },
                    ),
                    Err(reason) => {
                        error = Some(format!("action `{}` not in {:?}", parsed.action, event.allowed_actions));
                        (reason.into(), ReplyOutcome::Fallback(reason))
                    }
                },
            },
        };

        self.gateway
            .record(&CallRecord {
                robot_id: self.robot_id.clone(),
                event_type: event.event_type,
                request: request.clone(),
                response: response.clone(),
                error: error.clone(),
                transport,
                latency_secs: result.latency_secs,
                outcome,
            })
            .map_err(|e| Error::Policy(format!("cannot write cassette: {e}")))?;

        Ok(PolicyReply {
            outcome: reply,
            exchange: Some(LlmExchange {
                prompt_version: PROMPT_VERSION.to_string(),
                request,
                response,
                outcome,
                error,
            }),
            latency_secs: Some(result.latency_secs),
            hold_secs: config.injected_latency_secs.unwrap_or(0.0),
        })
    }
}

/// Creates gateway-backed policies for `llm` and built-in ones otherwise.
#[derive(Clone)]
pub struct LlmPolicyProvider {
    gateway: Arc<Gateway>,
}

impl LlmPolicyProvider {
    pub fn new(gateway: Arc<Gateway>) -> Self {
        Self { gateway }
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }
}

impl PolicyProvider for LlmPolicyProvider {
    fn create(&self, kind: PolicyKind, robot_id: &str) -> Result<Box<dyn TacticalPolicy>, Error> {
        match kind {
            PolicyKind::Llm => Ok(Box::new(LlmPolicy::new(self.gateway.clone(), robot_id))),
            other => BuiltinPolicies.create(other, robot_id),
        }
    }
}
