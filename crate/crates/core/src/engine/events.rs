//! Structured per-trial event log.

use serde::{Deserialize, Serialize};

use crate::cpfa::FsmState;
use crate::geom::Vec2;
use crate::policy::{DecisionEvent, DecisionSource, FallbackReason, LlmExchange, TacticalAction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub event: DecisionEvent,
    pub action: TacticalAction,
    pub source: DecisionSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<FallbackReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<LlmExchange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    Transition { from: FsmState, to: FsmState },
    Pickup { resource: usize, location: Vec2, density: usize },
    Deposit { total: usize },
    PheromoneLaid { location: Vec2 },
    Decision(Box<DecisionRecord>),
    Degraded {
        requested: TacticalAction,
        executed: TacticalAction,
        source: DecisionSource,
        reason: String,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Transition { .. } => "transition",
            Event::Pickup { .. } => "pickup",
            Event::Deposit { .. } => "deposit",
            Event::PheromoneLaid { .. } => "pheromone_laid",
            Event::Decision(_) => "decision",
            Event::Degraded { .. } => "degraded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Simulated seconds, rounded to the millisecond.
    pub t: f64,
    pub robot: String,
    #[serde(flatten)]
    pub event: Event,
}

impl EventRecord {
    pub fn decision(&self) -> Option<&DecisionRecord> {
        match &self.event {
            Event::Decision(d) => Some(d),
            _ => None,
        }
    }
}

pub fn to_jsonl(records: &[EventRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("event records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<EventRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
