//! Tactical decisions at the three decision points.
//!
//! A [`TacticalPolicy`] is consulted by a robot's state machine right after a
//! deposit, on an empty-handed arrival at the collection zone, and when a
//! search has gone unrewarded for too long. Whatever the policy answers is
//! checked against the static whitelist for the event; anything else sends
//! the robot down the parameter cascade instead.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::cpfa::{
    cascade_central_arrival, cascade_post_deposit, should_give_up, ForagerMemory, FsmState,
};
use crate::geom::Vec2;
use crate::params::CpfaParams;
use crate::pheromone::PheromoneSummary;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventType {
    PostDepositDecision,
    CentralZoneArrival,
    SearchStarvation,
}

impl EventType {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventType::PostDepositDecision => "POST_DEPOSIT_DECISION",
            EventType::CentralZoneArrival => "CENTRAL_ZONE_ARRIVAL",
            EventType::SearchStarvation => "SEARCH_STARVATION",
        }
    }

    pub fn at_center(&self) -> bool {
        !matches!(self, EventType::SearchStarvation)
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TacticalAction {
    UseSiteFidelity,
    FollowPheromone,
    UninformedSearch,
    ContinueSearch,
    ReturnForInfo,
}

impl TacticalAction {
    pub const ALL: [TacticalAction; 5] = [
        TacticalAction::UseSiteFidelity,
        TacticalAction::FollowPheromone,
        TacticalAction::UninformedSearch,
        TacticalAction::ContinueSearch,
        TacticalAction::ReturnForInfo,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TacticalAction::UseSiteFidelity => "USE_SITE_FIDELITY",
            TacticalAction::FollowPheromone => "FOLLOW_PHEROMONE",
            TacticalAction::UninformedSearch => "UNINFORMED_SEARCH",
            TacticalAction::ContinueSearch => "CONTINUE_SEARCH",
            TacticalAction::ReturnForInfo => "RETURN_FOR_INFO",
        }
    }

    /// Exact, case-sensitive parse of an action name.
    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

impl fmt::Display for TacticalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const CENTER_ACTIONS: [TacticalAction; 3] = [
    TacticalAction::UseSiteFidelity,
    TacticalAction::FollowPheromone,
    TacticalAction::UninformedSearch,
];
const STARVATION_ACTIONS: [TacticalAction; 2] =
    [TacticalAction::ContinueSearch, TacticalAction::ReturnForInfo];

/// The static action whitelist of an event type.
pub fn build_whitelist(event_type: EventType) -> Vec<TacticalAction> {
    match event_type {
        EventType::PostDepositDecision | EventType::CentralZoneArrival => CENTER_ACTIONS.to_vec(),
        EventType::SearchStarvation => STARVATION_ACTIONS.to_vec(),
    }
}

/// The prompt payload: one robot's local view at a decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionEvent {
    pub robot_id: String,
    pub event_type: EventType,
    pub current_state: FsmState,
    pub sim_time_sec: f64,
    pub position: Vec2,
    pub resource_density: f64,
    pub time_since_last_pickup: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_pickup_location: Option<Vec2>,
    pub active_pheromone_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pheromone_summary: Option<Vec<PheromoneSummary>>,
    pub allowed_actions: Vec<TacticalAction>,
}

/// Precision used for floats in decision events.
const EVENT_DECIMALS: i32 = 3;

impl DecisionEvent {
    /// Builds the event from the querying robot's memory and the pheromone
    /// manager. `summary` is only attached for at-center events.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        robot_id: &str,
        event_type: EventType,
        current_state: FsmState,
        now: f64,
        position: Vec2,
        mem: &ForagerMemory,
        active_pheromones: usize,
        summary: Option<Vec<PheromoneSummary>>,
    ) -> Self {
        let round = |v: f64| crate::geom::round_to(v, EVENT_DECIMALS);
        let summary = if event_type.at_center() {
            summary.map(|s| {
                s.into_iter()
                    .map(|p| PheromoneSummary {
                        location: p.location.rounded(EVENT_DECIMALS),
                        strength: round(p.strength),
                    })
                    .collect()
            })
        } else {
            None
        };
        Self {
            robot_id: robot_id.to_string(),
            event_type,
            current_state,
            sim_time_sec: round(now),
            position: position.rounded(EVENT_DECIMALS),
            resource_density: mem.last_density as f64,
            time_since_last_pickup: round(now - mem.last_pickup_at.unwrap_or(0.0)),
            last_pickup_location: mem.last_pickup.map(|p| p.rounded(EVENT_DECIMALS)),
            active_pheromone_count: active_pheromones,
            pheromone_summary: summary,
            allowed_actions: build_whitelist(event_type),
        }
    }
}

/// A policy's raw answer before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionResponse {
    pub action: String,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackReason {
    Timeout,
    ParseError,
    OutOfWhitelist,
}

impl fmt::Display for FallbackReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FallbackReason::Timeout => "timeout",
            FallbackReason::ParseError => "parse_error",
            FallbackReason::OutOfWhitelist => "out_of_whitelist",
        })
    }
}

/// Checks `response.action` against the event's whitelist.
pub fn validate(response: &DecisionResponse, event: &DecisionEvent) -> Result<TacticalAction, FallbackReason> {
    validate_with(response, event, false)
}

/// Like [`validate`]; `lenient` trims whitespace and uppercases before matching.
pub fn validate_with(
    response: &DecisionResponse,
    event: &DecisionEvent,
    lenient: bool,
) -> Result<TacticalAction, FallbackReason> {
    let name = if lenient {
        response.action.trim().to_ascii_uppercase()
    } else {
        response.action.clone()
    };
    match TacticalAction::from_name(&name) {
        Some(a) if event.allowed_actions.contains(&a) => Ok(a),
        _ => Err(FallbackReason::OutOfWhitelist),
    }
}

/// The parameter-driven choice used when a tactical query fails.
pub fn fallback_decide<R: Rng + ?Sized>(
    event_type: EventType,
    mem: &ForagerMemory,
    pheromones_active: usize,
    params: &CpfaParams,
    rng: &mut R,
) -> TacticalAction {
    match event_type {
        EventType::PostDepositDecision => cascade_post_deposit(mem, pheromones_active, params, rng),
        EventType::CentralZoneArrival => cascade_central_arrival(mem, pheromones_active, params, rng),
        EventType::SearchStarvation => {
            if should_give_up(params, rng) {
                TacticalAction::ReturnForInfo
            } else {
                TacticalAction::ContinueSearch
            }
        }
    }
}

/// A starving scripted robot heads home after this long without a pickup.
pub const SCRIPTED_PATIENCE_SECS: f64 = 180.0;

fn scripted_starvation(event: &DecisionEvent) -> DecisionResponse {
    if event.active_pheromone_count > 0 {
        DecisionResponse {
            action: TacticalAction::ReturnForInfo.to_string(),
            rationale: format!(
                "Returning for info: {} active pheromones at the collection zone.",
                event.active_pheromone_count
            ),
        }
    } else if event.time_since_last_pickup > SCRIPTED_PATIENCE_SECS {
        DecisionResponse {
            action: TacticalAction::ReturnForInfo.to_string(),
            rationale: format!(
                "Returning for info: no pickup for {:.1} s.",
                event.time_since_last_pickup
            ),
        }
    } else {
        DecisionResponse {
            action: TacticalAction::ContinueSearch.to_string(),
            rationale: "Continuing search: no pheromones and the search is still fresh.".into(),
        }
    }
}

/// Deterministic heuristic standing in for an LLM.
pub fn scripted_decide(event: &DecisionEvent) -> DecisionResponse {
    if !event.event_type.at_center() {
        return scripted_starvation(event);
    }
    if event.resource_density > 0.0 && event.last_pickup_location.is_some() {
        DecisionResponse {
            action: TacticalAction::UseSiteFidelity.to_string(),
            rationale: format!(
                "Using site fidelity: resource_density={:.1} at the last pickup location.",
                event.resource_density
            ),
        }
    } else if event.active_pheromone_count > 0 {
        DecisionResponse {
            action: TacticalAction::FollowPheromone.to_string(),
            rationale: format!(
                "Following pheromone: {} active waypoints.",
                event.active_pheromone_count
            ),
        }
    } else {
        DecisionResponse {
            action: TacticalAction::UninformedSearch.to_string(),
            rationale: "Uninformed search: no density information and no pheromones.".into(),
        }
    }
}

/// Where an executed decision came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Cascade,
    Llm,
    Scripted,
    Fallback,
    Degraded,
}

/// Outcome class of one LLM call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallOutcome {
    Ok,
    Timeout,
    ParseError,
    OutOfWhitelist,
}

impl From<FallbackReason> for CallOutcome {
    fn from(r: FallbackReason) -> Self {
        match r {
            FallbackReason::Timeout => CallOutcome::Timeout,
            FallbackReason::ParseError => CallOutcome::ParseError,
            FallbackReason::OutOfWhitelist => CallOutcome::OutOfWhitelist,
        }
    }
}

/// Audit trail of one LLM exchange, as written to the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub prompt_version: String,
    pub request: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    pub outcome: CallOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplyOutcome {
    /// Defer to the parameter cascade (the vanilla controller).
    Cascade,
    Action {
        action: TacticalAction,
        rationale: Option<String>,
        source: DecisionSource,
    },
    Fallback(FallbackReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyReply {
    pub outcome: ReplyOutcome,
    pub exchange: Option<LlmExchange>,
    /// Wall-clock (or injected) call latency; never written to the event log.
    pub latency_secs: Option<f64>,
    /// Simulated seconds the robot stays put before acting.
    pub hold_secs: f64,
}

impl PolicyReply {
    pub fn cascade() -> Self {
        Self::from_outcome(ReplyOutcome::Cascade)
    }

    pub fn action(action: TacticalAction, rationale: Option<String>, source: DecisionSource) -> Self {
        Self::from_outcome(ReplyOutcome::Action { action, rationale, source })
    }

    pub fn fallback(reason: FallbackReason) -> Self {
        Self::from_outcome(ReplyOutcome::Fallback(reason))
    }

    fn from_outcome(outcome: ReplyOutcome) -> Self {
        Self {
            outcome,
            exchange: None,
            latency_secs: None,
            hold_secs: 0.0,
        }
    }
}

/// One robot's tactical decision-maker.
pub trait TacticalPolicy: Send {
    /// True when the time-triggered starvation query replaces the per-waypoint
    /// give-up probability. Exactly one of the two mechanisms is live.
    fn uses_starvation(&self) -> bool;

    /// Answers a decision event. `Err` is reserved for misconfiguration that
    /// must abort the trial; recoverable failures are reported as fallbacks.
    fn decide(&mut self, event: &DecisionEvent) -> Result<PolicyReply, Error>;
}

/// Vanilla CPFA: every decision goes through the parameter cascade.
#[derive(Debug, Default)]
pub struct CascadePolicy;

impl TacticalPolicy for CascadePolicy {
    fn uses_starvation(&self) -> bool {
        false
    }

    fn decide(&mut self, _event: &DecisionEvent) -> Result<PolicyReply, Error> {
        Ok(PolicyReply::cascade())
    }
}

fn validated(response: DecisionResponse, event: &DecisionEvent) -> PolicyReply {
    match validate(&response, event) {
        Ok(action) => PolicyReply::action(action, Some(response.rationale), DecisionSource::Scripted),
        Err(reason) => PolicyReply::fallback(reason),
    }
}

/// Deterministic heuristic policy, usable without any network.
#[derive(Debug, Default)]
pub struct ScriptedPolicy;

impl TacticalPolicy for ScriptedPolicy {
    fn uses_starvation(&self) -> bool {
        true
    }

    fn decide(&mut self, event: &DecisionEvent) -> Result<PolicyReply, Error> {
        Ok(validated(scripted_decide(event), event))
    }
}

/// Always restarts with an uninformed search at the collection zone; starvation
/// follows the scripted rule. Serves as the structure-blind comparison point.
#[derive(Debug, Default)]
pub struct UninformedPolicy;

impl TacticalPolicy for UninformedPolicy {
    fn uses_starvation(&self) -> bool {
        true
    }

    fn decide(&mut self, event: &DecisionEvent) -> Result<PolicyReply, Error> {
        let response = if event.event_type.at_center() {
            DecisionResponse {
                action: TacticalAction::UninformedSearch.to_string(),
                rationale: "Always searching uninformed.".into(),
            }
        } else {
            scripted_starvation(event)
        };
        Ok(validated(response, event))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Cascade,
    Scripted,
    Uninformed,
    Llm,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Cascade => "cascade",
            PolicyKind::Scripted => "scripted",
            PolicyKind::Uninformed => "uninformed",
            PolicyKind::Llm => "llm",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "cascade" => Ok(PolicyKind::Cascade),
            "scripted" => Ok(PolicyKind::Scripted),
            "uninformed" => Ok(PolicyKind::Uninformed),
            "llm" => Ok(PolicyKind::Llm),
            other => Err(Error::Spec(format!("unknown policy `{other}`"))),
        }
    }
}

/// Creates one policy instance per robot.
pub trait PolicyProvider: Sync {
    fn create(&self, kind: PolicyKind, robot_id: &str) -> Result<Box<dyn TacticalPolicy>, Error>;
}

/// Provider for the policies that need no gateway.
#[derive(Debug, Default, Clone, Copy)]
pub struct BuiltinPolicies;

impl PolicyProvider for BuiltinPolicies {
    fn create(&self, kind: PolicyKind, _robot_id: &str) -> Result<Box<dyn TacticalPolicy>, Error> {
        match kind {
            PolicyKind::Cascade => Ok(Box::new(CascadePolicy)),
            PolicyKind::Scripted => Ok(Box::new(ScriptedPolicy)),
            PolicyKind::Uninformed => Ok(Box::new(UninformedPolicy)),
            PolicyKind::Llm => Err(Error::Policy(
                "the llm policy needs a gateway-backed provider".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// The post-deposit prompt of the worked clustered example.
    fn worked_example() -> DecisionEvent {
        let mem = ForagerMemory {
            last_pickup: Some(Vec2::new(1.6, 1.2)),
            last_density: 2,
            fidelity: true,
            last_pickup_at: Some(40.0),
            ..ForagerMemory::default()
        };
        DecisionEvent::new(
            "tb0_0",
            EventType::PostDepositDecision,
            FsmState::ReturningWithResource,
            52.6,
            Vec2::new(0.39, 0.17),
            &mem,
            0,
            Some(vec![]),
        )
    }

    #[test]
    fn whitelists_are_static() {
        let center = vec![
            TacticalAction::UseSiteFidelity,
            TacticalAction::FollowPheromone,
            TacticalAction::UninformedSearch,
        ];
        assert_eq!(build_whitelist(EventType::PostDepositDecision), center);
        assert_eq!(build_whitelist(EventType::CentralZoneArrival), center);
        assert_eq!(
            build_whitelist(EventType::SearchStarvation),
            vec![TacticalAction::ContinueSearch, TacticalAction::ReturnForInfo]
        );
    }

    #[test]
    fn event_serializes_like_the_prompt() {
        let json = serde_json::to_string(&worked_example()).unwrap();
        assert!(json.starts_with(r#"{"robot_id":"tb0_0","event_type":"POST_DEPOSIT_DECISION","current_state":"RETURNING_WITH_RESOURCE","sim_time_sec":52.6,"position":{"x":0.39,"y":0.17},"resource_density":2.0,"#), "{json}");
        assert!(json.ends_with(r#""allowed_actions":["USE_SITE_FIDELITY","FOLLOW_PHEROMONE","UNINFORMED_SEARCH"]}"#), "{json}");
        let back: DecisionEvent = serde_json::from_str(&json).unwrap();
        assert_eq!(back, worked_example());
    }

    #[test]
    fn starvation_event_has_no_summary() {
        let e = DecisionEvent::new(
            "r1",
            EventType::SearchStarvation,
            FsmState::SearchingUninformed,
            60.0,
            Vec2::ZERO,
            &ForagerMemory::default(),
            3,
            Some(vec![]),
        );
        assert!(e.pheromone_summary.is_none());
        let json = serde_json::to_string(&e).unwrap();
        assert!(!json.contains("last_pickup_location") && !json.contains("pheromone_summary"));
    }

    #[test]
    fn validation_is_exact() {
        let e = worked_example();
        let r = |a: &str| DecisionResponse { action: a.into(), rationale: String::new() };
        assert_eq!(validate(&r("USE_SITE_FIDELITY"), &e), Ok(TacticalAction::UseSiteFidelity));
        assert_eq!(validate(&r("GO_HOME"), &e), Err(FallbackReason::OutOfWhitelist));
        assert_eq!(validate(&r("CONTINUE_SEARCH"), &e), Err(FallbackReason::OutOfWhitelist));
        assert_eq!(validate(&r("use_site_fidelity"), &e), Err(FallbackReason::OutOfWhitelist));
        assert_eq!(validate_with(&r(" use_site_fidelity "), &e, true), Ok(TacticalAction::UseSiteFidelity));
    }

    #[test]
    fn fallback_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let give_up = CpfaParams { p_r: 1.0, ..CpfaParams::default() };
        assert_eq!(
            fallback_decide(EventType::SearchStarvation, &ForagerMemory::default(), 0, &give_up, &mut rng),
            TacticalAction::ReturnForInfo
        );
        let p = CpfaParams::default();
        assert_eq!(
            fallback_decide(EventType::PostDepositDecision, &ForagerMemory::default(), 0, &p, &mut rng),
            TacticalAction::UninformedSearch
        );
        assert_eq!(
            fallback_decide(EventType::CentralZoneArrival, &ForagerMemory::default(), 2, &p, &mut rng),
            TacticalAction::FollowPheromone
        );
    }

    #[test]
    fn scripted_rules() {
        assert_eq!(scripted_decide(&worked_example()).action, "USE_SITE_FIDELITY");
        assert!(scripted_decide(&worked_example()).rationale.starts_with("Using site fidelity: resource_density=2.0"));
        let mut e = worked_example();
        e.resource_density = 0.0;
        e.active_pheromone_count = 3;
        assert_eq!(scripted_decide(&e).action, "FOLLOW_PHEROMONE");
        e.active_pheromone_count = 0;
        assert_eq!(scripted_decide(&e).action, "UNINFORMED_SEARCH");
        let mut s = e.clone();
        s.event_type = EventType::SearchStarvation;
        s.allowed_actions = build_whitelist(EventType::SearchStarvation);
        s.time_since_last_pickup = 90.0;
        assert_eq!(scripted_decide(&s).action, "CONTINUE_SEARCH");
        s.time_since_last_pickup = 181.0;
        assert_eq!(scripted_decide(&s).action, "RETURN_FOR_INFO");
        s.time_since_last_pickup = 10.0;
        s.active_pheromone_count = 1;
        assert_eq!(scripted_decide(&s).action, "RETURN_FOR_INFO");
    }

    #[test]
    fn builtin_provider_refuses_llm() {
        assert!(BuiltinPolicies.create(PolicyKind::Llm, "r0").is_err());
        assert!(!BuiltinPolicies.create(PolicyKind::Cascade, "r0").unwrap().uses_starvation());
        assert!(BuiltinPolicies.create(PolicyKind::Scripted, "r0").unwrap().uses_starvation());
        assert_eq!("uninformed".parse::<PolicyKind>().unwrap(), PolicyKind::Uninformed);
    }
}
