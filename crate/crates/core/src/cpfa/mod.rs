//! Per-robot CPFA state machine.

mod cascade;
mod walk;

pub use cascade::{
    cascade_central_arrival, cascade_post_deposit, should_give_up, should_lay_pheromone,
    should_switch_to_search,
};
pub use walk::{informed_sigma, step_heading, uninformed_step_heading};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::engine::events::{DecisionRecord, Event};
use crate::engine::motion::{
    move_toward, resolve_contact, yield_turn, RobotPose, JAM_SECS, RETREAT_FRACTION, ROBOT_RADIUS,
};
use crate::engine::world::{try_deposit, try_pickup, Environment};
use crate::geom::Vec2;
use crate::pheromone::PheromoneWaypoint;
use crate::policy::{
    fallback_decide, DecisionEvent, DecisionSource, EventType, ReplyOutcome, TacticalAction,
    TacticalPolicy,
};
use crate::rng::{RngStreams, StreamRng};
use crate::Error;

/// Length of one correlated-walk leg; a new leg starts every second.
pub const SEARCH_LEG: f64 = 0.3;
pub const TICK_SECS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FsmState {
    Dispersing,
    SearchingUninformed,
    SearchingInformed,
    ReturningWithResource,
    ReturningEmpty,
    TravelingToSite,
    TravelingToPheromone,
    AtCenter,
}

impl FsmState {
    pub fn is_searching(&self) -> bool {
        matches!(self, FsmState::SearchingUninformed | FsmState::SearchingInformed)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FsmState::Dispersing => "DISPERSING",
            FsmState::SearchingUninformed => "SEARCHING_UNINFORMED",
            FsmState::SearchingInformed => "SEARCHING_INFORMED",
            FsmState::ReturningWithResource => "RETURNING_WITH_RESOURCE",
            FsmState::ReturningEmpty => "RETURNING_EMPTY",
            FsmState::TravelingToSite => "TRAVELING_TO_SITE",
            FsmState::TravelingToPheromone => "TRAVELING_TO_PHEROMONE",
            FsmState::AtCenter => "AT_CENTER",
        }
    }
}

impl fmt::Display for FsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a robot remembers between decisions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForagerMemory {
    /// `l_f`: where the last resource was picked up. Kept after give-up.
    pub last_pickup: Option<Vec2>,
    /// `c`: unpicked neighbors around the last pickup.
    pub last_density: usize,
    /// `f`: set on pickup, cleared on give-up.
    pub fidelity: bool,
    pub last_pickup_at: Option<f64>,
    pub search_started_at: Option<f64>,
    pub informed_search_started_at: Option<f64>,
}

impl ForagerMemory {
    pub fn time_since_last_pickup(&self, now: f64) -> f64 {
        now - self.last_pickup_at.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    action: TacticalAction,
    steps_left: u64,
}

#[derive(Debug, Clone)]
pub struct Robot {
    pub id: u32,
    pub name: String,
    pub pose: RobotPose,
    pub state: FsmState,
    pub carrying: bool,
    pub memory: ForagerMemory,
    target: Vec2,
    walk_heading: f64,
    state_steps: u64,
    gated_steps: u64,
    pending: Option<Pending>,
    motion_rng: StreamRng,
    decision_rng: StreamRng,
}

impl Robot {
    /// Places robot `id` of `team` on the ring around the collection zone,
    /// facing outward, dispersing toward a random target.
    pub fn spawn(id: u32, team: usize, env: &Environment, streams: &RngStreams) -> Self {
        let angle = 2.0 * PI * id as f64 / team.max(1) as f64;
        let ring = env.arena.center_zone_radius + 0.1;
        let mut robot = Self {
            id,
            name: format!("r{id}"),
            pose: RobotPose::new(Vec2::from_angle(angle) * ring, angle),
            state: FsmState::Dispersing,
            carrying: false,
            memory: ForagerMemory::default(),
            target: Vec2::ZERO,
            walk_heading: angle,
            state_steps: 0,
            gated_steps: 0,
            pending: None,
            motion_rng: streams.robot_motion(id),
            decision_rng: streams.robot_decision(id),
        };
        robot.target = robot.random_target(env);
        robot
    }

    pub fn target(&self) -> Vec2 {
        self.target
    }

    pub fn is_holding(&self) -> bool {
        self.pending.is_some()
    }

    fn random_target(&mut self, env: &Environment) -> Vec2 {
        let hx = env.arena.half_width - ROBOT_RADIUS;
        let hy = env.arena.half_height - ROBOT_RADIUS;
        Vec2::new(
            self.motion_rng.random_range(-hx..=hx),
            self.motion_rng.random_range(-hy..=hy),
        )
    }

    fn search_sigma(&self, env: &Environment) -> f64 {
        match (self.state, self.memory.informed_search_started_at) {
            (FsmState::SearchingInformed, Some(t0)) => informed_sigma(env.now() - t0, &env.params),
            _ => env.params.rho_u,
        }
    }

    /// Draws the next walk leg, redrawing legs that would leave the arena.
    fn next_search_leg(&mut self, env: &Environment) {
        let sigma = self.search_sigma(env);
        let pos = self.pose.position;
        for _ in 0..8 {
            let h = step_heading(self.walk_heading, sigma, &mut self.motion_rng);
            let wp = pos + Vec2::from_angle(h) * SEARCH_LEG;
            if env.arena.contains_with_margin(wp, ROBOT_RADIUS) {
                self.walk_heading = h;
                self.target = wp;
                return;
            }
        }
        self.walk_heading = pos.bearing_to(Vec2::ZERO);
        self.target = pos + Vec2::from_angle(self.walk_heading) * SEARCH_LEG;
    }

    fn enter(&mut self, state: FsmState, env: &mut Environment) {
        let from = self.state;
        self.state = state;
        self.state_steps = 0;
        let now = env.now();
        match state {
            FsmState::SearchingUninformed => {
                self.memory.search_started_at = Some(now);
                self.memory.informed_search_started_at = None;
                self.walk_heading = self.pose.heading;
                self.next_search_leg(env);
            }
            FsmState::SearchingInformed => {
                self.memory.search_started_at = Some(now);
                self.memory.informed_search_started_at = Some(now);
                self.walk_heading = self.pose.heading;
                self.next_search_leg(env);
            }
            FsmState::Dispersing => self.target = self.random_target(env),
            FsmState::ReturningEmpty | FsmState::ReturningWithResource => self.target = Vec2::ZERO,
            FsmState::AtCenter | FsmState::TravelingToSite | FsmState::TravelingToPheromone => {}
        }
        env.emit(&self.name, Event::Transition { from, to: state });
    }

    fn give_up(&mut self, env: &mut Environment) {
        self.memory.fidelity = false;
        self.enter(FsmState::ReturningEmpty, env);
    }

    fn degrade(&mut self, requested: TacticalAction, reason: &str, env: &mut Environment) {
        env.emit(
            &self.name,
            Event::Degraded {
                requested,
                executed: TacticalAction::UninformedSearch,
                source: DecisionSource::Degraded,
                reason: reason.to_string(),
            },
        );
        self.enter(FsmState::Dispersing, env);
    }

    fn execute(&mut self, action: TacticalAction, env: &mut Environment) {
        match action {
            TacticalAction::UseSiteFidelity => match self.memory.last_pickup {
                Some(site) => {
                    self.target = site;
                    self.enter(FsmState::TravelingToSite, env);
                }
                None => self.degrade(action, "no remembered pickup location", env),
            },
            TacticalAction::FollowPheromone => {
                let now = env.now();
                match env.pheromones.select(now, env.selection, &mut self.decision_rng) {
                    Some(w) => {
                        self.target = w.location;
                        self.enter(FsmState::TravelingToPheromone, env);
                    }
                    None => self.degrade(action, "no active pheromone waypoints", env),
                }
            }
            TacticalAction::UninformedSearch => self.enter(FsmState::Dispersing, env),
            TacticalAction::ContinueSearch => {}
            TacticalAction::ReturnForInfo => self.give_up(env),
        }
    }

    /// Runs one decision point: query, validate or fall back, log, execute.
    fn decide(
        &mut self,
        event_type: EventType,
        reported_state: FsmState,
        env: &mut Environment,
        policy: &mut dyn TacticalPolicy,
    ) -> Result<(), Error> {
        let now = env.now();
        let active = env.pheromones.active_count();
        let summary = event_type
            .at_center()
            .then(|| env.pheromones.summary(now, env.summary_cap));
        let event = DecisionEvent::new(
            &self.name,
            event_type,
            reported_state,
            now,
            self.pose.position,
            &self.memory,
            active,
            summary,
        );
        let reply = policy.decide(&event)?;
        let (action, source, rationale, fallback_reason) = match reply.outcome {
            ReplyOutcome::Cascade => (
                fallback_decide(event_type, &self.memory, active, &env.params, &mut self.decision_rng),
                DecisionSource::Cascade,
                None,
                None,
            ),
            ReplyOutcome::Action { action, rationale, source } => (action, source, rationale, None),
            ReplyOutcome::Fallback(reason) => (
                fallback_decide(event_type, &self.memory, active, &env.params, &mut self.decision_rng),
                DecisionSource::Fallback,
                None,
                Some(reason),
            ),
        };
        debug_assert!(event.allowed_actions.contains(&action));
        env.tally.record(reply.exchange.is_some(), fallback_reason.is_some(), reply.latency_secs);
        env.emit(
            &self.name,
            Event::Decision(Box::new(DecisionRecord {
                event,
                action,
                source,
                rationale,
                fallback_reason,
                exchange: reply.exchange,
            })),
        );
        let hold = env.limits.steps(reply.hold_secs.max(0.0));
        if hold > 0 {
            self.pending = Some(Pending { action, steps_left: hold });
        } else {
            self.execute(action, env);
        }
        Ok(())
    }

    fn drive(&mut self, env: &Environment, others: &[Vec2], gate: Option<Vec2>) {
        if let Some(away) = gate {
            self.gated_steps += 1;
            self.pose = yield_turn(self.pose, &env.limits);
            if self.gated_steps > env.limits.steps(JAM_SECS) {
                let step = away * (RETREAT_FRACTION * env.limits.linear_speed * env.limits.dt);
                let (to, _) = env.arena.clamp(self.pose.position + step, ROBOT_RADIUS);
                self.pose.position =
                    resolve_contact(self.pose.position, to, others, env.limits.min_separation());
            }
            return;
        }
        self.gated_steps = 0;
        let next = move_toward(self.pose, self.target, &env.limits);
        let (clamped, hit_wall) = env.arena.clamp(next.position, ROBOT_RADIUS);
        let position = if env.limits.yield_enabled {
            resolve_contact(self.pose.position, clamped, others, env.limits.min_separation())
        } else {
            clamped
        };
        self.pose = RobotPose {
            position,
            heading: next.heading,
        };
        if hit_wall && self.state.is_searching() {
            self.next_search_leg(env);
        }
    }

    fn arrived(&self, env: &Environment) -> bool {
        self.pose.position.dist(self.target) <= env.limits.arrival_tolerance
    }

    fn ticks(env: &Environment) -> u64 {
        env.limits.steps(TICK_SECS).max(1)
    }
}

/// Advances `robot` by one timestep. `others` holds the current positions of
/// every other robot. `gate` is set when the robot yields this step and
/// holds the direction away from the robots it yields to.
pub fn fsm_step(
    robot: &mut Robot,
    env: &mut Environment,
    others: &[Vec2],
    gate: Option<Vec2>,
    policy: &mut dyn TacticalPolicy,
) -> Result<(), Error> {
    if let Some(mut pending) = robot.pending {
        pending.steps_left -= 1;
        if pending.steps_left == 0 {
            robot.pending = None;
            robot.execute(pending.action, env);
        } else {
            robot.pending = Some(pending);
        }
        return Ok(());
    }
    if robot.state == FsmState::AtCenter {
        // only reachable if an action was never executed
        robot.enter(FsmState::Dispersing, env);
        return Ok(());
    }

    robot.drive(env, others, gate);
    let ticks = Robot::ticks(env);

    match robot.state {
        FsmState::Dispersing => {
            robot.state_steps += 1;
            let switch = robot.arrived(env)
                || (robot.state_steps.is_multiple_of(ticks)
                    && should_switch_to_search(&env.params, &mut robot.decision_rng));
            if switch {
                robot.enter(FsmState::SearchingUninformed, env);
            }
        }
        FsmState::TravelingToSite | FsmState::TravelingToPheromone => {
            if robot.arrived(env) {
                robot.enter(FsmState::SearchingInformed, env);
            }
        }
        FsmState::SearchingUninformed | FsmState::SearchingInformed => {
            robot.state_steps += 1;
            if let Some(pick) = try_pickup(robot, &mut env.field, &env.limits) {
                let now = env.now();
                robot.carrying = true;
                robot.memory.fidelity = true;
                robot.memory.last_pickup = Some(pick.location);
                robot.memory.last_density = pick.density;
                robot.memory.last_pickup_at = Some(now);
                env.emit(
                    &robot.name,
                    Event::Pickup {
                        resource: pick.resource,
                        location: pick.location,
                        density: pick.density,
                    },
                );
                robot.enter(FsmState::ReturningWithResource, env);
                return Ok(());
            }
            let uses_starvation = policy.uses_starvation();
            if robot.state_steps.is_multiple_of(ticks) {
                if !uses_starvation && should_give_up(&env.params, &mut robot.decision_rng) {
                    robot.give_up(env);
                    return Ok(());
                }
                robot.next_search_leg(env);
            } else if robot.arrived(env) {
                robot.next_search_leg(env);
            }
            let first = env.starvation.first_steps(&env.limits);
            let every = env.starvation.every_steps(&env.limits);
            if uses_starvation && robot.state_steps >= first && (robot.state_steps - first).is_multiple_of(every) {
                let state = robot.state;
                robot.decide(EventType::SearchStarvation, state, env, policy)?;
            }
        }
        FsmState::ReturningWithResource => {
            if let Some(deposit) = try_deposit(robot, &env.arena, &mut env.deposits) {
                env.emit(&robot.name, Event::Deposit { total: deposit.total });
                if robot.memory.fidelity {
                    if let Some(site) = robot.memory.last_pickup {
                        if should_lay_pheromone(robot.memory.last_density, &env.params, &mut robot.decision_rng) {
                            let now = env.now();
                            env.pheromones.lay(PheromoneWaypoint::new(site, now, robot.id));
                            env.emit(&robot.name, Event::PheromoneLaid { location: site });
                        }
                    }
                }
                robot.enter(FsmState::AtCenter, env);
                robot.decide(
                    EventType::PostDepositDecision,
                    FsmState::ReturningWithResource,
                    env,
                    policy,
                )?;
            }
        }
        FsmState::ReturningEmpty => {
            if env.arena.in_center_zone(robot.pose.position) {
                robot.enter(FsmState::AtCenter, env);
                robot.decide(EventType::CentralZoneArrival, FsmState::ReturningEmpty, env, policy)?;
            }
        }
        FsmState::AtCenter => unreachable!("handled above"),
    }
    Ok(())
}
