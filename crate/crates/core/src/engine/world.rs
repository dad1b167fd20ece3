//! Shared world state and the pickup/deposit primitives.

use serde::{Deserialize, Serialize};

use super::events::{Event, EventRecord};
use super::motion::MotionLimits;
use crate::cpfa::Robot;
use crate::geom::{round_to, Arena, Vec2};
use crate::layout::ResourceField;
use crate::params::CpfaParams;
use crate::pheromone::{PheromoneField, PheromoneSelection};

/// When the search-starvation query fires, in simulated seconds of
/// continuous searching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarvationTiming {
    pub first_secs: f64,
    pub every_secs: f64,
}

impl Default for StarvationTiming {
    fn default() -> Self {
        Self {
            first_secs: 60.0,
            every_secs: 30.0,
        }
    }
}

impl StarvationTiming {
    pub fn first_steps(&self, limits: &MotionLimits) -> u64 {
        limits.steps(self.first_secs).max(1)
    }

    pub fn every_steps(&self, limits: &MotionLimits) -> u64 {
        limits.steps(self.every_secs).max(1)
    }
}

/// LLM call accounting for one trial.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CallTally {
    pub calls: usize,
    pub fallbacks: usize,
    pub latencies: Vec<f64>,
}

impl CallTally {
    pub fn record(&mut self, called: bool, fell_back: bool, latency: Option<f64>) {
        if called {
            self.calls += 1;
        }
        if fell_back {
            self.fallbacks += 1;
        }
        if let Some(l) = latency {
            self.latencies.push(l);
        }
    }
}

/// Everything robots share during a trial.
#[derive(Debug)]
pub struct Environment {
    pub arena: Arena,
    pub limits: MotionLimits,
    pub params: CpfaParams,
    pub field: ResourceField,
    pub pheromones: PheromoneField,
    pub selection: PheromoneSelection,
    pub starvation: StarvationTiming,
    pub summary_cap: usize,
    pub deposits: usize,
    /// Index of the step being executed.
    pub step: u64,
    pub log: Vec<EventRecord>,
    pub tally: CallTally,
}

impl Environment {
    /// Simulated time at the end of the current step.
    pub fn now(&self) -> f64 {
        sim_time(self.step + 1, self.limits.dt)
    }

    pub fn emit(&mut self, robot: &str, event: Event) {
        self.log.push(EventRecord {
            t: round_to(self.now(), 3),
            robot: robot.to_string(),
            event,
        });
    }
}

pub fn sim_time(steps: u64, dt: f64) -> f64 {
    round_to(steps as f64 * dt, 9)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PickupEvent {
    pub resource: usize,
    pub location: Vec2,
    /// Unpicked resources left within the density radius.
    pub density: usize,
}

/// Picks the nearest unpicked resource within reach, if the robot's hands
/// are free. The caller updates the robot's memory.
pub fn try_pickup(robot: &Robot, field: &mut ResourceField, limits: &MotionLimits) -> Option<PickupEvent> {
    if robot.carrying {
        return None;
    }
    let i = field.nearest_unpicked_within(robot.pose.position, limits.pickup_radius)?;
    if !field.pick(i) {
        return None;
    }
    let location = field.positions()[i];
    let density = field.count_unpicked_within(location, limits.density_radius);
    Some(PickupEvent {
        resource: i,
        location,
        density,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepositEvent {
    pub total: usize,
}

/// Drops the carried resource once inside the collection zone.
pub fn try_deposit(robot: &mut Robot, arena: &Arena, deposits: &mut usize) -> Option<DepositEvent> {
    if !robot.carrying || !arena.in_center_zone(robot.pose.position) {
        return None;
    }
    robot.carrying = false;
    *deposits += 1;
    Some(DepositEvent { total: *deposits })
}
