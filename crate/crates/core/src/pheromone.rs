//! Virtual pheromone waypoints and the shared pheromone manager.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::Error;

/// Waypoints weaker than this are dropped from the field.
pub const EXPIRY_THRESHOLD: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PheromoneWaypoint {
    pub location: Vec2,
    pub created_at: f64,
    pub initial_strength: f64,
    pub owner_robot: u32,
}

impl PheromoneWaypoint {
    pub fn new(location: Vec2, created_at: f64, owner_robot: u32) -> Self {
        Self {
            location,
            created_at,
            initial_strength: 1.0,
            owner_robot,
        }
    }
}

/// Exponentially decayed strength of `w` at time `now`.
pub fn pheromone_strength(w: &PheromoneWaypoint, now: f64, lambda_d: f64) -> Result<f64, Error> {
    let age = now - w.created_at;
    if age < 0.0 {
        return Err(Error::Domain(format!(
            "pheromone queried at t={now} before creation at t={}",
            w.created_at
        )));
    }
    Ok(w.initial_strength * (-lambda_d * age).exp())
}

/// Keeps the waypoints whose strength is at least `threshold`, preserving order.
pub fn prune_pheromones(
    field: &[PheromoneWaypoint],
    now: f64,
    lambda_d: f64,
    threshold: f64,
) -> Vec<PheromoneWaypoint> {
    field
        .iter()
        .filter(|w| pheromone_strength(w, now, lambda_d).is_ok_and(|s| s >= threshold))
        .copied()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PheromoneSelection {
    /// Pick with probability proportional to current strength.
    #[default]
    Proportional,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PheromoneSummary {
    pub location: Vec2,
    pub strength: f64,
}

/// Shared pheromone manager living at the central collection zone.
#[derive(Debug, Clone)]
pub struct PheromoneField {
    waypoints: Vec<PheromoneWaypoint>,
    lambda_d: f64,
    threshold: f64,
}

impl PheromoneField {
    pub fn new(lambda_d: f64) -> Self {
        Self {
            waypoints: Vec::new(),
            lambda_d,
            threshold: EXPIRY_THRESHOLD,
        }
    }

    pub fn lay(&mut self, waypoint: PheromoneWaypoint) {
        self.waypoints.push(waypoint);
    }

    pub fn prune(&mut self, now: f64) {
        if self
            .waypoints
            .iter()
            .any(|w| self.strength(w, now) < self.threshold)
        {
            self.waypoints = prune_pheromones(&self.waypoints, now, self.lambda_d, self.threshold);
        }
    }

    pub fn active_count(&self) -> usize {
        self.waypoints.len()
    }

    pub fn waypoints(&self) -> &[PheromoneWaypoint] {
        &self.waypoints
    }

    fn strength(&self, w: &PheromoneWaypoint, now: f64) -> f64 {
        pheromone_strength(w, now, self.lambda_d).unwrap_or(0.0)
    }

    /// The `limit` strongest waypoints, strongest first; ties keep creation order.
    pub fn summary(&self, now: f64, limit: usize) -> Vec<PheromoneSummary> {
        let mut all: Vec<PheromoneSummary> = self
            .waypoints
            .iter()
            .map(|w| PheromoneSummary {
                location: w.location,
                strength: self.strength(w, now),
            })
            .collect();
        all.sort_by(|a, b| b.strength.total_cmp(&a.strength));
        all.truncate(limit);
        all
    }

    /// Chooses a waypoint to follow; `None` when the field is empty.
    pub fn select<R: Rng + ?Sized>(
        &self,
        now: f64,
        mode: PheromoneSelection,
        rng: &mut R,
    ) -> Option<PheromoneWaypoint> {
        if self.waypoints.is_empty() {
            return None;
        }
        let idx = match mode {
            PheromoneSelection::Uniform => rng.random_range(0..self.waypoints.len()),
            PheromoneSelection::Proportional => {
                let weights: Vec<f64> =
                    self.waypoints.iter().map(|w| self.strength(w, now)).collect();
                let total: f64 = weights.iter().sum();
                let mut target = rng.random::<f64>() * total;
                let mut chosen = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if target < *w {
                        chosen = i;
                        break;
                    }
                    target -= w;
                }
                chosen
            }
        };
        Some(self.waypoints[idx])
    }
}
