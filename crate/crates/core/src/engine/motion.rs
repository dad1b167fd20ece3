//! Kinematic turn-then-drive motion and pairwise yield.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geom::{wrap_angle, Vec2};

/// Heading error above which a robot turns in place instead of driving.
pub const DRIVE_GATE: f64 = PI / 6.0;
/// Robot footprint radius used for wall clamping.
pub const ROBOT_RADIUS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotPose {
    pub position: Vec2,
    pub heading: f64,
}

impl RobotPose {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Self {
            position,
            heading: wrap_angle(heading),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionLimits {
    pub linear_speed: f64,
    pub angular_speed: f64,
    pub pickup_radius: f64,
    pub yield_radius: f64,
    pub arrival_tolerance: f64,
    pub density_radius: f64,
    pub dt: f64,
    /// Pairwise yield on/off; off makes robots pass through each other.
    pub yield_enabled: bool,
}

impl Default for MotionLimits {
    fn default() -> Self {
        Self {
            linear_speed: 0.3,
            angular_speed: 1.0,
            pickup_radius: 0.3,
            yield_radius: 0.35,
            arrival_tolerance: 0.05,
            density_radius: 0.5,
            dt: 0.1,
            yield_enabled: true,
        }
    }
}

impl MotionLimits {
    pub fn validate(&self) -> Result<(), crate::Error> {
        let positive = [
            self.linear_speed,
            self.angular_speed,
            self.pickup_radius,
            self.yield_radius,
            self.arrival_tolerance,
            self.density_radius,
            self.dt,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.dt > 0.2 {
            return Err(crate::Error::Spec(format!("invalid motion limits {self:?}")));
        }
        Ok(())
    }

    /// Closest two robot centers may come while yield is on.
    pub fn min_separation(&self) -> f64 {
        0.5 * self.yield_radius
    }

    /// Simulation steps covering `secs` seconds.
    pub fn steps(&self, secs: f64) -> u64 {
        (secs / self.dt).round() as u64
    }
}

/// One step of rotate-toward-target, then drive when roughly aligned.
pub fn move_toward(pose: RobotPose, target: Vec2, limits: &MotionLimits) -> RobotPose {
    let dist = pose.position.dist(target);
    if dist <= limits.arrival_tolerance {
        return pose;
    }
    let error = wrap_angle(pose.position.bearing_to(target) - pose.heading);
    let max_turn = limits.angular_speed * limits.dt;
    let turn = error.clamp(-max_turn, max_turn);
    let heading = wrap_angle(pose.heading + turn);
    let remaining = wrap_angle(pose.position.bearing_to(target) - heading);
    if remaining.abs() > DRIVE_GATE {
        return RobotPose {
            position: pose.position,
            heading,
        };
    }
    let advance = (limits.linear_speed * limits.dt).min(dist);
    RobotPose {
        position: pose.position + Vec2::from_angle(heading) * advance,
        heading,
    }
}

/// Per-robot motion gate: `true` means the robot halts this step.
///
/// For every pair closer than the yield radius the robot with the higher
/// identifier yields. `ids[i]` is the identifier of `poses[i]`.
pub fn apply_yield(ids: &[u32], poses: &[RobotPose], limits: &MotionLimits) -> Vec<bool> {
    let mut gated = vec![false; poses.len()];
    if !limits.yield_enabled {
        return gated;
    }
    let r2 = limits.yield_radius * limits.yield_radius;
    for i in 0..poses.len() {
        for j in i + 1..poses.len() {
            if poses[i].position.dist_sq(poses[j].position) < r2 {
                let loser = if ids[i] > ids[j] { i } else { j };
                gated[loser] = true;
            }
        }
    }
    gated
}

/// A robot gated this long also backs away from the robots gating it.
pub const JAM_SECS: f64 = 2.0;
/// Back-off speed as a fraction of the linear speed.
pub const RETREAT_FRACTION: f64 = 0.5;

/// Unit vector pointing robot `i` away from every lower-id robot inside its
/// yield radius; zero when nothing gates it.
pub fn yield_retreat(i: usize, ids: &[u32], poses: &[RobotPose], limits: &MotionLimits) -> Vec2 {
    let r2 = limits.yield_radius * limits.yield_radius;
    let me = poses[i].position;
    let mut sum = Vec2::ZERO;
    for (j, other) in poses.iter().enumerate() {
        if ids[j] < ids[i] && me.dist_sq(other.position) < r2 {
            let d = me - other.position;
            let n = d.norm();
            if n > 1e-12 {
                sum = sum + d * (1.0 / n);
            }
        }
    }
    let n = sum.norm();
    if n > 1e-12 {
        sum * (1.0 / n)
    } else {
        Vec2::ZERO
    }
}

/// Rotation applied to a gated robot so that symmetric standoffs break.
pub fn yield_turn(pose: RobotPose, limits: &MotionLimits) -> RobotPose {
    RobotPose {
        position: pose.position,
        heading: wrap_angle(pose.heading + limits.angular_speed * limits.dt),
    }
}

/// Limits a displacement so it never ends closer than `min_sep` to any of
/// `others`, sliding tangentially around the blocking robot when possible.
pub fn resolve_contact(from: Vec2, to: Vec2, others: &[Vec2], min_sep: f64) -> Vec2 {
    let blocked = |p: Vec2| {
        others
            .iter()
            .find(|o| p.dist(**o) < min_sep && p.dist(**o) < from.dist(**o))
            .copied()
    };
    let Some(obstacle) = blocked(to) else {
        return to;
    };
    let step = to - from;
    let away = from - obstacle;
    let n = away.norm();
    if n > 0.0 {
        let normal = away * (1.0 / n);
        let inward = step.dot(normal);
        if inward < 0.0 {
            let slide = from + (step - normal * inward);
            if blocked(slide).is_none() {
                return slide;
            }
        }
    }
    from
}
