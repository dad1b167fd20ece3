use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

/// A point or displacement in the arena plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn dist_sq(self, other: Vec2) -> f64 {
        let d = self - other;
        d.dot(d)
    }

    /// Bearing of `other` as seen from `self`.
    pub fn bearing_to(self, other: Vec2) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }

    /// Rounds both coordinates to `decimals` places; used for prompt and log payloads.
    pub fn rounded(self, decimals: i32) -> Self {
        Self::new(round_to(self.x, decimals), round_to(self.y, decimals))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(TAU) - PI;
    // rem_euclid can land exactly on TAU through rounding
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

pub fn round_to(v: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (v * k).round() / k
}

/// Square arena centered on the collection zone at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub half_width: f64,
    pub half_height: f64,
    pub center_zone_radius: f64,
}

impl Arena {
    pub const DEFAULT_CENTER_ZONE_RADIUS: f64 = 0.5;

    /// Square arena with the given side length in meters.
    pub fn square(side: f64) -> Self {
        Self {
            half_width: side / 2.0,
            half_height: side / 2.0,
            center_zone_radius: Self::DEFAULT_CENTER_ZONE_RADIUS,
        }
    }

    pub fn side(&self) -> f64 {
        self.half_width * 2.0
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x.abs() <= self.half_width && p.y.abs() <= self.half_height
    }

    /// True when `p` lies at least `margin` inside every wall.
    pub fn contains_with_margin(&self, p: Vec2, margin: f64) -> bool {
        p.x.abs() <= self.half_width - margin && p.y.abs() <= self.half_height - margin
    }

    /// Clamps `p` to the box shrunk by `margin`; returns the clamped point and whether it moved.
    pub fn clamp(&self, p: Vec2, margin: f64) -> (Vec2, bool) {
        let hx = self.half_width - margin;
        let hy = self.half_height - margin;
        let q = Vec2::new(p.x.clamp(-hx, hx), p.y.clamp(-hy, hy));
        (q, q != p)
    }

    pub fn in_center_zone(&self, p: Vec2) -> bool {
        p.norm() <= self.center_zone_radius
    }
}
