//! SE(2) poses and trajectories.
//!
//! Angles are kept in (-pi, pi] at all times so that pose equality is
//! well defined and compose/inverse stay closed under the representation.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

/// Wrap an angle to (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * std::f64::consts::PI);
    if r > std::f64::consts::PI {
        r - 2.0 * std::f64::consts::PI
    } else {
        r
    }
}

/// A 2D pose (x, y, yaw).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Pose2 {
            x,
            y,
            psi: normalize_angle(psi),
        }
    }

    pub fn identity() -> Self {
        Pose2 {
            x: 0.0,
            y: 0.0,
            psi: 0.0,
        }
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    /// Rotate a vector by this pose's yaw.
    pub fn rotate(&self, v: Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.psi.sin_cos();
        Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    /// Map a point from this pose's local frame to the parent frame.
    pub fn transform(&self, p: Vector2<f64>) -> Vector2<f64> {
        self.rotate(p) + self.translation()
    }

    /// Group operation: self followed by `other` in self's frame.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let t = self.transform(other.translation());
        Pose2::new(t.x, t.y, self.psi + other.psi)
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.psi.sin_cos();
        Pose2::new(
            -(c * self.x + s * self.y),
            -(-s * self.x + c * self.y),
            -self.psi,
        )
    }

    /// Relative pose taking `self` to `other`: self^-1 * other.
    pub fn delta_to(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }
}

/// Timestamped pose sequence with strictly increasing timestamps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<(f64, Pose2)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vector2<f64>> + '_ {
        self.samples.iter().map(|(_, p)| p.translation())
    }
}
