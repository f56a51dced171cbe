//! Labeled 2D scans.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

/// A single range return with its semantic label. Coordinates are either
/// sensor-frame or world-frame depending on context.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: f64,
    pub y: f64,
    pub label: u32,
}

impl LabeledPoint {
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// One lidar measurement: an ordered set of labeled points in the
/// sensor frame, stamped with the acquisition time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledScan {
    pub timestamp: f64,
    pub points: Vec<LabeledPoint>,
}

impl LabeledScan {
    pub fn new(timestamp: f64) -> Self {
        LabeledScan {
            timestamp,
            points: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Vector2<f64>> {
        self.points.iter().map(|p| p.position()).collect()
    }

    /// Keep the points selected by `pred`, preserving order.
    pub fn filtered(&self, mut pred: impl FnMut(&LabeledPoint) -> bool) -> LabeledScan {
        LabeledScan {
            timestamp: self.timestamp,
            points: self.points.iter().filter(|p| pred(p)).copied().collect(),
        }
    }
}
