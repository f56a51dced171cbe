//! Session logs: aligned (ground truth, odometry, scan) streams.

use crate::geom::Pose2;
use crate::scan::LabeledScan;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub timestamp: f64,
    pub ground_truth: Pose2,
    pub odometry: Pose2,
    pub scan: LabeledScan,
}

/// A full recorded traversal. `labels` echoes the registry active when
/// the session was produced, `spec_echo` the generating configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub frame_rate: f64,
    pub labels: Vec<u32>,
    pub spec_echo: String,
    pub frames: Vec<Frame>,
}

impl SessionLog {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn ground_truth_trajectory(&self) -> crate::geom::Trajectory {
        crate::geom::Trajectory {
            samples: self
                .frames
                .iter()
                .map(|f| (f.timestamp, f.ground_truth))
                .collect(),
        }
    }
}

/// Re-express the odometry stream relative to its first pose, so that
/// the first odometry pose becomes the identity. Idempotent.
pub fn normalize_session(log: &SessionLog) -> Result<SessionLog> {
    let first = log.frames.first().ok_or(Error::EmptySession)?;
    let t0_inv = first.odometry.inverse();
    let mut out = log.clone();
    for frame in &mut out.frames {
        frame.odometry = t0_inv.compose(&frame.odometry);
    }
    Ok(out)
}
