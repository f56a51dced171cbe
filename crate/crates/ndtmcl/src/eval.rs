//! Trajectory accuracy metrics: absolute trajectory error after a
//! closed-form 2D rigid alignment, and relative pose error over
//! consecutive increments.

use crate::geom::Pose2;
use crate::{Error, Result};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

/// Least-squares rigid transform mapping `estimate` positions onto
/// `reference` positions (2D Kabsch / Umeyama without scale).
pub fn align(estimate: &[Pose2], reference: &[Pose2]) -> Result<Pose2> {
    if estimate.len() != reference.len() {
        return Err(Error::TrajectoryLengthMismatch {
            left: estimate.len(),
            right: reference.len(),
        });
    }
    if estimate.is_empty() {
        return Err(Error::TrajectoryTooShort { need: 1, got: 0 });
    }
    let n = estimate.len() as f64;
    let mean_e: Vector2<f64> = estimate.iter().map(Pose2::translation).sum::<Vector2<f64>>() / n;
    let mean_r: Vector2<f64> = reference.iter().map(Pose2::translation).sum::<Vector2<f64>>() / n;
    let mut dot = 0.0;
    let mut cross = 0.0;
    for (e, r) in estimate.iter().zip(reference) {
        let de = e.translation() - mean_e;
        let dr = r.translation() - mean_r;
        dot += de.dot(&dr);
        cross += de.x * dr.y - de.y * dr.x;
    }
    let theta = cross.atan2(dot);
    let (s, c) = theta.sin_cos();
    let tx = mean_r.x - (c * mean_e.x - s * mean_e.y);
    let ty = mean_r.y - (s * mean_e.x + c * mean_e.y);
    Ok(Pose2::new(tx, ty, theta))
}

/// Root-mean-square translational error after rigid alignment.
pub fn ate_rmse(estimate: &[Pose2], reference: &[Pose2]) -> Result<f64> {
    let transform = align(estimate, reference)?;
    let mut sum_sq = 0.0;
    for (e, r) in estimate.iter().zip(reference) {
        let aligned = transform.transform(e.translation());
        sum_sq += (aligned - r.translation()).norm_squared();
    }
    Ok((sum_sq / estimate.len() as f64).sqrt())
}

/// Root-mean-square translational error of consecutive relative motions.
/// No alignment is needed: relative increments are frame-independent.
pub fn rpe_rmse(estimate: &[Pose2], reference: &[Pose2]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::TrajectoryLengthMismatch {
            left: estimate.len(),
            right: reference.len(),
        });
    }
    if estimate.len() < 2 {
        return Err(Error::TrajectoryTooShort {
            need: 2,
            got: estimate.len(),
        });
    }
    let mut sum_sq = 0.0;
    for i in 1..estimate.len() {
        let de = estimate[i - 1].delta_to(&estimate[i]);
        let dr = reference[i - 1].delta_to(&reference[i]);
        let err = de.delta_to(&dr);
        sum_sq += err.x * err.x + err.y * err.y;
    }
    Ok((sum_sq / (estimate.len() - 1) as f64).sqrt())
}

/// Summary statistics of one metric over repeated runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub mean: f64,
    /// Sample variance (N - 1 denominator); 0 for a single run.
    pub variance: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of pre-sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

pub fn aggregate(values: &[f64]) -> Result<MetricSummary> {
    if values.is_empty() {
        return Err(Error::TrajectoryTooShort { need: 1, got: 0 });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(MetricSummary {
        count: values.len(),
        mean,
        variance,
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: *sorted.last().unwrap(),
    })
}
