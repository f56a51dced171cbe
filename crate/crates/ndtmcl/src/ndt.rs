//! NDT occupancy grid.
//!
//! Each cell fuses the Gaussian sufficient statistics of all points ever
//! inserted into it (count, sum, outer-product sum) and an occupancy
//! log-odds driven by an inverse sensor model. The L2 distribution-to-
//! distribution score between a scan's local NDT and the map is the
//! measurement likelihood used by the particle filter.

use crate::filters;
use crate::geom::Pose2;
use crate::labels::{DynamicClassSet, LabelPartition};
use crate::session::SessionLog;
use crate::{Error, Result};
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Parameters of an NDT occupancy map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapConfig {
    /// Cell edge length in meters.
    pub resolution: f64,
    /// World coordinates of the corner of cell (0, 0).
    pub origin: [f64; 2],
    /// Grid size in meters.
    pub extent: [f64; 2],
    /// Minimum points for a cell to expose a Gaussian component.
    pub min_points: u64,
    /// Covariance eigenvalues are clamped to >= eigen_floor * lambda_max.
    pub eigen_floor: f64,
    pub p_hit: f64,
    pub p_miss: f64,
    pub log_odds_min: f64,
    pub log_odds_max: f64,
    /// Cells below this log-odds are excluded from queries.
    pub occupancy_threshold: f64,
    /// L2 score scale constant.
    pub d1: f64,
    /// L2 score exponent constant.
    pub d2: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            resolution: 0.6,
            origin: [-100.0, -100.0],
            extent: [200.0, 200.0],
            min_points: 3,
            eigen_floor: 1e-3,
            p_hit: 0.7,
            p_miss: 0.4,
            log_odds_min: -2.0,
            log_odds_max: 3.5,
            occupancy_threshold: 0.0,
            d1: 1.0,
            d2: 0.05,
        }
    }
}

impl MapConfig {
    pub fn l_hit(&self) -> f64 {
        (self.p_hit / (1.0 - self.p_hit)).ln()
    }

    pub fn l_miss(&self) -> f64 {
        (self.p_miss / (1.0 - self.p_miss)).ln()
    }
}

/// Gaussian sufficient statistics plus occupancy log-odds for one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NdtCell {
    pub count: u64,
    pub sum: Vector2<f64>,
    pub outer_sum: Matrix2<f64>,
    pub log_odds: f64,
}

impl Default for NdtCell {
    fn default() -> Self {
        NdtCell {
            count: 0,
            sum: Vector2::zeros(),
            outer_sum: Matrix2::zeros(),
            log_odds: 0.0,
        }
    }
}

impl NdtCell {
    pub fn add_point(&mut self, p: Vector2<f64>) {
        self.count += 1;
        self.sum += p;
        self.outer_sum += p * p.transpose();
    }

    pub fn mean(&self) -> Option<Vector2<f64>> {
        (self.count >= 1).then(|| self.sum / self.count as f64)
    }

    /// Unbiased sample covariance; defined once at least two points exist.
    pub fn covariance(&self) -> Option<Matrix2<f64>> {
        if self.count < 2 {
            return None;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let cov = (self.outer_sum - n * mean * mean.transpose()) / (n - 1.0);
        // symmetrize against accumulation round-off
        Some((cov + cov.transpose()) * 0.5)
    }
}

/// An extracted cell Gaussian: world-frame mean, regularized covariance,
/// and the supporting point count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    pub weight: f64,
}

/// Clamp covariance eigenvalues to eigen_floor times the largest one.
pub fn regularize_covariance(cov: Matrix2<f64>, eigen_floor: f64) -> Matrix2<f64> {
    let eig = cov.symmetric_eigen();
    let lmax = eig.eigenvalues.max().max(1e-9);
    let floor = eigen_floor * lmax;
    let l0 = eig.eigenvalues[0].max(floor);
    let l1 = eig.eigenvalues[1].max(floor);
    let q = eig.eigenvectors;
    q * Matrix2::new(l0, 0.0, 0.0, l1) * q.transpose()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NdtGrid {
    pub config: MapConfig,
    pub cells: HashMap<(i32, i32), NdtCell>,
    /// Points discarded for falling outside the grid extent.
    pub dropped_points: u64,
}

impl NdtGrid {
    pub fn new(config: MapConfig) -> Self {
        NdtGrid {
            config,
            cells: HashMap::new(),
            dropped_points: 0,
        }
    }

    pub fn dims(&self) -> (i32, i32) {
        let nx = (self.config.extent[0] / self.config.resolution).ceil() as i32;
        let ny = (self.config.extent[1] / self.config.resolution).ceil() as i32;
        (nx, ny)
    }

    /// Cell index of a world point, unbounded.
    pub fn cell_of(&self, p: Vector2<f64>) -> (i32, i32) {
        let i = ((p.x - self.config.origin[0]) / self.config.resolution).floor() as i32;
        let j = ((p.y - self.config.origin[1]) / self.config.resolution).floor() as i32;
        (i, j)
    }

    pub fn in_bounds(&self, (i, j): (i32, i32)) -> bool {
        let (nx, ny) = self.dims();
        i >= 0 && j >= 0 && i < nx && j < ny
    }

    /// Fuse world-frame points into the per-cell sufficient statistics.
    /// Out-of-extent points are dropped and tallied.
    pub fn insert_points(&mut self, points: &[Vector2<f64>]) {
        for &p in points {
            let idx = self.cell_of(p);
            if self.in_bounds(idx) {
                self.cells.entry(idx).or_default().add_point(p);
            } else {
                self.dropped_points += 1;
            }
        }
    }

    /// Inverse sensor model update: cells strictly traversed by each ray
    /// receive the miss log-odds, the endpoint cell the hit log-odds.
    pub fn update_occupancy(&mut self, sensor_origin: Vector2<f64>, endpoints: &[Vector2<f64>]) {
        let l_hit = self.config.l_hit();
        let l_miss = self.config.l_miss();
        for &end in endpoints {
            let end_cell = self.cell_of(end);
            for idx in self.traverse(sensor_origin, end) {
                if idx == end_cell {
                    break;
                }
                self.apply_log_odds(idx, l_miss);
            }
            if self.in_bounds(end_cell) {
                self.apply_log_odds(end_cell, l_hit);
            }
        }
    }

    fn apply_log_odds(&mut self, idx: (i32, i32), delta: f64) {
        let (lo, hi) = (self.config.log_odds_min, self.config.log_odds_max);
        let cell = self.cells.entry(idx).or_default();
        cell.log_odds = (cell.log_odds + delta).clamp(lo, hi);
    }

    /// Amanatides-Woo grid traversal from `from` to `to`, in-bounds cells
    /// only, in ray order, endpoint cell included last if reached.
    pub fn traverse(&self, from: Vector2<f64>, to: Vector2<f64>) -> Vec<(i32, i32)> {
        let res = self.config.resolution;
        let origin = Vector2::new(self.config.origin[0], self.config.origin[1]);
        let dir = to - from;
        let len = dir.norm();
        let mut out = Vec::new();
        let (mut i, mut j) = self.cell_of(from);
        let end_cell = self.cell_of(to);
        if len < 1e-12 {
            if self.in_bounds((i, j)) {
                out.push((i, j));
            }
            return out;
        }
        let d = dir / len;
        let step_x: i32 = if d.x > 0.0 { 1 } else { -1 };
        let step_y: i32 = if d.y > 0.0 { 1 } else { -1 };
        let next_boundary = |k: i32, step: i32, o: f64| -> f64 {
            let edge = if step > 0 { k + 1 } else { k };
            o + edge as f64 * res
        };
        let mut t_max_x = if d.x.abs() < 1e-15 {
            f64::INFINITY
        } else {
            (next_boundary(i, step_x, origin.x) - from.x) / d.x
        };
        let mut t_max_y = if d.y.abs() < 1e-15 {
            f64::INFINITY
        } else {
            (next_boundary(j, step_y, origin.y) - from.y) / d.y
        };
        let t_delta_x = if d.x.abs() < 1e-15 {
            f64::INFINITY
        } else {
            res / d.x.abs()
        };
        let t_delta_y = if d.y.abs() < 1e-15 {
            f64::INFINITY
        } else {
            res / d.y.abs()
        };
        loop {
            if self.in_bounds((i, j)) {
                out.push((i, j));
            }
            if (i, j) == end_cell {
                break;
            }
            if t_max_x.min(t_max_y) > len {
                break;
            }
            if t_max_x < t_max_y {
                t_max_x += t_delta_x;
                i += step_x;
            } else {
                t_max_y += t_delta_y;
                j += step_y;
            }
        }
        out
    }

    /// The queryable Gaussian of a cell: needs enough points and an
    /// occupancy log-odds at or above the threshold.
    pub fn component_at(&self, idx: (i32, i32)) -> Option<GaussianComponent> {
        let cell = self.cells.get(&idx)?;
        if cell.count < self.config.min_points || cell.log_odds < self.config.occupancy_threshold {
            return None;
        }
        Some(GaussianComponent {
            mean: cell.mean()?,
            cov: regularize_covariance(cell.covariance()?, self.config.eigen_floor),
            weight: cell.count as f64,
        })
    }

    /// All queryable components, sorted by cell index.
    pub fn valid_components(&self) -> Vec<((i32, i32), GaussianComponent)> {
        let mut out: Vec<_> = self
            .cells
            .keys()
            .filter_map(|&idx| self.component_at(idx).map(|c| (idx, c)))
            .collect();
        out.sort_by_key(|&(idx, _)| idx);
        out
    }

    /// Freeze the grid into a dense lookup structure for scoring.
    pub fn build_index(&self) -> MapIndex {
        let (nx, ny) = self.dims();
        let mut comps = vec![None; (nx * ny) as usize];
        for (idx, comp) in self.valid_components() {
            comps[(idx.1 * nx + idx.0) as usize] = Some(comp);
        }
        MapIndex {
            resolution: self.config.resolution,
            origin: Vector2::new(self.config.origin[0], self.config.origin[1]),
            nx,
            ny,
            d1: self.config.d1,
            d2: self.config.d2,
            comps,
        }
    }
}

/// Immutable dense view of a finished map, safe to share between
/// threads; scoring through it is a pure function.
#[derive(Clone, Debug)]
pub struct MapIndex {
    resolution: f64,
    origin: Vector2<f64>,
    nx: i32,
    ny: i32,
    pub d1: f64,
    pub d2: f64,
    comps: Vec<Option<GaussianComponent>>,
}

/// Counters reported by the scoring path.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScoreDiagnostics {
    pub singular_pairs: u64,
    pub matched_components: u64,
}

impl MapIndex {
    pub fn cell_of(&self, p: Vector2<f64>) -> (i32, i32) {
        (
            ((p.x - self.origin.x) / self.resolution).floor() as i32,
            ((p.y - self.origin.y) / self.resolution).floor() as i32,
        )
    }

    fn get(&self, i: i32, j: i32) -> Option<&GaussianComponent> {
        if i < 0 || j < 0 || i >= self.nx || j >= self.ny {
            return None;
        }
        self.comps[(j * self.nx + i) as usize].as_ref()
    }

    pub fn valid_cell_count(&self) -> usize {
        self.comps.iter().filter(|c| c.is_some()).count()
    }

    /// L2 distribution-to-distribution score of a sensor-frame scan NDT
    /// evaluated at `pose`. Each scan component is matched against the
    /// map cell containing its transformed mean plus the 8 neighbors;
    /// its contribution is the best pair term, unmatched components
    /// contribute zero, and the result is the mean over components.
    pub fn l2_score(&self, scan: &[GaussianComponent], pose: &Pose2) -> f64 {
        self.l2_score_diag(scan, pose).0
    }

    pub fn l2_score_diag(
        &self,
        scan: &[GaussianComponent],
        pose: &Pose2,
    ) -> (f64, ScoreDiagnostics) {
        let mut diag = ScoreDiagnostics::default();
        if scan.is_empty() {
            return (0.0, diag);
        }
        let (s, c) = pose.psi.sin_cos();
        let rot = Matrix2::new(c, -s, s, c);
        let mut total = 0.0;
        for comp in scan {
            let mean_w = pose.transform(comp.mean);
            let cov_w = rot * comp.cov * rot.transpose();
            let (ci, cj) = self.cell_of(mean_w);
            let mut best = 0.0f64;
            let mut matched = false;
            for dj in -1..=1 {
                for di in -1..=1 {
                    let Some(map_comp) = self.get(ci + di, cj + dj) else {
                        continue;
                    };
                    let sum = cov_w + map_comp.cov;
                    let det = sum.m11 * sum.m22 - sum.m12 * sum.m21;
                    if det.abs() < 1e-15 {
                        diag.singular_pairs += 1;
                        continue;
                    }
                    let mu = mean_w - map_comp.mean;
                    // mu^T sum^-1 mu via the 2x2 adjugate
                    let q = (sum.m22 * mu.x * mu.x - (sum.m12 + sum.m21) * mu.x * mu.y
                        + sum.m11 * mu.y * mu.y)
                        / det;
                    if q < 0.0 {
                        diag.singular_pairs += 1;
                        continue;
                    }
                    let term = self.d1 * (-0.5 * self.d2 * q).exp();
                    if term > best {
                        best = term;
                    }
                    matched = true;
                }
            }
            if matched {
                diag.matched_components += 1;
            }
            total += best;
        }
        (total / scan.len() as f64, diag)
    }
}

/// Build a local NDT from a sensor-frame scan: a temporary grid centered
/// on the sensor, returned as the list of valid cell Gaussians.
pub fn rasterize_scan(
    points: &[Vector2<f64>],
    resolution: f64,
    min_points: u64,
    eigen_floor: f64,
) -> Vec<GaussianComponent> {
    if points.is_empty() {
        return Vec::new();
    }
    let mut reach = 0.0f64;
    for p in points {
        reach = reach.max(p.x.abs()).max(p.y.abs());
    }
    // the extra half cell keeps extreme points off exact cell boundaries
    let half = reach + 1.5 * resolution;
    let cfg = MapConfig {
        resolution,
        origin: [-half, -half],
        extent: [2.0 * half, 2.0 * half],
        min_points,
        eigen_floor,
        ..MapConfig::default()
    };
    let mut grid = NdtGrid::new(cfg);
    grid.insert_points(points);
    grid.valid_components().into_iter().map(|(_, c)| c).collect()
}

/// Fuse a whole session into a map using ground-truth poses, applying
/// the filter route implied by `delta_m` to every scan first.
pub fn build_map(
    log: &SessionLog,
    partition: &LabelPartition,
    delta_m: DynamicClassSet,
    filter_config: &filters::FilterConfig,
    config: &MapConfig,
) -> Result<NdtGrid> {
    if log.is_empty() {
        return Err(Error::EmptySession);
    }
    let method = filters::Method::from_delta(delta_m)?;
    let mut grid = NdtGrid::new(config.clone());
    let mut tracks = filters::TrackState::default();
    for frame in &log.frames {
        let (scan, new_tracks) = filters::select(
            &frame.scan,
            &frame.ground_truth,
            &tracks,
            partition,
            method,
            filter_config,
        )?;
        tracks = new_tracks;
        let world: Vec<Vector2<f64>> = scan
            .points
            .iter()
            .map(|p| frame.ground_truth.transform(p.position()))
            .collect();
        grid.insert_points(&world);
        grid.update_occupancy(frame.ground_truth.translation(), &world);
    }
    Ok(grid)
}
