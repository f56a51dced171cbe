//! Per-measurement dynamic-class estimation and delta selection.
//!
//! Two filters implement d(z): the semantic filter keeps points whose
//! label class is in a chosen set, and the dynamic filter removes
//! clusters whose tracked centroid moves faster than a threshold while
//! carrying a movable majority label. `select` wires the two into the
//! four method routes shared by mapping and localization.

use crate::geom::Pose2;
use crate::labels::{DynamicClassSet, LabelPartition};
use crate::scan::{LabeledPoint, LabeledScan};
use crate::{Error, Result};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    /// Single-linkage connection distance for clustering, meters.
    pub cluster_dist: f64,
    /// Connected components smaller than this are left unclustered.
    pub min_cluster_size: usize,
    /// Cluster centroid speed above which a movable cluster is dynamic, m/s.
    pub speed_threshold: f64,
    /// Track association gate, meters.
    pub gate_radius: f64,
    /// Voxel-grid subsampling leaf size, meters.
    pub voxel_leaf: f64,
    /// Labels treated as ground and excluded from clustering.
    pub ground_labels: BTreeSet<u32>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            cluster_dist: 0.5,
            min_cluster_size: 5,
            speed_threshold: 0.5,
            gate_radius: 2.0,
            voxel_leaf: 0.2,
            ground_labels: [40, 44, 48, 49].into_iter().collect(),
        }
    }
}

/// One connected component of non-ground points.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    /// Indices into the scan the clustering ran on.
    pub point_indices: Vec<usize>,
    /// Sensor-frame centroid.
    pub centroid: Vector2<f64>,
    /// Modal label; ties broken toward the smallest id.
    pub majority_label: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub id: u64,
    /// World-frame centroid at the last associated frame.
    pub centroid: Vector2<f64>,
    pub timestamp: f64,
    pub speed: f64,
}

/// Centroid tracks carried from one frame to the next. Tracks that miss
/// an association for a single frame are dropped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrackState {
    pub tracks: Vec<Track>,
    pub next_id: u64,
    pub last_timestamp: Option<f64>,
}

/// The four supported filter routes (method table rows).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// No filtering; delta = {S,E,D}.
    Baseline,
    /// Dynamic filter only; delta = {S,E}.
    Filtered,
    /// Semantic filter keeping statics; delta = {S}.
    Static,
    /// Dynamic filter then semantic filter; delta = {S}.
    Combined,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Baseline,
        Method::Filtered,
        Method::Static,
        Method::Combined,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Filtered => "filtered",
            Method::Static => "static",
            Method::Combined => "combined",
        }
    }

    pub fn from_name(name: &str) -> Result<Method> {
        match name {
            "baseline" => Ok(Method::Baseline),
            "filtered" => Ok(Method::Filtered),
            "static" => Ok(Method::Static),
            "combined" => Ok(Method::Combined),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }

    pub fn delta(&self) -> DynamicClassSet {
        match self {
            Method::Baseline => DynamicClassSet::ALL,
            Method::Filtered => DynamicClassSet::NON_DYNAMIC,
            Method::Static | Method::Combined => DynamicClassSet::STATIC_ONLY,
        }
    }

    /// The semantic route for a bare delta selection: {S,E,D} baseline,
    /// {S,E} filtered, {S} static. Other subsets are unsupported.
    pub fn from_delta(delta: DynamicClassSet) -> Result<Method> {
        if delta == DynamicClassSet::ALL {
            Ok(Method::Baseline)
        } else if delta == DynamicClassSet::NON_DYNAMIC {
            Ok(Method::Filtered)
        } else if delta == DynamicClassSet::STATIC_ONLY {
            Ok(Method::Static)
        } else {
            Err(Error::UnsupportedSelection(delta))
        }
    }

    pub fn uses_dynamic_filter(&self) -> bool {
        matches!(self, Method::Filtered | Method::Combined)
    }

    pub fn uses_semantic_filter(&self) -> bool {
        matches!(self, Method::Static | Method::Combined)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Keep points whose label's dynamic class is in `keep`. Order preserved.
pub fn semantic_filter(
    scan: &LabeledScan,
    partition: &LabelPartition,
    keep: DynamicClassSet,
) -> LabeledScan {
    scan.filtered(|p| {
        partition
            .classify(p.label)
            .is_some_and(|c| keep.contains(c))
    })
}

/// Split a scan into ground points and the rest by label.
pub fn remove_ground(scan: &LabeledScan, config: &FilterConfig) -> (LabeledScan, LabeledScan) {
    let ground = scan.filtered(|p| config.ground_labels.contains(&p.label));
    let rest = scan.filtered(|p| !config.ground_labels.contains(&p.label));
    (ground, rest)
}

fn voxel_key(p: &LabeledPoint, leaf: f64) -> (i64, i64) {
    ((p.x / leaf).floor() as i64, (p.y / leaf).floor() as i64)
}

/// Per-voxel centroid point carrying the modal label of the voxel.
pub fn voxel_subsample(scan: &LabeledScan, leaf: f64) -> Vec<((i64, i64), LabeledPoint)> {
    let mut voxels: BTreeMap<(i64, i64), (f64, f64, BTreeMap<u32, usize>)> = BTreeMap::new();
    for p in &scan.points {
        let entry = voxels
            .entry(voxel_key(p, leaf))
            .or_insert_with(|| (0.0, 0.0, BTreeMap::new()));
        entry.0 += p.x;
        entry.1 += p.y;
        *entry.2.entry(p.label).or_insert(0) += 1;
    }
    voxels
        .into_iter()
        .map(|(key, (sx, sy, labels))| {
            let n = labels.values().sum::<usize>() as f64;
            let label = modal_label(&labels);
            (
                key,
                LabeledPoint {
                    x: sx / n,
                    y: sy / n,
                    label,
                },
            )
        })
        .collect()
}

fn modal_label(counts: &BTreeMap<u32, usize>) -> u32 {
    // BTreeMap iteration is ascending, so ties resolve to the smallest id
    let mut best = (0u32, 0usize);
    for (&label, &n) in counts {
        if n > best.1 {
            best = (label, n);
        }
    }
    best.0
}

/// Single-linkage Euclidean clustering over the given points. Connected
/// components of at least `min_cluster_size` points become clusters,
/// ordered by their smallest member index.
pub fn cluster(points: &[LabeledPoint], config: &FilterConfig) -> Vec<Cluster> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let d2 = config.cluster_dist * config.cluster_dist;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = points[i].x - points[j].x;
            let dy = points[i].y - points[j].y;
            if dx * dx + dy * dy <= d2 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        members.entry(r).or_default().push(i);
    }
    members
        .into_values()
        .filter(|m| m.len() >= config.min_cluster_size)
        .map(|indices| {
            let mut cx = 0.0;
            let mut cy = 0.0;
            let mut labels: BTreeMap<u32, usize> = BTreeMap::new();
            for &i in &indices {
                cx += points[i].x;
                cy += points[i].y;
                *labels.entry(points[i].label).or_insert(0) += 1;
            }
            let n = indices.len() as f64;
            Cluster {
                point_indices: indices,
                centroid: Vector2::new(cx / n, cy / n),
                majority_label: modal_label(&labels),
            }
        })
        .collect()
}

/// Remove the points of clusters judged dynamic: centroid speed above
/// the threshold and a movable majority label. Ground and unclustered
/// points are always retained; no point is ever relabeled.
pub fn dynamic_filter(
    scan: &LabeledScan,
    sensor_pose: &Pose2,
    state: &TrackState,
    partition: &LabelPartition,
    config: &FilterConfig,
) -> Result<(LabeledScan, TrackState)> {
    if let Some(prev) = state.last_timestamp {
        if scan.timestamp <= prev {
            return Err(Error::OutOfOrder {
                prev,
                next: scan.timestamp,
            });
        }
    }
    let sub = voxel_subsample(scan, config.voxel_leaf);
    let rest: Vec<((i64, i64), LabeledPoint)> = sub
        .into_iter()
        .filter(|(_, p)| !config.ground_labels.contains(&p.label))
        .collect();
    let rest_points: Vec<LabeledPoint> = rest.iter().map(|&(_, p)| p).collect();
    let clusters = cluster(&rest_points, config);
    let centroids_world: Vec<Vector2<f64>> = clusters
        .iter()
        .map(|c| sensor_pose.transform(c.centroid))
        .collect();

    // greedy nearest-neighbor association within the gate, each track
    // and each cluster used at most once
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, track) in state.tracks.iter().enumerate() {
        for (ci, cw) in centroids_world.iter().enumerate() {
            let dist = (cw - track.centroid).norm();
            if dist <= config.gate_radius {
                pairs.push((dist, ti, ci));
            }
        }
    }
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut track_used = vec![false; state.tracks.len()];
    let mut cluster_track: Vec<Option<usize>> = vec![None; clusters.len()];
    for &(_, ti, ci) in &pairs {
        if !track_used[ti] && cluster_track[ci].is_none() {
            track_used[ti] = true;
            cluster_track[ci] = Some(ti);
        }
    }

    let mut new_state = TrackState {
        tracks: Vec::new(),
        next_id: state.next_id,
        last_timestamp: Some(scan.timestamp),
    };
    let mut dynamic_voxels: HashSet<(i64, i64)> = HashSet::new();
    for (ci, cl) in clusters.iter().enumerate() {
        let cw = centroids_world[ci];
        let (id, speed) = match cluster_track[ci] {
            Some(ti) => {
                let track = &state.tracks[ti];
                let dt = scan.timestamp - track.timestamp;
                let speed = (cw - track.centroid).norm() / dt;
                (track.id, speed)
            }
            None => {
                let id = new_state.next_id;
                new_state.next_id += 1;
                (id, 0.0)
            }
        };
        let movable = partition.is_movable(cl.majority_label);
        if speed > config.speed_threshold && movable {
            for &pi in &cl.point_indices {
                dynamic_voxels.insert(rest[pi].0);
            }
        }
        // the track survives either way: a removed cluster must stay
        // associated next frame or its speed estimate resets to zero
        // and the object flickers back in
        new_state.tracks.push(Track {
            id,
            centroid: cw,
            timestamp: scan.timestamp,
            speed,
        });
    }

    let filtered = scan.filtered(|p| {
        config.ground_labels.contains(&p.label)
            || !dynamic_voxels.contains(&voxel_key(p, config.voxel_leaf))
    });
    Ok((filtered, new_state))
}

/// Apply the filter route of `method` to a scan. The track state passes
/// through unchanged on routes without the dynamic filter.
pub fn select(
    scan: &LabeledScan,
    sensor_pose: &Pose2,
    state: &TrackState,
    partition: &LabelPartition,
    method: Method,
    config: &FilterConfig,
) -> Result<(LabeledScan, TrackState)> {
    let (scan, state) = if method.uses_dynamic_filter() {
        dynamic_filter(scan, sensor_pose, state, partition, config)?
    } else {
        (scan.clone(), state.clone())
    };
    let scan = if method.uses_semantic_filter() {
        semantic_filter(&scan, partition, DynamicClassSet::STATIC_ONLY)
    } else {
        scan
    };
    Ok((scan, state))
}
