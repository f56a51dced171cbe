//! Deterministic synthetic 2D world and lidar simulator.
//!
//! A world is a set of labeled static shapes, parking slots that may
//! hold a car, and dynamic agents following waypoint loops. A session
//! renders the robot's traversal of a waypoint route into a log of
//! (ground truth, drifting odometry, labeled scan) triples. Everything
//! is a pure function of the spec, including its seeds.

use crate::geom::Pose2;
use crate::labels::{
    LabelRegistry, LABEL_BUILDING, LABEL_CAR, LABEL_FENCE, LABEL_MOVING_CAR, LABEL_MOVING_PERSON,
    LABEL_PERSON, LABEL_POLE, LABEL_ROAD,
};
use crate::mcl::{stage_rng, MotionNoise};
use crate::scan::{LabeledPoint, LabeledScan};
use crate::session::{Frame, SessionLog};
use crate::{Error, Result};
use nalgebra::Vector2;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeKind {
    Rect {
        center: [f64; 2],
        half: [f64; 2],
        #[serde(default)]
        angle: f64,
    },
    Segment {
        a: [f64; 2],
        b: [f64; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    #[serde(flatten)]
    pub kind: ShapeKind,
    pub label: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParkingSlot {
    pub pose: Pose2,
    /// Probability the slot holds a car in the mapping session.
    pub occupancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    /// Closed waypoint loop the agent cycles along.
    pub waypoints: Vec<[f64; 2]>,
    pub speed: f64,
    pub label: u32,
    pub half_size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldSpec {
    /// World half-extent in meters; content lives in [-half, half]^2.
    pub half_extent: f64,
    pub static_shapes: Vec<Shape>,
    pub parking_slots: Vec<ParkingSlot>,
    pub dynamic_agents: Vec<Agent>,
    /// Robot waypoint loop and speed.
    pub route: Vec<[f64; 2]>,
    pub route_speed: f64,
    /// Parked car body half-extents (length, width).
    pub car_half: [f64; 2],
}

impl Default for WorldSpec {
    fn default() -> Self {
        default_world()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionRole {
    Mapping,
    Localization,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionSpec {
    pub world: WorldSpec,
    pub role: SessionRole,
    pub seed: u64,
    /// Seed of the mapping session this session's parked cars derive from.
    pub mapping_seed: u64,
    /// Probability a mapping-session car is still parked in its slot.
    pub persistence: f64,
    /// Probability an empty slot has gained a car.
    pub spawn_rate: f64,
    /// Probability an emitted label is replaced by a random registry
    /// label. Applies to localization sessions, whose segmentation runs
    /// online on a per-scan budget.
    pub label_flip_prob: f64,
    /// Label noise of mapping sessions. Map building is an offline job,
    /// so its segmentation can afford a heavier model and manual
    /// cleanup, leaving less residual noise than the online pass.
    pub mapping_label_flip_prob: f64,
    pub range_noise_sigma: f64,
    pub odom_noise: MotionNoise,
    pub frame_rate: f64,
    pub beam_count: usize,
    pub max_range: f64,
    pub duration: f64,
    /// Fraction of non-returning beams that produce a synthetic ground hit.
    pub ground_return_rate: f64,
    /// Emit distinct moving-object labels (252/254); when false, moving
    /// objects emit their parked counterparts (10/30), modeling a
    /// segmentation that cannot detect motion.
    pub motion_labels: bool,
}

impl Default for SessionSpec {
    fn default() -> Self {
        SessionSpec {
            world: WorldSpec::default(),
            role: SessionRole::Mapping,
            seed: 0,
            mapping_seed: 0,
            persistence: 0.3,
            spawn_rate: 0.3,
            label_flip_prob: 0.15,
            mapping_label_flip_prob: 0.05,
            range_noise_sigma: 0.02,
            odom_noise: MotionNoise {
                x: (0.004, 0.002),
                y: (0.002, 0.002),
                psi: (0.0002, 0.004),
            },
            frame_rate: 10.0,
            beam_count: 720,
            max_range: 50.0,
            duration: 60.0,
            ground_return_rate: 0.05,
            motion_labels: true,
        }
    }
}

impl SessionSpec {
    /// Label noise applied when rendering this session's scans.
    pub fn effective_label_flip(&self) -> f64 {
        match self.role {
            SessionRole::Mapping => self.mapping_label_flip_prob,
            SessionRole::Localization => self.label_flip_prob,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.world.route.len() < 2 {
            return Err(Error::InvalidConfig(
                "route needs at least two waypoints".into(),
            ));
        }
        if polyline_length(&self.world.route, true) < 1e-9 {
            return Err(Error::InvalidConfig("route has zero length".into()));
        }
        for (name, p) in [
            ("persistence", self.persistence),
            ("spawn_rate", self.spawn_rate),
            ("label_flip_prob", self.label_flip_prob),
            ("mapping_label_flip_prob", self.mapping_label_flip_prob),
            ("ground_return_rate", self.ground_return_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0, 1], got {p}"
                )));
            }
        }
        if self.frame_rate <= 0.0 || self.duration <= 0.0 || self.beam_count == 0 {
            return Err(Error::InvalidConfig(
                "frame_rate, duration and beam_count must be positive".into(),
            ));
        }
        for w in &self.world.route {
            if w[0].abs() > self.world.half_extent || w[1].abs() > self.world.half_extent {
                return Err(Error::InvalidConfig("route leaves the world bounds".into()));
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.frame_rate).round() as usize
    }
}

/// Where a simulated return came from, for filter evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectId {
    Static(usize),
    Parked(usize),
    Agent(usize),
    Ground,
}

#[derive(Clone, Debug)]
struct SimSegment {
    a: Vector2<f64>,
    b: Vector2<f64>,
    label: u32,
    id: ObjectId,
}

#[derive(Clone, Debug)]
struct AgentState {
    path: Vec<Vector2<f64>>,
    cumulative: Vec<f64>,
    total_len: f64,
    speed: f64,
    label: u32,
    half_size: f64,
    phase: f64,
}

/// A concrete world instance: static structure plus the parked cars of
/// this session and phase-seeded agents.
#[derive(Clone, Debug)]
pub struct WorldSnapshot {
    segments: Vec<SimSegment>,
    agents: Vec<AgentState>,
    pub parked: Vec<bool>,
}

fn rect_segments(center: Vector2<f64>, half: [f64; 2], angle: f64) -> [(Vector2<f64>, Vector2<f64>); 4] {
    let (s, c) = angle.sin_cos();
    let rot = |v: Vector2<f64>| Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y);
    let corners = [
        center + rot(Vector2::new(-half[0], -half[1])),
        center + rot(Vector2::new(half[0], -half[1])),
        center + rot(Vector2::new(half[0], half[1])),
        center + rot(Vector2::new(-half[0], half[1])),
    ];
    [
        (corners[0], corners[1]),
        (corners[1], corners[2]),
        (corners[2], corners[3]),
        (corners[3], corners[0]),
    ]
}

fn polyline_length(points: &[[f64; 2]], closed: bool) -> f64 {
    let mut len = 0.0;
    for w in points.windows(2) {
        len += (Vector2::new(w[1][0], w[1][1]) - Vector2::new(w[0][0], w[0][1])).norm();
    }
    if closed && points.len() > 2 {
        let first = Vector2::new(points[0][0], points[0][1]);
        let last = Vector2::new(points[points.len() - 1][0], points[points.len() - 1][1]);
        len += (first - last).norm();
    }
    len
}

fn closed_path(points: &[[f64; 2]]) -> (Vec<Vector2<f64>>, Vec<f64>, f64) {
    let mut path: Vec<Vector2<f64>> = points.iter().map(|w| Vector2::new(w[0], w[1])).collect();
    if path.len() > 2 && (path[0] - path[path.len() - 1]).norm() > 1e-9 {
        let first = path[0];
        path.push(first);
    }
    let mut cumulative = vec![0.0];
    for w in path.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + (w[1] - w[0]).norm());
    }
    let total = *cumulative.last().unwrap();
    (path, cumulative, total)
}

/// Position and heading at arc length `s` along a closed polyline.
fn along_path(path: &[Vector2<f64>], cumulative: &[f64], total: f64, s: f64) -> (Vector2<f64>, f64) {
    let s = s.rem_euclid(total.max(1e-12));
    for i in 0..path.len() - 1 {
        if s <= cumulative[i + 1] || i == path.len() - 2 {
            let seg = path[i + 1] - path[i];
            let seg_len = seg.norm().max(1e-12);
            let frac = (s - cumulative[i]) / seg_len;
            let pos = path[i] + seg * frac;
            return (pos, seg.y.atan2(seg.x));
        }
    }
    (path[0], 0.0)
}

/// Materialize the world for one session: draw the mapping-session
/// parking occupancy from the mapping seed, evolve it with persistence
/// and spawn probabilities for localization sessions, and give agents
/// seeded phase offsets.
pub fn instantiate_session(spec: &SessionSpec) -> WorldSnapshot {
    let world = &spec.world;
    let mut segments = Vec::new();
    for (si, shape) in world.static_shapes.iter().enumerate() {
        match shape.kind {
            ShapeKind::Rect { center, half, angle } => {
                for (a, b) in rect_segments(Vector2::new(center[0], center[1]), half, angle) {
                    segments.push(SimSegment {
                        a,
                        b,
                        label: shape.label,
                        id: ObjectId::Static(si),
                    });
                }
            }
            ShapeKind::Segment { a, b } => segments.push(SimSegment {
                a: Vector2::new(a[0], a[1]),
                b: Vector2::new(b[0], b[1]),
                label: shape.label,
                id: ObjectId::Static(si),
            }),
        }
    }

    let mut rng_map = stage_rng(spec.mapping_seed, "slots");
    let base: Vec<bool> = world
        .parking_slots
        .iter()
        .map(|slot| rng_map.gen::<f64>() < slot.occupancy)
        .collect();
    let parked: Vec<bool> = match spec.role {
        SessionRole::Mapping => base,
        SessionRole::Localization => {
            let mut rng = stage_rng(spec.seed, "slots");
            base.iter()
                .map(|&was| {
                    let u = rng.gen::<f64>();
                    if was {
                        u < spec.persistence
                    } else {
                        u < spec.spawn_rate
                    }
                })
                .collect()
        }
    };
    for (i, (slot, &occupied)) in world.parking_slots.iter().zip(&parked).enumerate() {
        if occupied {
            for (a, b) in rect_segments(slot.pose.translation(), world.car_half, slot.pose.psi) {
                segments.push(SimSegment {
                    a,
                    b,
                    label: LABEL_CAR,
                    id: ObjectId::Parked(i),
                });
            }
        }
    }

    let mut rng_agents = stage_rng(spec.seed, "agents");
    let agents = world
        .dynamic_agents
        .iter()
        .map(|agent| {
            let (path, cumulative, total_len) = closed_path(&agent.waypoints);
            let phase = rng_agents.gen::<f64>() * total_len.max(1e-9);
            AgentState {
                path,
                cumulative,
                total_len,
                speed: agent.speed,
                label: agent.label,
                half_size: agent.half_size,
                phase,
            }
        })
        .collect();

    WorldSnapshot {
        segments,
        agents,
        parked,
    }
}

fn ray_segment(
    origin: Vector2<f64>,
    dir: Vector2<f64>,
    a: Vector2<f64>,
    b: Vector2<f64>,
) -> Option<f64> {
    let seg = b - a;
    let denom = dir.x * (-seg.y) - dir.y * (-seg.x);
    if denom.abs() < 1e-12 {
        return None;
    }
    let diff = a - origin;
    let t = (diff.x * (-seg.y) + diff.y * seg.x) / denom;
    let u = (dir.x * diff.y - dir.y * diff.x) / denom;
    if t > 1e-9 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

fn moving_label(label: u32, motion_labels: bool) -> u32 {
    if motion_labels {
        label
    } else {
        match label {
            LABEL_MOVING_CAR => LABEL_CAR,
            LABEL_MOVING_PERSON => LABEL_PERSON,
            other => other,
        }
    }
}

/// Cast all beams from `sensor_pose` at world time `t`, returning the
/// sensor-frame scan and the identity of the object behind each return.
pub fn render_scan(
    snapshot: &WorldSnapshot,
    t: f64,
    sensor_pose: &Pose2,
    spec: &SessionSpec,
    registry: &LabelRegistry,
    rng: &mut impl Rng,
) -> (LabeledScan, Vec<ObjectId>) {
    let origin = sensor_pose.translation();

    // agent bodies at this instant
    let mut frame_segments: Vec<SimSegment> = Vec::new();
    for (ai, agent) in snapshot.agents.iter().enumerate() {
        let s = agent.phase + agent.speed * t;
        let (pos, _) = along_path(&agent.path, &agent.cumulative, agent.total_len, s);
        for (a, b) in rect_segments(pos, [agent.half_size, agent.half_size], 0.0) {
            frame_segments.push(SimSegment {
                a,
                b,
                label: moving_label(agent.label, spec.motion_labels),
                id: ObjectId::Agent(ai),
            });
        }
    }

    // cheap range prune of the static segments for this frame
    let reach = spec.max_range + 1.0;
    let near: Vec<&SimSegment> = snapshot
        .segments
        .iter()
        .filter(|s| {
            let mid = (s.a + s.b) * 0.5;
            let half_len = (s.b - s.a).norm() * 0.5;
            (mid - origin).norm() <= reach + half_len
        })
        .chain(frame_segments.iter())
        .collect();

    let mut scan = LabeledScan::new(t);
    let mut ids = Vec::new();
    for beam in 0..spec.beam_count {
        let bearing = beam as f64 / spec.beam_count as f64 * std::f64::consts::TAU;
        let world_angle = sensor_pose.psi + bearing;
        let dir = Vector2::new(world_angle.cos(), world_angle.sin());
        let mut hit: Option<(f64, u32, ObjectId)> = None;
        for seg in &near {
            if let Some(t_hit) = ray_segment(origin, dir, seg.a, seg.b) {
                if t_hit <= spec.max_range && hit.map_or(true, |(best, _, _)| t_hit < best) {
                    hit = Some((t_hit, seg.label, seg.id));
                }
            }
        }
        let (range, label, id) = match hit {
            Some(h) => h,
            None => {
                if spec.ground_return_rate > 0.0 && rng.gen::<f64>() < spec.ground_return_rate {
                    let r = rng.gen_range(2.0..6.0f64.min(spec.max_range));
                    (r, LABEL_ROAD, ObjectId::Ground)
                } else {
                    continue;
                }
            }
        };
        let noisy = if spec.range_noise_sigma > 0.0 {
            (range
                + rand_distr::Normal::new(0.0, spec.range_noise_sigma)
                    .unwrap()
                    .sample(rng))
            .max(0.05)
        } else {
            range
        };
        let flip = spec.effective_label_flip();
        let label = if flip > 0.0 && rng.gen::<f64>() < flip {
            registry.labels[rng.gen_range(0..registry.labels.len())]
        } else {
            label
        };
        let (sb, cb) = bearing.sin_cos();
        scan.points.push(LabeledPoint {
            x: noisy * cb,
            y: noisy * sb,
            label,
        });
        ids.push(id);
    }
    (scan, ids)
}

/// Generate a full session log. Ground truth follows the route exactly;
/// odometry re-accumulates ground-truth increments corrupted by seeded
/// drift noise.
pub fn generate(spec: &SessionSpec) -> Result<SessionLog> {
    Ok(generate_with_ids(spec)?.0)
}

/// Like `generate`, additionally returning each return's source object.
pub fn generate_with_ids(spec: &SessionSpec) -> Result<(SessionLog, Vec<Vec<ObjectId>>)> {
    spec.validate()?;
    let registry = LabelRegistry::default();
    let snapshot = instantiate_session(spec);
    let (path, cumulative, total) = closed_path(&spec.world.route);
    let n = spec.frame_count();

    let mut rng_scan = stage_rng(spec.seed, "scan");
    let mut rng_odom = stage_rng(spec.seed, "odom");

    let mut frames = Vec::with_capacity(n);
    let mut all_ids = Vec::with_capacity(n);
    let mut odometry = Pose2::identity();
    let mut prev_gt = Pose2::identity();
    for i in 0..n {
        let t = i as f64 / spec.frame_rate;
        let (pos, heading) = along_path(&path, &cumulative, total, spec.world.route_speed * t);
        let gt = Pose2::new(pos.x, pos.y, heading);
        if i == 0 {
            odometry = gt;
        } else {
            let increment = prev_gt.delta_to(&gt);
            let sigmas = spec.odom_noise.sigmas(&increment);
            let mut draw = |sigma: f64| {
                if sigma > 0.0 {
                    rand_distr::Normal::new(0.0, sigma)
                        .unwrap()
                        .sample(&mut rng_odom)
                } else {
                    0.0
                }
            };
            let noisy = Pose2::new(
                increment.x + draw(sigmas[0]),
                increment.y + draw(sigmas[1]),
                increment.psi + draw(sigmas[2]),
            );
            odometry = odometry.compose(&noisy);
        }
        prev_gt = gt;
        let (scan, ids) = render_scan(&snapshot, t, &gt, spec, &registry, &mut rng_scan);
        frames.push(Frame {
            timestamp: t,
            ground_truth: gt,
            odometry,
            scan,
        });
        all_ids.push(ids);
    }

    let spec_echo = toml::to_string(spec).unwrap_or_default();
    Ok((
        SessionLog {
            frame_rate: spec.frame_rate,
            labels: registry.labels,
            spec_echo,
            frames,
        },
        all_ids,
    ))
}

/// The default block world: a square street loop with building
/// facades 6-8 m outside the route, an inner city block 5-9 m inside
/// it, fences and poles, 40 parking slots lining the streets and 6
/// dynamic agents. Every side has its own building rhythm so scans are
/// globally unambiguous.
pub fn default_world() -> WorldSpec {
    let mut shapes = Vec::new();
    let mut slots = Vec::new();

    // enclosing yard: a 60 x 44 m walled lot.  The rectangle is
    // deliberately non-square so a pose hypothesis rotated by 90
    // degrees conflicts with the wall distances immediately.
    let (w, h) = (30.0, 22.0);
    for (a, b) in [
        ([-w, -h], [w, -h]),
        ([w, -h], [w, h]),
        ([-w, h], [-w, -h]),
        // north wall with a recessed alcove between x = -10 and 0
        ([w, h], [0.0, h]),
        ([0.0, h], [0.0, h + 5.0]),
        ([0.0, h + 5.0], [-10.0, h + 5.0]),
        ([-10.0, h + 5.0], [-10.0, h]),
        ([-10.0, h], [-w, h]),
    ] {
        shapes.push(Shape {
            kind: ShapeKind::Segment { a, b },
            label: LABEL_BUILDING,
        });
    }

    // interior structure, all placed off-center so no two headings
    // see the same arrangement
    shapes.push(Shape {
        kind: ShapeKind::Rect {
            center: [4.0, 1.0],
            half: [7.0, 4.5],
            angle: 0.15,
        },
        label: LABEL_BUILDING,
    });
    shapes.push(Shape {
        kind: ShapeKind::Rect {
            center: [-16.0, 4.0],
            half: [2.5, 1.5],
            angle: 0.7,
        },
        label: LABEL_BUILDING,
    });
    // L-shaped shed in the south-east corner
    shapes.push(Shape {
        kind: ShapeKind::Rect {
            center: [24.0, -17.0],
            half: [4.0, 3.0],
            angle: 0.0,
        },
        label: LABEL_BUILDING,
    });
    shapes.push(Shape {
        kind: ShapeKind::Rect {
            center: [19.0, -13.0],
            half: [1.0, 3.0],
            angle: 0.0,
        },
        label: LABEL_BUILDING,
    });

    // fences screening the north-west quarter
    shapes.push(Shape {
        kind: ShapeKind::Segment {
            a: [-26.0, 12.0],
            b: [-14.0, 16.0],
        },
        label: LABEL_FENCE,
    });
    shapes.push(Shape {
        kind: ShapeKind::Segment {
            a: [10.0, 16.0],
            b: [18.0, 16.0],
        },
        label: LABEL_FENCE,
    });

    // angled landmark wall near the route start so the first scans
    // pin both position and heading quickly
    shapes.push(Shape {
        kind: ShapeKind::Segment {
            a: [-26.0, -13.0],
            b: [-22.5, -17.0],
        },
        label: LABEL_FENCE,
    });

    // angled screen walls at odd orientations; they give each
    // quarter of the yard a unique rotational signature
    for (a, b) in [
        ([-28.5, 8.0], [-24.5, 12.0]),
        ([20.0, 18.0], [26.0, 14.0]),
        ([-28.0, -9.0], [-24.0, -4.0]),
        ([22.0, 0.0], [24.0, 6.0]),
    ] {
        shapes.push(Shape {
            kind: ShapeKind::Segment { a, b },
            label: LABEL_FENCE,
        });
    }

    // planters: small boxes at odd angles near the lanes
    for (center, half, angle) in [
        ([11.0, 11.5], [0.8, 0.5], -0.8f64),
        ([-22.0, 5.0], [1.0, 0.5], 1.1),
        ([-2.4, -19.3], [1.6, 0.9], 0.5),
    ] {
        shapes.push(Shape {
            kind: ShapeKind::Rect { center, half, angle },
            label: LABEL_POLE,
        });
    }

    // buttresses: short stubs protruding from the enclosure walls at
    // uneven spacing; they break the translational ambiguity of a
    // long featureless wall
    for x in [-24.0, 21.0] {
        shapes.push(Shape {
            kind: ShapeKind::Segment {
                a: [x, -h],
                b: [x + 0.3, -h + 1.2],
            },
            label: LABEL_BUILDING,
        });
    }
    for x in [-21.0, 6.0, 16.0, 25.0] {
        shapes.push(Shape {
            kind: ShapeKind::Segment {
                a: [x, h],
                b: [x + 0.3, h - 1.2],
            },
            label: LABEL_BUILDING,
        });
    }
    for y in [-16.0, -6.0, 3.0, 14.0] {
        shapes.push(Shape {
            kind: ShapeKind::Segment {
                a: [-w, y],
                b: [-w + 1.2, y + 0.3],
            },
            label: LABEL_BUILDING,
        });
    }
    for y in [-12.0, 16.0] {
        shapes.push(Shape {
            kind: ShapeKind::Segment {
                a: [w, y],
                b: [w - 1.2, y + 0.3],
            },
            label: LABEL_BUILDING,
        });
    }

    // poles and bollards at uneven spacing along both sides of every
    // lane; dense cross-track features keep the likelihood peaked in
    // the direction of travel
    for (x, y) in [
        (-22.5, -9.0),
        (-22.5, 1.0),
        (-22.5, -4.5),
        (13.5, -9.0),
        (17.5, -15.5),
        (18.5, -2.0),
        (18.5, 2.5),
        (18.5, 6.0),
        (12.0, 12.5),
        (7.0, 6.5),
        (1.0, 12.5),
        (-4.0, 6.5),
        (-9.0, 12.5),
        (-13.0, 8.0),
        (-17.5, 12.5),
        (-26.0, -18.0),
        (-4.0, 19.0),
        (26.5, 13.0),
        (-27.0, 17.0),
    ] {
        shapes.push(Shape {
            kind: ShapeKind::Rect {
                center: [x, y],
                half: [0.2, 0.2],
                angle: 0.0,
            },
            label: LABEL_POLE,
        });
    }

    // parking: a south row along the wall, an east column, and a row
    // tucked against the south face of the central building; all three
    // rows sit close enough to the route that stale parked cars
    // pollute a map built from an earlier session
    for i in 0..9 {
        // slot 4 is replaced by an angled planter that gives the south
        // alley one stable landmark independent of parked cars
        if i == 4 {
            continue;
        }
        let x = -20.0 + 4.4 * i as f64;
        slots.push(ParkingSlot {
            pose: Pose2::new(x, -19.8, std::f64::consts::FRAC_PI_2),
            occupancy: 0.8,
        });
    }
    for i in 0..7 {
        let y = -9.0 + 4.5 * i as f64;
        slots.push(ParkingSlot {
            pose: Pose2::new(27.4, y, std::f64::consts::PI),
            occupancy: 0.8,
        });
    }
    for i in 0..6 {
        let x = -4.0 + 2.8 * i as f64;
        slots.push(ParkingSlot {
            pose: Pose2::new(x, -5.6, -std::f64::consts::FRAC_PI_2),
            occupancy: 0.8,
        });
    }

    // four cars circulating lanes offset from the route loop, two
    // pedestrians pacing short paths
    let lane = |r: f64| {
        vec![
            [-20.0 - r, -12.0 - r],
            [15.0 + r, -12.0 - r],
            [15.0 + r, 9.0 + r],
            [-20.0 - r, 9.0 + r],
        ]
    };
    let mut agents = vec![];
    for (i, speed) in [2.5, 3.5, 4.5, 5.5].iter().enumerate() {
        agents.push(Agent {
            waypoints: lane(1.2 + 0.9 * i as f64),
            speed: *speed,
            label: LABEL_MOVING_CAR,
            half_size: 1.2,
        });
    }
    // a pedestrian crossing the west leg fast enough for the tracker
    agents.push(Agent {
        waypoints: vec![[-18.4, -8.0], [-18.4, 6.0]],
        speed: 1.3,
        label: LABEL_MOVING_PERSON,
        half_size: 0.3,
    });
    // a person loitering at a session-random spot along the north leg,
    // drifting far below the tracker's speed threshold and carrying
    // the semi-static person label: geometry that moves between
    // sessions yet survives every route except the static-only one
    agents.push(Agent {
        waypoints: vec![[-10.0, 10.4], [10.0, 10.4]],
        speed: 0.05,
        label: LABEL_PERSON,
        half_size: 0.5,
    });

    WorldSpec {
        half_extent: 40.0,
        static_shapes: shapes,
        parking_slots: slots,
        dynamic_agents: agents,
        route: vec![[-20.0, -12.0], [15.0, -12.0], [15.0, 9.0], [-20.0, 9.0]],
        route_speed: 5.0,
        car_half: [2.1, 0.95],
    }
}
