//! Monte Carlo localization against an NDT occupancy map.

use crate::filters::{self, FilterConfig, Method, TrackState};
use crate::geom::{Pose2, Trajectory};
use crate::labels::LabelPartition;
use crate::ndt::{rasterize_scan, GaussianComponent, MapIndex};
use crate::session::{normalize_session, SessionLog};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub pose: Pose2,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn normalize_weights(&mut self) {
        let sum: f64 = self.particles.iter().map(|p| p.weight).sum();
        if sum > 0.0 {
            for p in &mut self.particles {
                p.weight /= sum;
            }
        } else {
            let w = 1.0 / self.particles.len() as f64;
            for p in &mut self.particles {
                p.weight = w;
            }
        }
    }

    pub fn effective_sample_size(&self) -> f64 {
        let sq: f64 = self.particles.iter().map(|p| p.weight * p.weight).sum();
        if sq > 0.0 {
            1.0 / sq
        } else {
            0.0
        }
    }
}

/// Per-axis (variance per meter translated, variance per radian rotated)
/// pairs of the odometry motion model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionNoise {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub psi: (f64, f64),
}

impl Default for MotionNoise {
    fn default() -> Self {
        MotionNoise {
            x: (0.1, 0.05),
            y: (0.05, 0.05),
            psi: (0.001, 0.05),
        }
    }
}

impl MotionNoise {
    /// Per-axis standard deviations for a given pose increment.
    pub fn sigmas(&self, increment: &Pose2) -> [f64; 3] {
        let dt = increment.translation().norm();
        let dpsi = increment.psi.abs();
        let var = |(vt, vp): (f64, f64)| (vt * dt + vp * dpsi).max(0.0);
        [
            var(self.x).sqrt(),
            var(self.y).sqrt(),
            var(self.psi).sqrt(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationConfig {
    pub particle_count: usize,
    /// Half-width of the uniform initialization box in x and y, meters.
    /// Yaw is always initialized uniformly over the full circle.
    pub init_half_extent: f64,
    /// Resample when ESS falls below this fraction of the particle count.
    pub resample_threshold: f64,
    pub scan_ndt_resolution: f64,
    pub d1: f64,
    pub d2: f64,
    /// Lower bound applied to per-particle likelihoods.
    pub weight_floor: f64,
    pub motion_noise: MotionNoise,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        LocalizationConfig {
            particle_count: 500,
            init_half_extent: 20.0,
            resample_threshold: 0.5,
            scan_ndt_resolution: 0.6,
            d1: 1.0,
            d2: 0.05,
            weight_floor: 1e-6,
            motion_noise: MotionNoise::default(),
        }
    }
}

/// Derive a per-stage RNG from a session seed so that determinism does
/// not depend on evaluation order elsewhere.
pub fn stage_rng(seed: u64, stage: &str) -> ChaCha8Rng {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for b in stage.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Particles uniform in x0 +- the init box, yaw uniform on the circle,
/// equal weights.
pub fn initialize(x0: &Pose2, config: &LocalizationConfig, rng: &mut impl Rng) -> ParticleSet {
    let n = config.particle_count.max(1);
    let h = config.init_half_extent;
    let w = 1.0 / n as f64;
    let particles = (0..n)
        .map(|_| Particle {
            pose: Pose2::new(
                x0.x + rng.gen_range(-h..=h),
                x0.y + rng.gen_range(-h..=h),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ),
            weight: w,
        })
        .collect();
    ParticleSet { particles }
}

/// Compose every particle with the odometry increment perturbed by
/// zero-mean Gaussian noise scaled by the motion magnitude.
pub fn predict(
    particles: &mut ParticleSet,
    increment: &Pose2,
    noise: &MotionNoise,
    rng: &mut impl Rng,
) {
    let sigmas = noise.sigmas(increment);
    let dists: Vec<Option<Normal<f64>>> = sigmas
        .iter()
        .map(|&s| (s > 0.0).then(|| Normal::new(0.0, s).unwrap()))
        .collect();
    for p in &mut particles.particles {
        let mut sample = |d: &Option<Normal<f64>>| d.as_ref().map_or(0.0, |d| d.sample(rng));
        let noisy = Pose2::new(
            increment.x + sample(&dists[0]),
            increment.y + sample(&dists[1]),
            increment.psi + sample(&dists[2]),
        );
        p.pose = p.pose.compose(&noisy);
    }
}

/// What happened during a weight update.
#[derive(Clone, Copy, Debug, Default)]
pub struct WeightOutcome {
    /// All likelihoods were at the floor; weights were reset to uniform.
    pub exhausted: bool,
    pub singular_pairs: u64,
    pub mean_score: f64,
}

/// Multiply particle weights by the (floored) L2 likelihood of the scan
/// NDT at each particle pose, then renormalize.
pub fn update_weights(
    particles: &mut ParticleSet,
    map: &MapIndex,
    scan_ndt: &[GaussianComponent],
    config: &LocalizationConfig,
) -> WeightOutcome {
    let mut outcome = WeightOutcome::default();
    let mut any_above_floor = false;
    let mut score_sum = 0.0;
    for p in &mut particles.particles {
        let (score, diag) = map.l2_score_diag(scan_ndt, &p.pose);
        outcome.singular_pairs += diag.singular_pairs;
        score_sum += score;
        if score > config.weight_floor {
            any_above_floor = true;
        }
        p.weight *= score.max(config.weight_floor);
    }
    outcome.mean_score = score_sum / particles.len().max(1) as f64;
    if any_above_floor {
        particles.normalize_weights();
    } else {
        outcome.exhausted = true;
        let w = 1.0 / particles.len().max(1) as f64;
        for p in &mut particles.particles {
            p.weight = w;
        }
    }
    outcome
}

/// Systematic resampling when the effective sample size drops below the
/// configured fraction. Returns whether a resample happened.
pub fn resample_if_needed(
    particles: &mut ParticleSet,
    config: &LocalizationConfig,
    rng: &mut impl Rng,
) -> bool {
    let n = particles.len();
    if n == 0 {
        return false;
    }
    if particles.effective_sample_size() >= config.resample_threshold * n as f64 {
        return false;
    }
    let u0: f64 = rng.gen_range(0.0..1.0);
    let mut out = Vec::with_capacity(n);
    let mut cumulative = particles.particles[0].weight;
    let mut j = 0usize;
    let w = 1.0 / n as f64;
    for i in 0..n {
        let target = (i as f64 + u0) / n as f64;
        while cumulative < target && j + 1 < n {
            j += 1;
            cumulative += particles.particles[j].weight;
        }
        out.push(Particle {
            pose: particles.particles[j].pose,
            weight: w,
        });
    }
    particles.particles = out;
    true
}

/// Weighted mean pose; yaw via the circular mean.
pub fn estimate(particles: &ParticleSet) -> Pose2 {
    let mut x = 0.0;
    let mut y = 0.0;
    let mut s = 0.0;
    let mut c = 0.0;
    for p in &particles.particles {
        x += p.weight * p.pose.x;
        y += p.weight * p.pose.y;
        s += p.weight * p.pose.psi.sin();
        c += p.weight * p.pose.psi.cos();
    }
    Pose2::new(x, y, s.atan2(c))
}

/// Per-session summary counters.
#[derive(Clone, Copy, Debug, Default)]
pub struct LocalizeStats {
    pub frames: usize,
    pub resamples: usize,
    pub exhaustions: usize,
    pub singular_pairs: u64,
}

/// Run the full predict / filter / weight / resample / estimate loop
/// over a session, against a finished map.
pub fn localize_session(
    log: &SessionLog,
    map: &MapIndex,
    method: Method,
    partition: &LabelPartition,
    filter_config: &FilterConfig,
    config: &LocalizationConfig,
    seed: u64,
) -> Result<(Trajectory, LocalizeStats)> {
    if log.is_empty() {
        return Err(Error::EmptySession);
    }
    let log = normalize_session(log)?;
    let mut rng_init = stage_rng(seed, "init");
    let mut rng_predict = stage_rng(seed, "predict");
    let mut rng_resample = stage_rng(seed, "resample");

    let x0 = log.frames[0].ground_truth;
    let mut particles = initialize(&x0, config, &mut rng_init);
    let mut tracks = TrackState::default();
    let mut stats = LocalizeStats::default();
    let mut trajectory = Trajectory::default();

    for (i, frame) in log.frames.iter().enumerate() {
        if i > 0 {
            let increment = log.frames[i - 1].odometry.delta_to(&frame.odometry);
            predict(
                &mut particles,
                &increment,
                &config.motion_noise,
                &mut rng_predict,
            );
        }
        // the filter sees the current pose estimate as the sensor pose
        let sensor_pose = estimate(&particles);
        let (filtered, new_tracks) = filters::select(
            &frame.scan,
            &sensor_pose,
            &tracks,
            partition,
            method,
            filter_config,
        )?;
        tracks = new_tracks;
        let scan_ndt = rasterize_scan(
            &filtered.positions(),
            config.scan_ndt_resolution,
            3,
            1e-3,
        );
        let outcome = update_weights(&mut particles, map, &scan_ndt, config);
        if outcome.exhausted {
            stats.exhaustions += 1;
        }
        stats.singular_pairs += outcome.singular_pairs;
        if resample_if_needed(&mut particles, config, &mut rng_resample) {
            stats.resamples += 1;
        }
        trajectory
            .samples
            .push((frame.timestamp, estimate(&particles)));
        stats.frames += 1;
    }
    Ok((trajectory, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::normalize_angle;
    use crate::ndt::{MapConfig, NdtGrid};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector2;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn single_particle_initialization() {
        let mut rng = stage_rng(1, "init");
        let cfg = LocalizationConfig {
            particle_count: 1,
            ..LocalizationConfig::default()
        };
        let set = initialize(&Pose2::new(3.0, 4.0, 0.0), &cfg, &mut rng);
        assert_eq!(set.len(), 1);
        assert_eq!(set.particles[0].weight, 1.0);
        assert!((set.particles[0].pose.x - 3.0).abs() <= 20.0);
        assert!((set.particles[0].pose.y - 4.0).abs() <= 20.0);
    }

    #[test]
    fn initialization_mean_matches_uniform_moments() {
        let mut rng = stage_rng(7, "init");
        let cfg = LocalizationConfig {
            particle_count: 10_000,
            ..LocalizationConfig::default()
        };
        let x0 = Pose2::new(12.0, -5.0, 0.0);
        let set = initialize(&x0, &cfg, &mut rng);
        let mean_x: f64 =
            set.particles.iter().map(|p| p.pose.x).sum::<f64>() / set.len() as f64;
        // 3 sigma of the mean of U(-20, 20) over 10k samples
        let bound = 3.0 * 20.0 / (3.0f64 * 10_000.0).sqrt();
        assert!((mean_x - x0.x).abs() < bound, "bias {}", mean_x - x0.x);
    }

    #[test]
    fn same_seed_means_identical_particles() {
        let cfg = LocalizationConfig::default();
        let a = initialize(&Pose2::identity(), &cfg, &mut stage_rng(42, "init"));
        let b = initialize(&Pose2::identity(), &cfg, &mut stage_rng(42, "init"));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_increment_prediction_is_a_no_op() {
        let cfg = LocalizationConfig::default();
        let mut set = initialize(&Pose2::identity(), &cfg, &mut stage_rng(1, "init"));
        let before = set.clone();
        predict(
            &mut set,
            &Pose2::identity(),
            &MotionNoise::default(),
            &mut stage_rng(1, "predict"),
        );
        assert_eq!(set, before);
    }

    #[test]
    fn unit_translation_noise_variances_follow_the_motion_table() {
        let noise = MotionNoise::default();
        let s = noise.sigmas(&Pose2::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(s[0] * s[0], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1] * s[1], 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(s[2] * s[2], 0.001, epsilon = 1e-12);
    }

    #[test]
    fn empirical_prediction_variance_matches_model() {
        let cfg = LocalizationConfig {
            particle_count: 100_000,
            ..LocalizationConfig::default()
        };
        let mut set = ParticleSet {
            particles: vec![
                Particle {
                    pose: Pose2::identity(),
                    weight: 1.0 / cfg.particle_count as f64,
                };
                cfg.particle_count
            ],
        };
        predict(
            &mut set,
            &Pose2::new(1.0, 0.0, 0.0),
            &MotionNoise::default(),
            &mut stage_rng(3, "predict"),
        );
        let mean: f64 = set.particles.iter().map(|p| p.pose.x).sum::<f64>() / set.len() as f64;
        let var: f64 = set
            .particles
            .iter()
            .map(|p| (p.pose.x - mean).powi(2))
            .sum::<f64>()
            / (set.len() - 1) as f64;
        assert!((var - 0.1).abs() / 0.1 < 0.05, "variance {var}");
    }

    fn tiny_map() -> (NdtGrid, Vec<Vector2<f64>>) {
        let mut g = NdtGrid::new(MapConfig {
            resolution: 0.6,
            origin: [-30.0, -30.0],
            extent: [60.0, 60.0],
            ..MapConfig::default()
        });
        // a box of wall points around the origin
        let mut pts = Vec::new();
        for i in 0..1200 {
            let t = i as f64 / 1200.0 * 4.0;
            let (x, y) = match t as usize {
                0 => (-10.0 + 20.0 * (t - 0.0), -10.0),
                1 => (10.0, -10.0 + 20.0 * (t - 1.0)),
                2 => (10.0 - 20.0 * (t - 2.0), 10.0),
                _ => (-10.0, 10.0 - 20.0 * (t - 3.0)),
            };
            // slight thickness so covariances are not degenerate
            let jitter = 0.05 * ((i * 37 % 11) as f64 / 11.0 - 0.5);
            pts.push(Vector2::new(x + jitter, y - jitter));
        }
        g.insert_points(&pts);
        g.update_occupancy(Vector2::new(0.0, 0.0), &pts);
        (g, pts)
    }

    #[test]
    fn true_pose_particle_dominates_offset_particle() {
        let (g, pts) = tiny_map();
        let index = g.build_index();
        let scan_pts: Vec<Vector2<f64>> = pts.clone(); // sensor at origin, identity pose
        let scan_ndt = rasterize_scan(&scan_pts, 0.6, 3, 1e-3);
        let cfg = LocalizationConfig::default();
        let mut set = ParticleSet {
            particles: vec![
                Particle {
                    pose: Pose2::identity(),
                    weight: 0.5,
                },
                Particle {
                    pose: Pose2::new(5.0, 0.0, 0.0),
                    weight: 0.5,
                },
            ],
        };
        let outcome = update_weights(&mut set, &index, &scan_ndt, &cfg);
        assert!(!outcome.exhausted);
        assert!(set.particles[0].weight > set.particles[1].weight);
        let total: f64 = set.particles.iter().map(|p| p.weight).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn empty_scan_triggers_exhaustion_with_uniform_weights() {
        let (g, _) = tiny_map();
        let index = g.build_index();
        let cfg = LocalizationConfig::default();
        let mut set = ParticleSet {
            particles: vec![
                Particle {
                    pose: Pose2::identity(),
                    weight: 0.9,
                },
                Particle {
                    pose: Pose2::new(1.0, 0.0, 0.0),
                    weight: 0.1,
                },
            ],
        };
        let outcome = update_weights(&mut set, &index, &[], &cfg);
        assert!(outcome.exhausted);
        assert_eq!(set.particles[0].weight, 0.5);
        assert_eq!(set.particles[1].weight, 0.5);
    }

    #[test]
    fn uniform_weights_do_not_resample() {
        let cfg = LocalizationConfig::default();
        let mut set = initialize(&Pose2::identity(), &cfg, &mut stage_rng(1, "init"));
        assert!(!resample_if_needed(
            &mut set,
            &cfg,
            &mut stage_rng(1, "resample")
        ));
    }

    #[test]
    fn degenerate_weight_copies_one_pose() {
        let cfg = LocalizationConfig::default();
        let n = 10;
        let mut set = ParticleSet {
            particles: (0..n)
                .map(|i| Particle {
                    pose: Pose2::new(i as f64, 0.0, 0.0),
                    weight: if i == 3 { 1.0 } else { 0.0 },
                })
                .collect(),
        };
        assert!(resample_if_needed(
            &mut set,
            &cfg,
            &mut stage_rng(1, "resample")
        ));
        for p in &set.particles {
            assert_eq!(p.pose, Pose2::new(3.0, 0.0, 0.0));
            assert_abs_diff_eq!(p.weight, 0.1, epsilon = 1e-15);
        }
    }

    #[test]
    fn half_half_weights_resample_to_first_two_poses() {
        let cfg = LocalizationConfig::default();
        // ESS = 1/(0.36 + 0.16) ~ 1.92 < 0.5 * 4, so resampling triggers
        let mut set = ParticleSet {
            particles: vec![
                Particle {
                    pose: Pose2::new(0.0, 0.0, 0.0),
                    weight: 0.6,
                },
                Particle {
                    pose: Pose2::new(1.0, 0.0, 0.0),
                    weight: 0.4,
                },
                Particle {
                    pose: Pose2::new(2.0, 0.0, 0.0),
                    weight: 0.0,
                },
                Particle {
                    pose: Pose2::new(3.0, 0.0, 0.0),
                    weight: 0.0,
                },
            ],
        };
        resample_if_needed(&mut set, &cfg, &mut stage_rng(5, "resample"));
        for p in &set.particles {
            assert!(p.pose.x == 0.0 || p.pose.x == 1.0, "pose {:?}", p.pose);
        }
    }

    #[test]
    fn estimate_of_identical_particles_is_that_pose() {
        let pose = Pose2::new(2.0, -3.0, 1.2);
        let set = ParticleSet {
            particles: vec![Particle { pose, weight: 0.25 }; 4],
        };
        let e = estimate(&set);
        assert_abs_diff_eq!(e.x, pose.x, epsilon = 1e-12);
        assert_abs_diff_eq!(e.psi, pose.psi, epsilon = 1e-12);
    }

    #[test]
    fn estimate_uses_circular_mean_for_yaw() {
        let set = ParticleSet {
            particles: vec![
                Particle {
                    pose: Pose2::new(0.0, 0.0, 3.0),
                    weight: 0.5,
                },
                Particle {
                    pose: Pose2::new(0.0, 0.0, -3.0),
                    weight: 0.5,
                },
            ],
        };
        let e = estimate(&set);
        assert_abs_diff_eq!(normalize_angle(e.psi - PI), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_weight_particle_does_not_influence_estimate() {
        let set = ParticleSet {
            particles: vec![
                Particle {
                    pose: Pose2::new(1.0, 2.0, 0.5),
                    weight: 1.0,
                },
                Particle {
                    pose: Pose2::new(9.0, 9.0, -2.0),
                    weight: 0.0,
                },
            ],
        };
        let e = estimate(&set);
        assert_abs_diff_eq!(e.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.y, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.psi, 0.5, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// Weights stay normalized through updates.
        #[test]
        fn weights_normalized_after_update(seed in 0u64..1000) {
            let (g, pts) = tiny_map();
            let index = g.build_index();
            let scan_ndt = rasterize_scan(&pts, 0.6, 3, 1e-3);
            let cfg = LocalizationConfig {
                particle_count: 50,
                ..LocalizationConfig::default()
            };
            let mut set = initialize(&Pose2::identity(), &cfg, &mut stage_rng(seed, "init"));
            update_weights(&mut set, &index, &scan_ndt, &cfg);
            let total: f64 = set.particles.iter().map(|p| p.weight).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }

        /// Resampling is unbiased in the weighted mean across seeds.
        #[test]
        fn resampling_preserves_weighted_mean(offset in -5.0..5.0f64) {
            let cfg = LocalizationConfig::default();
            let template = ParticleSet {
                particles: (0..20)
                    .map(|i| Particle {
                        pose: Pose2::new(offset + i as f64 * 0.1, 0.0, 0.0),
                        weight: (i as f64 + 1.0),
                    })
                    .collect(),
            };
            let mut normalized = template.clone();
            normalized.normalize_weights();
            let target = estimate(&normalized).x;
            let n_seeds = 100;
            let mut means = Vec::new();
            for seed in 0..n_seeds {
                let mut set = normalized.clone();
                resample_if_needed(&mut set, &cfg, &mut stage_rng(seed, "resample"));
                means.push(estimate(&set).x);
            }
            let mean: f64 = means.iter().sum::<f64>() / n_seeds as f64;
            let var: f64 = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>()
                / (n_seeds - 1) as f64;
            let se = (var / n_seeds as f64).sqrt().max(1e-9);
            prop_assert!((mean - target).abs() < 3.0 * se + 1e-6,
                "bias {} vs se {}", mean - target, se);
        }

        /// Particle weighting does not depend on particle order.
        #[test]
        fn weighting_is_order_invariant(seed in 0u64..50) {
            let (g, pts) = tiny_map();
            let index = g.build_index();
            let scan_ndt = rasterize_scan(&pts, 0.6, 3, 1e-3);
            let cfg = LocalizationConfig {
                particle_count: 30,
                ..LocalizationConfig::default()
            };
            let mut a = initialize(&Pose2::identity(), &cfg, &mut stage_rng(seed, "init"));
            let mut b = a.clone();
            b.particles.reverse();
            update_weights(&mut a, &index, &scan_ndt, &cfg);
            update_weights(&mut b, &index, &scan_ndt, &cfg);
            b.particles.reverse();
            for (pa, pb) in a.particles.iter().zip(&b.particles) {
                prop_assert!((pa.weight - pb.weight).abs() < 1e-12);
            }
        }
    }
}
