//! End-to-end acceptance suite: numerical oracles for the NDT map,
//! likelihood, filters, and metrics, followed by the benchmark matrix
//! conclusions. Each check prints one PASS/FAIL line; the test fails
//! if any check fails. Run with `--nocapture` to watch progress.

use nalgebra::{Matrix2, Vector2};
use ndtmcl::config::FullConfig;
use ndtmcl::eval::{ate_rmse, rpe_rmse};
use ndtmcl::experiment::{benchmark_config, run_matrix, RunOutcome};
use ndtmcl::filters::{dynamic_filter, semantic_filter, TrackState};
use ndtmcl::geom::Pose2;
use ndtmcl::labels::{DynamicClass, DynamicClassSet, LabelPartition, LabelRegistry};
use ndtmcl::mcl::stage_rng;
use ndtmcl::ndt::{build_map, rasterize_scan, NdtCell};
use ndtmcl::scan::{LabeledPoint, LabeledScan};
use ndtmcl::sim::{
    generate, generate_with_ids, Agent, ObjectId, SessionSpec, Shape, ShapeKind, WorldSpec,
};
use ndtmcl::labels::{LABEL_BUILDING, LABEL_MOVING_CAR, LABEL_POLE};
use rand::Rng;
use std::collections::BTreeMap;
use std::time::Instant;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(results: &mut Vec<Outcome>, name: &'static str, pass: bool, detail: String) {
    println!(
        "[{:>2}] {:<28} {}  ({})",
        results.len() + 1,
        name,
        if pass { "PASS" } else { "FAIL" },
        detail
    );
    results.push(Outcome { name, pass, detail });
}

/// One-sided sign-test p-value: P(Binomial(n, 1/2) >= k).
fn sign_test_p(k: usize, n: usize) -> f64 {
    let mut choose = 1.0f64;
    let mut total = 0.0f64;
    // sum C(n, i) for i = 0..n, accumulating the upper tail
    let mut tail = 0.0;
    for i in 0..=n {
        if i >= k {
            tail += choose;
        }
        total += choose;
        choose = choose * (n - i) as f64 / (i + 1) as f64;
    }
    tail / total
}

fn sample_mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

// ---------------------------------------------------------------- 1
fn statistics_oracle(results: &mut Vec<Outcome>) {
    let start = Instant::now();
    let mut rng = stage_rng(1, "stats-oracle");
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(3..=100);
        let pts: Vec<Vector2<f64>> = (0..n)
            .map(|_| Vector2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)))
            .collect();
        let mut cell = NdtCell::default();
        for p in &pts {
            cell.add_point(*p);
        }
        let mean_batch = pts.iter().sum::<Vector2<f64>>() / n as f64;
        let mut cov_batch = Matrix2::zeros();
        for p in &pts {
            let d = p - mean_batch;
            cov_batch += d * d.transpose();
        }
        cov_batch /= (n - 1) as f64;
        let dm = (cell.mean().unwrap() - mean_batch).abs().max();
        let dc = (cell.covariance().unwrap() - cov_batch).abs().max();
        worst = worst.max(dm).max(dc);
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        results,
        "statistics oracle",
        worst < 1e-9 && elapsed < 10.0,
        format!("max |delta| {worst:.2e}, {elapsed:.1}s"),
    );
}

// ---------------------------------------------------------------- 2
fn likelihood_dominance(results: &mut Vec<Outcome>) {
    let start = Instant::now();
    let partition = LabelPartition::default();
    let cfg = FullConfig::default();
    let resolution = cfg.map.resolution; // 0.6 m
    let radius = 2.0 * resolution; // 1.2 m perturbation ring
    let mut dominated = 0;
    let worlds = 50;
    for seed in 0..worlds {
        let spec = SessionSpec {
            seed,
            duration: 8.0,
            ..SessionSpec::default()
        };
        let log = generate(&spec).unwrap();
        let grid = build_map(&log, &partition, DynamicClassSet::ALL, &cfg.filter, &cfg.map).unwrap();
        let index = grid.build_index();
        let frame = &log.frames[log.frames.len() / 2];
        let rest = semantic_filter(&frame.scan, &partition, DynamicClassSet::ALL);
        let pts: Vec<Vector2<f64>> = rest
            .points
            .iter()
            .filter(|p| !cfg.filter.ground_labels.contains(&p.label))
            .map(|p| Vector2::new(p.x, p.y))
            .collect();
        let comps = rasterize_scan(&pts, resolution, cfg.map.min_points, cfg.map.eigen_floor);
        let truth = frame.ground_truth;
        let s_true = index.l2_score(&comps, &truth);
        let all_below = (0..16).all(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            let p = Pose2::new(truth.x + radius * a.cos(), truth.y + radius * a.sin(), truth.psi);
            index.l2_score(&comps, &p) < s_true
        });
        if all_below {
            dominated += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let frac = dominated as f64 / worlds as f64;
    report(
        results,
        "likelihood dominance",
        frac >= 0.95 && elapsed < 60.0,
        format!("{dominated}/{worlds} worlds dominated, {elapsed:.1}s"),
    );
}

// ---------------------------------------------------------------- 3
fn filter_partition(results: &mut Vec<Outcome>) {
    let start = Instant::now();
    let partition = LabelPartition::default();
    let mut rng = stage_rng(3, "partition");
    let labels = LabelRegistry::default().labels;
    let mut exact = true;
    for _ in 0..1000 {
        let n = rng.gen_range(1..400);
        let scan = LabeledScan {
            timestamp: 0.0,
            points: (0..n)
                .map(|_| LabeledPoint {
                    x: rng.gen_range(-30.0..30.0),
                    y: rng.gen_range(-30.0..30.0),
                    label: labels[rng.gen_range(0..labels.len())],
                })
                .collect(),
        };
        let mut pieces = Vec::new();
        for keep in [
            DynamicClassSet::single(DynamicClass::Static),
            DynamicClassSet::single(DynamicClass::SemiStatic),
            DynamicClassSet::single(DynamicClass::Dynamic),
        ] {
            pieces.extend(semantic_filter(&scan, &partition, keep).points);
        }
        let key = |p: &LabeledPoint| (p.x.to_bits(), p.y.to_bits(), p.label);
        let mut want: BTreeMap<_, i64> = BTreeMap::new();
        for p in &scan.points {
            *want.entry(key(p)).or_default() += 1;
        }
        for p in &pieces {
            *want.entry(key(p)).or_default() -= 1;
        }
        exact &= want.values().all(|&c| c == 0);
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        results,
        "semantic filter partition",
        exact && elapsed < 5.0,
        format!("1000 scans partitioned exactly, {elapsed:.1}s"),
    );
}

// ---------------------------------------------------------------- 4
/// An open arena where no mover ever comes within clustering distance
/// of static structure, so per-point ground truth is unambiguous: four
/// car lanes in the middle, landmarks on the outskirts.
fn oracle_world() -> WorldSpec {
    let rect = |center: [f64; 2], half: [f64; 2], label: u32| Shape {
        kind: ShapeKind::Rect { center, half, angle: 0.0 },
        label,
    };
    let lane = |y: f64, speed: f64| Agent {
        waypoints: vec![[-14.0, y], [14.0, y]],
        speed,
        label: LABEL_MOVING_CAR,
        half_size: 0.8,
    };
    WorldSpec {
        half_extent: 30.0,
        static_shapes: vec![
            rect([0.0, 22.0], [3.0, 1.0], LABEL_BUILDING),
            rect([0.0, -22.0], [3.0, 1.0], LABEL_BUILDING),
            rect([22.0, 0.0], [1.0, 3.0], LABEL_BUILDING),
            rect([-22.0, 0.0], [1.0, 3.0], LABEL_BUILDING),
            rect([18.0, 18.0], [0.3, 0.3], LABEL_POLE),
            rect([-18.0, -18.0], [0.3, 0.3], LABEL_POLE),
        ],
        parking_slots: vec![],
        dynamic_agents: vec![
            lane(12.0, 1.2),
            lane(4.0, 2.0),
            lane(-4.0, 3.0),
            lane(-12.0, 4.0),
        ],
        route: vec![[-7.0, -7.0], [7.0, -7.0], [7.0, 7.0], [-7.0, 7.0]],
        route_speed: 3.0,
        car_half: [2.1, 0.95],
    }
}

fn dynamic_filter_oracle(results: &mut Vec<Outcome>) {
    let partition = LabelPartition::default();
    let cfg = FullConfig::default();
    let mut fast_total = 0u64;
    let mut fast_removed = 0u64;
    let mut static_total = 0u64;
    let mut static_removed = 0u64;
    for seed in 0..20 {
        let spec = SessionSpec {
            world: oracle_world(),
            seed,
            duration: 15.0,
            beam_count: 1440,
            label_flip_prob: 0.1,
            mapping_label_flip_prob: 0.1,
            ..SessionSpec::default()
        };
        let fast: Vec<bool> = spec
            .world
            .dynamic_agents
            .iter()
            .map(|a| a.speed >= 1.0)
            .collect();
        let (log, ids) = generate_with_ids(&spec).unwrap();
        let mut tracks = TrackState::default();
        for (frame, frame_ids) in log.frames.iter().zip(&ids) {
            let (kept, new_tracks) =
                dynamic_filter(&frame.scan, &frame.ground_truth, &tracks, &partition, &cfg.filter)
                    .unwrap();
            tracks = new_tracks;
            // the filter returns an order-preserving subset, so one
            // linear walk recovers which input points were removed
            let mut k = 0usize;
            for (p, id) in frame.scan.points.iter().zip(frame_ids) {
                let survived = k < kept.points.len()
                    && kept.points[k].x.to_bits() == p.x.to_bits()
                    && kept.points[k].y.to_bits() == p.y.to_bits()
                    && kept.points[k].label == p.label;
                if survived {
                    k += 1;
                }
                match id {
                    ObjectId::Agent(ai) if fast[*ai] => {
                        fast_total += 1;
                        if !survived {
                            fast_removed += 1;
                        }
                    }
                    ObjectId::Static(_) | ObjectId::Parked(_) => {
                        static_total += 1;
                        if !survived {
                            static_removed += 1;
                        }
                    }
                    _ => {}
                }
            }
            assert_eq!(k, kept.points.len());
        }
    }
    let recall = fast_removed as f64 / fast_total as f64;
    let false_removal = static_removed as f64 / static_total as f64;
    report(
        results,
        "dynamic filter oracle",
        recall >= 0.9 && false_removal <= 0.05,
        format!("recall {recall:.3}, false removal {false_removal:.4}"),
    );
}

// ---------------------------------------------------------------- 5
fn naive_align(estimate: &[Pose2], reference: &[Pose2]) -> (f64, f64, f64) {
    let n = estimate.len() as f64;
    let (mut ex, mut ey, mut rx, mut ry) = (0.0, 0.0, 0.0, 0.0);
    for (e, r) in estimate.iter().zip(reference) {
        ex += e.x;
        ey += e.y;
        rx += r.x;
        ry += r.y;
    }
    let (ex, ey, rx, ry) = (ex / n, ey / n, rx / n, ry / n);
    let (mut dot, mut cross) = (0.0, 0.0);
    for (e, r) in estimate.iter().zip(reference) {
        let (ax, ay) = (e.x - ex, e.y - ey);
        let (bx, by) = (r.x - rx, r.y - ry);
        dot += ax * bx + ay * by;
        cross += ax * by - ay * bx;
    }
    let theta = cross.atan2(dot);
    let (s, c) = theta.sin_cos();
    (rx - (c * ex - s * ey), ry - (s * ex + c * ey), theta)
}

fn naive_ate(estimate: &[Pose2], reference: &[Pose2]) -> f64 {
    let (tx, ty, theta) = naive_align(estimate, reference);
    let (s, c) = theta.sin_cos();
    let mut sum = 0.0;
    for (e, r) in estimate.iter().zip(reference) {
        let x = c * e.x - s * e.y + tx;
        let y = s * e.x + c * e.y + ty;
        sum += (x - r.x).powi(2) + (y - r.y).powi(2);
    }
    (sum / estimate.len() as f64).sqrt()
}

fn naive_rpe(estimate: &[Pose2], reference: &[Pose2]) -> f64 {
    let rel = |a: &Pose2, b: &Pose2| {
        let (s, c) = a.psi.sin_cos();
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        (c * dx + s * dy, -s * dx + c * dy)
    };
    let mut sum = 0.0;
    for i in 1..estimate.len() {
        let (ex, ey) = rel(&estimate[i - 1], &estimate[i]);
        let (rx, ry) = rel(&reference[i - 1], &reference[i]);
        sum += (ex - rx).powi(2) + (ey - ry).powi(2);
    }
    (sum / (estimate.len() - 1) as f64).sqrt()
}

fn metric_correctness(results: &mut Vec<Outcome>) {
    let mut rng = stage_rng(5, "metrics");
    let mut worst = 0.0f64;
    let mut worst_inv = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..200);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Pose2> {
            (0..n)
                .map(|_| {
                    Pose2::new(
                        rng.gen_range(-50.0..50.0),
                        rng.gen_range(-50.0..50.0),
                        rng.gen_range(-3.14..3.14),
                    )
                })
                .collect()
        };
        let est = mk(&mut rng);
        let reference = mk(&mut rng);
        let da = (ate_rmse(&est, &reference).unwrap() - naive_ate(&est, &reference)).abs();
        let dr = (rpe_rmse(&est, &reference).unwrap() - naive_rpe(&est, &reference)).abs();
        worst = worst.max(da).max(dr);

        // RPE is invariant under a rigid transform of either trajectory
        let t = Pose2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(-3.0..3.0));
        let moved: Vec<Pose2> = est.iter().map(|p| t.compose(p)).collect();
        let di = (rpe_rmse(&moved, &reference).unwrap() - rpe_rmse(&est, &reference).unwrap()).abs();
        worst_inv = worst_inv.max(di);
    }
    report(
        results,
        "metric correctness",
        worst < 1e-9 && worst_inv < 1e-9,
        format!("max |delta| {worst:.2e}, invariance {worst_inv:.2e}"),
    );
}

// ----------------------------------------------------------- 6..10
type CellKey = (String, String);

fn cell_ates(runs: &[RunOutcome]) -> BTreeMap<CellKey, Vec<f64>> {
    let mut cells: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();
    for r in runs {
        cells
            .entry((r.map_type.clone(), r.method.clone()))
            .or_default()
            .push(r.ate_rmse);
    }
    cells
}

fn benchmark_conclusions(results: &mut Vec<Outcome>) {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut replications: Vec<Vec<RunOutcome>> = Vec::new();
    for rep in 0..5 {
        let mut cfg = benchmark_config();
        cfg.experiment.localization_seeds =
            (101 + 100 * rep..=120 + 100 * rep).collect();
        let out = run_matrix(&cfg, dir.path(), false, 1).unwrap();
        replications.push(out.runs);
    }
    println!(
        "     benchmark matrix: 5 x 160 runs in {:.0}s",
        start.elapsed().as_secs_f64()
    );

    // Conclusion: mapping without semi-static objects helps a plain
    // localizer. Paired per-seed comparison on the first replication.
    let first = cell_ates(&replications[0]);
    let sb = &first[&("static".into(), "baseline".into())];
    let bb = &first[&("baseline".into(), "baseline".into())];
    let wins = sb.iter().zip(bb).filter(|(s, b)| s < b).count();
    let p = sign_test_p(wins, sb.len());
    let (mean_sb, _) = sample_mean_var(sb);
    let (mean_bb, _) = sample_mean_var(bb);
    report(
        results,
        "static map helps",
        mean_sb < mean_bb && p < 0.05,
        format!("mean {mean_sb:.3} vs {mean_bb:.3}, {wins}/{} seeds, p={p:.4}", sb.len()),
    );

    // Conclusion: the consistent configuration (filtered scans against
    // the filtered map) is the best cell, and the semantic method has
    // no more variance than the baseline method on the baseline map.
    let mut best_cell_hits = 0;
    let mut var_hits = 0;
    let mut both = 0;
    for runs in &replications {
        let cells = cell_ates(runs);
        let stats: BTreeMap<&CellKey, (f64, f64)> =
            cells.iter().map(|(k, v)| (k, sample_mean_var(v))).collect();
        let min_key = stats.iter().min_by(|a, b| a.1 .0.total_cmp(&b.1 .0)).unwrap().0;
        let is_min = *min_key == &("static".to_string(), "combined".to_string());
        let var_ok = stats[&("baseline".into(), "static".into())].1
            <= stats[&("baseline".into(), "baseline".into())].1;
        best_cell_hits += is_min as u32;
        var_hits += var_ok as u32;
        both += (is_min && var_ok) as u32;
    }
    report(
        results,
        "consistent config best",
        both >= 4,
        format!("best cell {best_cell_hits}/5, variance {var_hits}/5, both {both}/5"),
    );

    // Conclusion: RPE is insensitive to the map/method choice.
    let mut rpes: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();
    for r in &replications[0] {
        rpes.entry((r.map_type.clone(), r.method.clone()))
            .or_default()
            .push(r.rpe_rmse);
    }
    let means: Vec<f64> = rpes.values().map(|v| sample_mean_var(v).0).collect();
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let spread = (means.iter().cloned().fold(f64::MIN, f64::max)
        - means.iter().cloned().fold(f64::MAX, f64::min))
        / grand;
    report(
        results,
        "relative error insensitive",
        spread <= 0.15,
        format!("RPE spread {:.1}% of grand mean", 100.0 * spread),
    );

    // Determinism: rebuilding the two-seed matrix twice yields
    // byte-identical artifacts.
    let mut cfg = benchmark_config();
    cfg.experiment.localization_seeds = vec![101, 102];
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_matrix(&cfg, dir_a.path(), false, 1).unwrap();
    run_matrix(&cfg, dir_b.path(), false, 1).unwrap();
    let paths_a = ndtmcl::experiment::artifact_paths(dir_a.path());
    let paths_b = ndtmcl::experiment::artifact_paths(dir_b.path());
    let mut identical = paths_a.len() == paths_b.len() && !paths_a.is_empty();
    for (a, b) in paths_a.iter().zip(&paths_b) {
        identical &= a.strip_prefix(dir_a.path()).unwrap() == b.strip_prefix(dir_b.path()).unwrap();
        identical &= std::fs::read(a).unwrap() == std::fs::read(b).unwrap();
    }
    report(
        results,
        "determinism",
        identical,
        format!("{} artifacts byte-identical", paths_a.len()),
    );

    // Conclusion: the unfiltered scan against the unfiltered map is
    // the worst cell.
    let mut worst_hits = 0;
    for runs in &replications {
        let cells = cell_ates(runs);
        let stats: BTreeMap<&CellKey, f64> =
            cells.iter().map(|(k, v)| (k, sample_mean_var(v).0)).collect();
        let max_key = stats.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        worst_hits += (*max_key == &("baseline".to_string(), "baseline".to_string())) as u32;
    }
    report(
        results,
        "baseline cell worst",
        worst_hits >= 4,
        format!("worst cell {worst_hits}/5 replications"),
    );
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    statistics_oracle(&mut results);
    likelihood_dominance(&mut results);
    filter_partition(&mut results);
    dynamic_filter_oracle(&mut results);
    metric_correctness(&mut results);
    benchmark_conclusions(&mut results);
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.name).collect();
    for r in &results {
        println!(
            "{} {:<28} {}",
            if r.pass { "ok  " } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}
