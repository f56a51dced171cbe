use ndtmcl::experiment::{benchmark_config, run_matrix};
use std::collections::BTreeMap;

fn main() {
    let offset: u64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(0);
    let mut cfg = benchmark_config();
    cfg.experiment.localization_seeds = (101 + offset..=120 + offset).collect();
    let dir = std::path::PathBuf::from(format!("/tmp/cells_{offset}"));
    std::fs::create_dir_all(&dir).unwrap();
    let out = run_matrix(&cfg, &dir, false, 1).unwrap();
    let mut cells: BTreeMap<(String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &out.runs {
        let e = cells.entry((r.map_type.clone(), r.method.clone())).or_default();
        e.0.push(r.ate_rmse);
        e.1.push(r.rpe_rmse);
    }
    for ((map, meth), (ates, rpes)) in &cells {
        let n = ates.len() as f64;
        let m = ates.iter().sum::<f64>() / n;
        let v = ates.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
        let mr = rpes.iter().sum::<f64>() / n;
        let worst = ates.iter().cloned().fold(f64::MIN, f64::max);
        println!("{map:>8}/{meth:<8} mean {m:.4} var {v:.4} rpe {mr:.4} max {worst:.2}");
    }
}
