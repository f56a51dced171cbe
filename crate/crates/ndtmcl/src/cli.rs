//! Command-line front end: simulate, map, localize, experiment.
//! Exit codes: 0 success, 2 usage, 3 input format, 4 runtime.

use crate::config::FullConfig;
use crate::experiment::{map_delta, run_matrix, run_single, session_spec, write_trajectory_csv};
use crate::filters::Method;
use crate::geom::Pose2;
use crate::labels::LabelPartition;
use crate::ndt::build_map;
use crate::sim::{generate, SessionRole};
use crate::{io, Error, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "ndtmcl",
    about = "NDT occupancy mapping and Monte Carlo localization on synthetic 2D lidar sessions",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct ConfigArg {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<FullConfig> {
        match &self.config {
            Some(path) => FullConfig::load(path),
            None => Ok(FullConfig::default()),
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic session and write it as a binary log.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Session seed; overrides the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Generate a localization-role session against this mapping seed.
        #[arg(long)]
        mapping_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuse a session into a map file.
    Map {
        #[command(flatten)]
        config: ConfigArg,
        /// Input session file.
        session: PathBuf,
        /// baseline (keep everything) or static (semantic filter first).
        #[arg(long, default_value = "baseline")]
        map_type: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Localize a session against a map; writes a trajectory CSV.
    Localize {
        #[command(flatten)]
        config: ConfigArg,
        /// Input session file.
        session: PathBuf,
        /// Input map file.
        map: PathBuf,
        /// baseline, filtered, static or combined.
        #[arg(long, default_value = "baseline")]
        method: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full (map type x method) matrix and aggregate metrics.
    Experiment {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory for cached artifacts and CSVs.
        #[arg(long)]
        out: PathBuf,
        /// List the planned runs without executing them.
        #[arg(long)]
        dry_run: bool,
        /// Worker threads for localization runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            mapping_seed,
            out,
        } => cmd_simulate(config, seed, mapping_seed, out),
        Command::Map {
            config,
            session,
            map_type,
            out,
        } => cmd_map(config, session, map_type, out),
        Command::Localize {
            config,
            session,
            map,
            method,
            seed,
            out,
        } => cmd_localize(config, session, map, method, seed, out),
        Command::Experiment {
            config,
            out,
            dry_run,
            jobs,
        } => cmd_experiment(config, out, dry_run, jobs),
    }
}

fn cmd_simulate(
    config: ConfigArg,
    seed: Option<u64>,
    mapping_seed: Option<u64>,
    out: PathBuf,
) -> Result<()> {
    let cfg = config.load()?;
    let mut spec = cfg.session.clone();
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(mapping_seed) = mapping_seed {
        spec = session_spec(&spec, SessionRole::Localization, mapping_seed, spec.seed);
    }
    let log = generate(&spec)?;
    io::write_session(&out, &log)?;
    let points: usize = log.frames.iter().map(|f| f.scan.len()).sum();
    println!(
        "wrote {}: {} frames, {} points, {} dynamic agents",
        out.display(),
        log.frames.len(),
        points,
        spec.world.dynamic_agents.len()
    );
    Ok(())
}

fn cmd_map(config: ConfigArg, session: PathBuf, map_type: String, out: PathBuf) -> Result<()> {
    let cfg = config.load()?;
    let delta = map_delta(&map_type)?;
    let log = io::read_session(&session)?;
    let partition = LabelPartition::default();
    let grid = build_map(&log, &partition, delta, &cfg.filter, &cfg.map)?;
    io::write_map(&out, &grid)?;
    println!(
        "wrote {}: {} cells ({} valid), {} points dropped",
        out.display(),
        grid.cells.len(),
        grid.valid_components().len(),
        grid.dropped_points
    );
    Ok(())
}

fn cmd_localize(
    config: ConfigArg,
    session: PathBuf,
    map: PathBuf,
    method: String,
    seed: Option<u64>,
    out: PathBuf,
) -> Result<()> {
    let cfg = config.load()?;
    let method = Method::from_name(&method)?;
    let log = io::read_session(&session)?;
    let grid = io::read_map(&map)?;

    // the map must cover where the session actually drove
    for frame in &log.frames {
        let p = &frame.ground_truth;
        if !grid.in_bounds(grid.cell_of(p.translation())) {
            return Err(Error::ExtentMismatch {
                map: grid.config.extent,
                session: [p.x, p.y],
            });
        }
    }

    let seed = seed.unwrap_or(cfg.session.seed);
    let partition = LabelPartition::default();
    let index = grid.build_index();
    let (estimate, ate, rpe) = run_single(&log, &index, method, &cfg, seed, &partition)?;
    let timestamps: Vec<f64> = log.frames.iter().map(|f| f.timestamp).collect();
    let reference: Vec<Pose2> = log.frames.iter().map(|f| f.ground_truth).collect();
    write_trajectory_csv(&out, &timestamps, &estimate, &reference)?;
    println!(
        "wrote {}: {} frames, ATE {:.4} m, RPE {:.4} m",
        out.display(),
        estimate.len(),
        ate,
        rpe
    );
    Ok(())
}

fn cmd_experiment(config: ConfigArg, out: PathBuf, dry_run: bool, jobs: usize) -> Result<()> {
    let cfg = config.load()?;
    let result = run_matrix(&cfg, &out, dry_run, jobs)?;
    for row in &result.summary {
        println!(
            "map={:<8} method={:<8} mean ATE {:.4} m (var {:.5})  mean RPE {:.4} m",
            row.map_type, row.method, row.ate.mean, row.ate.variance, row.rpe.mean
        );
    }
    Ok(())
}
