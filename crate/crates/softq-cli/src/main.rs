//! `softq` — train, evaluate, verify, and export soft Q-learning runs.
//!
//! Exit codes are stable contracts:
//! 0 success, 1 property failure (`oracle-check`), 2 usage/config errors,
//! 3 numeric abort during training.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use softq::agent::train;
use softq::checkpoint::Checkpoint;
use softq::config::RunConfig;
use softq::error::SoftqError;
use softq::eval::{evaluate, write_occupancy_csv, write_trajectories_csv};
use softq::metrics::{read_metrics_csv, write_metrics_csv};
use softq::oracle_suite::{run_battery, BatteryConfig};
use softq::rng::{substream, Stream};
use softq::svgd::SamplerNetwork;
use softq::tabular::TabularMdp;

#[derive(Parser)]
#[command(name = "softq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOverrides {
    /// Root seed override (also settable via SOFTQ_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override (also settable via SOFTQ_OUT_DIR).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full training loop from a config file.
    Train {
        /// Path to the TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: CommonOverrides,
    },
    /// Roll out a trained sampler and summarize goal occupancy.
    Eval {
        /// Checkpoint produced by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Run configuration (environment parameters are taken from it).
        #[arg(long)]
        config: PathBuf,
        /// Number of evaluation rollouts.
        #[arg(long)]
        rollouts: Option<usize>,
        #[command(flatten)]
        overrides: CommonOverrides,
    },
    /// Run the tabular oracle property battery.
    OracleCheck {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Comma-separated SxA sizes, e.g. "1x1,4x3,6x4".
        #[arg(long, default_value = "1x1,3x2,5x3,6x4")]
        sizes: String,
        /// Random MDPs drawn per size.
        #[arg(long, default_value_t = 3)]
        mdps_per_size: usize,
        /// Also run the battery on an MDP document.
        #[arg(long)]
        mdp_file: Option<PathBuf>,
    },
    /// Re-emit trajectories (and optionally metrics) from saved artifacts.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Number of rollouts to re-emit.
        #[arg(long)]
        rollouts: Option<usize>,
        /// Metrics CSV to validate and re-emit alongside the trajectories.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        overrides: CommonOverrides,
    },
}

fn env_seed() -> Option<u64> {
    std::env::var("SOFTQ_SEED").ok().and_then(|s| s.parse().ok())
}

fn env_out_dir() -> Option<PathBuf> {
    std::env::var("SOFTQ_OUT_DIR").ok().map(PathBuf::from)
}

/// Precedence: CLI flag > environment variable > config file.
fn apply_overrides(config: &mut RunConfig, overrides: &CommonOverrides) {
    if let Some(seed) = overrides.seed.or_else(env_seed) {
        config.train.seed = seed;
    }
    if let Some(dir) = overrides.out_dir.clone().or_else(env_out_dir) {
        config.output.dir = dir;
    }
}

fn exit_code(err: &SoftqError) -> u8 {
    match err {
        SoftqError::NumericAbort { .. } => 3,
        _ => 2,
    }
}

fn load_sampler(path: &PathBuf) -> Result<SamplerNetwork, SoftqError> {
    let ck = Checkpoint::load(path)?;
    let params = ck
        .get("policy")
        .ok_or_else(|| SoftqError::Parse("checkpoint has no policy section".into()))?
        .clone();
    SamplerNetwork::from_params(params, ck.state_dim, ck.action_dim)
}

fn cmd_train(config_path: PathBuf, overrides: CommonOverrides) -> Result<(), SoftqError> {
    let mut config = RunConfig::load(&config_path)?;
    apply_overrides(&mut config, &overrides);
    config.validate()?;
    let outcome = train(&config)?;
    println!(
        "done: {} epochs, metrics at {}, final checkpoint {}",
        outcome.metrics.len(),
        outcome.metrics_path.display(),
        outcome.final_checkpoint_path.display()
    );
    Ok(())
}

fn cmd_eval(
    checkpoint: PathBuf,
    config_path: PathBuf,
    rollouts: Option<usize>,
    overrides: CommonOverrides,
) -> Result<(), SoftqError> {
    let mut config = RunConfig::load(&config_path)?;
    apply_overrides(&mut config, &overrides);
    let out_dir = if overrides.out_dir.is_some() || env_out_dir().is_some() {
        config.output.dir.clone()
    } else {
        config.output.dir.join("eval")
    };
    std::fs::create_dir_all(&out_dir)?;
    let sampler = load_sampler(&checkpoint)?;
    let mg_cfg = config.env.to_multigoal()?;
    let n = rollouts.unwrap_or(config.output.eval_rollouts);
    let mut rng = substream(config.train.seed, Stream::Eval);
    let report = evaluate(&mg_cfg, &sampler, n, &mut rng)?;
    write_trajectories_csv(&out_dir.join("trajectories.csv"), &report)?;
    write_occupancy_csv(&out_dir.join("occupancy.csv"), &mg_cfg, &report)?;
    println!("rollouts: {n}  mean_return: {:.4}", report.mean_return);
    for (i, (g, occ)) in mg_cfg.goals.iter().zip(&report.occupancy).enumerate() {
        println!("goal {i} at ({:+.1}, {:+.1}): occupancy {occ:.3}", g[0], g[1]);
    }
    Ok(())
}

fn parse_sizes(text: &str) -> Result<Vec<(usize, usize)>, SoftqError> {
    let mut sizes = Vec::new();
    for part in text.split(',').filter(|p| !p.is_empty()) {
        let (s, a) = part
            .split_once('x')
            .ok_or_else(|| SoftqError::Config(format!("bad size {part:?}, want SxA")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| SoftqError::Config(format!("bad size number {t:?}")))
        };
        sizes.push((parse(s)?, parse(a)?));
    }
    if sizes.is_empty() {
        return Err(SoftqError::Config("no sizes given".into()));
    }
    Ok(sizes)
}

fn cmd_oracle_check(
    seed: u64,
    sizes: String,
    mdps_per_size: usize,
    mdp_file: Option<PathBuf>,
) -> Result<bool, SoftqError> {
    let battery = BatteryConfig {
        seed,
        sizes: parse_sizes(&sizes)?,
        mdps_per_size,
    };
    let extra = match &mdp_file {
        Some(path) => Some(TabularMdp::load(path)?),
        None => None,
    };
    let results = run_battery(&battery, extra.as_ref())?;
    let mut all_pass = true;
    for r in &results {
        let tag = if r.pass { "PASS" } else { "FAIL" };
        println!("{tag} {} — {}", r.property, r.detail);
        all_pass &= r.pass;
    }
    if !all_pass {
        eprintln!("oracle-check: failures with seed {seed}");
    }
    Ok(all_pass)
}

fn cmd_export(
    checkpoint: PathBuf,
    config_path: PathBuf,
    rollouts: Option<usize>,
    metrics: Option<PathBuf>,
    overrides: CommonOverrides,
) -> Result<(), SoftqError> {
    let mut config = RunConfig::load(&config_path)?;
    apply_overrides(&mut config, &overrides);
    let out_dir = if overrides.out_dir.is_some() || env_out_dir().is_some() {
        config.output.dir.clone()
    } else {
        config.output.dir.join("export")
    };
    std::fs::create_dir_all(&out_dir)?;
    let sampler = load_sampler(&checkpoint)?;
    let mg_cfg = config.env.to_multigoal()?;
    let n = rollouts.unwrap_or(config.output.eval_rollouts);
    let mut rng = substream(config.train.seed, Stream::Eval);
    let report = evaluate(&mg_cfg, &sampler, n, &mut rng)?;
    write_trajectories_csv(&out_dir.join("trajectories.csv"), &report)?;
    write_occupancy_csv(&out_dir.join("occupancy.csv"), &mg_cfg, &report)?;
    if let Some(metrics_path) = metrics {
        let rows = read_metrics_csv(&metrics_path)?;
        write_metrics_csv(&out_dir.join("metrics.csv"), &rows)?;
        println!("re-emitted {} metric rows", rows.len());
    }
    println!("exported {n} rollouts to {}", out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<bool, SoftqError> = match cli.command {
        Command::Train { config, overrides } => cmd_train(config, overrides).map(|_| true),
        Command::Eval {
            checkpoint,
            config,
            rollouts,
            overrides,
        } => cmd_eval(checkpoint, config, rollouts, overrides).map(|_| true),
        Command::OracleCheck {
            seed,
            sizes,
            mdps_per_size,
            mdp_file,
        } => cmd_oracle_check(seed, sizes, mdps_per_size, mdp_file),
        Command::Export {
            checkpoint,
            config,
            rollouts,
            metrics,
            overrides,
        } => cmd_export(checkpoint, config, rollouts, metrics, overrides).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
