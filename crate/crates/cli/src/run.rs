use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::Args;
use serde::Serialize;
use slnr_core::config::Override;
use slnr_core::simulation::run_experiment;
use slnr_core::SystemConfig;

use crate::results::{write_rows, ResultRow};
use crate::{Failure, Outcome};

pub const RESULTS_FILE: &str = "results.csv";
pub const METADATA_FILE: &str = "metadata.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config (TOML). Without it the built-in Table I defaults are used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Override a config key, e.g. `--set channel.num_antennas=16`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<Override>,
    /// Worker threads; 0 uses every available core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool_version: &'a str,
    master_seed: u64,
    realizations: usize,
    num_antennas: usize,
    user_counts: &'a [usize],
    /// `K / N` for each entry of `user_counts`.
    user_loading: Vec<f64>,
    snr_db: &'a [f64],
    columns: [&'a str; 9],
    config: &'a SystemConfig,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'a str,
    master_seed: u64,
    config_path: String,
    output_dir: String,
    files: Vec<String>,
    wall_clock_seconds: f64,
    config: &'a SystemConfig,
}

fn load_config(path: Option<&Path>, overrides: &[Override]) -> anyhow::Result<SystemConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => SystemConfig::default().to_toml_string(),
    };
    let context = path.map_or("built-in config".to_string(), |p| p.display().to_string());
    SystemConfig::parse(&text, overrides).with_context(|| format!("invalid config in {context}"))
}

fn write_toml(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = toml::to_string(value).with_context(|| format!("serializing {}", path.display()))?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn execute(args: RunArgs) -> Outcome {
    let config = load_config(args.config.as_deref(), &args.overrides).map_err(Failure::Usage)?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| Failure::Runtime(anyhow!(e)))?;
    let result = pool
        .install(|| run_experiment(&config))
        .context("simulation failed")
        .map_err(Failure::Runtime)?;
    write_outputs(&args, &config, &result.cells, started).map_err(Failure::Runtime)
}

fn write_outputs(
    args: &RunArgs,
    config: &SystemConfig,
    cells: &[slnr_core::CellResult],
    started: Instant,
) -> anyhow::Result<()> {
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_rows(&args.out.join(RESULTS_FILE), cells.iter().map(ResultRow::from))?;

    let version = env!("CARGO_PKG_VERSION");
    let n = config.channel.num_antennas as f64;
    write_toml(
        &args.out.join(METADATA_FILE),
        &Metadata {
            tool_version: version,
            master_seed: config.master_seed,
            realizations: config.realizations,
            num_antennas: config.channel.num_antennas,
            user_counts: &config.sweep.user_counts,
            user_loading: config.sweep.user_counts.iter().map(|&k| k as f64 / n).collect(),
            snr_db: &config.sweep.snr_db,
            columns: [
                "K",
                "snr_db",
                "precoder",
                "iteration",
                "mean_sum_se",
                "per_user_se",
                "stderr",
                "realizations",
                "mean_gap",
            ],
            config,
        },
    )?;

    let files = [RESULTS_FILE, METADATA_FILE, MANIFEST_FILE]
        .iter()
        .map(|f| args.out.join(f).display().to_string())
        .collect();
    write_toml(
        &args.out.join(MANIFEST_FILE),
        &Manifest {
            tool_version: version,
            master_seed: config.master_seed,
            config_path: args
                .config
                .as_ref()
                .map_or("<built-in>".to_string(), |p| p.display().to_string()),
            output_dir: args.out.display().to_string(),
            files,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            config,
        },
    )?;
    log::info!("wrote results to {}", args.out.display());
    Ok(())
}
