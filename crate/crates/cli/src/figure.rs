use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Serialize;
use slnr_core::PrecoderKind;

use crate::results::{read_results, write_rows, ResultRow};
use crate::{Failure, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    /// Sum SE against K, one series per precoder and SLNR iteration.
    Fig2,
    /// SLNR sum SE and update gap against iteration, one series per K.
    Fig3,
    /// Per-user SE against K.
    Fig4,
    All,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// A results.csv written by `slnr run`.
    #[arg(long)]
    results: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    figure: FigureId,
    /// Directory for the figure files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct SumSePoint {
    snr_db: f64,
    series: String,
    #[serde(rename = "K")]
    users: usize,
    mean_sum_se: f64,
    ci95: f64,
}

#[derive(Serialize)]
struct ConvergencePoint {
    snr_db: f64,
    #[serde(rename = "K")]
    users: usize,
    iteration: usize,
    mean_sum_se: f64,
    ci95: f64,
    mean_gap: Option<f64>,
}

#[derive(Serialize)]
struct PerUserPoint {
    snr_db: f64,
    series: String,
    #[serde(rename = "K")]
    users: usize,
    per_user_se: f64,
}

/// Orders rows by SNR, then series, then K.
fn by_series(rows: &[ResultRow]) -> Vec<&ResultRow> {
    let rank = |r: &ResultRow| match r.precoder {
        PrecoderKind::Zf => 0,
        PrecoderKind::Rzf => 1,
        PrecoderKind::Slnr => 1 + r.iteration,
    };
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.snr_db
            .total_cmp(&b.snr_db)
            .then(rank(a).cmp(&rank(b)))
            .then(a.users.cmp(&b.users))
    });
    sorted
}

fn fig2(rows: &[ResultRow]) -> Vec<SumSePoint> {
    by_series(rows)
        .into_iter()
        .map(|r| SumSePoint {
            snr_db: r.snr_db,
            series: r.series(),
            users: r.users,
            mean_sum_se: r.mean_sum_se,
            ci95: r.ci95(),
        })
        .collect()
}

fn fig3(rows: &[ResultRow]) -> Vec<ConvergencePoint> {
    let mut slnr: Vec<&ResultRow> = rows.iter().filter(|r| r.precoder == PrecoderKind::Slnr).collect();
    slnr.sort_by(|a, b| {
        a.snr_db
            .total_cmp(&b.snr_db)
            .then(a.users.cmp(&b.users))
            .then(a.iteration.cmp(&b.iteration))
    });
    slnr.into_iter()
        .map(|r| ConvergencePoint {
            snr_db: r.snr_db,
            users: r.users,
            iteration: r.iteration,
            mean_sum_se: r.mean_sum_se,
            ci95: r.ci95(),
            mean_gap: r.mean_gap,
        })
        .collect()
}

fn fig4(rows: &[ResultRow]) -> Vec<PerUserPoint> {
    by_series(rows)
        .into_iter()
        .map(|r| PerUserPoint {
            snr_db: r.snr_db,
            series: r.series(),
            users: r.users,
            per_user_se: r.per_user_se,
        })
        .collect()
}

pub fn execute(args: FigureArgs) -> Outcome {
    let rows = read_results(&args.results).map_err(Failure::Usage)?;
    write_figures(&args, &rows).map_err(Failure::Runtime)
}

fn write_figures(args: &FigureArgs, rows: &[ResultRow]) -> anyhow::Result<()> {
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let wanted = |id| args.figure == id || args.figure == FigureId::All;
    if wanted(FigureId::Fig2) {
        write_rows(&args.out.join("fig2.csv"), fig2(rows))?;
    }
    if wanted(FigureId::Fig3) {
        write_rows(&args.out.join("fig3.csv"), fig3(rows))?;
    }
    if wanted(FigureId::Fig4) {
        write_rows(&args.out.join("fig4.csv"), fig4(rows))?;
    }
    Ok(())
}
