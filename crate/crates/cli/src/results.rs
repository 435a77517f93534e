//! The long-format results table shared by `run` and `figure`.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use slnr_core::{CellResult, PrecoderKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    #[serde(rename = "K")]
    pub users: usize,
    pub snr_db: f64,
    pub precoder: PrecoderKind,
    pub iteration: usize,
    pub mean_sum_se: f64,
    pub per_user_se: f64,
    pub stderr: f64,
    pub realizations: usize,
    pub mean_gap: Option<f64>,
}

impl From<&CellResult> for ResultRow {
    fn from(cell: &CellResult) -> Self {
        Self {
            users: cell.key.users,
            snr_db: cell.key.snr_db,
            precoder: cell.key.precoder,
            iteration: cell.key.iteration,
            mean_sum_se: cell.sum_se.mean,
            per_user_se: cell.per_user_se,
            stderr: cell.sum_se.stderr,
            realizations: cell.sum_se.count,
            mean_gap: cell.mean_gap,
        }
    }
}

impl ResultRow {
    /// Half-width of the 95% confidence interval of the mean sum SE.
    pub fn ci95(&self) -> f64 {
        1.96 * self.stderr
    }

    /// Plot series label: `ZF`, `RZF`, or `SLNR-I<n>`.
    pub fn series(&self) -> String {
        match self.precoder {
            PrecoderKind::Slnr => format!("SLNR-I{}", self.iteration),
            other => other.to_string(),
        }
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a results table; an empty table or a missing column is an error.
pub fn read_results(path: &Path) -> anyhow::Result<Vec<ResultRow>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .with_context(|| format!("reading {}", path.display()))?;
    if rows.is_empty() {
        bail!("{} holds no result rows", path.display());
    }
    Ok(rows)
}
