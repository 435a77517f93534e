//! Seeded Monte Carlo sweeps over user count, SNR and precoder.
//!
//! Every realization draws its channel from a seed derived only from the
//! master seed, the cell's user count and SNR, and the realization index, so
//! results do not depend on sweep order or thread count. All precoders in a
//! cell see the same channels.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::channel::draw_channel_matrix;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::metrics::{LinkMetrics, MeanEstimate};
use crate::precoding::{build_precoder, Precoder, PrecoderKind};
use crate::quantization::{BussgangModel, QuantizerSpec};
use crate::{CMatrix, ChannelMatrix};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a sequence of words into a seed.
pub(crate) fn derive_seed(master_seed: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(master_seed), |acc, v| splitmix64(acc ^ v))
}

/// Seed of one realization, a pure function of its coordinates.
pub fn realization_seed(master_seed: u64, users: usize, snr_db: f64, realization: usize) -> u64 {
    derive_seed(master_seed, &[users as u64, snr_db.to_bits(), realization as u64])
}

/// Sum rate of `W` evaluated under the one-bit model built from `W` itself.
pub fn sum_rate_under_quantization(
    h: &ChannelMatrix,
    weights: &CMatrix,
    spec: &QuantizerSpec,
    noise_var: f64,
) -> Result<LinkMetrics> {
    let precoder = Precoder::new(weights.clone(), spec)?;
    let model = BussgangModel::from_precoder(weights, spec)?;
    LinkMetrics::evaluate(h, &precoder, &model, noise_var)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlnrRealization {
    /// Sum rate after `i` updates, `i = 0..=max_iterations`; entry 0 is the
    /// initializer. Past early convergence the last iterate is repeated.
    pub sum_rate_by_iteration: Vec<f64>,
    pub gaps: Vec<f64>,
    pub relative_gaps: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationOutcome {
    pub seed: u64,
    pub zf: Option<f64>,
    pub rzf: Option<f64>,
    pub slnr: Option<SlnrRealization>,
}

impl RealizationOutcome {
    pub fn sum_rate(&self, kind: PrecoderKind, iteration: usize) -> Option<f64> {
        match kind {
            PrecoderKind::Zf => self.zf,
            PrecoderKind::Rzf => self.rzf,
            PrecoderKind::Slnr => self
                .slnr
                .as_ref()
                .and_then(|s| s.sum_rate_by_iteration.get(iteration).copied()),
        }
    }
}

/// Raw per-realization results of one `(K, SNR)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub users: usize,
    pub snr_db: f64,
    pub realizations: Vec<RealizationOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub users: usize,
    pub snr_db: f64,
    pub precoder: PrecoderKind,
    /// SLNR update count; 0 for ZF and RZF.
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    pub sum_se: MeanEstimate,
    pub per_user_se: f64,
    /// Mean Frobenius gap of this SLNR update over realizations that ran it.
    pub mean_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub cells: Vec<CellResult>,
}

impl ExperimentResult {
    pub fn get(&self, users: usize, snr_db: f64, precoder: PrecoderKind, iteration: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.key.users == users
                && c.key.snr_db == snr_db
                && c.key.precoder == precoder
                && c.key.iteration == iteration
        })
    }
}

fn run_realization(
    config: &SystemConfig,
    users: usize,
    snr_db: f64,
    seed: u64,
) -> Result<RealizationOutcome> {
    let params = config.channel_params(users);
    let spec = config.quantizer_spec(snr_db);
    let noise = config.noise_variance();
    let solver = config.solver_config();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let h = draw_channel_matrix(&params, &mut rng)?;

    let mut outcome = RealizationOutcome {
        seed,
        zf: None,
        rzf: None,
        slnr: None,
    };
    for &kind in &config.sweep.precoders {
        let (precoder, trace) = build_precoder(kind, &h, &spec, noise, &solver)?;
        match (kind, trace) {
            (PrecoderKind::Slnr, Some(trace)) => {
                let sum_rate_by_iteration = (0..=solver.max_iterations)
                    .map(|i| {
                        sum_rate_under_quantization(&h, trace.iterate(i), &spec, noise)
                            .map(|m| m.sum_rate)
                    })
                    .collect::<Result<Vec<_>>>()?;
                outcome.slnr = Some(SlnrRealization {
                    sum_rate_by_iteration,
                    relative_gaps: trace.relative_gaps(),
                    gaps: trace.gaps,
                    converged: trace.converged,
                });
            }
            (kind, _) => {
                let rate = sum_rate_under_quantization(&h, &precoder.weights, &spec, noise)?.sum_rate;
                match kind {
                    PrecoderKind::Zf => outcome.zf = Some(rate),
                    _ => outcome.rzf = Some(rate),
                }
            }
        }
    }
    Ok(outcome)
}

/// Runs every realization of one `(K, SNR)` cell for all configured precoders.
pub fn run_cell(config: &SystemConfig, users: usize, snr_db: f64) -> Result<CellOutcome> {
    let realizations = (0..config.realizations)
        .into_par_iter()
        .map(|r| {
            let seed = realization_seed(config.master_seed, users, snr_db, r);
            run_realization(config, users, snr_db, seed).map_err(|e| Error::Realization {
                users,
                snr_db,
                realization: r,
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellOutcome {
        users,
        snr_db,
        realizations,
    })
}

impl CellOutcome {
    /// Aggregates into one row per precoder, and per update count for SLNR.
    pub fn aggregate(&self, precoders: &[PrecoderKind], max_iterations: usize) -> Vec<CellResult> {
        let mut rows = Vec::new();
        for &kind in precoders {
            let iterations: Vec<usize> = match kind {
                PrecoderKind::Slnr => (1..=max_iterations).collect(),
                _ => vec![0],
            };
            for iteration in iterations {
                let samples: Vec<f64> = self
                    .realizations
                    .iter()
                    .filter_map(|r| r.sum_rate(kind, iteration))
                    .collect();
                let Some(sum_se) = MeanEstimate::from_samples(&samples) else {
                    continue;
                };
                let mean_gap = (kind == PrecoderKind::Slnr)
                    .then(|| {
                        let gaps: Vec<f64> = self
                            .realizations
                            .iter()
                            .filter_map(|r| r.slnr.as_ref()?.gaps.get(iteration - 1).copied())
                            .collect();
                        MeanEstimate::from_samples(&gaps).map(|m| m.mean)
                    })
                    .flatten();
                rows.push(CellResult {
                    key: CellKey {
                        users: self.users,
                        snr_db: self.snr_db,
                        precoder: kind,
                        iteration,
                    },
                    sum_se,
                    per_user_se: sum_se.mean / self.users as f64,
                    mean_gap,
                });
            }
        }
        rows
    }
}

/// Full sweep over `user_counts x snr_db x precoders`.
pub fn run_experiment(config: &SystemConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mut result = ExperimentResult::default();
    for &users in &config.sweep.user_counts {
        for &snr_db in &config.sweep.snr_db {
            log::info!("cell K = {users}, SNR = {snr_db} dB");
            let outcome = run_cell(config, users, snr_db)?;
            result
                .cells
                .extend(outcome.aggregate(&config.sweep.precoders, config.solver.max_iterations));
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SystemConfig {
        let mut c = SystemConfig::default();
        c.channel.num_antennas = 8;
        c.sweep.user_counts = vec![2, 4];
        c.sweep.snr_db = vec![10.0, 40.0];
        c.realizations = 6;
        c
    }

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let base = realization_seed(1, 4, 10.0, 0);
        assert_ne!(base, realization_seed(2, 4, 10.0, 0));
        assert_ne!(base, realization_seed(1, 5, 10.0, 0));
        assert_ne!(base, realization_seed(1, 4, 40.0, 0));
        assert_ne!(base, realization_seed(1, 4, 10.0, 1));
        assert_eq!(base, realization_seed(1, 4, 10.0, 0));
    }

    #[test]
    fn experiment_is_reproducible() {
        let c = small_config();
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b);
        // 2 users x 2 SNRs x (ZF + RZF + 5 SLNR iterations)
        assert_eq!(a.cells.len(), 2 * 2 * 7);
        assert!(a.cells.iter().all(|c| c.sum_se.mean.is_finite() && c.sum_se.mean >= 0.0));
        assert!(a.cells.iter().all(|c| c.sum_se.count == 6));
    }

    #[test]
    fn sweep_order_does_not_change_cells() {
        let c = small_config();
        let mut swapped = c.clone();
        swapped.sweep.user_counts.reverse();
        swapped.sweep.snr_db.reverse();
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&swapped).unwrap();
        for cell in &a.cells {
            let k = cell.key;
            assert_eq!(b.get(k.users, k.snr_db, k.precoder, k.iteration), Some(cell));
        }
    }

    #[test]
    fn precoders_share_channels() {
        let mut c = small_config();
        c.sweep.precoders = vec![PrecoderKind::Zf];
        let zf_only = run_cell(&c, 4, 10.0).unwrap();
        let all = run_cell(&small_config(), 4, 10.0).unwrap();
        for (a, b) in zf_only.realizations.iter().zip(&all.realizations) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.zf, b.zf);
        }
        // SLNR starts from ZF, so iteration 0 reproduces the ZF rate.
        for r in &all.realizations {
            let (s0, zf) = (r.slnr.as_ref().unwrap().sum_rate_by_iteration[0], r.zf.unwrap());
            assert!((s0 - zf).abs() <= 1e-12 * zf.abs(), "{s0} vs {zf}");
        }
    }

    #[test]
    fn empty_precoders_rejected() {
        let mut c = small_config();
        c.sweep.precoders.clear();
        assert!(matches!(run_experiment(&c), Err(Error::NothingToSimulate(_))));
    }

    fn desk(realizations: usize) -> SystemConfig {
        let mut c = SystemConfig::default();
        c.channel.num_antennas = 16;
        c.realizations = realizations;
        c
    }

    #[test]
    fn standard_error_shrinks_with_realizations() {
        let mut c = desk(100);
        c.sweep.precoders = vec![PrecoderKind::Zf];
        let se = |c: &SystemConfig| {
            run_cell(c, 8, 10.0).unwrap().aggregate(&c.sweep.precoders, 0)[0].sum_se.stderr
        };
        let small = se(&c);
        c.realizations = 400;
        let ratio = small / se(&c);
        assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn desk_ordering_at_moderate_load() {
        let c = desk(100);
        let rows = run_cell(&c, 8, 10.0).unwrap().aggregate(&c.sweep.precoders, 5);
        let mean = |p: PrecoderKind, i: usize| {
            rows.iter().find(|r| r.key.precoder == p && r.key.iteration == i).unwrap().sum_se.mean
        };
        assert!(mean(PrecoderKind::Slnr, 5) >= mean(PrecoderKind::Rzf, 0));
        assert!(mean(PrecoderKind::Rzf, 0) >= mean(PrecoderKind::Zf, 0));
    }

    #[test]
    fn more_iterations_help_near_full_load() {
        let c = desk(100);
        let rows = run_cell(&c, 16, 10.0).unwrap().aggregate(&[PrecoderKind::Slnr], 5);
        assert!(rows[4].sum_se.mean >= rows[0].sum_se.mean);
    }

    #[test]
    fn update_gaps_mostly_shrink() {
        let c = desk(100);
        let cell = run_cell(&c, 8, 10.0).unwrap();
        let decreasing = cell
            .realizations
            .iter()
            .filter(|r| r.slnr.as_ref().unwrap().gaps.windows(2).all(|w| w[1] < w[0]))
            .count();
        assert!(decreasing >= 95, "{decreasing} of 100");
    }
}
