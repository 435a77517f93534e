//! Independent numerical oracles for the quantizer model and the precoders.
//!
//! The sampling checks push Gaussian data through the exact one-bit quantizer
//! and compare sample covariances with the closed-form model. The remaining
//! checks compare closed-form precoders against brute-force evaluations.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::precoding::{power_allocation, rzf_precoder, slnr_precoder_column, zf_precoder};
use crate::quantization::{one_bit, BussgangModel, QuantizerSpec};
use crate::simulation::derive_seed;
use crate::{CMatrix, CVector, ChannelMatrix, C64};

/// Random precoders per sampling check.
pub const SAMPLING_INSTANCES: usize = 20;
/// Random instances for the closed-form precoder checks.
pub const PRECODER_INSTANCES: usize = 50;
/// Random perturbations per user in the maximality check.
pub const PERTURBATIONS: usize = 100;

const BATCH: usize = 4096;

/// Sample budget of the oracle suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationLevel {
    /// 10⁵ samples per precoder, sampling thresholds relaxed threefold.
    Quick,
    /// 10⁶ samples per precoder.
    Full,
}

impl ValidationLevel {
    pub fn samples(self) -> usize {
        match self {
            Self::Quick => 100_000,
            Self::Full => 1_000_000,
        }
    }

    /// Multiplier on the thresholds of the sampling checks.
    pub fn threshold_scale(self) -> f64 {
        match self {
            Self::Quick => 3.0,
            Self::Full => 1.0,
        }
    }
}

impl FromStr for ValidationLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Self::Quick),
            "full" => Ok(Self::Full),
            other => Err(Error::invalid("level", format!("unknown level {other:?}"))),
        }
    }
}

impl fmt::Display for ValidationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Quick => "quick",
            Self::Full => "full",
        })
    }
}

/// Result of one check: the worst value over all instances against its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn below(name: &'static str, measured: f64, threshold: f64) -> Self {
        Self {
            name,
            measured,
            threshold,
            passed: measured < threshold,
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {:.3e}, threshold {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

fn relative(diff: &CMatrix, reference: &CMatrix) -> f64 {
    diff.norm() / reference.norm()
}

/// Sample second moments of `x = W P s` and `Q(x)` for `s ~ CN(0, σ_s² I)`.
#[derive(Debug, Clone)]
pub struct SampleMoments {
    /// `Ê{x xᴴ}`
    pub xx: CMatrix,
    /// `Ê{Q(x) xᴴ}`
    pub qx: CMatrix,
    /// `Ê{Q(x) Q(x)ᴴ}`
    pub qq: CMatrix,
}

/// Estimates [`SampleMoments`] from `samples` draws, accumulated in batches.
pub fn sample_moments<R: Rng + ?Sized>(
    w: &CMatrix,
    spec: &QuantizerSpec,
    samples: usize,
    rng: &mut R,
) -> Result<SampleMoments> {
    let (n, k) = w.shape();
    let power = power_allocation(w, spec)?;
    let mut effective = w.clone();
    for (j, mut col) in effective.column_iter_mut().enumerate() {
        col *= C64::from(power[j] * spec.symbol_variance.sqrt());
    }
    // Rows are samples, so each accumulator holds the transpose of its moment.
    let effective_t = effective.transpose();
    let mut xx = CMatrix::zeros(n, n);
    let mut qx = CMatrix::zeros(n, n);
    let mut qq = CMatrix::zeros(n, n);
    let one = C64::from(1.0);
    let mut remaining = samples;
    while remaining > 0 {
        let b = remaining.min(BATCH);
        let s_t = random_matrix(b, k, rng);
        let x_t = &s_t * &effective_t;
        let q_t = x_t.map(one_bit);
        xx.gemm_ad(one, &x_t, &x_t, one);
        qx.gemm_ad(one, &x_t, &q_t, one);
        qq.gemm_ad(one, &q_t, &q_t, one);
        remaining -= b;
    }
    let scale = C64::from(1.0 / samples as f64);
    Ok(SampleMoments {
        xx: xx.transpose() * scale,
        qx: qx.transpose() * scale,
        qq: qq.transpose() * scale,
    })
}

/// Residuals of one random precoder against its sampled moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingResiduals {
    /// `‖A C_xx − Ĉ_xqx‖ / ‖Ĉ_xqx‖`
    pub cross_correlation: f64,
    /// `‖Ĉ_xqxq − C_xqxq‖ / ‖C_xqxq‖`
    pub quantized_covariance: f64,
    /// `‖Ĉ_qq − C_qq‖ / ‖C_qq‖` with `q = Q(x) − A x`
    pub distortion_covariance: f64,
    /// `‖Ê{q xᴴ}‖ / ‖C_xx‖`
    pub orthogonality: f64,
}

pub fn sampling_residuals(
    w: &CMatrix,
    spec: &QuantizerSpec,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<SamplingResiduals> {
    let model = BussgangModel::from_precoder(w, spec)?;
    let m = sample_moments(w, spec, samples, rng)?;
    let a_cxx = model.apply_gain(&model.cov_unquantized);
    let a_sxx = model.apply_gain(&m.xx);
    let dx = &m.qx - &a_sxx;
    let qx_a = model.apply_gain(&m.qx.adjoint()).adjoint();
    let dd = &m.qq - &qx_a - qx_a.adjoint() + model.apply_gain(&a_sxx.adjoint()).adjoint();
    Ok(SamplingResiduals {
        cross_correlation: relative(&(&a_cxx - &m.qx), &m.qx),
        quantized_covariance: relative(&(&m.qq - &model.cov_quantized), &model.cov_quantized),
        distortion_covariance: relative(&(&dd - &model.cov_distortion), &model.cov_distortion),
        orthogonality: dx.norm() / model.cov_unquantized.norm(),
    })
}

/// Generalized Rayleigh quotient of direction `w` for user `k`, evaluated
/// term by term: `|h_kᴴ A w|² / (Σ_{i≠k} |h_iᴴ A w|² + c_k ‖w‖²)`.
pub fn slnr_quotient(
    h: &ChannelMatrix,
    k: usize,
    w: &CVector,
    model: &BussgangModel,
    spec: &QuantizerSpec,
    noise_var: f64,
) -> f64 {
    let aw = w.component_mul(&model.gain.map(C64::from));
    let gain = |i: usize| h.user(i).dotc(&aw).norm_sqr();
    let leakage: f64 = (0..h.num_users()).filter(|&i| i != k).map(gain).sum();
    let h_k = h.user(k);
    let distortion = h_k.dotc(&(&model.cov_distortion * &h_k)).re;
    let users = h.num_users() as f64;
    let c_k = users * spec.symbol_variance / spec.total_tx_power * (distortion + noise_var);
    gain(k) / (leakage + c_k * w.norm_squared())
}

struct Instance {
    h: ChannelMatrix,
    spec: QuantizerSpec,
    rng: ChaCha12Rng,
}

fn instance(seed: u64, tag: u64, index: usize) -> Result<Instance> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[tag, index as u64]));
    let n = rng.random_range(4..=16);
    let k = rng.random_range(2..=8.min(n));
    let h = ChannelMatrix::from_matrix(random_matrix(n, k, &mut rng))?;
    let snr_db: f64 = rng.random_range(0.0..30.0);
    let spec = QuantizerSpec::new(1.0, 10f64.powf(snr_db / 10.0))?;
    Ok(Instance { h, spec, rng })
}

/// Largest sampling residuals over [`SAMPLING_INSTANCES`] random precoders.
/// Transmit power is set to `N` so each antenna carries unit power on average.
pub fn worst_sampling_residuals(level: ValidationLevel, seed: u64) -> Result<SamplingResiduals> {
    let all = (0..SAMPLING_INSTANCES)
        .into_par_iter()
        .map(|i| {
            let mut inst = instance(seed, 1, i)?;
            let spec = QuantizerSpec::new(1.0, inst.h.num_antennas() as f64)?;
            let w = inst.h.matrix().clone();
            sampling_residuals(&w, &spec, level.samples(), &mut inst.rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = |f: fn(&SamplingResiduals) -> f64| all.iter().map(f).fold(0.0, f64::max);
    Ok(SamplingResiduals {
        cross_correlation: worst(|r| r.cross_correlation),
        quantized_covariance: worst(|r| r.quantized_covariance),
        distortion_covariance: worst(|r| r.distortion_covariance),
        orthogonality: worst(|r| r.orthogonality),
    })
}

/// Largest relative gap between the SLNR column with an ideal quantizer and
/// the matching regularized zero-forcing column.
pub fn rzf_reduction_residual(seed: u64) -> Result<f64> {
    let mut worst = 0.0_f64;
    for i in 0..PRECODER_INSTANCES {
        let inst = instance(seed, 2, i)?;
        let noise_var = 1.0;
        let rzf = rzf_precoder(&inst.h, &inst.spec, noise_var)?;
        let ideal = BussgangModel::ideal(inst.h.num_antennas());
        for k in 0..inst.h.num_users() {
            let w = slnr_precoder_column(&inst.h, k, &ideal, &inst.spec, noise_var)?;
            let reference = rzf.column(k);
            worst = worst.max((&w - &reference).norm() / reference.norm());
        }
    }
    Ok(worst)
}

/// Number of random perturbations whose quotient beats the closed-form column.
pub fn rayleigh_violations(seed: u64) -> Result<usize> {
    let mut violations = 0;
    for i in 0..PRECODER_INSTANCES {
        let mut inst = instance(seed, 3, i)?;
        let (n, k) = (inst.h.num_antennas(), inst.h.num_users());
        // A generic precoder gives a non-diagonal distortion covariance.
        let model = BussgangModel::from_precoder(&random_matrix(n, k, &mut inst.rng), &inst.spec)?;
        let noise_var = 1.0;
        for user in 0..k {
            let w = slnr_precoder_column(&inst.h, user, &model, &inst.spec, noise_var)?;
            let w = &w / C64::from(w.norm());
            let best = slnr_quotient(&inst.h, user, &w, &model, &inst.spec, noise_var);
            for _ in 0..PERTURBATIONS {
                let u = CVector::from_fn(n, |_, _| complex_normal(&mut inst.rng));
                let step = 10f64.powf(inst.rng.random_range(-3.0..0.0));
                let candidate = &w + &u * C64::from(step / u.norm());
                let q = slnr_quotient(&inst.h, user, &candidate, &model, &inst.spec, noise_var);
                if q > best {
                    violations += 1;
                }
            }
        }
    }
    Ok(violations)
}

/// Largest `‖Hᴴ W_ZF − I‖_F` over random well-conditioned channels.
pub fn zf_identity_residual(seed: u64) -> Result<f64> {
    let mut worst = 0.0_f64;
    for i in 0..PRECODER_INSTANCES {
        let inst = instance(seed, 4, i)?;
        let w = zf_precoder(&inst.h)?;
        let k = inst.h.num_users();
        let residual = inst.h.matrix().adjoint() * w - CMatrix::identity(k, k);
        worst = worst.max(residual.norm());
    }
    Ok(worst)
}

/// Runs every oracle and reports one outcome per check.
pub fn run_validation(level: ValidationLevel, seed: u64) -> Result<Vec<CheckOutcome>> {
    let scale = level.threshold_scale();
    let sampled = worst_sampling_residuals(level, seed)?;
    Ok(vec![
        CheckOutcome::below("bussgang cross-correlation", sampled.cross_correlation, 0.01 * scale),
        CheckOutcome::below("arcsin law covariance", sampled.quantized_covariance, 0.01 * scale),
        CheckOutcome::below("distortion covariance", sampled.distortion_covariance, 0.02 * scale),
        CheckOutcome::below("distortion orthogonality", sampled.orthogonality, 0.01 * scale),
        CheckOutcome::below("rzf reduction", rzf_reduction_residual(seed)?, 1e-10),
        CheckOutcome::below("rayleigh quotient maximality", rayleigh_violations(seed)? as f64, 0.5),
        CheckOutcome::below("zero-forcing identity", zf_identity_residual(seed)?, 1e-10),
    ])
}
