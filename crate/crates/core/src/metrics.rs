//! Per-user SINR and SLNR under the Bussgang model, and spectral-efficiency
//! aggregation over channel realizations.
//!
//! The quantization distortion is treated as Gaussian with covariance
//! `C_qq`, so the resulting rates are achievable lower bounds.

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::precoding::Precoder;
use crate::quantization::BussgangModel;
use crate::CMatrix;

/// Relative slack for `h_kᴴ C_qq h_k` dipping below zero by rounding.
const DISTORTION_NEG_TOL: f64 = 1e-9;

/// Composite distortion-plus-noise power `h_kᴴ C_qq h_k + σ_n²` per user.
pub fn distortion_plus_noise(
    h: &ChannelMatrix,
    c_qq: &CMatrix,
    noise_var: f64,
) -> Result<Vec<f64>> {
    let n = h.num_antennas();
    if c_qq.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "C_qq is {:?}, channel has {n} antennas",
            c_qq.shape()
        )));
    }
    let projected = c_qq * h.matrix();
    let c_norm = c_qq.norm();
    (0..h.num_users())
        .map(|k| {
            let h_k = h.matrix().column(k);
            let d = h_k.dotc(&projected.column(k)).re;
            let bound = DISTORTION_NEG_TOL * c_norm * h_k.norm_squared();
            if d < -bound {
                return Err(Error::NumericalBreakdown(format!(
                    "negative distortion power {d} for user {k}"
                )));
            }
            Ok(d.max(0.0) + noise_var)
        })
        .collect()
}

/// `G[k, i] = h_kᴴ A w_i`.
fn effective_gains(h: &ChannelMatrix, precoder: &Precoder, model: &BussgangModel) -> Result<CMatrix> {
    if precoder.weights.nrows() != h.num_antennas() || precoder.num_users() != h.num_users() {
        return Err(Error::DimensionMismatch(format!(
            "precoder {:?} vs channel {:?}",
            precoder.weights.shape(),
            h.matrix().shape()
        )));
    }
    Ok(h.matrix().adjoint() * model.apply_gain(&precoder.weights))
}

/// `SINR_k = p_k²|h_kᴴAw_k|² / (Σ_{i≠k} p_i²|h_kᴴAw_i|² + h_kᴴC_qq h_k + σ_n²)`.
pub fn sinr_per_user(
    h: &ChannelMatrix,
    precoder: &Precoder,
    model: &BussgangModel,
    noise_var: f64,
) -> Result<Vec<f64>> {
    let g = effective_gains(h, precoder, model)?;
    let floor = distortion_plus_noise(h, &model.cov_distortion, noise_var)?;
    let p2: Vec<f64> = precoder.power.iter().map(|p| p * p).collect();
    Ok((0..h.num_users())
        .map(|k| {
            let signal = p2[k] * g[(k, k)].norm_sqr();
            let interference: f64 = (0..h.num_users())
                .filter(|&i| i != k)
                .map(|i| p2[i] * g[(k, i)].norm_sqr())
                .sum();
            signal / (interference + floor[k])
        })
        .collect())
}

/// `SLNR_k = p_k²|h_kᴴAw_k|² / (Σ_{i≠k} p_k²|h_iᴴAw_k|² + h_kᴴC_qq h_k + σ_n²)`.
pub fn slnr_per_user(
    h: &ChannelMatrix,
    precoder: &Precoder,
    model: &BussgangModel,
    noise_var: f64,
) -> Result<Vec<f64>> {
    let g = effective_gains(h, precoder, model)?;
    let floor = distortion_plus_noise(h, &model.cov_distortion, noise_var)?;
    Ok((0..h.num_users())
        .map(|k| {
            let p2 = precoder.power[k] * precoder.power[k];
            let signal = p2 * g[(k, k)].norm_sqr();
            let leakage: f64 = (0..h.num_users())
                .filter(|&i| i != k)
                .map(|i| p2 * g[(i, k)].norm_sqr())
                .sum();
            signal / (leakage + floor[k])
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub per_user_sinr: Vec<f64>,
    /// `log2(1 + SINR_k)` in bits/s/Hz.
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
}

impl LinkMetrics {
    pub fn from_sinr(per_user_sinr: Vec<f64>) -> Self {
        let per_user_rate: Vec<f64> = per_user_sinr.iter().map(|s| (1.0 + s).log2()).collect();
        let sum_rate = per_user_rate.iter().sum();
        Self {
            per_user_sinr,
            per_user_rate,
            sum_rate,
        }
    }

    pub fn evaluate(
        h: &ChannelMatrix,
        precoder: &Precoder,
        model: &BussgangModel,
        noise_var: f64,
    ) -> Result<Self> {
        Ok(Self::from_sinr(sinr_per_user(h, precoder, model, noise_var)?))
    }

    pub fn num_users(&self) -> usize {
        self.per_user_sinr.len()
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    /// `s / sqrt(n)` with the unbiased sample deviation; zero when `n = 1`.
    pub stderr: f64,
    pub count: usize,
}

impl MeanEstimate {
    /// Samples are summed in order, so equal inputs give bit-equal output.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        let n = samples.len();
        if n == 0 {
            return None;
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            stderr,
            count: n,
        })
    }

    /// Half-width of the normal-approximation 95% confidence interval.
    pub fn ci95(&self) -> f64 {
        1.96 * self.stderr
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEfficiency {
    pub sum_se: MeanEstimate,
    pub per_user_se: f64,
}

/// Ergodic sum spectral efficiency over realizations of the same user count.
pub fn spectral_efficiency(realizations: &[LinkMetrics]) -> Result<SpectralEfficiency> {
    let first = realizations
        .first()
        .ok_or(Error::NothingToSimulate("no realizations"))?;
    let k = first.num_users();
    if realizations.iter().any(|m| m.num_users() != k) {
        return Err(Error::DimensionMismatch("realizations differ in user count".into()));
    }
    let sums: Vec<f64> = realizations.iter().map(|m| m.sum_rate).collect();
    let sum_se = MeanEstimate::from_samples(&sums).expect("non-empty");
    Ok(SpectralEfficiency {
        sum_se,
        per_user_se: sum_se.mean / k as f64,
    })
}
