//! Clustered mmWave downlink channel on a uniform linear array.
//!
//! Each user gets one mean angle of departure drawn uniformly over the
//! configured sector, and `L` propagation paths whose angles are Laplace
//! distributed around it. Path gains are circularly-symmetric complex
//! Gaussian. Paths are drawn independently per user and per realization.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{CVector, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub num_antennas: usize,
    pub num_users: usize,
    pub num_paths: usize,
    pub path_gain_variance: f64,
    /// Standard deviation of the path angles around the user's mean angle, degrees.
    pub angular_spread_deg: f64,
    /// `[low, high]` interval of user mean angles, degrees.
    pub user_sector_deg: [f64; 2],
    /// Element spacing over carrier wavelength.
    pub element_spacing: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            num_antennas: 100,
            num_users: 10,
            num_paths: 5,
            path_gain_variance: 1.0,
            angular_spread_deg: 5.0,
            user_sector_deg: [0.0, 90.0],
            element_spacing: 0.5,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(Error::invalid("num_antennas", "must be at least 1"));
        }
        if self.num_users == 0 {
            return Err(Error::invalid("num_users", "must be at least 1"));
        }
        if self.num_paths == 0 {
            return Err(Error::invalid("num_paths", "must be at least 1"));
        }
        if !(self.path_gain_variance > 0.0 && self.path_gain_variance.is_finite()) {
            return Err(Error::invalid("path_gain_variance", "must be positive and finite"));
        }
        if !(self.angular_spread_deg > 0.0 && self.angular_spread_deg.is_finite()) {
            return Err(Error::invalid("angular_spread_deg", "must be positive and finite"));
        }
        if !(self.element_spacing > 0.0 && self.element_spacing.is_finite()) {
            return Err(Error::invalid("element_spacing", "must be positive and finite"));
        }
        let [lo, hi] = self.user_sector_deg;
        if !(0.0..=180.0).contains(&lo) || !(0.0..=180.0).contains(&hi) || lo > hi {
            return Err(Error::invalid(
                "user_sector_deg",
                format!("[{lo}, {hi}] must be an ordered interval within [0, 180]"),
            ));
        }
        Ok(())
    }

    /// Laplace scale giving the configured angular standard deviation.
    pub fn laplace_scale_deg(&self) -> f64 {
        self.angular_spread_deg / SQRT_2
    }
}

/// The `N x K` aggregate channel; column `k` is user `k`'s channel vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(DMatrix<C64>);

impl ChannelMatrix {
    pub fn from_columns(columns: &[CVector]) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(Error::invalid("num_users", "at least one user column required"));
        };
        if columns.iter().any(|c| c.len() != first.len()) {
            return Err(Error::DimensionMismatch("user channels differ in length".into()));
        }
        Ok(Self(DMatrix::from_columns(columns)))
    }

    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.ncols() == 0 || m.nrows() == 0 {
            return Err(Error::DimensionMismatch("empty channel matrix".into()));
        }
        if !crate::linalg::all_finite(&m) {
            return Err(Error::invalid("channel", "non-finite entry"));
        }
        Ok(Self(m))
    }

    pub fn num_antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.0.ncols()
    }

    pub fn user(&self, k: usize) -> CVector {
        self.0.column(k).into_owned()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }
}

/// ULA steering vector with unit Euclidean norm.
///
/// Entry `i` (0-based) is `exp(-j 2 pi spacing i cos(theta)) / sqrt(n)`.
pub fn steering_vector(theta_deg: f64, n: usize, spacing: f64) -> CVector {
    let amp = 1.0 / (n as f64).sqrt();
    let phase_step = -2.0 * PI * spacing * theta_deg.to_radians().cos();
    CVector::from_fn(n, |i, _| C64::from_polar(amp, phase_step * i as f64))
}

/// Sum of weighted steering vectors, one per `(gain, angle_deg)` path.
pub fn user_channel_from_paths(paths: &[(C64, f64)], n: usize, spacing: f64) -> CVector {
    paths
        .iter()
        .fold(CVector::zeros(n), |acc, &(gain, theta)| {
            acc + steering_vector(theta, n, spacing) * gain
        })
}

/// One `CN(0, variance)` sample.
pub fn sample_path_gain<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// One Laplace-distributed path angle around `mean_deg`.
pub fn sample_aod<R: Rng + ?Sized>(params: &ChannelParams, mean_deg: f64, rng: &mut R) -> f64 {
    // |X - mean| is exponential with mean b; the sign is a fair coin.
    let exp = Exp::new(1.0 / params.laplace_scale_deg()).expect("validated scale");
    let magnitude: f64 = exp.sample(rng);
    if rng.random::<bool>() {
        mean_deg + magnitude
    } else {
        mean_deg - magnitude
    }
}

pub fn draw_user_channel<R: Rng + ?Sized>(
    params: &ChannelParams,
    mean_aod_deg: f64,
    rng: &mut R,
) -> CVector {
    let paths: Vec<(C64, f64)> = (0..params.num_paths)
        .map(|_| {
            let theta = sample_aod(params, mean_aod_deg, rng);
            let gain = sample_path_gain(params.path_gain_variance, rng);
            (gain, theta)
        })
        .collect();
    user_channel_from_paths(&paths, params.num_antennas, params.element_spacing)
}

/// Draws a full `N x K` channel: per user a uniform mean angle over the
/// sector, then an independent [`draw_user_channel`].
pub fn draw_channel_matrix<R: Rng + ?Sized>(
    params: &ChannelParams,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    params.validate()?;
    let [lo, hi] = params.user_sector_deg;
    let columns: Vec<CVector> = (0..params.num_users)
        .map(|_| {
            let mean = lo + (hi - lo) * rng.random::<f64>();
            draw_user_channel(params, mean, rng)
        })
        .collect();
    ChannelMatrix::from_columns(&columns)
}
