//! One-bit quantizer and its Bussgang linearization.
//!
//! For Gaussian precoded data `x = W P s`, the quantizer output is written as
//! `Q(x) = A x + q` with `A` real diagonal and `q` uncorrelated with `x`.
//! All second-order statistics follow in closed form from the normalized
//! projector `W [diag(Wᴴ W)]⁻¹ Wᴴ`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_PI};

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::{CMatrix, CVector, C64};

/// Entries of the normalized correlation allowed to exceed one by rounding.
pub const CORRELATION_CLAMP_TOL: f64 = 1e-9;
/// Relative eigenvalue slack when checking that `C_qq` is positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizerSpec {
    /// Per-user symbol variance `E|s_k|^2`.
    pub symbol_variance: f64,
    /// Total transmit power.
    pub total_tx_power: f64,
}

impl QuantizerSpec {
    pub fn new(symbol_variance: f64, total_tx_power: f64) -> Result<Self> {
        let spec = Self {
            symbol_variance,
            total_tx_power,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_variance > 0.0 && self.symbol_variance.is_finite()) {
            return Err(Error::invalid("symbol_variance", "must be positive and finite"));
        }
        if !(self.total_tx_power > 0.0 && self.total_tx_power.is_finite()) {
            return Err(Error::invalid("total_tx_power", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Sign of a real component with `sign(0) = +1`.
#[inline]
fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Quantizes one complex sample to `(±1 ± j) / sqrt(2)`.
#[inline]
pub fn one_bit(z: C64) -> C64 {
    C64::new(FRAC_1_SQRT_2 * sign(z.re), FRAC_1_SQRT_2 * sign(z.im))
}

pub fn one_bit_quantize(x: &CVector) -> CVector {
    x.map(one_bit)
}

/// `W [diag(Wᴴ W)]⁻¹ Wᴴ`, rejecting only zero columns.
///
/// The expression needs no inverse of `Wᴴ W`; regularized precoders on a
/// numerically rank-deficient channel still get a well-defined model.
pub fn normalized_projector(w: &CMatrix) -> Result<CMatrix> {
    let norms = linalg::column_norms_sqr(w);
    if let Some(column) = norms.iter().position(|&n| !(n > 0.0) || !n.is_finite()) {
        return Err(Error::DegeneratePrecoderColumn { column });
    }
    let mut normalized = w.clone();
    for (mut col, n) in normalized.column_iter_mut().zip(&norms) {
        col /= C64::from(n.sqrt());
    }
    Ok(&normalized * normalized.adjoint())
}

/// Rejects precoders whose columns are (numerically) linearly dependent.
pub fn check_full_column_rank(w: &CMatrix) -> Result<()> {
    let norms = linalg::column_norms_sqr(w);
    if let Some(column) = norms.iter().position(|&n| !(n > 0.0) || !n.is_finite()) {
        return Err(Error::DegeneratePrecoderColumn { column });
    }
    let mut normalized = w.clone();
    for (mut col, n) in normalized.column_iter_mut().zip(&norms) {
        col /= C64::from(n.sqrt());
    }
    if w.ncols() > w.nrows() || linalg::cholesky_checked(normalized.adjoint() * &normalized).is_none() {
        return Err(Error::DependentPrecoderColumns);
    }
    Ok(())
}

/// Covariance of the unquantized precoded data,
/// `C_xx = (P_TX / K) W [diag(Wᴴ W)]⁻¹ Wᴴ`, for a full-column-rank `W`.
pub fn autocorr_unquantized(w: &CMatrix, spec: &QuantizerSpec) -> Result<CMatrix> {
    check_full_column_rank(w)?;
    model_covariance(w, spec)
}

/// Same as [`autocorr_unquantized`] without the rank requirement.
fn model_covariance(w: &CMatrix, spec: &QuantizerSpec) -> Result<CMatrix> {
    let k = w.ncols() as f64;
    Ok(normalized_projector(w)? * C64::from(spec.total_tx_power / k))
}

/// Diagonal of the Bussgang gain, `A = sqrt(2/pi) [diag(C_xx)]^(-1/2)`.
pub fn bussgang_gain_from_cov(c_xx: &CMatrix) -> Result<DVector<f64>> {
    // Each diagonal entry is a sum of squares, so only an antenna that
    // receives nothing at all lands exactly on zero.
    let diag: Vec<f64> = c_xx.diagonal().iter().map(|z| z.re).collect();
    if let Some(antenna) = diag.iter().position(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::SilentAntenna { antenna });
    }
    let gain = FRAC_2_PI.sqrt();
    Ok(DVector::from_iterator(
        diag.len(),
        diag.iter().map(|d| gain / d.sqrt()),
    ))
}

/// Bussgang gain of the quantizer fed by precoder `W`; invariant to scaling of `W`.
pub fn bussgang_gain(w: &CMatrix, spec: &QuantizerSpec) -> Result<DVector<f64>> {
    bussgang_gain_from_cov(&model_covariance(w, spec)?)
}

fn clamp_correlation(v: f64, row: usize, col: usize) -> Result<f64> {
    if !v.is_finite() || v.abs() > 1.0 + CORRELATION_CLAMP_TOL {
        return Err(Error::InvalidCorrelation { row, col, value: v });
    }
    Ok(v.clamp(-1.0, 1.0))
}

/// Covariance of the quantized data via the arcsin law. The real and
/// imaginary parts of the normalized correlation are mapped separately.
pub fn arcsin_law(c_xx: &CMatrix) -> Result<CMatrix> {
    let n = c_xx.nrows();
    if c_xx.ncols() != n {
        return Err(Error::DimensionMismatch("C_xx must be square".into()));
    }
    let inv_sd: Vec<f64> = c_xx
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            if z.re > 0.0 && z.re.is_finite() {
                Ok(1.0 / z.re.sqrt())
            } else {
                Err(Error::SilentAntenna { antenna: i })
            }
        })
        .collect::<Result<_>>()?;

    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = C64::new(1.0, 0.0);
        for j in (i + 1)..n {
            let rho = c_xx[(i, j)] * (inv_sd[i] * inv_sd[j]);
            let re = clamp_correlation(rho.re, i, j)?.asin();
            let im = clamp_correlation(rho.im, i, j)?.asin();
            let v = C64::new(FRAC_2_PI * re, FRAC_2_PI * im);
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    Ok(out)
}

/// `C_qq = C_xqxq - A C_xx Aᴴ` for real diagonal `A`.
pub fn distortion_covariance(
    gain: &DVector<f64>,
    c_xx: &CMatrix,
    c_xqxq: &CMatrix,
) -> Result<CMatrix> {
    let n = gain.len();
    if c_xx.shape() != (n, n) || c_xqxq.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "gain has {n} entries, C_xx is {:?}, C_xqxq is {:?}",
            c_xx.shape(),
            c_xqxq.shape()
        )));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        c_xqxq[(i, j)] - c_xx[(i, j)] * (gain[i] * gain[j])
    }))
}

/// Linear model of the one-bit quantizer for a given precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct BussgangModel {
    /// Diagonal of the real weight matrix `A`.
    pub gain: DVector<f64>,
    pub cov_unquantized: CMatrix,
    pub cov_quantized: CMatrix,
    pub cov_distortion: CMatrix,
}

impl BussgangModel {
    /// Builds the model for any precoder without zero columns. Use
    /// [`check_full_column_rank`] first where rank matters.
    pub fn from_precoder(w: &CMatrix, spec: &QuantizerSpec) -> Result<Self> {
        let cov_unquantized = model_covariance(w, spec)?;
        let gain = bussgang_gain_from_cov(&cov_unquantized)?;
        let cov_quantized = arcsin_law(&cov_unquantized)?;
        let cov_distortion = distortion_covariance(&gain, &cov_unquantized, &cov_quantized)?;
        Ok(Self {
            gain,
            cov_unquantized,
            cov_quantized,
            cov_distortion,
        })
    }

    /// Infinite-resolution front end: `A = I`, `C_qq = 0`. The unquantized and
    /// quantized covariances are left at zero since nothing reads them.
    pub fn ideal(num_antennas: usize) -> Self {
        Self {
            gain: DVector::from_element(num_antennas, 1.0),
            cov_unquantized: CMatrix::zeros(num_antennas, num_antennas),
            cov_quantized: CMatrix::zeros(num_antennas, num_antennas),
            cov_distortion: CMatrix::zeros(num_antennas, num_antennas),
        }
    }

    pub fn num_antennas(&self) -> usize {
        self.gain.len()
    }

    /// `A` as a dense matrix.
    pub fn weight_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&self.gain.map(C64::from))
    }

    /// Row-scales `m` by `A` (`A m`); `A` is real diagonal so `Aᴴ m` is the same.
    pub fn apply_gain(&self, m: &CMatrix) -> CMatrix {
        let mut out = m.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= C64::from(self.gain[i]);
        }
        out
    }

    /// Smallest eigenvalue of `C_qq` over its largest absolute eigenvalue.
    pub fn distortion_min_eigen_ratio(&self) -> f64 {
        let eig = SymmetricEigen::new(self.cov_distortion.clone());
        let max = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            0.0
        } else {
            min / max
        }
    }

    /// Checks the structural invariants of the model.
    pub fn check_invariants(&self) -> Result<()> {
        if self.gain.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::NumericalBreakdown("non-positive Bussgang gain".into()));
        }
        for (name, m) in [
            ("C_xx", &self.cov_unquantized),
            ("C_xqxq", &self.cov_quantized),
            ("C_qq", &self.cov_distortion),
        ] {
            if linalg::hermitian_defect(m) > 1e-12 {
                return Err(Error::NumericalBreakdown(format!("{name} not Hermitian")));
            }
        }
        if self.cov_quantized.diagonal().iter().any(|d| *d != C64::new(1.0, 0.0)) {
            return Err(Error::NumericalBreakdown("diag(C_xqxq) != 1".into()));
        }
        if self.distortion_min_eigen_ratio() < -PSD_TOL {
            return Err(Error::NumericalBreakdown("C_qq indefinite".into()));
        }
        Ok(())
    }
}
