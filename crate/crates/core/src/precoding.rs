//! Linear downlink precoders: zero-forcing, regularized zero-forcing, and the
//! leakage-based (SLNR) precoder that accounts for one-bit quantization.
//!
//! The SLNR precoder depends on the Bussgang model of its own output, so it
//! is computed as a fixed point: freeze the model of the current `W`, solve
//! every column in closed form, repeat.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::distortion_plus_noise;
use crate::quantization::{BussgangModel, QuantizerSpec};
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderKind {
    Zf,
    Rzf,
    Slnr,
}

impl PrecoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PrecoderKind::Zf => "ZF",
            PrecoderKind::Rzf => "RZF",
            PrecoderKind::Slnr => "SLNR",
        }
    }
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zf" => Ok(PrecoderKind::Zf),
            "rzf" => Ok(PrecoderKind::Rzf),
            "slnr" => Ok(PrecoderKind::Slnr),
            other => Err(Error::invalid("precoder", format!("unknown precoder `{other}`"))),
        }
    }
}

/// Precoding matrix `W` together with the equal-power allocation `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub weights: CMatrix,
    /// Diagonal of `P`.
    pub power: DVector<f64>,
}

impl Precoder {
    /// Wraps `W` and attaches the equal-power allocation.
    pub fn new(weights: CMatrix, spec: &QuantizerSpec) -> Result<Self> {
        let power = power_allocation(&weights, spec)?;
        Ok(Self { weights, power })
    }

    pub fn num_users(&self) -> usize {
        self.weights.ncols()
    }

    /// `W P`.
    pub fn effective(&self) -> CMatrix {
        let mut wp = self.weights.clone();
        for (k, mut col) in wp.column_iter_mut().enumerate() {
            col *= C64::from(self.power[k]);
        }
        wp
    }
}

/// `W = H (Hᴴ H)⁻¹`, evaluated as `Q R⁻ᴴ` from a thin QR of `H` so that
/// poorly conditioned channels do not have their conditioning squared.
///
/// Only exact singularity (or `K > N`) is an error; an ill-conditioned channel
/// yields a finite, large-norm precoder.
pub fn zf_precoder(h: &ChannelMatrix) -> Result<CMatrix> {
    let (n, k) = h.matrix().shape();
    if k > n {
        return Err(Error::RankDeficientChannel);
    }
    let qr = h.matrix().clone().qr();
    let r = qr.r();
    if r.diagonal().iter().any(|d| d.norm() == 0.0) {
        return Err(Error::RankDeficientChannel);
    }
    let r_inv = r
        .solve_upper_triangular(&CMatrix::identity(k, k))
        .ok_or(Error::RankDeficientChannel)?;
    let w = qr.q() * r_inv.adjoint();
    if !linalg::all_finite(&w) {
        return Err(Error::RankDeficientChannel);
    }
    Ok(w)
}

/// `W = (H Hᴴ + (K σ_s² σ_n² / P_TX) I)⁻¹ H`, one factorization for all users.
pub fn rzf_precoder(h: &ChannelMatrix, spec: &QuantizerSpec, noise_var: f64) -> Result<CMatrix> {
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::invalid("noise_variance", "must be finite and non-negative"));
    }
    let k = h.num_users() as f64;
    let h = h.matrix();
    let reg = k * spec.symbol_variance * noise_var / spec.total_tx_power;
    let mut system = h * h.adjoint();
    for i in 0..system.nrows() {
        system[(i, i)] += C64::from(reg);
    }
    let chol = linalg::cholesky_checked(system)
        .ok_or_else(|| Error::NumericalBreakdown("RZF system not positive definite".into()))?;
    Ok(chol.solve(h))
}

/// `P = sqrt(P_TX / (K σ_s²)) [diag(Wᴴ W)]^(-1/2)`.
pub fn power_allocation(w: &CMatrix, spec: &QuantizerSpec) -> Result<DVector<f64>> {
    let k = w.ncols() as f64;
    let scale = (spec.total_tx_power / (k * spec.symbol_variance)).sqrt();
    let norms = linalg::column_norms_sqr(w);
    if let Some(column) = norms.iter().position(|&n| !(n > 0.0) || !n.is_finite()) {
        return Err(Error::DegeneratePrecoderColumn { column });
    }
    Ok(DVector::from_iterator(
        norms.len(),
        norms.iter().map(|n| scale / n.sqrt()),
    ))
}

/// The per-user closed-form SLNR system for a frozen Bussgang model:
/// `(A H Hᴴ A + c_k I)⁻¹ A h_k` with `c_k = (K σ_s² / P_TX)(h_kᴴ C_qq h_k + σ_n²)`.
///
/// It is solved as `A⁻¹ (H Hᴴ + c_k A⁻²)⁻¹ h_k`. The two are equal, but the
/// second stays well conditioned when an antenna carrying almost no power
/// receives a very large gain.
struct SlnrSystem<'a> {
    channel: &'a ChannelMatrix,
    gram: CMatrix,
    inverse_gain_sqr: Vec<f64>,
    gain: Vec<f64>,
    regularizers: Vec<f64>,
}

impl<'a> SlnrSystem<'a> {
    fn new(
        h: &'a ChannelMatrix,
        model: &BussgangModel,
        spec: &QuantizerSpec,
        noise_var: f64,
    ) -> Result<Self> {
        if model.num_antennas() != h.num_antennas() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} antennas, channel has {}",
                model.num_antennas(),
                h.num_antennas()
            )));
        }
        if let Some(antenna) = model.gain.iter().position(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::SilentAntenna { antenna });
        }
        let k = h.num_users() as f64;
        let gram = h.matrix() * h.matrix().adjoint();
        let factor = k * spec.symbol_variance / spec.total_tx_power;
        let regularizers = distortion_plus_noise(h, &model.cov_distortion, noise_var)?
            .into_iter()
            .map(|s| factor * s)
            .collect();
        Ok(Self {
            channel: h,
            gram,
            inverse_gain_sqr: model.gain.iter().map(|a| 1.0 / (a * a)).collect(),
            gain: model.gain.iter().copied().collect(),
            regularizers,
        })
    }

    fn solve_column(&self, k: usize) -> Result<CVector> {
        let h_k = self.channel.user(k);
        if h_k.iter().all(|z| *z == C64::from(0.0)) {
            return Err(Error::NumericalBreakdown(format!("user {k} has a zero channel")));
        }
        let mut system = self.gram.clone();
        for (i, d) in self.inverse_gain_sqr.iter().enumerate() {
            system[(i, i)] += C64::from(self.regularizers[k] * d);
        }
        let chol = linalg::cholesky_checked(system).ok_or_else(|| {
            Error::NumericalBreakdown(format!("SLNR system for user {k} not positive definite"))
        })?;
        let mut w = chol.solve(&h_k);
        for (wi, a) in w.iter_mut().zip(&self.gain) {
            *wi /= a;
        }
        Ok(w)
    }
}

/// Closed-form SLNR-maximizing direction for user `k` under a fixed model.
/// The column is returned unnormalized; [`power_allocation`] absorbs scale.
pub fn slnr_precoder_column(
    h: &ChannelMatrix,
    k: usize,
    model: &BussgangModel,
    spec: &QuantizerSpec,
    noise_var: f64,
) -> Result<CVector> {
    if k >= h.num_users() {
        return Err(Error::invalid("user", format!("index {k} out of range")));
    }
    SlnrSystem::new(h, model, spec, noise_var)?.solve_column(k)
}

/// One sweep of the fixed-point map: every column is recomputed from the same
/// frozen model.
pub fn slnr_update(
    h: &ChannelMatrix,
    model: &BussgangModel,
    spec: &QuantizerSpec,
    noise_var: f64,
) -> Result<CMatrix> {
    let system = SlnrSystem::new(h, model, spec, noise_var)?;
    let columns = (0..h.num_users())
        .map(|k| system.solve_column(k))
        .collect::<Result<Vec<_>>>()?;
    Ok(CMatrix::from_columns(&columns))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initializer {
    Zf,
    Rzf,
    Provided(CMatrix),
}

/// Stopping threshold on `‖W_{i+1} - W_i‖_F`, with iterates column-normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    /// Multiple of `‖W₁‖_F = sqrt(K)` for the column-normalized initializer.
    RelativeToInitial(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlnrSolverConfig {
    pub max_iterations: usize,
    pub tolerance: Tolerance,
    pub initializer: Initializer,
    /// Step length `mu` in `W <- normalize((1 - mu) W + mu f(W))`; `1.0` is
    /// the plain fixed-point update.
    pub relaxation: f64,
}

impl Default for SlnrSolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            tolerance: Tolerance::RelativeToInitial(1e-3),
            initializer: Initializer::Zf,
            relaxation: 1.0,
        }
    }
}

impl SlnrSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations", "must be at least 1"));
        }
        let eps = match self.tolerance {
            Tolerance::Absolute(e) | Tolerance::RelativeToInitial(e) => e,
        };
        if !(eps > 0.0) {
            return Err(Error::invalid("tolerance", "must be positive"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::invalid("relaxation", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    /// `‖W_{i+1} - W_i‖_F` for every update performed.
    pub gaps: Vec<f64>,
    /// Column-normalized precoder after each update; `iterates[i]` follows `gaps[i]`.
    pub iterates: Vec<CMatrix>,
    /// Column-normalized initializer.
    pub initial: CMatrix,
    /// Resolved absolute tolerance.
    pub tolerance: f64,
    pub converged: bool,
}

impl ConvergenceTrace {
    pub fn iterations_used(&self) -> usize {
        self.gaps.len()
    }

    /// `W` after `i` updates, holding the last iterate past early stopping.
    pub fn iterate(&self, i: usize) -> &CMatrix {
        if i == 0 || self.iterates.is_empty() {
            &self.initial
        } else {
            &self.iterates[i.min(self.iterates.len()) - 1]
        }
    }

    /// Gaps divided by `‖W‖_F = sqrt(K)`.
    pub fn relative_gaps(&self) -> Vec<f64> {
        let scale = (self.initial.ncols() as f64).sqrt();
        self.gaps.iter().map(|g| g / scale).collect()
    }
}

/// Scales every column to unit norm.
pub fn normalize_columns(w: &CMatrix) -> Result<CMatrix> {
    let mut out = w.clone();
    for (k, mut col) in out.column_iter_mut().enumerate() {
        let n = col.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegeneratePrecoderColumn { column: k });
        }
        col /= C64::from(n);
    }
    Ok(out)
}

/// Fixed-point SLNR precoder.
///
/// Starting from the initializer `W₁` (with `W₀ = 0`), updates run while the
/// last Frobenius gap exceeds the tolerance, at most `max_iterations` times.
/// Each update freezes the Bussgang model of the current `W` and recomputes
/// all columns from it. Iterates are kept column-normalized: the model and
/// the leakage ratio only see column directions, and this keeps gaps
/// comparable between the initializer and later iterates.
pub fn slnr_precoder(
    h: &ChannelMatrix,
    spec: &QuantizerSpec,
    noise_var: f64,
    solver: &SlnrSolverConfig,
) -> Result<(Precoder, ConvergenceTrace)> {
    solver.validate()?;
    let initial = match &solver.initializer {
        Initializer::Zf => zf_precoder(h)?,
        Initializer::Rzf => rzf_precoder(h, spec, noise_var)?,
        Initializer::Provided(w) => {
            if w.shape() != h.matrix().shape() {
                return Err(Error::DimensionMismatch(format!(
                    "initial precoder is {:?}, channel is {:?}",
                    w.shape(),
                    h.matrix().shape()
                )));
            }
            w.clone()
        }
    };
    let initial = normalize_columns(&initial)?;
    let tolerance = match solver.tolerance {
        Tolerance::Absolute(e) => e,
        Tolerance::RelativeToInitial(r) => r * initial.norm(),
    };
    let mu = C64::from(solver.relaxation);

    let mut trace = ConvergenceTrace {
        initial: initial.clone(),
        tolerance,
        ..Default::default()
    };
    let mut current = initial;
    let mut gap = current.norm();
    while gap > tolerance && trace.gaps.len() < solver.max_iterations {
        let model = BussgangModel::from_precoder(&current, spec)?;
        let update = slnr_update(h, &model, spec, noise_var)?;
        let diverged = || Error::Divergence {
            iteration: trace.gaps.len() + 1,
        };
        if !linalg::all_finite(&update) {
            return Err(diverged());
        }
        let mut next = normalize_columns(&update).map_err(|_| diverged())?;
        if solver.relaxation < 1.0 {
            next = normalize_columns(&(&current * (C64::from(1.0) - mu) + next * mu))
                .map_err(|_| diverged())?;
        }
        gap = (&next - &current).norm();
        trace.gaps.push(gap);
        trace.iterates.push(next.clone());
        current = next;
    }
    trace.converged = gap <= tolerance;
    Ok((Precoder::new(current, spec)?, trace))
}

/// Builds the requested precoder; SLNR also returns its trace.
pub fn build_precoder(
    kind: PrecoderKind,
    h: &ChannelMatrix,
    spec: &QuantizerSpec,
    noise_var: f64,
    solver: &SlnrSolverConfig,
) -> Result<(Precoder, Option<ConvergenceTrace>)> {
    match kind {
        PrecoderKind::Zf => Ok((Precoder::new(zf_precoder(h)?, spec)?, None)),
        PrecoderKind::Rzf => Ok((Precoder::new(rzf_precoder(h, spec, noise_var)?, spec)?, None)),
        PrecoderKind::Slnr => {
            let (p, t) = slnr_precoder(h, spec, noise_var, solver)?;
            Ok((p, Some(t)))
        }
    }
}
