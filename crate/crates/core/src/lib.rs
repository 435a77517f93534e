//! Multiuser massive-MIMO downlink precoding with one-bit D/A converters.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: clustered mmWave channel realizations on a uniform linear array.
//! - [`quantization`]: the one-bit quantizer and its Bussgang linear model.
//! - [`precoding`]: ZF, RZF and the leakage-based (SLNR) fixed-point precoder.
//! - [`metrics`]: per-user SINR/SLNR and spectral-efficiency aggregation.
//! - [`simulation`]: seeded Monte Carlo sweeps over user count, SNR and precoder.
//! - [`config`]: the text configuration format consumed by the CLI.
//! - [`validation`]: independent oracles for the quantizer model and the precoders.

pub mod channel;
pub mod config;
pub mod error;
pub mod metrics;
pub mod precoding;
pub mod quantization;
pub mod simulation;
pub mod validation;

mod linalg;

pub use nalgebra::Complex;

/// Double precision complex scalar used throughout the crate.
pub type C64 = Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

pub use channel::{ChannelMatrix, ChannelParams};
pub use config::SystemConfig;
pub use error::{Error, Result};
pub use metrics::LinkMetrics;
pub use precoding::{ConvergenceTrace, Initializer, Precoder, PrecoderKind, SlnrSolverConfig};
pub use quantization::{BussgangModel, QuantizerSpec};
pub use simulation::{CellKey, CellResult, ExperimentResult};
