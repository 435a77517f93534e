use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank-deficient channel")]
    RankDeficientChannel,

    #[error("precoder columns linearly dependent")]
    DependentPrecoderColumns,

    #[error("degenerate precoder column {column}")]
    DegeneratePrecoderColumn { column: usize },

    #[error("silent antenna: quantizer gain undefined (antenna {antenna})")]
    SilentAntenna { antenna: usize },

    #[error("invalid correlation {value} at ({row}, {col})")]
    InvalidCorrelation { row: usize, col: usize, value: f64 },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("divergence at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("nothing to simulate: {0}")]
    NothingToSimulate(&'static str),

    #[error("realization {realization} failed (K = {users}, snr = {snr_db} dB, seed = {seed:#018x}): {source}")]
    Realization {
        users: usize,
        snr_db: f64,
        realization: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
