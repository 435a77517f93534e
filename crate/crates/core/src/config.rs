//! Experiment configuration: a TOML document with one section per concern.
//!
//! ```toml
//! master_seed = 1
//! realizations = 100
//!
//! [channel]
//! num_antennas = 100
//! num_paths = 5
//! path_gain_variance = 1.0
//! angular_spread_deg = 5.0
//! user_sector_deg = [0.0, 90.0]
//! element_spacing = 0.5
//!
//! [power]
//! symbol_variance = 1.0
//! noise_variance = 1.0
//!
//! [sweep]
//! user_counts = [10, 20, 30]
//! snr_db = [10.0, 40.0]
//! precoders = ["zf", "rzf", "slnr"]
//!
//! [solver]
//! max_iterations = 5
//! tolerance = 1e-3
//! tolerance_mode = "relative"
//! initializer = "zf"
//! relaxation = 1.0
//! ```
//!
//! `key=value` overrides use dotted paths (`channel.num_antennas=16`) and
//! take precedence over the file.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::precoding::{Initializer, PrecoderKind, SlnrSolverConfig, Tolerance};
use crate::quantization::QuantizerSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub num_antennas: usize,
    pub num_paths: usize,
    pub path_gain_variance: f64,
    pub angular_spread_deg: f64,
    pub user_sector_deg: [f64; 2],
    #[serde(default = "default_spacing")]
    pub element_spacing: f64,
}

fn default_spacing() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    pub symbol_variance: f64,
    #[serde(default = "default_noise")]
    pub noise_variance: f64,
}

fn default_noise() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub user_counts: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub precoders: Vec<PrecoderKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToleranceMode {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitializerKind {
    Zf,
    Rzf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_tolerance_mode")]
    pub tolerance_mode: ToleranceMode,
    #[serde(default = "default_initializer")]
    pub initializer: InitializerKind,
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
}

fn default_tolerance() -> f64 {
    1e-3
}

fn default_tolerance_mode() -> ToleranceMode {
    ToleranceMode::Relative
}

fn default_initializer() -> InitializerKind {
    InitializerKind::Zf
}

fn default_relaxation() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub master_seed: u64,
    pub realizations: usize,
    pub channel: ChannelSection,
    pub power: PowerSection,
    pub sweep: SweepSection,
    pub solver: SolverSection,
}

impl Default for SystemConfig {
    /// The full-scale scenario: 100 antennas, 10 to 100 users, 10 and 40 dB.
    fn default() -> Self {
        Self {
            master_seed: 1,
            realizations: 100,
            channel: ChannelSection {
                num_antennas: 100,
                num_paths: 5,
                path_gain_variance: 1.0,
                angular_spread_deg: 5.0,
                user_sector_deg: [0.0, 90.0],
                element_spacing: 0.5,
            },
            power: PowerSection {
                symbol_variance: 1.0,
                noise_variance: 1.0,
            },
            sweep: SweepSection {
                user_counts: (1..=10).map(|i| 10 * i).collect(),
                snr_db: vec![10.0, 40.0],
                precoders: vec![PrecoderKind::Zf, PrecoderKind::Rzf, PrecoderKind::Slnr],
            },
            solver: SolverSection {
                max_iterations: 5,
                tolerance: default_tolerance(),
                tolerance_mode: ToleranceMode::Relative,
                initializer: InitializerKind::Zf,
                relaxation: default_relaxation(),
            },
        }
    }
}

/// A `path=value` override as given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: String,
    pub value: String,
}

impl std::str::FromStr for Override {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (path, value) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{s}` is not KEY=VALUE")))?;
        let path = path.trim();
        if path.is_empty() || path.split('.').any(str::is_empty) {
            return Err(Error::Config(format!("override `{s}` has an empty key")));
        }
        Ok(Self {
            path: path.to_string(),
            value: value.trim().to_string(),
        })
    }
}

/// Parses a value as TOML, falling back to a bare string (`precoders=[zf]`
/// must be written `precoders=["zf"]`, but `initializer=rzf` works).
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(root: &mut toml::Table, ov: &Override) -> Result<()> {
    let mut parts: Vec<&str> = ov.path.split('.').collect();
    let leaf = parts.pop().expect("non-empty path");
    let mut table = root;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{part}` in `{}` is not a section", ov.path)))?;
    }
    table.insert(leaf.to_string(), parse_value(&ov.value));
    Ok(())
}

impl SystemConfig {
    /// Parses and validates a configuration document with overrides applied.
    pub fn parse(text: &str, overrides: &[Override]) -> Result<Self> {
        let config: SystemConfig = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
            for ov in overrides {
                apply_override(&mut table, ov)?;
            }
            let merged = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
            toml::from_str(&merged)
                .map_err(|e| Error::Config(format!("after overrides: {e}")))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::invalid("realizations", "must be at least 1"));
        }
        if self.sweep.precoders.is_empty() {
            return Err(Error::NothingToSimulate("empty precoder list"));
        }
        if self.sweep.user_counts.is_empty() {
            return Err(Error::NothingToSimulate("empty user_counts"));
        }
        if self.sweep.snr_db.is_empty() {
            return Err(Error::NothingToSimulate("empty snr_db"));
        }
        if self.sweep.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("snr_db", "values must be finite"));
        }
        let n = self.channel.num_antennas;
        for &k in &self.sweep.user_counts {
            if k == 0 || k > n {
                return Err(Error::invalid(
                    "user_counts",
                    format!("{k} users outside 1..={n} (num_antennas)"),
                ));
            }
            self.channel_params(k).validate()?;
        }
        if !(self.power.noise_variance > 0.0 && self.power.noise_variance.is_finite()) {
            return Err(Error::invalid("noise_variance", "must be positive and finite"));
        }
        self.quantizer_spec(self.sweep.snr_db[0]).validate()?;
        self.solver_config().validate()?;
        if self.power.symbol_variance != 1.0 {
            log::warn!(
                "symbol_variance = {} but the SINR expression omits it from the signal terms; \
                 results are only consistent for unit symbol variance",
                self.power.symbol_variance
            );
        }
        Ok(())
    }

    pub fn channel_params(&self, num_users: usize) -> ChannelParams {
        ChannelParams {
            num_antennas: self.channel.num_antennas,
            num_users,
            num_paths: self.channel.num_paths,
            path_gain_variance: self.channel.path_gain_variance,
            angular_spread_deg: self.channel.angular_spread_deg,
            user_sector_deg: self.channel.user_sector_deg,
            element_spacing: self.channel.element_spacing,
        }
    }

    /// Quantizer parameters at transmit SNR `snr_db`, with `P_TX = rho * sigma_n^2`.
    pub fn quantizer_spec(&self, snr_db: f64) -> QuantizerSpec {
        QuantizerSpec {
            symbol_variance: self.power.symbol_variance,
            total_tx_power: 10f64.powf(snr_db / 10.0) * self.power.noise_variance,
        }
    }

    pub fn noise_variance(&self) -> f64 {
        self.power.noise_variance
    }

    pub fn solver_config(&self) -> SlnrSolverConfig {
        SlnrSolverConfig {
            max_iterations: self.solver.max_iterations,
            tolerance: match self.solver.tolerance_mode {
                ToleranceMode::Relative => Tolerance::RelativeToInitial(self.solver.tolerance),
                ToleranceMode::Absolute => Tolerance::Absolute(self.solver.tolerance),
            },
            initializer: match self.solver.initializer {
                InitializerKind::Zf => Initializer::Zf,
                InitializerKind::Rzf => Initializer::Rzf,
            },
            relaxation: self.solver.relaxation,
        }
    }
}
