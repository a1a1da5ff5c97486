use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acdl::AcdlConfig;
use crate::baselines::{Nonlinearity, ThresholdSearchSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::noise::NoiseConfig;
use crate::ofdm::OfdmConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    EbN0,
    Sir,
    Beta,
    Threshold,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eb_n0" => Ok(Axis::EbN0),
            "sir" => Ok(Axis::Sir),
            "beta" => Ok(Axis::Beta),
            "threshold" => Ok(Axis::Threshold),
            _ => Err(Error::InvalidConfig(format!("unknown axis {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainKind {
    Linear,
    Acdl,
    Blanking,
    Clipping,
}

impl std::str::FromStr for ChainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ChainKind::Linear),
            "acdl" => Ok(ChainKind::Acdl),
            "blanking" => Ok(ChainKind::Blanking),
            "clipping" => Ok(ChainKind::Clipping),
            _ => Err(Error::InvalidConfig(format!("unknown chain {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    None,
    Blanking,
    Clipping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Chain used when `sweep.chain` is unset: `none` selects the ACDL.
    pub baseline: BaselineKind,
    pub threshold_grid_lo: f64,
    pub threshold_grid_hi: f64,
    pub threshold_grid_points: usize,
    /// Trials spent choosing the threshold before measuring with it; zero
    /// selects and reports on the same trials.
    pub search_trials: usize,
    /// Fixed threshold in units of received RMS, bypassing the search.
    pub threshold: Option<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            baseline: BaselineKind::None,
            threshold_grid_lo: 0.5,
            threshold_grid_hi: 20.0,
            threshold_grid_points: 40,
            search_trials: 0,
            threshold: None,
        }
    }
}

impl BaselineConfig {
    pub fn search_spec(&self) -> Result<ThresholdSearchSpec> {
        ThresholdSearchSpec::log_grid(
            self.threshold_grid_lo,
            self.threshold_grid_hi,
            self.threshold_grid_points,
            self.search_trials,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub chain: Option<ChainKind>,
    /// Upper bound on trials per point.
    pub trials: usize,
    pub bits_min: u64,
    /// Stop a point early once this many errors are seen; zero disables.
    pub stop_at_errors: u64,
    pub base_seed: u64,
    /// OFDM symbols per trial, including preamble and tail.
    pub trial_symbols: usize,
    /// Leading symbols used for AGC and QTF startup, excluded from metrics.
    pub preamble_symbols: usize,
    /// Trials per deterministic batch.
    pub batch_size: usize,
    pub execution: Execution,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: Axis::EbN0,
            values: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0],
            chain: None,
            trials: 100_000,
            bits_min: 1_000_000,
            stop_at_errors: 100,
            base_seed: 42,
            trial_symbols: 32,
            preamble_symbols: 3,
            batch_size: 8,
            execution: Execution::Parallel,
        }
    }
}

/// Every module's settings plus the sweep, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub ofdm: OfdmConfig,
    pub noise: NoiseConfig,
    pub acdl: AcdlConfig,
    pub baselines: BaselineConfig,
    pub sweep: SweepConfig,
}

/// Allowed relative mismatch between the anti-aliasing corner and `2 B_x`.
const AA_CORNER_TOLERANCE: f64 = 0.25;

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn sha256(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml_string()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        self.noise.validate()?;
        self.acdl.validate()?;
        self.baselines.search_spec()?;
        let corner = self.acdl.aa_corner_hz();
        let target = 2.0 * self.ofdm.signal_bandwidth();
        if ((corner - target) / target).abs() > AA_CORNER_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "1/(2 pi tau) = {corner} Hz is not within {AA_CORNER_TOLERANCE} of 2 B_x = {target} Hz"
            )));
        }
        let s = &self.sweep;
        if s.values.is_empty() {
            return Err(Error::InvalidConfig("sweep values are empty".into()));
        }
        if s.batch_size == 0 || s.trials == 0 {
            return Err(Error::InvalidConfig("trials and batch_size must be positive".into()));
        }
        if s.preamble_symbols == 0 || s.preamble_symbols + 2 > s.trial_symbols {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= preamble_symbols ({}) <= trial_symbols ({}) - 2",
                s.preamble_symbols, s.trial_symbols
            )));
        }
        if let Some(t) = self.baselines.threshold {
            if !(t > 0.0) {
                return Err(Error::InvalidThreshold(t));
            }
        }
        if s.axis == Axis::Threshold && !matches!(self.chain(), ChainKind::Blanking | ChainKind::Clipping) {
            return Err(Error::InvalidConfig(
                "the threshold axis needs a blanking or clipping chain".into(),
            ));
        }
        Ok(())
    }

    pub fn chain(&self) -> ChainKind {
        self.sweep.chain.unwrap_or(match self.baselines.baseline {
            BaselineKind::None => ChainKind::Acdl,
            BaselineKind::Blanking => ChainKind::Blanking,
            BaselineKind::Clipping => ChainKind::Clipping,
        })
    }

    /// Copy with the sweep axis set to `value`.
    pub fn at(&self, value: f64) -> Self {
        let mut c = self.clone();
        match self.sweep.axis {
            Axis::EbN0 => c.noise.eb_n0_db = value,
            Axis::Sir => c.noise.sir_db = value,
            Axis::Beta => c.acdl.beta = value,
            Axis::Threshold => c.baselines.threshold = Some(value),
        }
        c
    }

    /// Data symbols per trial that enter BER and SNR.
    pub fn data_symbols(&self) -> usize {
        self.sweep.trial_symbols - self.sweep.preamble_symbols - 1
    }

    pub fn nonlinearity(&self) -> Option<Nonlinearity> {
        match self.chain() {
            ChainKind::Blanking => Some(Nonlinearity::Blanking),
            ChainKind::Clipping => Some(Nonlinearity::Clipping),
            _ => None,
        }
    }
}

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidConfig(format!("cannot parse values {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + step * i as f64).collect())
        }
        [_] => spec.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}
