//! Link-level system parameters shared by the transmitter and receivers.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Effective variance the Gaussian demapper divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapVariance {
    /// Thermal noise only; ignores clipping distortion.
    NoiseOnly,
    /// Thermal noise plus the analytic clipping-distortion power.
    NoisePlusDistortion,
}

/// Which receiver consumes the channel observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverKind {
    Map,
    Nn,
    NnId,
}

impl std::fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReceiverKind::Map => "map",
            ReceiverKind::Nn => "nn",
            ReceiverKind::NnId => "nn-id",
        })
    }
}

fn default_bp_max_iter() -> usize {
    50
}

fn default_id_iterations() -> usize {
    2
}

fn default_map_variance() -> MapVariance {
    MapVariance::NoiseOnly
}

/// Static description of one simulated link.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    /// DFT length N (power of two, >= 4). N/2 - 1 subcarriers carry data.
    pub fft: usize,
    /// Bits per QAM symbol (even, 2..=8).
    pub bits_per_symbol: usize,
    /// Clipping level in dB: top clip = sigma_s * 10^(psi/20), bottom 0.
    pub psi_db: f64,
    #[serde(default = "default_map_variance")]
    pub map_variance: MapVariance,
    /// Demap/decode rounds for the iterative receiver (1 = no feedback).
    #[serde(default = "default_id_iterations")]
    pub id_iterations: usize,
    #[serde(default = "default_bp_max_iter")]
    pub bp_max_iter: usize,
    /// Master seed; every stream in a run derives from it.
    #[serde(default)]
    pub seed: u64,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft < 4 || !self.fft.is_power_of_two() {
            return Err(Error::Config(format!(
                "fft must be a power of two >= 4, got {}",
                self.fft
            )));
        }
        if self.bits_per_symbol < 2 || self.bits_per_symbol > 8 || self.bits_per_symbol % 2 != 0 {
            return Err(Error::Config(format!(
                "bits_per_symbol must be even and in 2..=8, got {}",
                self.bits_per_symbol
            )));
        }
        if !self.psi_db.is_finite() {
            return Err(Error::Config("psi_db must be finite".into()));
        }
        if self.id_iterations == 0 {
            return Err(Error::Config("id_iterations must be >= 1".into()));
        }
        if self.bp_max_iter == 0 {
            return Err(Error::Config("bp_max_iter must be >= 1".into()));
        }
        Ok(())
    }
}
