//! Experiment files. TOML with `[system]`, `[train.net1]`, `[train.net2]`,
//! `[sweep]` and `[output]` sections; every field has a default so presets
//! only spell out what they change. Command-line flags override file values.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dcosim_core::config::{MapVariance, ReceiverKind, SystemConfig};
use dcosim_core::ldpc::{self, LdpcCode};
use dcosim_core::nn::{Optimizer, TrainConfig};

/// Marker context for errors caused by flags, config files or their
/// contents, as opposed to failures while running. `main` maps any error
/// carrying it to exit code 2; everything else exits 3.
#[derive(Debug, Clone, Copy)]
pub struct ConfigStage;

impl fmt::Display for ConfigStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid configuration")
    }
}

pub fn config_error(msg: impl fmt::Display) -> anyhow::Error {
    anyhow::anyhow!("{msg}").context(ConfigStage)
}

pub trait OrConfig<T> {
    /// Tag the error as a configuration problem.
    fn or_config(self) -> anyhow::Result<T>;
}

impl<T, E: Into<anyhow::Error>> OrConfig<T> for Result<T, E> {
    fn or_config(self) -> anyhow::Result<T> {
        self.map_err(|e| e.into().context(ConfigStage))
    }
}

/// One experiment: link parameters, training recipes for the two demapper
/// stages, the Eb/N0 sweep, and where results land.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub system: SystemSection,
    pub train: TrainSections,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    /// Code name under `code_dir`, or a path to an alist file.
    pub code: String,
    pub code_dir: PathBuf,
    pub fft: usize,
    pub bits_per_symbol: usize,
    pub psi_db: f64,
    pub map_variance: MapVariance,
    /// Demap/decode rounds for the nn-id receiver (1 = no feedback).
    pub id_iterations: usize,
    pub bp_max_iter: usize,
    /// Master seed; all noise/data/interleaver streams derive from it.
    pub seed: u64,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            code: "ieee80211_1296_r12".into(),
            code_dir: "data/codes".into(),
            fft: 64,
            bits_per_symbol: 4,
            psi_db: 9.0,
            map_variance: MapVariance::NoiseOnly,
            id_iterations: 2,
            bp_max_iter: 50,
            seed: 0,
        }
    }
}

impl SystemSection {
    pub fn to_core(&self) -> SystemConfig {
        SystemConfig {
            fft: self.fft,
            bits_per_symbol: self.bits_per_symbol,
            psi_db: self.psi_db,
            map_variance: self.map_variance,
            id_iterations: self.id_iterations,
            bp_max_iter: self.bp_max_iter,
            seed: self.seed,
        }
    }

    /// Bare names resolve under `code_dir`; anything with an extension or a
    /// directory component is taken as a path.
    pub fn code_path(&self) -> PathBuf {
        let p = Path::new(&self.code);
        if p.extension().is_some() || p.components().count() > 1 {
            p.to_path_buf()
        } else {
            self.code_dir.join(format!("{}.alist", self.code))
        }
    }

    pub fn load_code(&self) -> anyhow::Result<LdpcCode> {
        let path = self.code_path();
        let text = std::fs::read_to_string(&path)
            .map_err(|e| config_error(format!("cannot read code file {}: {e}", path.display())))?;
        ldpc::load_code(&text)
            .map_err(|e| config_error(format!("bad code file {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSections {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub net1: Option<TrainSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub net2: Option<TrainSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// Training Eb/N0 in dB.
    pub gamma_t_db: f64,
    pub hidden: Vec<usize>,
    pub optimizer: Optimizer,
    pub epochs: usize,
    /// Gradient-descent step size; unused by the conjugate-gradient trainer.
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weight-init and shuffle seed (independent of the system seed).
    pub seed: u64,
    pub validation_fraction: f64,
    pub patience: usize,
    /// Codewords in the dataset; 50 is one codeword per 1/50th of the
    /// standard 50·Nc coded training bits.
    pub codewords: usize,
    /// Model file this stage writes (train) or reads (simulate).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            gamma_t_db: 13.0,
            hidden: vec![32, 16, 8],
            optimizer: t.optimizer,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            seed: 0,
            validation_fraction: t.validation_fraction,
            patience: t.patience,
            codewords: 50,
            model: None,
        }
    }
}

impl TrainSection {
    /// Second-stage defaults: wider net, trained where first-pass decoding
    /// still fails often enough to produce informative soft priors.
    pub fn default_net2() -> Self {
        TrainSection { gamma_t_db: 10.0, hidden: vec![128, 64, 32], ..Default::default() }
    }

    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            optimizer: self.optimizer,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed: self.seed,
            validation_fraction: self.validation_fraction,
            patience: self.patience,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Strictly increasing Eb/N0 points in dB.
    pub gamma_e_db: Vec<f64>,
    /// Frames (one codeword each) per sweep point.
    pub frames: u64,
    pub receivers: Vec<ReceiverKind>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { gamma_e_db: Vec::new(), frames: 1000, receivers: vec![ReceiverKind::Map] }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Result CSV; rows go to stdout when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

pub fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        self.system.to_core().validate().or_config()?;
        if !self.sweep.gamma_e_db.windows(2).all(|w| w[0] < w[1]) {
            return Err(config_error("sweep.gamma_e_db must be strictly increasing"));
        }
        if self.sweep.frames == 0 {
            return Err(config_error("sweep.frames must be >= 1"));
        }
        if self.sweep.receivers.is_empty() {
            return Err(config_error("sweep.receivers must not be empty"));
        }
        for (name, sec) in [("net1", &self.train.net1), ("net2", &self.train.net2)] {
            let Some(sec) = sec else { continue };
            if sec.hidden.is_empty() || sec.hidden.contains(&0) {
                return Err(config_error(format!("train.{name}.hidden needs positive widths")));
            }
            if sec.codewords == 0 {
                return Err(config_error(format!("train.{name}.codewords must be >= 1")));
            }
            if !sec.gamma_t_db.is_finite() {
                return Err(config_error(format!("train.{name}.gamma_t_db must be finite")));
            }
        }
        Ok(())
    }

    pub fn train_section(&self, stage: crate::train::Stage) -> Option<&TrainSection> {
        match stage {
            crate::train::Stage::Net1 => self.train.net1.as_ref(),
            crate::train::Stage::Net2 => self.train.net2.as_ref(),
        }
    }
}

pub fn parse_receiver(s: &str) -> Result<ReceiverKind, String> {
    match s {
        "map" => Ok(ReceiverKind::Map),
        "nn" => Ok(ReceiverKind::Nn),
        "nn-id" => Ok(ReceiverKind::NnId),
        other => Err(format!("unknown receiver {other:?} (expected map, nn or nn-id)")),
    }
}

pub fn parse_map_variance(s: &str) -> Result<MapVariance, String> {
    match s {
        "noise-only" => Ok(MapVariance::NoiseOnly),
        "noise-plus-distortion" => Ok(MapVariance::NoisePlusDistortion),
        other => {
            Err(format!("unknown variance {other:?} (expected noise-only or noise-plus-distortion)"))
        }
    }
}

pub fn parse_optimizer(s: &str) -> Result<Optimizer, String> {
    match s {
        "scg" => Ok(Optimizer::Scg),
        "gd" => Ok(Optimizer::Gd),
        other => Err(format!("unknown optimizer {other:?} (expected scg or gd)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg: ExperimentConfig = toml::from_str("[system]\nfft = 256\n").unwrap();
        assert_eq!(cfg.system.fft, 256);
        assert_eq!(cfg.system.bits_per_symbol, 4);
        assert_eq!(cfg.sweep.frames, 1000);
        assert_eq!(cfg.sweep.receivers, vec![ReceiverKind::Map]);
        assert!(cfg.train.net1.is_none());
        cfg.validate().unwrap();
    }

    #[test]
    fn file_round_trip_is_lossless() {
        let mut cfg = ExperimentConfig::default();
        cfg.preset = Some("fig4".into());
        cfg.system.bits_per_symbol = 6;
        cfg.system.psi_db = 11.0;
        cfg.train.net1 = Some(TrainSection {
            gamma_t_db: 15.0,
            hidden: vec![32, 16, 8],
            model: Some("models/x.bin".into()),
            ..Default::default()
        });
        cfg.train.net2 = Some(TrainSection::default_net2());
        cfg.sweep.gamma_e_db = vec![4.4, 4.8, 5.2];
        cfg.sweep.receivers = vec![ReceiverKind::Map, ReceiverKind::Nn];
        cfg.output.csv = Some("results/x.csv".into());

        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<ExperimentConfig>("[system]\nfft = 64\nbogus = 1\n").unwrap_err();
        assert!(format!("{err}").contains("bogus"), "{err}");
    }

    #[test]
    fn sweep_must_increase() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.gamma_e_db = vec![5.0, 5.0];
        assert!(cfg.validate().is_err());
        cfg.sweep.gamma_e_db = vec![5.0, 4.0];
        assert!(cfg.validate().is_err());
        cfg.sweep.gamma_e_db = vec![4.0, 5.0];
        cfg.validate().unwrap();
    }

    #[test]
    fn code_names_resolve_under_code_dir() {
        let mut sys = SystemSection::default();
        assert_eq!(sys.code_path(), PathBuf::from("data/codes/ieee80211_1296_r12.alist"));
        sys.code = "lib/h.alist".into();
        assert_eq!(sys.code_path(), PathBuf::from("lib/h.alist"));
        sys.code = "h.alist".into();
        assert_eq!(sys.code_path(), PathBuf::from("h.alist"));
    }

    #[test]
    fn config_errors_carry_the_marker() {
        let err = config_error("boom");
        assert!(err.is::<ConfigStage>());
        let plain = anyhow::anyhow!("boom");
        assert!(!plain.is::<ConfigStage>());
    }
}
