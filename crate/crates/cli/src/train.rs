//! `dcosim train`, `gen-dataset` and `inspect-model`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};

use dcosim_core::config::MapVariance;
use dcosim_core::nn::{
    init_network, load_model, save_model, train, InitScheme, InputScaler, NeuralNet, Optimizer,
    TrainingSet,
};
use dcosim_core::receiver::{DatasetStage, LinkSystem};
use dcosim_core::rng::RandomSource;

use crate::config::{self, config_error, ExperimentConfig, OrConfig, TrainSection};

/// Which demapper stage a dataset/model belongs to. The first stage sees
/// (Re Y, Im Y, sigma_n2); the second additionally sees the prior PMF fed
/// back from the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Net1,
    Net2,
}

impl Stage {
    fn dataset_stage(self) -> DatasetStage {
        match self {
            Stage::Net1 => DatasetStage::Net1,
            Stage::Net2 => DatasetStage::Net2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Stage::Net1 => "net1",
            Stage::Net2 => "net2",
        }
    }
}

/// Link-parameter overrides shared by several subcommands.
#[derive(Debug, Args)]
pub struct SystemFlags {
    /// Bits per symbol: 2 = QPSK, 4 = 16-QAM, 6 = 64-QAM.
    #[arg(long = "mod", value_name = "M")]
    pub modulation: Option<usize>,
    /// IFFT/FFT size N.
    #[arg(long)]
    pub fft: Option<usize>,
    /// Code name under the code directory, or a path to an alist file.
    #[arg(long)]
    pub code: Option<String>,
    /// Directory holding <code>.alist files.
    #[arg(long)]
    pub code_dir: Option<PathBuf>,
    /// Clipping level in dB (top clip power over signal power).
    #[arg(long)]
    pub psi_db: Option<f64>,
    /// Gaussian demapper variance: noise-only | noise-plus-distortion.
    #[arg(long, value_parser = config::parse_map_variance)]
    pub map_variance: Option<MapVariance>,
    /// Master seed for all channel/data randomness.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SystemFlags {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        let sys = &mut cfg.system;
        if let Some(v) = self.modulation {
            sys.bits_per_symbol = v;
        }
        if let Some(v) = self.fft {
            sys.fft = v;
        }
        if let Some(v) = &self.code {
            sys.code = v.clone();
        }
        if let Some(v) = &self.code_dir {
            sys.code_dir = v.clone();
        }
        if let Some(v) = self.psi_db {
            sys.psi_db = v;
        }
        if let Some(v) = self.map_variance {
            sys.map_variance = v;
        }
        if let Some(v) = self.seed {
            sys.seed = v;
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Experiment file supplying defaults for the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Demapper stage to fit.
    #[arg(long, value_enum, default_value_t = Stage::Net1)]
    pub stage: Stage,
    #[command(flatten)]
    pub system: SystemFlags,
    /// Training Eb/N0 in dB.
    #[arg(long = "gamma-t")]
    pub gamma_t_db: Option<f64>,
    /// Hidden layer widths, comma separated (e.g. 32,16,8).
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// scg | gd
    #[arg(long, value_parser = config::parse_optimizer)]
    pub optimizer: Option<Optimizer>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Codewords in the dataset (50 = the standard 50·Nc coded bits).
    #[arg(long)]
    pub codewords: Option<usize>,
    /// Weight-init and shuffle seed for this training run.
    #[arg(long)]
    pub train_seed: Option<u64>,
    /// Trained first-stage model; required with --stage net2.
    #[arg(long)]
    pub net1_model: Option<PathBuf>,
    /// Where to write the model (default: the config's train.<stage>.model).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = load_base(&args.config)?;
    args.system.apply(&mut cfg);
    {
        let sec = stage_section_mut(&mut cfg, args.stage);
        if let Some(v) = args.gamma_t_db {
            sec.gamma_t_db = v;
        }
        if let Some(v) = &args.hidden {
            sec.hidden = v.clone();
        }
        if let Some(v) = args.optimizer {
            sec.optimizer = v;
        }
        if let Some(v) = args.epochs {
            sec.epochs = v;
        }
        if let Some(v) = args.learning_rate {
            sec.learning_rate = v;
        }
        if let Some(v) = args.codewords {
            sec.codewords = v;
        }
        if let Some(v) = args.train_seed {
            sec.seed = v;
        }
        if let Some(v) = &args.out {
            sec.model = Some(v.clone());
        }
    }
    cfg.validate()?;

    let sec = cfg.train_section(args.stage).unwrap().clone();
    let out_path = sec.model.clone().ok_or_else(|| {
        config_error(format!("no model path: pass --out or set train.{}.model", args.stage.name()))
    })?;
    let (system, net1) = build_context(&cfg, args.stage, args.net1_model.as_deref())?;

    let src = RandomSource::new(cfg.system.seed);
    eprintln!(
        "dataset: {} codewords x {} symbols at gamma_t = {} dB",
        sec.codewords,
        system.symbols_per_frame(),
        sec.gamma_t_db
    );
    let set =
        system.gen_dataset(&src, sec.gamma_t_db, sec.codewords, args.stage.dataset_stage(), net1.as_ref())?;

    let order = 1usize << cfg.system.bits_per_symbol;
    let mut dims = vec![set.inputs.ncols()];
    dims.extend_from_slice(&sec.hidden);
    dims.push(order);

    let mut init_rng = RandomSource::new(sec.seed).stream(args.stage.name());
    let mut net = init_network(&dims, InitScheme::SymmetricUniform, &mut init_rng);
    net.set_input_scaler(Some(InputScaler::fit(set.inputs.view())));

    let report = train(&mut net, &set, &sec.to_train_config())?;

    ensure_parent(&out_path)?;
    save_model(&net, &out_path)?;

    println!("records {}  layers {:?}  optimizer {:?}", set.len(), dims, sec.optimizer);
    let val = report
        .validation_ce
        .map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
    println!(
        "cross-entropy: initial {:.6}  final {:.6}  validation {val}",
        report.initial_ce, report.final_ce
    );
    println!("epochs {}  gradient norm {:.3e}", report.epochs_run, report.grad_norm);
    println!("wrote {}", out_path.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    /// Experiment file supplying defaults for the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Stage::Net1)]
    pub stage: Stage,
    #[command(flatten)]
    pub system: SystemFlags,
    /// Training Eb/N0 in dB.
    #[arg(long = "gamma-t")]
    pub gamma_t_db: Option<f64>,
    #[arg(long)]
    pub codewords: Option<usize>,
    /// Trained first-stage model; required with --stage net2.
    #[arg(long)]
    pub net1_model: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_gen_dataset(args: GenDatasetArgs) -> anyhow::Result<()> {
    let mut cfg = load_base(&args.config)?;
    args.system.apply(&mut cfg);
    {
        let sec = stage_section_mut(&mut cfg, args.stage);
        if let Some(v) = args.gamma_t_db {
            sec.gamma_t_db = v;
        }
        if let Some(v) = args.codewords {
            sec.codewords = v;
        }
    }
    cfg.validate()?;

    let sec = cfg.train_section(args.stage).unwrap().clone();
    let (system, net1) = build_context(&cfg, args.stage, args.net1_model.as_deref())?;
    let src = RandomSource::new(cfg.system.seed);
    let set =
        system.gen_dataset(&src, sec.gamma_t_db, sec.codewords, args.stage.dataset_stage(), net1.as_ref())?;

    ensure_parent(&args.out)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
    write_dataset_csv(&mut out, &set)?;
    out.flush()?;
    eprintln!("wrote {} records to {}", set.len(), args.out.display());
    Ok(())
}

fn write_dataset_csv(out: &mut impl Write, set: &TrainingSet) -> std::io::Result<()> {
    let extra = set.inputs.ncols() - 3;
    let mut header = String::from("re,im,sigma2");
    for j in 0..extra {
        header.push_str(&format!(",p{j}"));
    }
    header.push_str(",target");
    writeln!(out, "{header}")?;
    for (row, &target) in set.inputs.rows().into_iter().zip(&set.targets) {
        let fields: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(out, "{},{target}", fields.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Saved model file.
    #[arg(long)]
    pub model: PathBuf,
}

pub fn run_inspect(args: InspectArgs) -> anyhow::Result<()> {
    let net = load_model(&args.model)
        .map_err(|e| config_error(format!("{}: {e}", args.model.display())))?;
    let params: usize = net.weights().iter().map(|w| w.len()).sum();
    println!("layers {:?}", net.layer_dims());
    println!("parameters {params}");
    match net.input_scaler() {
        Some(s) => println!("input scaler: shift/scale over {} columns", s.shift.len()),
        None => println!("input scaler: none"),
    }
    Ok(())
}

fn load_base(config: &Option<PathBuf>) -> anyhow::Result<ExperimentConfig> {
    match config {
        Some(p) => config::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn stage_section_mut(cfg: &mut ExperimentConfig, stage: Stage) -> &mut TrainSection {
    match stage {
        Stage::Net1 => cfg.train.net1.get_or_insert_with(TrainSection::default),
        Stage::Net2 => cfg.train.net2.get_or_insert_with(TrainSection::default_net2),
    }
}

/// Build the link and, for the second stage, load the first-stage model
/// (flag wins over the config's train.net1.model).
fn build_context(
    cfg: &ExperimentConfig,
    stage: Stage,
    net1_flag: Option<&Path>,
) -> anyhow::Result<(LinkSystem, Option<NeuralNet>)> {
    let code = cfg.system.load_code()?;
    let system = LinkSystem::new(cfg.system.to_core(), code).or_config()?;
    let net1 = match stage {
        Stage::Net1 => None,
        Stage::Net2 => {
            let path = net1_flag
                .map(Path::to_path_buf)
                .or_else(|| cfg.train.net1.as_ref().and_then(|t| t.model.clone()))
                .ok_or_else(|| {
                    config_error("--stage net2 needs --net1-model (or train.net1.model)")
                })?;
            let net = load_model(&path)
                .map_err(|e| config_error(format!("first-stage model {}: {e}", path.display())))?;
            let order = 1usize << cfg.system.bits_per_symbol;
            if net.output_dim() != order || net.input_dim() != 3 {
                return Err(config_error(format!(
                    "first-stage model {} maps {} -> {}, expected 3 -> {order}",
                    path.display(),
                    net.input_dim(),
                    net.output_dim()
                )));
            }
            Some(net)
        }
    };
    Ok((system, net1))
}

fn ensure_parent(path: &Path) -> std::io::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_values() {
        let mut cfg = ExperimentConfig::default();
        let flags = SystemFlags {
            modulation: Some(6),
            fft: Some(1024),
            code: Some("ieee80211_1944_r12".into()),
            code_dir: None,
            psi_db: Some(10.0),
            map_variance: Some(MapVariance::NoisePlusDistortion),
            seed: Some(9),
        };
        flags.apply(&mut cfg);
        assert_eq!(cfg.system.bits_per_symbol, 6);
        assert_eq!(cfg.system.fft, 1024);
        assert_eq!(cfg.system.code, "ieee80211_1944_r12");
        assert_eq!(cfg.system.psi_db, 10.0);
        assert_eq!(cfg.system.map_variance, MapVariance::NoisePlusDistortion);
        assert_eq!(cfg.system.seed, 9);
    }

    #[test]
    fn dataset_csv_has_one_column_per_input() {
        let set = TrainingSet {
            inputs: ndarray::arr2(&[[0.5, -1.0, 0.25], [1.5, 2.0, 0.25]]),
            targets: vec![3, 1],
        };
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &set).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "re,im,sigma2,target");
        assert_eq!(lines[1], "0.5,-1,0.25,3");
        assert_eq!(lines.len(), 3);
    }
}
