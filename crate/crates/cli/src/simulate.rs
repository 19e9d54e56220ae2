//! `dcosim simulate`: Monte-Carlo BER sweep to CSV.
//!
//! Sweep points run sequentially; the frames inside one point run in
//! parallel. Rows are appended as points finish so long sweeps are
//! resumable reading-wise; the header is written only when missing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;

use dcosim_core::config::ReceiverKind;
use dcosim_core::nn::{load_model, NeuralNet};
use dcosim_core::receiver::{BerPoint, LinkSystem, ReceiverSpec};
use dcosim_core::rng::RandomSource;

use crate::config::{self, config_error, ExperimentConfig, OrConfig, TrainSection};
use crate::train::SystemFlags;

pub const CSV_HEADER: &str = "gamma_e_db,receiver,ber,fer,frames,ci_low,ci_high,mean_bp_iters,seed";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment file supplying defaults for the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub system: SystemFlags,
    /// Receivers to sweep: map | nn | nn-id (comma separated).
    #[arg(long = "receiver", value_delimiter = ',', value_parser = config::parse_receiver)]
    pub receivers: Option<Vec<ReceiverKind>>,
    /// Eb/N0 sweep points in dB, comma separated.
    #[arg(long = "gamma-e", value_delimiter = ',')]
    pub gamma_e_db: Option<Vec<f64>>,
    /// Frames per sweep point.
    #[arg(long)]
    pub frames: Option<u64>,
    /// Demap/decode rounds for the nn-id receiver.
    #[arg(long)]
    pub id_iterations: Option<usize>,
    /// Trained first-stage model (receivers nn and nn-id).
    #[arg(long)]
    pub net1_model: Option<PathBuf>,
    /// Trained second-stage model (receiver nn-id).
    #[arg(long)]
    pub net2_model: Option<PathBuf>,
    /// Output CSV (default: the config's output.csv; stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: SimulateArgs) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(p) => config::load(p)?,
        None => ExperimentConfig::default(),
    };
    args.system.apply(&mut cfg);
    if let Some(v) = &args.receivers {
        cfg.sweep.receivers = v.clone();
    }
    if let Some(v) = &args.gamma_e_db {
        cfg.sweep.gamma_e_db = v.clone();
    }
    if let Some(v) = args.frames {
        cfg.sweep.frames = v;
    }
    if let Some(v) = args.id_iterations {
        cfg.system.id_iterations = v;
    }
    if let Some(p) = &args.net1_model {
        cfg.train.net1.get_or_insert_with(TrainSection::default).model = Some(p.clone());
    }
    if let Some(p) = &args.net2_model {
        cfg.train.net2.get_or_insert_with(TrainSection::default_net2).model = Some(p.clone());
    }
    if let Some(p) = &args.out {
        cfg.output.csv = Some(p.clone());
    }
    cfg.validate()?;
    if cfg.sweep.gamma_e_db.is_empty() {
        return Err(config_error("no sweep points: pass --gamma-e or set sweep.gamma_e_db"));
    }

    let order = 1usize << cfg.system.bits_per_symbol;
    let needs_net1 =
        cfg.sweep.receivers.iter().any(|r| matches!(r, ReceiverKind::Nn | ReceiverKind::NnId));
    let needs_net2 = cfg.sweep.receivers.contains(&ReceiverKind::NnId);
    let net1 = needs_net1
        .then(|| load_stage_model(&cfg.train.net1, "net1", 3, order))
        .transpose()?;
    let net2 = needs_net2
        .then(|| load_stage_model(&cfg.train.net2, "net2", 3 + order, order))
        .transpose()?;

    let code = cfg.system.load_code()?;
    let system = LinkSystem::new(cfg.system.to_core(), code).or_config()?;
    let src = RandomSource::new(cfg.system.seed);

    let mut sink = CsvSink::open(cfg.output.csv.as_deref())?;
    for &rx in &cfg.sweep.receivers {
        let spec = match rx {
            ReceiverKind::Map => ReceiverSpec::Map,
            ReceiverKind::Nn => ReceiverSpec::Nn(net1.as_ref().unwrap()),
            ReceiverKind::NnId => ReceiverSpec::NnId {
                net1: net1.as_ref().unwrap(),
                net2: net2.as_ref().unwrap(),
            },
        };
        for &gamma in &cfg.sweep.gamma_e_db {
            let point = system.run_ber_point(gamma, cfg.sweep.frames as usize, spec, &src)?;
            eprintln!(
                "{rx} @ {gamma} dB: ber {:.3e}  fer {:.3e}  ({} frames)",
                point.ber, point.fer, point.frames
            );
            sink.append(&format_row(gamma, rx, &point, cfg.system.seed))?;
        }
    }
    Ok(())
}

fn load_stage_model(
    sec: &Option<TrainSection>,
    name: &str,
    want_in: usize,
    want_out: usize,
) -> anyhow::Result<NeuralNet> {
    let path = sec.as_ref().and_then(|t| t.model.clone()).ok_or_else(|| {
        config_error(format!(
            "receiver needs a trained {name} model: pass --{name}-model or set train.{name}.model \
             (run `dcosim train --stage {name}` first)"
        ))
    })?;
    let net = load_model(&path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    if net.input_dim() != want_in || net.output_dim() != want_out {
        return Err(config_error(format!(
            "{name} model {} maps {} -> {}, but this system needs {want_in} -> {want_out}",
            path.display(),
            net.input_dim(),
            net.output_dim()
        )));
    }
    Ok(net)
}

fn format_row(gamma: f64, rx: ReceiverKind, p: &BerPoint, seed: u64) -> String {
    format!(
        "{gamma},{rx},{},{},{},{},{},{},{seed}",
        p.ber, p.fer, p.frames, p.ci_low, p.ci_high, p.mean_bp_iters
    )
}

/// Append-only row sink with header dedup.
struct CsvSink {
    out: Box<dyn Write>,
}

impl CsvSink {
    fn open(path: Option<&Path>) -> anyhow::Result<CsvSink> {
        let Some(path) = path else {
            let mut out: Box<dyn Write> = Box::new(std::io::stdout());
            writeln!(out, "{CSV_HEADER}")?;
            return Ok(CsvSink { out });
        };
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        let existing = fs::read_to_string(path).unwrap_or_default();
        let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
        match existing.lines().next() {
            Some(first) => {
                if first != CSV_HEADER {
                    return Err(config_error(format!(
                        "{} exists with different columns; refusing to append",
                        path.display()
                    )));
                }
            }
            None => writeln!(file, "{CSV_HEADER}")?,
        }
        Ok(CsvSink { out: Box::new(file) })
    }

    fn append(&mut self, row: &str) -> anyhow::Result<()> {
        writeln!(self.out, "{row}")?;
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point() -> BerPoint {
        BerPoint {
            gamma_e_db: 5.2,
            frames: 400,
            bit_errors: 958,
            bits: 259200,
            frame_errors: 60,
            ber: 958.0 / 259200.0,
            fer: 0.15,
            ci_low: 0.003468,
            ci_high: 0.003937,
            mean_bp_iters: 12.5,
        }
    }

    #[test]
    fn rows_are_plain_csv() {
        let row = format_row(5.2, ReceiverKind::NnId, &point(), 7);
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert!(row.starts_with("5.2,nn-id,0.00369"));
        assert!(row.ends_with(",7"));
    }

    #[test]
    fn sink_writes_header_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        for _ in 0..2 {
            let mut sink = CsvSink::open(Some(&path)).unwrap();
            sink.append(&format_row(5.0, ReceiverKind::Map, &point(), 1)).unwrap();
        }
        let text = fs::read_to_string(&path).unwrap();
        let headers = text.lines().filter(|l| *l == CSV_HEADER).count();
        assert_eq!(headers, 1);
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn sink_refuses_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, "something,else\n1,2\n").unwrap();
        let err = CsvSink::open(Some(&path)).err().unwrap();
        assert!(format!("{err:#}").contains("different columns"));
    }
}
