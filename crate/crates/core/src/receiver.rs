//! End-to-end link: transmit chain, the three BICM receivers, training-set
//! generation for the network demappers, and Monte-Carlo BER measurement.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{self, SubcarrierObservation};
use crate::config::{MapVariance, SystemConfig};
use crate::ldpc::{DecodeResult, LdpcCode};
use crate::modem::{
    build_constellation, demap_extrinsic, demap_from_probs, demap_gaussian, prior_pmf_from_llrs,
    ConstellationSet, Interleaver,
};
use crate::nn::{infer_likelihoods, NeuralNet, TrainingSet};
use crate::ofdm::{self, ClippingParams, OfdmFrame};
use crate::rng::RandomSource;
use crate::{Error, Result};

/// A configured link: code, labeling, clipping front end, and interleaver.
/// The interleaver is drawn once from the master seed, so transmitter and
/// receiver always agree on it.
#[derive(Debug, Clone)]
pub struct LinkSystem {
    pub cfg: SystemConfig,
    pub code: LdpcCode,
    pub constellation: ConstellationSet,
    pub clip: ClippingParams,
    pub interleaver: Interleaver,
}

/// Everything the transmitter produced for one codeword.
#[derive(Debug, Clone)]
pub struct TxFrame {
    pub message: Vec<u8>,
    pub codeword: Vec<u8>,
    /// Interleaved codeword followed by pseudo-random filler bits.
    pub tx_bits: Vec<u8>,
    /// Transmitted constellation label per data subcarrier.
    pub labels: Vec<usize>,
    /// Biased and clipped time-domain signal, one block of N per OFDM symbol.
    pub time: Vec<f64>,
}

/// Result of one receiver run on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RxOutcome {
    pub message: Vec<u8>,
    pub codeword: Vec<u8>,
    pub converged: bool,
    /// Belief-propagation iterations, summed over demap/decode rounds.
    pub bp_iters: usize,
    pub id_iters_run: usize,
}

/// Receiver selection for a Monte-Carlo run.
#[derive(Clone, Copy)]
pub enum ReceiverSpec<'a> {
    Map,
    Nn(&'a NeuralNet),
    NnId { net1: &'a NeuralNet, net2: &'a NeuralNet },
}

/// Which demapper stage a training set is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetStage {
    /// Inputs (Re y, Im y, sigma_n^2); first-pass demapper.
    Net1,
    /// Same plus the 2^M-entry symbol prior PMF from decoder feedback.
    Net2,
}

/// One point of a BER/FER sweep with 95% Wilson confidence bounds on BER.
#[derive(Debug, Clone)]
pub struct BerPoint {
    pub gamma_e_db: f64,
    pub frames: usize,
    pub bit_errors: u64,
    pub bits: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_bp_iters: f64,
}

impl LinkSystem {
    pub fn new(cfg: SystemConfig, code: LdpcCode) -> Result<Self> {
        cfg.validate()?;
        let constellation = build_constellation(cfg.bits_per_symbol)?;
        let sigma_s = ofdm::analytic_sigma_s2(cfg.fft).sqrt();
        let clip = ClippingParams::from_clipping_level(cfg.psi_db, sigma_s)?;
        let mut rng = RandomSource::new(cfg.seed).stream("interleaver");
        let interleaver = Interleaver::random(code.n(), &mut rng);
        Ok(LinkSystem { cfg, code, constellation, clip, interleaver })
    }

    pub fn rate(&self) -> f64 {
        self.code.k() as f64 / self.code.n() as f64
    }

    /// Data subcarriers per OFDM symbol.
    pub fn data_per_symbol(&self) -> usize {
        OfdmFrame::data_count(self.cfg.fft)
    }

    pub fn bits_per_ofdm_symbol(&self) -> usize {
        self.cfg.bits_per_symbol * self.data_per_symbol()
    }

    /// OFDM symbols needed to carry one codeword (last one padded).
    pub fn ofdm_symbols_per_frame(&self) -> usize {
        self.code.n().div_ceil(self.bits_per_ofdm_symbol())
    }

    pub fn filler_bits(&self) -> usize {
        self.ofdm_symbols_per_frame() * self.bits_per_ofdm_symbol() - self.code.n()
    }

    /// QAM symbols per frame, filler included.
    pub fn symbols_per_frame(&self) -> usize {
        self.ofdm_symbols_per_frame() * self.data_per_symbol()
    }

    /// Complex noise variance per subcarrier at the given electrical Eb/N0.
    pub fn noise_variance(&self, gamma_e_db: f64) -> Result<f64> {
        channel::noise_variance(
            gamma_e_db,
            self.clip.p_e,
            channel::bandwidth_utilization(self.cfg.fft),
            self.cfg.bits_per_symbol,
            self.rate(),
        )
    }

    /// Encode, interleave, pad, map, frame, bias, and clip one codeword.
    /// Message and filler bits are drawn from per-frame streams of `src`,
    /// so a frame index fully determines the transmitted signal.
    pub fn tx_frame(&self, src: &RandomSource, frame: u64) -> Result<TxFrame> {
        let mut data_rng = src.indexed_stream("data", frame);
        let message: Vec<u8> = (0..self.code.k()).map(|_| data_rng.random::<bool>() as u8).collect();
        let codeword = self.code.encode(&message)?;
        let mut tx_bits = self.interleaver.apply(&codeword)?;
        let mut filler_rng = src.indexed_stream("filler", frame);
        tx_bits.extend((0..self.filler_bits()).map(|_| filler_rng.random::<bool>() as u8));

        let m = self.cfg.bits_per_symbol;
        let labels: Vec<usize> = tx_bits
            .chunks(m)
            .map(|bits| bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize))
            .collect();
        let points: Vec<_> = labels.iter().map(|&l| self.constellation.point(l)).collect();

        let mut time = Vec::with_capacity(self.ofdm_symbols_per_frame() * self.cfg.fft);
        for sym in points.chunks(self.data_per_symbol()) {
            let grid = ofdm::frame_subcarriers(sym, self.cfg.fft)?;
            let s = ofdm::to_time(&grid)?;
            time.extend(ofdm::bias_and_clip(&s, &self.clip));
        }
        Ok(TxFrame { message, codeword, tx_bits, labels, time })
    }

    /// Push a transmitted frame through the AWGN channel and collect the
    /// per-subcarrier observations in transmit order.
    pub fn observe<R: Rng>(
        &self,
        tx: &TxFrame,
        sigma_n2: f64,
        rng: &mut R,
    ) -> Result<Vec<SubcarrierObservation>> {
        let n = self.cfg.fft;
        let mut obs = Vec::with_capacity(self.symbols_per_frame());
        for block in tx.time.chunks(n) {
            let y = channel::transmit(block, sigma_n2, rng);
            obs.extend(channel::receive_subcarriers(&y, n, sigma_n2)?);
        }
        Ok(obs)
    }

    /// Deinterleave the codeword portion of symbol-order LLRs and decode.
    fn decode_code_bits(&self, symbol_llrs: &[f64]) -> Result<DecodeResult> {
        let n = self.code.n();
        let chan = self.interleaver.invert(&symbol_llrs[..n])?;
        self.code.decode_bp(&chan, self.cfg.bp_max_iter)
    }

    fn outcome(&self, dec: DecodeResult, bp_iters: usize, id_iters_run: usize) -> RxOutcome {
        RxOutcome {
            message: self.code.extract_message(&dec.bits),
            codeword: dec.bits,
            converged: dec.converged,
            bp_iters,
            id_iters_run,
        }
    }

    /// Baseline receiver: Gaussian MAP demapping (variance per
    /// `cfg.map_variance`) followed by one BP decode.
    pub fn rx_map_bicm(&self, obs: &[SubcarrierObservation]) -> Result<RxOutcome> {
        let mut llrs = Vec::with_capacity(obs.len() * self.cfg.bits_per_symbol);
        for o in obs {
            let sigma_eff2 = match self.cfg.map_variance {
                MapVariance::NoiseOnly => o.sigma_n2,
                MapVariance::NoisePlusDistortion => o.sigma_n2 + self.clip.sigma_d2,
            };
            llrs.extend(demap_gaussian(o.y, sigma_eff2, self.clip.alpha, &self.constellation)?);
        }
        let dec = self.decode_code_bits(&llrs)?;
        let iters = dec.iters_used;
        Ok(self.outcome(dec, iters, 1))
    }

    /// Symbol-order bit LLRs for a whole frame from the first-stage network.
    fn first_pass_llrs(&self, obs: &[SubcarrierObservation], net1: &NeuralNet) -> Result<Vec<f64>> {
        if net1.output_dim() != self.constellation.order() {
            return Err(Error::NetOutputOrder {
                net: net1.output_dim(),
                constellation: self.constellation.order(),
            });
        }
        let mut llrs = Vec::with_capacity(obs.len() * self.cfg.bits_per_symbol);
        for o in obs {
            let probs = infer_likelihoods(net1, o)?;
            llrs.extend(demap_from_probs(&probs, &self.constellation)?);
        }
        Ok(llrs)
    }

    /// Network-aided BICM receiver: first-stage network demapper plus one
    /// BP decode. No decoder feedback.
    pub fn rx_nn_bicm(&self, obs: &[SubcarrierObservation], net1: &NeuralNet) -> Result<RxOutcome> {
        let dec = self.decode_code_bits(&self.first_pass_llrs(obs, net1)?)?;
        let iters = dec.iters_used;
        Ok(self.outcome(dec, iters, 1))
    }

    /// Per-symbol prior bit LLRs from decoder extrinsic output (code-bit
    /// order). Filler positions get a zero LLR: the receiver treats padding
    /// as unknown, which never touches code bits because a symbol's prior
    /// only involves that symbol's own bits.
    fn symbol_priors(&self, extrinsic: &[f64]) -> Result<Vec<f64>> {
        let mut sym = self.interleaver.apply(extrinsic)?;
        sym.resize(self.symbols_per_frame() * self.cfg.bits_per_symbol, 0.0);
        Ok(sym)
    }

    /// Iterative receiver: round 1 is the network BICM pass; every further
    /// round feeds the decoder extrinsic back as symbol priors, queries the
    /// second-stage network, removes the own-bit prior from its output, and
    /// runs a fresh BP decode. Stops early once the decoder converges.
    pub fn rx_nn_bicm_id(
        &self,
        obs: &[SubcarrierObservation],
        net1: &NeuralNet,
        net2: &NeuralNet,
    ) -> Result<RxOutcome> {
        let m = self.cfg.bits_per_symbol;
        let order = self.constellation.order();
        if self.cfg.id_iterations > 1 {
            if net2.output_dim() != order {
                return Err(Error::NetOutputOrder { net: net2.output_dim(), constellation: order });
            }
            if net2.input_dim() != 3 + order {
                return Err(Error::NetInput { expected: 3 + order, got: net2.input_dim() });
            }
        }
        let mut dec = self.decode_code_bits(&self.first_pass_llrs(obs, net1)?)?;
        let mut bp_iters = dec.iters_used;
        let mut rounds = 1;
        while rounds < self.cfg.id_iterations && !dec.converged {
            let priors = self.symbol_priors(&dec.extrinsic)?;
            let mut llrs = Vec::with_capacity(obs.len() * m);
            for (s, o) in obs.iter().enumerate() {
                let bit_priors = &priors[s * m..(s + 1) * m];
                let fed = SubcarrierObservation {
                    prior: Some(prior_pmf_from_llrs(bit_priors)),
                    ..o.clone()
                };
                let probs = infer_likelihoods(net2, &fed)?;
                llrs.extend(demap_extrinsic(&probs, bit_priors, &self.constellation)?);
            }
            dec = self.decode_code_bits(&llrs)?;
            bp_iters += dec.iters_used;
            rounds += 1;
        }
        Ok(self.outcome(dec, bp_iters, rounds))
    }

    /// Run one receiver on one frame generated from per-frame streams.
    fn sim_frame(
        &self,
        src: &RandomSource,
        frame: u64,
        sigma_n2: f64,
        rx: ReceiverSpec,
    ) -> Result<(TxFrame, RxOutcome)> {
        let tx = self.tx_frame(src, frame)?;
        let mut rng = src.indexed_stream("noise", frame);
        let obs = self.observe(&tx, sigma_n2, &mut rng)?;
        let out = match rx {
            ReceiverSpec::Map => self.rx_map_bicm(&obs)?,
            ReceiverSpec::Nn(net1) => self.rx_nn_bicm(&obs, net1)?,
            ReceiverSpec::NnId { net1, net2 } => self.rx_nn_bicm_id(&obs, net1, net2)?,
        };
        Ok((tx, out))
    }

    /// Supervised records for demapper training: one row per data
    /// subcarrier over `codewords` transmitted codewords at design Eb/N0
    /// `gamma_t_db`. For [`DatasetStage::Net2`] the rows also carry the
    /// prior PMF produced by running the first-stage receiver on the very
    /// same realizations, mirroring what the iterative receiver sees.
    pub fn gen_dataset(
        &self,
        src: &RandomSource,
        gamma_t_db: f64,
        codewords: usize,
        stage: DatasetStage,
        net1: Option<&NeuralNet>,
    ) -> Result<TrainingSet> {
        let sigma_n2 = self.noise_variance(gamma_t_db)?;
        let m = self.cfg.bits_per_symbol;
        let order = self.constellation.order();
        let d0 = match stage {
            DatasetStage::Net1 => 3,
            DatasetStage::Net2 => 3 + order,
        };
        let rows = codewords * self.symbols_per_frame();
        let mut inputs = Array2::zeros((rows, d0));
        let mut targets = Vec::with_capacity(rows);

        for cw in 0..codewords {
            let tx = self.tx_frame(src, cw as u64)?;
            let mut rng = src.indexed_stream("noise", cw as u64);
            let obs = self.observe(&tx, sigma_n2, &mut rng)?;
            let priors: Option<Vec<f64>> = match stage {
                DatasetStage::Net1 => None,
                DatasetStage::Net2 => {
                    let net1 = net1.ok_or_else(|| {
                        Error::Config("second-stage dataset needs a first-stage model".into())
                    })?;
                    let dec = self.decode_code_bits(&self.first_pass_llrs(&obs, net1)?)?;
                    Some(self.symbol_priors(&dec.extrinsic)?)
                }
            };
            for (s, o) in obs.iter().enumerate() {
                let row = cw * self.symbols_per_frame() + s;
                inputs[(row, 0)] = o.y.re;
                inputs[(row, 1)] = o.y.im;
                inputs[(row, 2)] = o.sigma_n2;
                if let Some(pr) = &priors {
                    let pmf = prior_pmf_from_llrs(&pr[s * m..(s + 1) * m]);
                    for (j, &p) in pmf.0.iter().enumerate() {
                        inputs[(row, 3 + j)] = p;
                    }
                }
                targets.push(tx.labels[s]);
            }
        }
        Ok(TrainingSet { inputs, targets })
    }

    /// Monte-Carlo BER/FER at one Eb/N0. Frames are independent and fully
    /// determined by (master seed, frame index), never by the receiver, so
    /// different receivers see identical channel realizations. Bit errors
    /// are counted on message bits.
    pub fn run_ber_point(
        &self,
        gamma_e_db: f64,
        frames: usize,
        rx: ReceiverSpec,
        src: &RandomSource,
    ) -> Result<BerPoint> {
        if frames == 0 {
            return Err(Error::Config("frame count must be >= 1".into()));
        }
        let sigma_n2 = self.noise_variance(gamma_e_db)?;
        let stats = (0..frames as u64)
            .into_par_iter()
            .map(|f| -> Result<(u64, u64, u64)> {
                let (tx, out) = self.sim_frame(src, f, sigma_n2, rx)?;
                let errs = tx
                    .message
                    .iter()
                    .zip(&out.message)
                    .filter(|(a, b)| a != b)
                    .count() as u64;
                Ok((errs, (errs > 0) as u64, out.bp_iters as u64))
            })
            .try_reduce(|| (0, 0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2)))?;

        let (bit_errors, frame_errors, bp_iters) = stats;
        let bits = (frames * self.code.k()) as u64;
        let (ci_low, ci_high) = wilson_interval(bit_errors, bits);
        Ok(BerPoint {
            gamma_e_db,
            frames,
            bit_errors,
            bits,
            frame_errors,
            ber: bit_errors as f64 / bits as f64,
            fer: frame_errors as f64 / frames as f64,
            ci_low,
            ci_high,
            mean_bp_iters: bp_iters as f64 / frames as f64,
        })
    }
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The bound is exact at the extremes; don't let rounding leak past it.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}
