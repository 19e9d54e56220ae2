//! Link-level simulator core for LDPC-coded DCO-OFDM with double-sided
//! clipping.
//!
//! The crate provides the full transmit chain (LDPC encoding, bit
//! interleaving, Gray-labelled QAM, Hermitian OFDM framing, DC bias and
//! clipping), an AWGN channel calibrated in electrical Eb/N0, and three
//! receivers: a Gaussian MAP BICM baseline, a neural-network-aided BICM
//! receiver, and a stacked-network BICM-ID receiver with decoder feedback.
//! Neural networks (tanh hidden layers, softmax output) are trained from
//! scratch with backpropagation and a scaled-conjugate-gradient optimizer.

pub mod channel;
pub mod config;
pub mod ldpc;
pub mod math;
pub mod modem;
pub mod nn;
pub mod ofdm;
pub mod receiver;
pub mod rng;

/// Hard clamp applied to every log-likelihood ratio in the system
/// (demapper outputs, decoder messages, feedback priors).
pub const LLR_MAX: f64 = 30.0;

/// Clamp an LLR to the global [-LLR_MAX, LLR_MAX] range.
#[inline]
pub fn clamp_llr(l: f64) -> f64 {
    l.clamp(-LLR_MAX, LLR_MAX)
}

/// Errors produced by the simulation core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dft length {0} is not a power of two")]
    DftLength(usize),
    #[error("expected {expected} symbols for FFT size {n}, got {got}")]
    FrameSymbolCount { n: usize, expected: usize, got: usize },
    #[error("time-domain vector has length {got}, expected {expected}")]
    TimeLength { expected: usize, got: usize },
    #[error("residual imaginary part {0:.3e} exceeds tolerance; frame is not Hermitian")]
    NotHermitian(f64),
    #[error("clip levels inverted: bottom {bottom} >= top {top}")]
    ClipLevels { bottom: f64, top: f64 },
    #[error("bits per symbol must be even and in 2..=8, got {0}")]
    ModulationOrder(usize),
    #[error("bit sequence length {got} is not divisible by {m}")]
    BitGrouping { m: usize, got: usize },
    #[error("sequence length {got} does not match interleaver length {expected}")]
    InterleaverLength { expected: usize, got: usize },
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("probability vector sums to zero")]
    ZeroProbabilityMass,
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("alist parse error at line {line}: {reason}")]
    AlistParse { line: usize, reason: String },
    #[error("message length {got} does not match code dimension {expected}")]
    MessageLength { expected: usize, got: usize },
    #[error("LLR vector length {got} does not match code length {expected}")]
    LlrLength { expected: usize, got: usize },
    #[error("network input length {got} does not match input layer {expected}")]
    NetInput { expected: usize, got: usize },
    #[error("model file error: {0}")]
    Model(String),
    #[error("network output size {net} does not match constellation order {constellation}")]
    NetOutputOrder { net: usize, constellation: usize },
    #[error("observation carries no prior PMF but the network expects one")]
    MissingPrior,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged: loss became non-finite at epoch {0}")]
    TrainingDiverged(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
