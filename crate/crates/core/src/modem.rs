//! Gray-labelled square QAM, seeded bit interleaving, and the soft
//! demapping rules: Gaussian MAP LLRs, LLRs from an externally supplied
//! likelihood vector, and extrinsic LLRs with per-bit priors, plus the
//! feedback path converting bit LLRs into a symbol prior PMF.
//!
//! Conventions fixed here and used end-to-end: an LLR is
//! L = log p(bit = 1) / p(bit = 0); label bit b maps to the bipolar value
//! s = 2b - 1; bit m = 1 is the first transmitted bit and the most
//! significant bit of the point label.

use num_complex::Complex64;
use rand::Rng;

use crate::{clamp_llr, Error, Result};

/// Probability floor applied before any logarithm.
pub const PROB_FLOOR: f64 = 1e-30;

/// Square 2^M-QAM with independent reflected-Gray labelling per axis,
/// normalized to unit average energy. Point index equals its M-bit label.
#[derive(Debug, Clone)]
pub struct ConstellationSet {
    m_bits: usize,
    points: Vec<Complex64>,
    /// bit_sets[m][b] lists the point indices whose m-th bit equals b.
    bit_sets: Vec<[Vec<usize>; 2]>,
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

impl ConstellationSet {
    pub fn m_bits(&self) -> usize {
        self.m_bits
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// Point indices whose bit `m` (0-based, MSB first) equals `b`.
    pub fn bit_set(&self, m: usize, b: usize) -> &[usize] {
        &self.bit_sets[m][b]
    }

    /// Value of bit `m` (0-based, MSB first) in `label`.
    #[inline]
    pub fn label_bit(&self, label: usize, m: usize) -> usize {
        (label >> (self.m_bits - 1 - m)) & 1
    }
}

/// Build the Gray-labelled square constellation for even M in 2..=8.
pub fn build_constellation(m_bits: usize) -> Result<ConstellationSet> {
    if m_bits < 2 || m_bits > 8 || m_bits % 2 != 0 {
        return Err(Error::ModulationOrder(m_bits));
    }
    let half = m_bits / 2;
    let l = 1usize << half; // levels per axis
    // Ascending amplitude levels {-(l-1), ..., -1, 1, ..., l-1} scaled to
    // unit average symbol energy: E = 2 * (l^2 - 1) / 3.
    let norm = (2.0 * ((l * l - 1) as f64) / 3.0).sqrt();
    let levels: Vec<f64> = (0..l).map(|i| (2.0 * i as f64 - (l - 1) as f64) / norm).collect();

    let order = 1usize << m_bits;
    let mut points = Vec::with_capacity(order);
    for label in 0..order {
        let gi = label >> half;
        let gq = label & (l - 1);
        let re = levels[gray_decode(gi)];
        let im = levels[gray_decode(gq)];
        points.push(Complex64::new(re, im));
    }

    let mut bit_sets = Vec::with_capacity(m_bits);
    for m in 0..m_bits {
        let mut sets = [Vec::new(), Vec::new()];
        for label in 0..order {
            let b = (label >> (m_bits - 1 - m)) & 1;
            sets[b].push(label);
        }
        bit_sets.push(sets);
    }
    Ok(ConstellationSet { m_bits, points, bit_sets })
}

/// Map a bit sequence (length divisible by M) onto constellation points,
/// M consecutive bits per symbol, first bit most significant.
pub fn map_bits(bits: &[u8], c: &ConstellationSet) -> Result<Vec<Complex64>> {
    if bits.len() % c.m_bits != 0 {
        return Err(Error::BitGrouping { m: c.m_bits, got: bits.len() });
    }
    Ok(bits
        .chunks_exact(c.m_bits)
        .map(|group| {
            let label = group.iter().fold(0usize, |acc, &b| (acc << 1) | (b as usize & 1));
            c.points[label]
        })
        .collect())
}

/// Seeded uniform random permutation acting as the quasi-random bit
/// interleaver. The same seed must be used at transmitter and receiver.
#[derive(Debug, Clone)]
pub struct Interleaver {
    perm: Vec<usize>,
    inv: Vec<usize>,
}

impl Interleaver {
    /// Fisher-Yates shuffle driven by the supplied generator.
    pub fn random<R: Rng>(len: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        for i in (1..len).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        Self::from_permutation(perm)
    }

    pub fn identity(len: usize) -> Self {
        Self::from_permutation((0..len).collect())
    }

    fn from_permutation(perm: Vec<usize>) -> Self {
        let mut inv = vec![0usize; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        Interleaver { perm, inv }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Interleave: output position i carries input position perm[i].
    pub fn apply<T: Copy>(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.perm.len() {
            return Err(Error::InterleaverLength { expected: self.perm.len(), got: x.len() });
        }
        Ok(self.perm.iter().map(|&p| x[p]).collect())
    }

    /// Deinterleave: inverse of [`Interleaver::apply`].
    pub fn invert<T: Copy>(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.inv.len() {
            return Err(Error::InterleaverLength { expected: self.inv.len(), got: y.len() });
        }
        Ok(self.inv.iter().map(|&p| y[p]).collect())
    }
}

fn logsumexp(vals: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = vals.collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Gaussian MAP bit LLRs for one received subcarrier value:
/// L^m = log sum_{points with bit m = 1} exp(-|y - alpha s|^2 / sigma_eff2)
///     - log sum_{points with bit m = 0} exp(...).
///
/// `sigma_eff2` is the effective complex noise variance; callers choose
/// whether it contains only the AWGN power or AWGN plus clipping-distortion
/// power.
pub fn demap_gaussian(
    y: Complex64,
    sigma_eff2: f64,
    alpha: f64,
    c: &ConstellationSet,
) -> Result<Vec<f64>> {
    if !(sigma_eff2 > 0.0) {
        return Err(Error::NonPositiveVariance(sigma_eff2));
    }
    let log_kernel: Vec<f64> =
        c.points.iter().map(|&s| -(y - s * alpha).norm_sqr() / sigma_eff2).collect();
    Ok((0..c.m_bits)
        .map(|m| {
            let num = logsumexp(c.bit_set(m, 1).iter().map(|&j| log_kernel[j]));
            let den = logsumexp(c.bit_set(m, 0).iter().map(|&j| log_kernel[j]));
            clamp_llr(num - den)
        })
        .collect())
}

/// Bit LLRs from an explicit likelihood vector p(y | s_j), one entry per
/// constellation point. Entries are floored at [`PROB_FLOOR`]; an all-zero
/// vector is rejected.
pub fn demap_from_probs(probs: &[f64], c: &ConstellationSet) -> Result<Vec<f64>> {
    if probs.len() != c.order() {
        return Err(Error::DimensionMismatch { expected: c.order(), got: probs.len() });
    }
    if probs.iter().all(|&p| p <= 0.0) {
        return Err(Error::ZeroProbabilityMass);
    }
    let logp: Vec<f64> = probs.iter().map(|&p| p.max(PROB_FLOOR).ln()).collect();
    Ok((0..c.m_bits)
        .map(|m| {
            let num = logsumexp(c.bit_set(m, 1).iter().map(|&j| logp[j]));
            let den = logsumexp(c.bit_set(m, 0).iter().map(|&j| logp[j]));
            clamp_llr(num - den)
        })
        .collect())
}

/// Stable log(1 + e^x).
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Extrinsic bit LLRs: likelihoods weighted by the priors of every bit
/// except the one being demapped,
/// L_E^m = log [sum_{bit m = 1} p(y|s) prod_{m' != m} p(s^{m'})] - log [...].
///
/// `bit_priors` are LLRs L_A (clamped to +/-LLR_MAX); a zero prior vector
/// reduces exactly to [`demap_from_probs`].
pub fn demap_extrinsic(
    probs: &[f64],
    bit_priors: &[f64],
    c: &ConstellationSet,
) -> Result<Vec<f64>> {
    if probs.len() != c.order() {
        return Err(Error::DimensionMismatch { expected: c.order(), got: probs.len() });
    }
    if bit_priors.len() != c.m_bits {
        return Err(Error::DimensionMismatch { expected: c.m_bits, got: bit_priors.len() });
    }
    if probs.iter().all(|&p| p <= 0.0) {
        return Err(Error::ZeroProbabilityMass);
    }
    let priors: Vec<f64> = bit_priors.iter().map(|&l| clamp_llr(l)).collect();
    // log p(bit m of label j) = -softplus(-s * L_m), s = +/-1 for bit 1/0.
    let log_bit = |label: usize, m: usize| -> f64 {
        let s = if c.label_bit(label, m) == 1 { 1.0 } else { -1.0 };
        -softplus(-s * priors[m])
    };
    // Total prior log-mass per label, own-bit term divided out per bit m.
    let totals: Vec<f64> = (0..c.order())
        .map(|j| probs[j].max(PROB_FLOOR).ln() + (0..c.m_bits).map(|m| log_bit(j, m)).sum::<f64>())
        .collect();
    Ok((0..c.m_bits)
        .map(|m| {
            let num = logsumexp(c.bit_set(m, 1).iter().map(|&j| totals[j] - log_bit(j, m)));
            let den = logsumexp(c.bit_set(m, 0).iter().map(|&j| totals[j] - log_bit(j, m)));
            clamp_llr(num - den)
        })
        .collect())
}

/// Symbol prior PMF over 2^M labels from M per-bit LLRs:
/// p(label) = prod_m (1 + tanh(L_m / 2) * s_m) / 2 with s_m = 2 b_m - 1.
/// Inputs are clamped to +/-LLR_MAX; the output sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorPmf(pub Vec<f64>);

impl PriorPmf {
    pub fn uniform(order: usize) -> Self {
        PriorPmf(vec![1.0 / order as f64; order])
    }
}

pub fn prior_pmf_from_llrs(bit_llrs: &[f64]) -> PriorPmf {
    let m_bits = bit_llrs.len();
    let half_tanh: Vec<f64> =
        bit_llrs.iter().map(|&l| (clamp_llr(l) / 2.0).tanh()).collect();
    let order = 1usize << m_bits;
    let pmf = (0..order)
        .map(|label| {
            (0..m_bits)
                .map(|m| {
                    let s = if (label >> (m_bits - 1 - m)) & 1 == 1 { 1.0 } else { -1.0 };
                    0.5 * (1.0 + half_tanh[m] * s)
                })
                .product()
        })
        .collect();
    PriorPmf(pmf)
}
