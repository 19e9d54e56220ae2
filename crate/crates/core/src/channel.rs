//! AWGN channel calibrated in electrical Eb/N0 and the receiver-side
//! transform back to per-subcarrier observations.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math::{dft, DftDirection};
use crate::modem::PriorPmf;
use crate::ofdm::OfdmFrame;
use crate::{Error, Result};

/// One received data subcarrier: the frequency-domain value, the AWGN
/// variance the receiver assumes, and (for iterative receivers) an optional
/// symbol prior PMF fed back from the decoder.
#[derive(Debug, Clone)]
pub struct SubcarrierObservation {
    pub y: Complex64,
    pub sigma_n2: f64,
    pub prior: Option<PriorPmf>,
}

/// Per-complex-subcarrier noise variance from the electrical Eb/N0:
/// sigma_n^2 = P_e / (2 * epsilon * M * R * 10^(gamma_e/10)), where
/// epsilon = 1/2 - 1/N is the bandwidth utilization of Hermitian OFDM.
pub fn noise_variance(
    gamma_e_db: f64,
    p_e: f64,
    epsilon: f64,
    m_bits: usize,
    rate: f64,
) -> Result<f64> {
    if !(p_e > 0.0) {
        return Err(Error::NonPositiveVariance(p_e));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::Config(format!("bandwidth utilization {epsilon} outside (0, 0.5)")));
    }
    if m_bits == 0 || !(rate > 0.0) {
        return Err(Error::Config("bits per symbol and code rate must be positive".into()));
    }
    Ok(p_e / (2.0 * epsilon * m_bits as f64 * rate * 10f64.powf(gamma_e_db / 10.0)))
}

/// Bandwidth utilization factor of Hermitian-symmetric OFDM.
pub fn bandwidth_utilization(n: usize) -> f64 {
    0.5 - 1.0 / n as f64
}

/// Add real white Gaussian noise in the time domain. Because the transform
/// is unitary, a time-domain variance of `sigma_n2` yields exactly
/// `sigma_n2` of complex noise power per frequency-domain subcarrier.
pub fn transmit<R: Rng>(clipped: &[f64], sigma_n2_time: f64, rng: &mut R) -> Vec<f64> {
    if sigma_n2_time == 0.0 {
        return clipped.to_vec();
    }
    let sd = sigma_n2_time.sqrt();
    clipped
        .iter()
        .map(|&x| x + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

/// Forward transform of one received time-domain symbol and extraction of
/// the data subcarriers k = 1 ..= N/2 - 1 (DC, Nyquist, and the conjugate
/// half are dropped).
pub fn receive_subcarriers(
    y_time: &[f64],
    n: usize,
    sigma_n2: f64,
) -> Result<Vec<SubcarrierObservation>> {
    if y_time.len() != n {
        return Err(Error::TimeLength { expected: n, got: y_time.len() });
    }
    let buf: Vec<Complex64> = y_time.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let freq = dft(&buf, DftDirection::Forward)?;
    Ok(OfdmFrame::data_indices(n)
        .map(|k| SubcarrierObservation { y: freq[k], sigma_n2, prior: None })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{frame_subcarriers, to_time};
    use crate::rng::RandomSource;

    #[test]
    fn noise_variance_reference() {
        // P_e = 1, N = 64 (epsilon = 31/64), M = 4, R = 1/2, 13 dB.
        let v = noise_variance(13.0, 1.0, 31.0 / 64.0, 4, 0.5).unwrap();
        assert!((v - 0.025867728187214053).abs() < 1e-12);
        // Algebraic inversion: gamma chosen so the denominator is P_e.
        let p_e: f64 = 0.7168273661821038;
        let gamma = 10.0 * (p_e / (2.0 * (31.0 / 64.0) * 4.0 * 0.5)).log10();
        assert!((noise_variance(gamma, p_e, 31.0 / 64.0, 4, 0.5).unwrap() - 1.0).abs() < 1e-12);
        // Linearity in P_e.
        let double = noise_variance(13.0, 2.0, 31.0 / 64.0, 4, 0.5).unwrap();
        assert!((double - 2.0 * v).abs() < 1e-15);
        assert!(noise_variance(13.0, 0.0, 31.0 / 64.0, 4, 0.5).is_err());
    }

    #[test]
    fn zero_variance_is_identity() {
        let mut rng = RandomSource::new(1).stream("noise");
        let x = vec![0.5, -1.0, 2.0];
        assert_eq!(transmit(&x, 0.0, &mut rng), x);
    }

    #[test]
    fn noise_is_reproducible_and_calibrated() {
        let src = RandomSource::new(3);
        let x = vec![0.0; 1_000_000];
        let a = transmit(&x, 0.25, &mut src.stream("noise"));
        let b = transmit(&x, 0.25, &mut src.stream("noise"));
        assert_eq!(a, b);
        let var = a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64;
        assert!((var - 0.25).abs() / 0.25 < 0.01, "empirical variance {var}");
    }

    #[test]
    fn round_trip_recovers_symbols() {
        let src = RandomSource::new(7);
        let mut rng = src.stream("data");
        let n = 64;
        let syms: Vec<Complex64> = (0..n / 2 - 1)
            .map(|_| {
                Complex64::new(
                    rng.random_range(-1.0..1.0f64),
                    rng.random_range(-1.0..1.0f64),
                )
            })
            .collect();
        let frame = frame_subcarriers(&syms, n).unwrap();
        let t = to_time(&frame).unwrap();
        let obs = receive_subcarriers(&t, n, 1e-3).unwrap();
        assert_eq!(obs.len(), n / 2 - 1);
        for (o, s) in obs.iter().zip(&syms) {
            assert!((o.y - s).norm() < 1e-9);
            assert!(o.prior.is_none());
        }
        assert!(receive_subcarriers(&t[..10], n, 1e-3).is_err());
    }

    #[test]
    fn dc_bias_does_not_touch_data_subcarriers() {
        let src = RandomSource::new(11);
        let mut rng = src.stream("data");
        let n = 16;
        let syms: Vec<Complex64> = (0..n / 2 - 1)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0f64), rng.random_range(-1.0..1.0f64)))
            .collect();
        let t = to_time(&frame_subcarriers(&syms, n).unwrap()).unwrap();
        let biased: Vec<f64> = t.iter().map(|&x| x + 1.4).collect();
        let plain = receive_subcarriers(&t, n, 1.0).unwrap();
        let shifted = receive_subcarriers(&biased, n, 1.0).unwrap();
        for (a, b) in plain.iter().zip(&shifted) {
            assert!((a.y - b.y).norm() < 1e-9);
        }
    }

    #[test]
    fn frequency_noise_moments_match() {
        // Real time-domain noise of variance s2 lands on each data
        // subcarrier as circular complex noise of total variance s2.
        let src = RandomSource::new(5);
        let n = 64;
        let s2 = 0.04;
        let mut re_pow = 0.0;
        let mut im_pow = 0.0;
        let mut cross = 0.0;
        let mut count = 0usize;
        for i in 0..2000u64 {
            let mut rng = src.indexed_stream("noise", i);
            let y = transmit(&vec![0.0; n], s2, &mut rng);
            for o in receive_subcarriers(&y, n, s2).unwrap() {
                re_pow += o.y.re * o.y.re;
                im_pow += o.y.im * o.y.im;
                cross += o.y.re * o.y.im;
                count += 1;
            }
        }
        let (re_pow, im_pow, cross) =
            (re_pow / count as f64, im_pow / count as f64, cross / count as f64);
        assert!((re_pow - s2 / 2.0).abs() / (s2 / 2.0) < 0.02, "re power {re_pow}");
        assert!((im_pow - s2 / 2.0).abs() / (s2 / 2.0) < 0.02, "im power {im_pow}");
        assert!(cross.abs() < 0.02 * s2, "cross moment {cross}");
    }
}
