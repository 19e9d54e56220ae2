//! Hermitian-symmetric OFDM framing, DC bias with double-sided clipping,
//! and the closed-form clipping analytics (Bussgang attenuation, electrical
//! power, distortion power).

use num_complex::Complex64;

use crate::math::{dft, gauss_pdf, q_function, DftDirection};
use crate::{Error, Result};

/// Frequency-domain OFDM frame with Hermitian symmetry: S_0 = S_{N/2} = 0
/// and S_k = conj(S_{N-k}), so the time-domain signal is real. Data rides
/// on subcarriers 1 ..= N/2 - 1.
#[derive(Debug, Clone)]
pub struct OfdmFrame {
    pub n: usize,
    pub freq: Vec<Complex64>,
}

impl OfdmFrame {
    /// Indices of the independent data subcarriers.
    pub fn data_indices(n: usize) -> std::ops::Range<usize> {
        1..n / 2
    }

    /// Number of data subcarriers for FFT size `n`.
    pub fn data_count(n: usize) -> usize {
        n / 2 - 1
    }
}

/// Build the Hermitian frame carrying `symbols` on subcarriers 1..N/2-1.
pub fn frame_subcarriers(symbols: &[Complex64], n: usize) -> Result<OfdmFrame> {
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::DftLength(n));
    }
    let expected = OfdmFrame::data_count(n);
    if symbols.len() != expected {
        return Err(Error::FrameSymbolCount { n, expected, got: symbols.len() });
    }
    let mut freq = vec![Complex64::new(0.0, 0.0); n];
    for (i, &s) in symbols.iter().enumerate() {
        let k = i + 1;
        freq[k] = s;
        freq[n - k] = s.conj();
    }
    Ok(OfdmFrame { n, freq })
}

/// Inverse transform to the real time-domain signal. Fails if the residual
/// imaginary part exceeds 1e-10 (the frame was not Hermitian).
pub fn to_time(frame: &OfdmFrame) -> Result<Vec<f64>> {
    let t = dft(&frame.freq, DftDirection::Inverse)?;
    let worst = t.iter().map(|v| v.im.abs()).fold(0.0f64, f64::max);
    if worst >= 1e-10 {
        return Err(Error::NotHermitian(worst));
    }
    Ok(t.into_iter().map(|v| v.re).collect())
}

/// Static description of the bias-and-clip front end plus every derived
/// quantity the analytics need. All fields are in amplitude units of the
/// unclipped time-domain signal whose standard deviation is `sigma_s`.
#[derive(Debug, Clone, Copy)]
pub struct ClippingParams {
    pub sigma_s: f64,
    pub omega_b: f64,
    pub omega_t: f64,
    /// DC bias added before clipping.
    pub mu: f64,
    pub phi_b: f64,
    pub phi_t: f64,
    pub phi: f64,
    /// Normalized clip distances delta = phi_clip - phi.
    pub delta_b: f64,
    pub delta_t: f64,
    pub alpha: f64,
    /// Electrical power of the biased-and-clipped signal measured about the
    /// bias point, E[(clip(s + mu) - mu)^2].
    pub p_e: f64,
    /// Clipping-distortion power per time-domain sample.
    pub sigma_d2: f64,
}

impl ClippingParams {
    pub fn new(sigma_s: f64, omega_b: f64, omega_t: f64, mu: f64) -> Result<Self> {
        if !(omega_b < omega_t) {
            return Err(Error::ClipLevels { bottom: omega_b, top: omega_t });
        }
        if !(sigma_s > 0.0) {
            return Err(Error::NonPositiveVariance(sigma_s * sigma_s));
        }
        let phi_b = omega_b / sigma_s;
        let phi_t = omega_t / sigma_s;
        let phi = mu / sigma_s;
        let delta_b = phi_b - phi;
        let delta_t = phi_t - phi;
        let mut p = ClippingParams {
            sigma_s,
            omega_b,
            omega_t,
            mu,
            phi_b,
            phi_t,
            phi,
            delta_b,
            delta_t,
            alpha: 0.0,
            p_e: 0.0,
            sigma_d2: 0.0,
        };
        p.alpha = bussgang_alpha(&p);
        p.p_e = electrical_power(&p);
        p.sigma_d2 = distortion_power(&p);
        Ok(p)
    }

    /// Standard front end: bottom clip at zero, top clip from the dB
    /// clipping level, bias at the midpoint of the dynamic range.
    pub fn from_clipping_level(psi_db: f64, sigma_s: f64) -> Result<Self> {
        let omega_b = 0.0;
        let omega_t = omega_top_from_clipping_level(psi_db, sigma_s);
        let mu = dc_bias_midpoint(omega_b, omega_t)?;
        ClippingParams::new(sigma_s, omega_b, omega_t, mu)
    }
}

/// Analytic time-domain signal variance: unit-energy symbols on N/2 - 1
/// carriers under the unitary transform give sigma_s^2 = (N - 2) / N.
pub fn analytic_sigma_s2(n: usize) -> f64 {
    (n as f64 - 2.0) / n as f64
}

/// Add the DC bias and clip to the dynamic range [omega_b, omega_t].
pub fn bias_and_clip(s: &[f64], p: &ClippingParams) -> Vec<f64> {
    s.iter()
        .map(|&x| {
            if x <= p.omega_b - p.mu {
                p.omega_b
            } else if x <= p.omega_t - p.mu {
                x + p.mu
            } else {
                p.omega_t
            }
        })
        .collect()
}

/// Bussgang attenuation factor alpha = Q(delta_b) - Q(delta_t).
pub fn bussgang_alpha(p: &ClippingParams) -> f64 {
    q_function(p.delta_b) - q_function(p.delta_t)
}

/// Electrical power of the clipped signal about the bias point:
/// sigma_s^2 * (Q(d_b) - Q(d_t) + d_b g(d_b) - d_t g(d_t)
///              + d_b^2 Q(-d_b) + d_t^2 Q(d_t)).
pub fn electrical_power(p: &ClippingParams) -> f64 {
    let (db, dt) = (p.delta_b, p.delta_t);
    p.sigma_s
        * p.sigma_s
        * (q_function(db) - q_function(dt) + db * gauss_pdf(db) - dt * gauss_pdf(dt)
            + db * db * q_function(-db)
            + dt * dt * q_function(dt))
}

/// Mean of the clipped normalized signal about the bias point,
/// E[clip(X; d_b, d_t)] for X ~ N(0, 1).
fn clipped_mean_normalized(p: &ClippingParams) -> f64 {
    let (db, dt) = (p.delta_b, p.delta_t);
    db * (1.0 - q_function(db)) + gauss_pdf(db) - gauss_pdf(dt) + dt * q_function(dt)
}

/// Clipping-distortion power sigma_d^2 = Var(clipped) - alpha^2 sigma_s^2,
/// with Var(clipped) = p_e - (mean about bias)^2. Floored at zero against
/// cancellation error in the no-clipping limit.
pub fn distortion_power(p: &ClippingParams) -> f64 {
    let m = clipped_mean_normalized(p) * p.sigma_s;
    let var_clipped = electrical_power(p) - m * m;
    let alpha = bussgang_alpha(p);
    (var_clipped - alpha * alpha * p.sigma_s * p.sigma_s).max(0.0)
}

/// Top clip level from the dB clipping level: omega_t = sigma_s * 10^(psi/20),
/// i.e. psi = 10 log10(omega_t^2 / sigma_s^2).
pub fn omega_top_from_clipping_level(psi_db: f64, sigma_s: f64) -> f64 {
    sigma_s * 10f64.powf(psi_db / 20.0)
}

/// Midpoint DC bias mu = (omega_b + omega_t) / 2.
pub fn dc_bias_midpoint(omega_b: f64, omega_t: f64) -> Result<f64> {
    if !(omega_b < omega_t) {
        return Err(Error::ClipLevels { bottom: omega_b, top: omega_t });
    }
    Ok(0.5 * (omega_b + omega_t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(delta_b: f64, delta_t: f64) -> ClippingParams {
        // sigma_s = 1, bias 0, clip levels directly at the deltas.
        ClippingParams::new(1.0, delta_b, delta_t, 0.0).unwrap()
    }

    #[test]
    fn frame_construction_small() {
        let f = frame_subcarriers(&[Complex64::new(1.0, 0.0)], 4).unwrap();
        assert_eq!(f.freq[0], Complex64::new(0.0, 0.0));
        assert_eq!(f.freq[1], Complex64::new(1.0, 0.0));
        assert_eq!(f.freq[2], Complex64::new(0.0, 0.0));
        assert_eq!(f.freq[3], Complex64::new(1.0, 0.0));
        assert!(frame_subcarriers(&[Complex64::new(1.0, 0.0); 2], 4).is_err());
    }

    #[test]
    fn frame_is_conjugate_symmetric() {
        let syms: Vec<Complex64> =
            (0..3).map(|i| Complex64::new(i as f64 + 0.5, -(i as f64))).collect();
        let f = frame_subcarriers(&syms, 8).unwrap();
        for k in 1..8 {
            assert_eq!(f.freq[k], f.freq[8 - k].conj());
        }
        assert_eq!(f.freq[4], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn to_time_two_tone() {
        let f = frame_subcarriers(&[Complex64::new(1.0, 0.0)], 4).unwrap();
        let t = to_time(&f).unwrap();
        let expect = [1.0, 0.0, -1.0, 0.0];
        for (got, want) in t.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn to_time_rejects_non_hermitian() {
        let frame = OfdmFrame {
            n: 4,
            freq: vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.5, 0.0),
            ],
        };
        assert!(matches!(to_time(&frame), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn bias_and_clip_branches() {
        let p = ClippingParams::new(1.0, 0.0, 2.0, 1.0).unwrap();
        let out = bias_and_clip(&[0.3, -1.5, 1.2], &p);
        assert_eq!(out, vec![1.3, 0.0, 2.0]);
    }

    #[test]
    fn clip_output_stays_in_range() {
        let p = ClippingParams::from_clipping_level(6.0, 1.0).unwrap();
        let xs: Vec<f64> = (-100..100).map(|i| i as f64 / 10.0).collect();
        for y in bias_and_clip(&xs, &p) {
            assert!(y >= p.omega_b && y <= p.omega_t);
        }
    }

    #[test]
    fn alpha_reference_values() {
        assert!((params(-1.0, 1.0).alpha - 0.6826894921370859).abs() < 1e-12);
        assert!((params(-1.5, 1.5).alpha - 0.8663855974622839).abs() < 1e-12);
        assert!(params(-40.0, 40.0).alpha - 1.0 == 0.0);
        assert!(params(-1e-12, 1e-12).alpha.abs() < 1e-9);
    }

    #[test]
    fn electrical_power_reference_values() {
        assert!((params(-1.0, 1.0).p_e - 0.5160585509617133).abs() < 1e-12);
        assert!((params(-1.5, 1.5).p_e - 0.7784652161744700).abs() < 1e-12);
        assert!((params(-40.0, 40.0).p_e - 1.0).abs() < 1e-15);
        // Homogeneity in sigma_s: same deltas, scaled amplitude.
        let scaled = ClippingParams::new(3.0, -3.0, 3.0, 0.0).unwrap();
        assert!((scaled.p_e - 9.0 * params(-1.0, 1.0).p_e).abs() < 1e-12);
    }

    #[test]
    fn distortion_power_reference_values() {
        assert!((params(-1.0, 1.0).sigma_d2 - 0.04999360828732103).abs() < 1e-12);
        assert!((params(-3.0, 3.0).sigma_d2 - 3.9958126219065226e-4).abs() < 1e-12);
        assert_eq!(params(-40.0, 40.0).sigma_d2, 0.0);
        // Asymmetric clip exercises the nonzero-mean branch.
        let asym = ClippingParams::new(1.0, -0.5, 2.0, 0.0).unwrap();
        let m = clipped_mean_normalized(&asym);
        assert!((m - 0.18930585478447639).abs() < 1e-12);
        let expect = 0.55283264539152161 - m * m - asym.alpha * asym.alpha;
        assert!((asym.sigma_d2 - expect).abs() < 1e-12);
    }

    #[test]
    fn clipping_level_calibration() {
        assert!((omega_top_from_clipping_level(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((omega_top_from_clipping_level(9.0, 1.0) - 2.8183829312644538).abs() < 1e-12);
        assert!((omega_top_from_clipping_level(11.0, 1.0) - 3.5481338923357546).abs() < 1e-12);
        assert_eq!(dc_bias_midpoint(0.0, 2.0).unwrap(), 1.0);
        assert_eq!(dc_bias_midpoint(-1.5, 1.5).unwrap(), 0.0);
        assert!(dc_bias_midpoint(2.0, 0.0).is_err());
    }

    #[test]
    fn standard_front_end_is_symmetric_about_bias() {
        // With omega_b = 0 and midpoint bias, the normalized clip distances
        // are symmetric, so the clipped mean stays at the bias.
        let p = ClippingParams::from_clipping_level(9.0, analytic_sigma_s2(64).sqrt()).unwrap();
        assert!((p.delta_b + p.delta_t).abs() < 1e-12);
        assert!(clipped_mean_normalized(&p).abs() < 1e-15);
        assert!((p.alpha - 0.8412214393717271).abs() < 1e-12);
        assert!((p.p_e - 0.7168273661821038).abs() < 1e-12);
    }

    #[test]
    fn analytic_signal_variance() {
        assert!((analytic_sigma_s2(64) - 62.0 / 64.0).abs() < 1e-15);
        assert!((analytic_sigma_s2(4) - 0.5).abs() < 1e-15);
    }
}
