//! Gaussian tail functions and the unitary discrete Fourier transform.

use num_complex::Complex64;

use crate::{Error, Result};

/// Upper-tail probability Q(x) of the standard normal distribution.
///
/// Computed through the complementary error function, accurate to machine
/// precision over the whole real line.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal density g(x) = exp(-x^2/2) / sqrt(2*pi).
pub fn gauss_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Transform direction for [`dft`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DftDirection {
    Forward,
    Inverse,
}

/// Unitary radix-2 DFT: 1/sqrt(N) scaling in both directions, so forward
/// and inverse are mutual inverses and Parseval holds without extra
/// factors. Length must be a power of two.
pub fn dft(input: &[Complex64], direction: DftDirection) -> Result<Vec<Complex64>> {
    let n = input.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::DftLength(n));
    }
    let mut buf = input.to_vec();
    if n == 1 {
        return Ok(buf);
    }

    // Iterative Cooley-Tukey: bit-reversal permutation, then butterflies.
    let levels = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - levels)) as usize;
        if j > i {
            buf.swap(i, j);
        }
    }

    let sign = match direction {
        DftDirection::Forward => -1.0,
        DftDirection::Inverse => 1.0,
    };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let wlen = Complex64::from_polar(1.0, ang);
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let a = buf[start + k];
                let b = buf[start + k + len / 2] * w;
                buf[start + k] = a + b;
                buf[start + k + len / 2] = a - b;
                w *= wlen;
            }
        }
        len <<= 1;
    }

    let scale = 1.0 / (n as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    Ok(buf)
}
