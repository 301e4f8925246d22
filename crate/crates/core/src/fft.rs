//! Radix-2 complex FFT on power-of-two lengths, plus a row-major
//! multi-dimensional driver. Transforms are unnormalized.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

pub(crate) struct Fft {
    n: usize,
    // exp(-2 pi i k / n), k < n/2
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Fft {
    pub(crate) fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "fft length must be a power of two");
        let twiddles = (0..n / 2)
            .map(|k| {
                let t = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(t.cos(), t.sin())
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|k| if bits == 0 { 0 } else { k.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        Self { n, twiddles, bitrev }
    }

    /// In place; `inverse` flips the exponent sign, no 1/n factor.
    pub(crate) fn process(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(data.len(), n);
        for k in 0..n {
            let r = self.bitrev[k];
            if r > k {
                data.swap(k, r);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let mut w = self.twiddles[j * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + j];
                    let b = data[start + j + half] * w;
                    data[start + j] = a + b;
                    data[start + j + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

/// Transforms every axis of a row-major `n^d` array.
pub(crate) fn fft_nd(data: &mut [Complex64], d: usize, n: usize, inverse: bool) {
    debug_assert_eq!(data.len(), n.pow(d as u32));
    let plan = Fft::new(n);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                plan.process(&mut line, inverse);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
        let n = x.len();
        let s = if inverse { 1.0 } else { -1.0 };
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let t = s * 2.0 * PI * (j * k) as f64 / n as f64;
                        v * Complex64::new(t.cos(), t.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for n in [1usize, 2, 4, 8, 16, 32] {
            let x: Vec<Complex64> = (0..n)
                .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 1.3).cos()))
                .collect();
            for inverse in [false, true] {
                let mut y = x.clone();
                Fft::new(n).process(&mut y, inverse);
                let z = naive(&x, inverse);
                for (a, b) in y.iter().zip(&z) {
                    assert!((a - b).norm() < 1e-12, "n={n}");
                }
            }
        }
    }

    #[test]
    fn nd_roundtrip() {
        let (d, n) = (3, 8);
        let x: Vec<Complex64> = (0..n * n * n).map(|k| Complex64::new((k as f64).sin(), 0.0)).collect();
        let mut y = x.clone();
        fft_nd(&mut y, d, n, false);
        fft_nd(&mut y, d, n, true);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b / 512.0).norm() < 1e-12);
        }
    }
}
