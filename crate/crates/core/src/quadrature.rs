//! Adaptive Gauss-Legendre quadrature on finite intervals.

use alloc::vec::Vec;
use core::f64::consts::PI;

const ORDER: usize = 15;
const MAX_DEPTH: u32 = 40;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// found by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n(x) and P_{n-1}(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Reusable rule; [`Quadrature::integrate`] subdivides until the rule on an
/// interval agrees with the sum over its two halves.
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for Quadrature {
    fn default() -> Self {
        let (nodes, weights) = gauss_legendre(ORDER);
        Self { nodes, weights }
    }
}

impl Quadrature {
    fn rule(&self, f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }

    /// Integral of `f` over `[a, b]` to absolute tolerance `tol`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        let whole = self.rule(&mut f, a, b);
        self.refine(&mut f, a, b, whole, tol, 0)
    }

    fn refine(&self, f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = self.rule(f, a, m);
        let right = self.rule(f, m, b);
        if (left + right - whole).abs() <= tol || depth >= MAX_DEPTH {
            return left + right;
        }
        self.refine(f, a, m, left, 0.5 * tol, depth + 1) + self.refine(f, m, b, right, 0.5 * tol, depth + 1)
    }
}

pub fn integrate(f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    Quadrature::default().integrate(f, a, b, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(ORDER);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        for k in 0..2 * ORDER {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
            let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert_abs_diff_eq!(got, want, epsilon = 1e-13);
        }
    }

    #[test]
    fn adaptive_examples() {
        assert_abs_diff_eq!(integrate(|x| x.sin(), 0.0, PI, 1e-13), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(integrate(|x| x.sqrt(), 0.0, 1.0, 1e-12), 2.0 / 3.0, epsilon = 1e-11);
        assert_abs_diff_eq!(integrate(|x| (50.0 * x).cos(), 0.0, 1.0, 1e-13), 50f64.sin() / 50.0, epsilon = 1e-12);
    }
}
