//! Fourier analysis on the torus grid.
//!
//! Coefficients use the convention `c(m) = N^-d sum_k v(k) exp(-2 pi i m.k/N)`
//! with `m` in `{-N/2, ..., N/2-1}^d`, so `c(0)` is the grid mean and a field
//! is recovered as `v(x) = sum_m c(m) exp(2 pi i m.x)`.
//!
//! Besides the transforms this module carries the multiplier operator with
//! symbol `a(m) = 1/|m|_1` and the computable versions of the negative Sobolev
//! norm `sup { int phi psi : ||grad psi||_{p*} <= 1 }`:
//!
//! * [`sobolev_neg_norm_exact_p2`]: the exact value at `p = 2` (Parseval).
//! * [`riesz_surrogate_norm`]: `||A phi||_p`, equivalent up to constants.
//! * [`beckmann_upper_bound`]: the cost of the feasible flux `grad Laplacian^-1 phi`.
//! * [`dual_ascent_lower_bound`]: the objective of an explicit test function.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::density::EmpiricalMeasure;
use crate::error::{invalid, Result};
use crate::fft::fft_nd;
use crate::torus::{Grid, GridField};

/// Absolute tolerance on the zero-frequency coefficient for "mean-zero" inputs.
pub const MEAN_ZERO_TOL: f64 = 1e-10;

/// Largest refined grid (total points) used for flux and test-function quadrature.
const MAX_REFINED_POINTS: usize = 1 << 21;

/// Fourier coefficients of a grid field, stored in FFT order
/// (see [`Grid::frequency`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(invalid!("{} coefficients for a grid of {}", coeffs.len(), grid.len()));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Coefficients in FFT storage order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    fn position(&self, m: &[i64]) -> Option<usize> {
        if m.len() != self.grid.dim() {
            return None;
        }
        let n = self.grid.points_per_axis();
        let mut flat = 0;
        for &mi in m {
            flat = flat * n + self.grid.frequency_position(mi)?;
        }
        Some(flat)
    }

    /// Coefficient at frequency `m`, `None` outside the representable range.
    pub fn coeff(&self, m: &[i64]) -> Option<Complex64> {
        self.position(m).map(|k| self.coeffs[k])
    }

    pub fn set_coeff(&mut self, m: &[i64], value: Complex64) -> Result<()> {
        let k = self
            .position(m)
            .ok_or_else(|| invalid!("frequency {m:?} is not representable"))?;
        self.coeffs[k] = value;
        Ok(())
    }

    /// Flat position of `-m` (frequencies taken modulo `N`).
    fn mirror(&self, flat: usize) -> usize {
        let n = self.grid.points_per_axis();
        let d = self.grid.dim();
        let mut f = flat;
        let mut out = 0;
        let mut mult = 1;
        for _ in 0..d {
            let k = f % n;
            f /= n;
            out += ((n - k) % n) * mult;
            mult *= n;
        }
        out
    }

    /// Largest `|c(m) - conj(c(-m))|`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|k| (self.coeffs[k] - self.coeffs[self.mirror(k)].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Closest Hermitian-symmetric coefficient set, `(c(m) + conj c(-m)) / 2`.
    /// Only Nyquist-aliased frequencies change for the spectrum of a real signal.
    pub fn hermitian_part(&self) -> SpectralField {
        let coeffs = (0..self.coeffs.len())
            .map(|k| 0.5 * (self.coeffs[k] + self.coeffs[self.mirror(k)].conj()))
            .collect();
        SpectralField { grid: self.grid, coeffs }
    }

    /// `sum |c(m)|^2`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Calls `f(m, c(m))` for every coefficient.
    pub fn for_each(&self, mut f: impl FnMut(&[i64], Complex64)) {
        let mut m = vec![0i64; self.grid.dim()];
        for (k, &c) in self.coeffs.iter().enumerate() {
            self.grid.frequency_of(k, &mut m);
            f(&m, c);
        }
    }
}

/// Forward transform with the `1/N^d` normalization.
pub fn forward_transform(field: &GridField) -> SpectralField {
    let grid = *field.grid();
    let mut data: Vec<Complex64> = field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut data, grid.dim(), grid.points_per_axis(), false);
    let scale = 1.0 / grid.len() as f64;
    for c in &mut data {
        *c *= scale;
    }
    SpectralField { grid, coeffs: data }
}

/// Inverse transform to a real field. Fails if the coefficients are not
/// Hermitian to within `1e-8` (relative to the largest coefficient when that
/// exceeds one).
pub fn inverse_transform(spec: &SpectralField) -> Result<GridField> {
    let scale = spec.coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
    let defect = spec.hermitian_defect();
    if defect > 1e-8 * scale {
        return Err(invalid!("coefficients are not Hermitian (defect {defect:e})"));
    }
    let grid = *spec.grid();
    let mut data = spec.coeffs.clone();
    fft_nd(&mut data, grid.dim(), grid.points_per_axis(), true);
    GridField::new(grid, data.into_iter().map(|c| c.re).collect())
}

/// A real symbol evaluated on integer frequencies.
#[derive(Clone)]
pub struct MultiplierSymbol {
    name: String,
    rule: Arc<dyn Fn(&[i64]) -> f64 + Send + Sync>,
}

impl fmt::Debug for MultiplierSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiplierSymbol").field("name", &self.name).finish()
    }
}

impl MultiplierSymbol {
    pub fn new(name: impl Into<String>, rule: impl Fn(&[i64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            rule: Arc::new(rule),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(alloc::format!("const({c})"), move |_| c)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, m: &[i64]) -> f64 {
        (self.rule)(m)
    }

    /// Pointwise product of two symbols.
    pub fn product(&self, other: &MultiplierSymbol) -> MultiplierSymbol {
        let (a, b) = (self.rule.clone(), other.rule.clone());
        Self::new(alloc::format!("{}*{}", self.name, other.name), move |m| a(m) * b(m))
    }
}

/// `a(0) = 0`, `a(m) = 1 / sum_i |m_i|` otherwise.
pub fn symbol_a() -> MultiplierSymbol {
    MultiplierSymbol::new("a", |m| {
        let l1: i64 = m.iter().map(|x| x.abs()).sum();
        if l1 == 0 {
            0.0
        } else {
            1.0 / l1 as f64
        }
    })
}

pub fn apply_multiplier(spec: &SpectralField, s: &MultiplierSymbol) -> SpectralField {
    let mut out = spec.clone();
    let mut m = vec![0i64; spec.grid.dim()];
    for (k, c) in out.coeffs.iter_mut().enumerate() {
        spec.grid.frequency_of(k, &mut m);
        *c *= s.eval(&m);
    }
    out
}

/// Grid quadrature of the `L_p` norm on the unit-volume torus.
pub fn lp_norm(field: &GridField, p: f64) -> Result<f64> {
    lp_norm_values(field.values(), p)
}

pub(crate) fn lp_norm_values(values: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid!("L_p norm needs finite p >= 1, got {p}"));
    }
    let n = values.len() as f64;
    if p == 2.0 {
        return Ok((values.iter().map(|v| v * v).sum::<f64>() / n).sqrt());
    }
    if p == 1.0 {
        return Ok(values.iter().map(|v| v.abs()).sum::<f64>() / n);
    }
    // scale by the max to avoid overflow in |v|^p
    let vmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if vmax == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = values.iter().map(|v| (v.abs() / vmax).powf(p)).sum::<f64>() / n;
    Ok(vmax * s.powf(1.0 / p))
}

fn check_mean_zero(spec: &SpectralField) -> Result<()> {
    let c0 = spec.coeffs[0].norm();
    if c0 > MEAN_ZERO_TOL {
        return Err(invalid!("field must have zero mean, coefficient at 0 is {c0:e}"));
    }
    Ok(())
}

fn check_p_at_least_two(p: f64) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(invalid!("exponent must be finite and >= 2, got {p}"));
    }
    Ok(())
}

/// `(sum_{m != 0} |c(m)|^2 / (4 pi^2 |m|_2^2))^(1/2)` for a mean-zero field.
pub fn sobolev_neg_norm_exact_p2(field: &GridField) -> Result<f64> {
    let spec = forward_transform(field);
    check_mean_zero(&spec)?;
    Ok(sobolev_p2_of_spectrum(&spec))
}

/// Same sum as [`sobolev_neg_norm_exact_p2`], straight from coefficients;
/// the zero mode is skipped rather than checked.
pub fn sobolev_p2_of_spectrum(spec: &SpectralField) -> f64 {
    let mut acc = 0.0;
    spec.for_each(|m, c| {
        let l2: i64 = m.iter().map(|x| x * x).sum();
        if l2 != 0 {
            acc += c.norm_sqr() / (4.0 * PI * PI * l2 as f64);
        }
    });
    acc.sqrt()
}

/// `||A(phi)||_{L_p}` with `A` the multiplier of [`symbol_a`].
pub fn riesz_surrogate_norm(field: &GridField, p: f64) -> Result<f64> {
    check_p_at_least_two(p)?;
    let spec = forward_transform(field);
    check_mean_zero(&spec)?;
    let filtered = apply_multiplier(&spec, &symbol_a());
    lp_norm(&inverse_transform(&filtered)?, p)
}

/// Refinement factor for quadrature of a band-limited field raised to power `p`.
fn refinement(grid: &Grid, p: f64) -> usize {
    let mut r = if p == 2.0 { 2 } else { 4 };
    while r > 2 && (r * grid.points_per_axis()).pow(grid.dim() as u32) > MAX_REFINED_POINTS {
        r /= 2;
    }
    r
}

/// Values of the vector field `grad Laplacian^-1 phi` on a grid refined by
/// `factor`, one `Vec` per component. The field is the trigonometric
/// interpolant of the grid samples, so Nyquist coefficients are split evenly
/// between `+N/2` and `-N/2`.
fn spectral_flux(spec: &SpectralField, factor: usize) -> Vec<Vec<f64>> {
    let grid = spec.grid;
    let (d, n) = (grid.dim(), grid.points_per_axis());
    let big = n * factor;
    let total = big.pow(d as u32);
    let half = (n / 2) as i64;
    let mut comps = vec![vec![Complex64::new(0.0, 0.0); total]; d];
    let mut m = vec![0i64; d];
    let mut partner = vec![0i64; d];
    for (k, &c) in spec.coeffs.iter().enumerate() {
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        grid.frequency_of(k, &mut m);
        let nyquist: Vec<usize> = (0..d).filter(|&i| m[i] == -half).collect();
        let copies = 1usize << nyquist.len();
        let share = c / copies as f64;
        for pattern in 0..copies {
            partner.copy_from_slice(&m);
            for (bit, &axis) in nyquist.iter().enumerate() {
                if pattern >> bit & 1 == 1 {
                    partner[axis] = half;
                }
            }
            let l2: i64 = partner.iter().map(|x| x * x).sum();
            if l2 == 0 {
                continue;
            }
            let pos = partner
                .iter()
                .fold(0usize, |acc, &mi| acc * big + mi.rem_euclid(big as i64) as usize);
            // component i: 2 pi i m_i / (-4 pi^2 |m|^2) * c
            for i in 0..d {
                let factor = partner[i] as f64 / (2.0 * PI * l2 as f64);
                comps[i][pos] += Complex64::new(0.0, -factor) * share;
            }
        }
    }
    comps
        .into_iter()
        .map(|mut data| {
            fft_nd(&mut data, d, big, true);
            data.into_iter().map(|z| z.re).collect()
        })
        .collect()
}

/// `||grad Laplacian^-1 phi||_{L_p}`: the flux has divergence `phi`, so it is
/// feasible for the dual problem and bounds the negative Sobolev norm from above.
pub fn beckmann_upper_bound(field: &GridField, p: f64) -> Result<f64> {
    check_p_at_least_two(p)?;
    let spec = forward_transform(field);
    check_mean_zero(&spec)?;
    let factor = refinement(&spec.grid, p);
    let comps = spectral_flux(&spec, factor);
    let total = comps[0].len();
    let magnitude: Vec<f64> = (0..total)
        .map(|x| comps.iter().map(|c| c[x] * c[x]).sum::<f64>().sqrt())
        .collect();
    lp_norm_values(&magnitude, p)
}

/// Real trigonometric test function `sum c_m cos(2 pi m.x) + s_m sin(2 pi m.x)`
/// over a half set of frequencies, with its gradient norm evaluated by
/// quadrature on a fine grid.
struct TestFunctionSpace {
    d: usize,
    modes: Vec<Vec<i64>>,
    /// `(Re, -Im)` of the field's coefficient at each mode.
    target: Vec<(f64, f64)>,
    quad_n: usize,
    p_star: f64,
}

impl TestFunctionSpace {
    fn new(spec: &SpectralField, n_modes: usize, p: f64) -> Self {
        let d = spec.grid.dim();
        let k = n_modes as i64;
        let side = 2 * n_modes + 1;
        let mut modes = Vec::new();
        let mut m = vec![0i64; d];
        for flat in 0..side.pow(d as u32) {
            let mut f = flat;
            for axis in (0..d).rev() {
                m[axis] = (f % side) as i64 - k;
                f /= side;
            }
            // keep m whose first nonzero entry is positive
            match m.iter().find(|&&x| x != 0) {
                Some(&x) if x > 0 => modes.push(m.clone()),
                _ => {}
            }
        }
        let target = modes
            .iter()
            .map(|m| {
                let c = spec.coeff(m).unwrap_or_default();
                (c.re, -c.im)
            })
            .collect();
        let mut quad_n = (8 * n_modes + 8).next_power_of_two().max(16);
        while quad_n > 16 && quad_n.pow(d as u32) > MAX_REFINED_POINTS {
            quad_n /= 2;
        }
        Self {
            d,
            modes,
            target,
            quad_n,
            p_star: p / (p - 1.0),
        }
    }

    fn dim(&self) -> usize {
        2 * self.modes.len()
    }

    fn position(&self, m: &[i64]) -> usize {
        let q = self.quad_n as i64;
        m.iter().fold(0usize, |acc, &mi| acc * self.quad_n + mi.rem_euclid(q) as usize)
    }

    fn pairing(&self, theta: &[f64]) -> f64 {
        self.target
            .iter()
            .enumerate()
            .map(|(j, (re, nim))| re * theta[2 * j] + nim * theta[2 * j + 1])
            .sum()
    }

    /// `(G, dG/dtheta)` with `G = ||grad psi||_{p*}`.
    fn gradient_norm(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let d = self.d;
        let total = self.quad_n.pow(d as u32);
        let mut comps = vec![vec![Complex64::new(0.0, 0.0); total]; d];
        for (j, m) in self.modes.iter().enumerate() {
            let psi = Complex64::new(theta[2 * j], -theta[2 * j + 1]) * 0.5;
            let neg: Vec<i64> = m.iter().map(|x| -x).collect();
            let (pos, npos) = (self.position(m), self.position(&neg));
            for i in 0..d {
                let g = Complex64::new(0.0, 2.0 * PI * m[i] as f64) * psi;
                comps[i][pos] += g;
                comps[i][npos] += g.conj();
            }
        }
        for c in &mut comps {
            fft_nd(c, d, self.quad_n, true);
        }
        let ps = self.p_star;
        let mut acc = 0.0;
        let mut weights = vec![vec![Complex64::new(0.0, 0.0); total]; d];
        for x in 0..total {
            let mag = comps.iter().map(|c| c[x].re * c[x].re).sum::<f64>().sqrt();
            acc += mag.powf(ps);
            if mag > 0.0 {
                let w = mag.powf(ps - 2.0);
                for i in 0..d {
                    weights[i][x] = Complex64::new(w * comps[i][x].re, 0.0);
                }
            }
        }
        let g = (acc / total as f64).powf(1.0 / ps);
        let mut grad = vec![0.0; self.dim()];
        if g == 0.0 {
            return (0.0, grad);
        }
        for w in &mut weights {
            fft_nd(w, d, self.quad_n, false);
            let scale = 1.0 / total as f64;
            for v in w.iter_mut() {
                *v *= scale;
            }
        }
        let lead = g.powf(1.0 - ps);
        for (j, m) in self.modes.iter().enumerate() {
            let pos = self.position(m);
            let (mut dc, mut ds) = (0.0, 0.0);
            for i in 0..d {
                let wh = weights[i][pos];
                dc += m[i] as f64 * wh.im;
                ds += m[i] as f64 * wh.re;
            }
            grad[2 * j] = lead * 2.0 * PI * dc;
            grad[2 * j + 1] = lead * 2.0 * PI * ds;
        }
        (g, grad)
    }
}

/// Lower bound on the negative Sobolev norm: the best normalized pairing
/// `int phi psi / ||grad psi||_{p*}` found by normalized gradient ascent over
/// trigonometric `psi` with `|m_i| <= n_modes`.
///
/// The first run starts from the `p = 2` optimum (`psi` proportional to
/// `Laplacian^-1 phi` on the span), followed by three random restarts; the
/// best value seen at any iterate is returned, so the result never decreases
/// with `iters`. Step size is `0.1/sqrt(t)` relative to the current iterate.
pub fn dual_ascent_lower_bound(field: &GridField, p: f64, n_modes: usize, iters: usize) -> Result<f64> {
    check_p_at_least_two(p)?;
    if n_modes == 0 {
        return Err(invalid!("dual ascent needs at least one mode per axis"));
    }
    let spec = forward_transform(field);
    check_mean_zero(&spec)?;
    let n_modes = n_modes.min(spec.grid.points_per_axis() / 2 - 1).max(1);
    let space = TestFunctionSpace::new(&spec, n_modes, p);
    let dim = space.dim();

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(4);
    let warm: Vec<f64> = space
        .modes
        .iter()
        .zip(&space.target)
        .flat_map(|(m, &(re, nim))| {
            let l2: i64 = m.iter().map(|x| x * x).sum();
            let w = 2.0 / (4.0 * PI * PI * l2 as f64);
            [w * re, w * nim]
        })
        .collect();
    starts.push(warm);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d0a1);
    for _ in 0..3 {
        starts.push(
            space
                .modes
                .iter()
                .flat_map(|m| {
                    let l1: i64 = m.iter().map(|x| x.abs()).sum();
                    let s = 1.0 / l1 as f64;
                    [s * symmetric_unit(&mut rng), s * symmetric_unit(&mut rng)]
                })
                .collect(),
        );
    }

    let mut best = 0.0f64;
    for mut theta in starts {
        if theta.iter().all(|&t| t == 0.0) {
            continue;
        }
        for t in 0..=iters {
            let (g, dg) = space.gradient_norm(&theta);
            if !(g > 0.0) || !g.is_finite() {
                break;
            }
            for v in &mut theta {
                *v /= g;
            }
            let value = space.pairing(&theta);
            best = best.max(value);
            if t == iters {
                break;
            }
            // after rescaling G = 1, so grad J = target - J * dG
            let grad: Vec<f64> = (0..dim)
                .map(|j| {
                    let tgt = if j % 2 == 0 { space.target[j / 2].0 } else { space.target[j / 2].1 };
                    tgt - value * dg[j]
                })
                .collect();
            let gnorm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
            let tnorm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
            if gnorm == 0.0 || tnorm == 0.0 {
                break;
            }
            let step = 0.1 / ((t + 1) as f64).sqrt() * tnorm / gnorm;
            for (v, g) in theta.iter_mut().zip(&grad) {
                *v += step * g;
            }
        }
    }
    Ok(best)
}

fn symmetric_unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Per-axis factors `exp(-2 pi i m x)` for every array position of the grid.
fn axis_characters(x: f64, grid: &Grid) -> Vec<Complex64> {
    (0..grid.points_per_axis())
        .map(|k| {
            let t = -2.0 * PI * grid.frequency(k) as f64 * x;
            Complex64::new(t.cos(), t.sin())
        })
        .collect()
}

/// Exact Fourier coefficients of the empirical measure at the grid frequencies,
/// `(1/n) sum_j exp(-2 pi i m.X_j)`, by direct summation.
pub fn empirical_spectrum(sample: &EmpiricalMeasure, grid: &Grid) -> Result<SpectralField> {
    let points = sample.points();
    if points.is_empty() {
        return Err(invalid!("empirical spectrum of an empty sample"));
    }
    let d = grid.dim();
    if sample.dim() != d {
        return Err(invalid!("sample dimension {} but grid dimension {d}", sample.dim()));
    }
    let n = grid.points_per_axis();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut factors: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    let mut partial = vec![Vec::new(); d];
    for x in points {
        factors.clear();
        factors.extend(x.coords().iter().map(|&xi| axis_characters(xi, grid)));
        // partial[l] holds products over axes 0..=l, length n^(l+1)
        partial[0].clear();
        partial[0].extend_from_slice(&factors[0]);
        for l in 1..d {
            let (done, rest) = partial.split_at_mut(l);
            let prev = &done[l - 1];
            let cur = &mut rest[0];
            cur.clear();
            for &a in prev.iter() {
                cur.extend(factors[l].iter().map(|&b| a * b));
            }
        }
        for (slot, v) in acc.iter_mut().zip(&partial[d - 1]) {
            *slot += v;
        }
    }
    let scale = 1.0 / points.len() as f64;
    for c in &mut acc {
        *c *= scale;
    }
    debug_assert_eq!(acc.len(), n.pow(d as u32));
    SpectralField::new(*grid, acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::EmpiricalMeasure;
    use crate::torus::wrap;
    use approx::assert_abs_diff_eq;
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, seed: u64, mean_zero: bool) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..grid.len()).map(|_| symmetric_unit(&mut rng)).collect();
        if mean_zero {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            for v in &mut values {
                *v -= mean;
            }
        }
        GridField::new(grid, values).unwrap()
    }

    /// Random mean-zero field with no content at Nyquist-aliased frequencies.
    fn band_limited_field(grid: Grid, seed: u64) -> GridField {
        let mut spec = forward_transform(&random_field(grid, seed, true));
        let half = grid.points_per_axis() as i64 / 2;
        let mut m = vec![0i64; grid.dim()];
        for k in 0..spec.coeffs.len() {
            grid.frequency_of(k, &mut m);
            if m.iter().any(|&x| x == -half) {
                spec.coeffs[k] = Complex64::new(0.0, 0.0);
            }
        }
        inverse_transform(&spec).unwrap()
    }

    // Direct O(N^2d) DFT used as an oracle on small grids.
    fn naive_dft(field: &GridField) -> Vec<Complex64> {
        let grid = *field.grid();
        let d = grid.dim();
        let n = grid.points_per_axis() as f64;
        let mut m = vec![0i64; d];
        let mut idx = vec![0usize; d];
        (0..grid.len())
            .map(|km| {
                grid.frequency_of(km, &mut m);
                let mut acc = Complex64::new(0.0, 0.0);
                for (kx, &v) in field.values().iter().enumerate() {
                    grid.multi_index(kx, &mut idx);
                    let phase: f64 = m.iter().zip(&idx).map(|(&a, &b)| a as f64 * b as f64).sum();
                    let t = -2.0 * PI * phase / n;
                    acc += v * Complex64::new(t.cos(), t.sin());
                }
                acc / grid.len() as f64
            })
            .collect()
    }

    #[test]
    fn forward_examples() {
        let g = Grid::new(1, 16).unwrap();
        let one = forward_transform(&GridField::constant(g, 1.0));
        assert_abs_diff_eq!(one.coeff(&[0]).unwrap().re, 1.0, epsilon = 1e-12);
        assert!(one.coeffs().iter().skip(1).all(|c| c.norm() < 1e-12));

        let cosine = GridField::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let spec = forward_transform(&cosine);
        for m in -8..8i64 {
            let want = if m.abs() == 1 { 0.5 } else { 0.0 };
            assert!((spec.coeff(&[m]).unwrap() - Complex64::new(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn forward_matches_direct_dft() {
        for (d, n) in [(1, 16), (2, 8), (2, 16), (3, 4)] {
            let g = Grid::new(d, n).unwrap();
            let f = random_field(g, 11 + d as u64, false);
            let fast = forward_transform(&f);
            for (a, b) in fast.coeffs().iter().zip(naive_dft(&f)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_examples() {
        let g = Grid::new(2, 8).unwrap();
        let zero = inverse_transform(&SpectralField::zeros(g)).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        // c(+-m) = 0.25 at m = (1, 2) gives 0.5 cos(2 pi (x + 2y))
        let mut s = SpectralField::zeros(g);
        s.set_coeff(&[1, 2], Complex64::new(0.25, 0.0)).unwrap();
        s.set_coeff(&[-1, -2], Complex64::new(0.25, 0.0)).unwrap();
        let f = inverse_transform(&s).unwrap();
        let expect = GridField::from_fn(g, |x| 0.5 * (2.0 * PI * (x[0] + 2.0 * x[1])).cos()).unwrap();
        assert!(f.max_abs_diff(&expect) < 1e-14);

        let mut bad = SpectralField::zeros(g);
        bad.set_coeff(&[1, 0], Complex64::new(0.0, 1.0)).unwrap();
        assert!(inverse_transform(&bad).is_err());
    }

    #[test]
    fn roundtrip_and_parseval() {
        for d in 1..=3 {
            for n in [8usize, 16, 32] {
                let g = Grid::new(d, n).unwrap();
                let f = random_field(g, (d * 100 + n) as u64, false);
                let spec = forward_transform(&f);
                let back = inverse_transform(&spec).unwrap();
                assert!(back.max_abs_diff(&f) < 1e-10);
                let lhs = f.values().iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
                assert!((lhs - spec.energy()).abs() < 1e-10 * lhs);
                assert!(spec.hermitian_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn symbol_a_examples() {
        let a = symbol_a();
        assert_eq!(a.eval(&[0, 0]), 0.0);
        assert_eq!(a.eval(&[1, 1]), 0.5);
        assert_abs_diff_eq!(a.eval(&[3]), 1.0 / 3.0);
        assert_abs_diff_eq!(a.eval(&[-2, 1, 0]), 1.0 / 3.0);
    }

    #[test]
    fn multiplier_examples() {
        let g = Grid::new(1, 16).unwrap();
        let f = random_field(g, 3, false);
        let spec = forward_transform(&f);
        assert_eq!(apply_multiplier(&spec, &MultiplierSymbol::constant(1.0)), spec);

        let mut single = SpectralField::zeros(g);
        single.set_coeff(&[2], Complex64::new(1.0, 0.5)).unwrap();
        let out = apply_multiplier(&single, &symbol_a());
        assert_eq!(out.coeff(&[2]).unwrap(), Complex64::new(0.5, 0.25));

        let s1 = symbol_a();
        let s2 = MultiplierSymbol::new("m1", |m| 1.0 + m[0] as f64 * m[0] as f64);
        let twice = apply_multiplier(&apply_multiplier(&spec, &s1), &s2);
        let once = apply_multiplier(&spec, &s1.product(&s2));
        for (a, b) in twice.coeffs().iter().zip(once.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn multiplier_is_linear() {
        let g = Grid::new(2, 8).unwrap();
        let (f, h) = (random_field(g, 1, false), random_field(g, 2, false));
        let (alpha, beta) = (1.7, -0.3);
        let combo = f.scale(alpha).add(&h.scale(beta)).unwrap();
        let a = symbol_a();
        let lhs = apply_multiplier(&forward_transform(&combo), &a);
        let rf = apply_multiplier(&forward_transform(&f), &a);
        let rh = apply_multiplier(&forward_transform(&h), &a);
        for k in 0..g.len() {
            let rhs = rf.coeffs()[k] * alpha + rh.coeffs()[k] * beta;
            assert!((lhs.coeffs()[k] - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn lp_norm_examples() {
        let g = Grid::new(1, 32).unwrap();
        for p in [1.0, 2.0, 3.5] {
            assert_abs_diff_eq!(lp_norm(&GridField::constant(g, -2.5), p).unwrap(), 2.5, epsilon = 1e-12);
        }
        let cosine = GridField::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        assert_abs_diff_eq!(lp_norm(&cosine, 2.0).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert!(lp_norm(&cosine, 0.5).is_err());
        let f = random_field(g, 9, false);
        let mut last = 0.0;
        for p in [1.0, 1.5, 2.0, 3.0, 6.0] {
            let v = lp_norm(&f, p).unwrap();
            assert!(v >= last - 1e-14);
            last = v;
        }
    }

    #[test]
    fn exact_p2_examples() {
        let g = Grid::new(1, 32).unwrap();
        assert_eq!(sobolev_neg_norm_exact_p2(&GridField::zeros(g)).unwrap(), 0.0);
        let cosine = GridField::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let want = 1.0 / (2.0 * PI * 2f64.sqrt());
        assert_abs_diff_eq!(sobolev_neg_norm_exact_p2(&cosine).unwrap(), want, epsilon = 1e-12);
        assert_abs_diff_eq!(sobolev_neg_norm_exact_p2(&cosine.scale(-3.0)).unwrap(), 3.0 * want, epsilon = 1e-12);
        assert!(sobolev_neg_norm_exact_p2(&GridField::constant(g, 0.1)).is_err());
    }

    #[test]
    fn riesz_examples() {
        let g = Grid::new(1, 32).unwrap();
        assert_eq!(riesz_surrogate_norm(&GridField::zeros(g), 2.0).unwrap(), 0.0);
        let cosine = GridField::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        assert_abs_diff_eq!(riesz_surrogate_norm(&cosine, 2.0).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert!(riesz_surrogate_norm(&cosine, 1.5).is_err());
    }

    #[test]
    fn norm_sandwich() {
        for d in 1..=3usize {
            let g = Grid::new(d, if d == 3 { 8 } else { 16 }).unwrap();
            let lo = 2.0 * PI / (d as f64).sqrt();
            for seed in 0..100 {
                let f = random_field(g, seed, true);
                let r = riesz_surrogate_norm(&f, 2.0).unwrap() / sobolev_neg_norm_exact_p2(&f).unwrap();
                assert!(r >= lo - 1e-9 && r <= 2.0 * PI + 1e-9, "d={d} ratio {r}");
            }
        }
    }

    #[test]
    fn beckmann_examples() {
        let g = Grid::new(2, 16).unwrap();
        assert_eq!(beckmann_upper_bound(&GridField::zeros(g), 2.0).unwrap(), 0.0);
        for seed in 0..10 {
            let f = band_limited_field(g, seed);
            let exact = sobolev_neg_norm_exact_p2(&f).unwrap();
            let b = beckmann_upper_bound(&f, 2.0).unwrap();
            assert!((b - exact).abs() < 1e-10, "{b} vs {exact}");
        }
        let g1 = Grid::new(1, 32).unwrap();
        let cosine = GridField::from_fn(g1, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let b = beckmann_upper_bound(&cosine, 2.0).unwrap();
        assert_abs_diff_eq!(b, 1.0 / (2.0 * PI * 2f64.sqrt()), epsilon = 1e-12);
        // 1d: the flux is the antiderivative, so its sup norm is known
        let b4 = beckmann_upper_bound(&cosine, 4.0).unwrap();
        let want = (3.0f64 / 8.0).powf(0.25) / (2.0 * PI);
        assert_abs_diff_eq!(b4, want, epsilon = 1e-10);
        assert!(beckmann_upper_bound(&GridField::constant(g1, 1.0), 2.0).is_err());
    }

    #[test]
    fn dual_ascent_examples() {
        let g = Grid::new(1, 32).unwrap();
        assert_eq!(dual_ascent_lower_bound(&GridField::zeros(g), 2.0, 2, 10).unwrap(), 0.0);
        let cosine = GridField::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        let want = 1.0 / (2.0 * PI * 2f64.sqrt());
        let got = dual_ascent_lower_bound(&cosine, 2.0, 1, 20).unwrap();
        assert!((got - want).abs() < 0.01 * want, "{got} vs {want}");
        let short = dual_ascent_lower_bound(&cosine, 4.0, 3, 5).unwrap();
        let long = dual_ascent_lower_bound(&cosine, 4.0, 3, 40).unwrap();
        assert!(long >= short);
    }

    #[test]
    fn weak_duality() {
        for (d, n) in [(1usize, 32usize), (2, 16)] {
            let g = Grid::new(d, n).unwrap();
            for seed in 0..4 {
                let f = band_limited_field(g, 40 + seed);
                for p in [2.0, 3.0, 4.0] {
                    let lower = dual_ascent_lower_bound(&f, p, 3, 30).unwrap();
                    let upper = beckmann_upper_bound(&f, p).unwrap();
                    assert!(lower <= upper + 1e-8, "d={d} p={p}: {lower} > {upper}");
                }
            }
        }
    }

    #[test]
    fn empirical_spectrum_examples() {
        let g = Grid::new(1, 16).unwrap();
        let one = EmpiricalMeasure::new(vec![wrap(&[0.0]).unwrap()]).unwrap();
        let s = empirical_spectrum(&one, &g).unwrap();
        assert!(s.coeffs().iter().all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let two = EmpiricalMeasure::new(vec![wrap(&[0.0]).unwrap(), wrap(&[0.5]).unwrap()]).unwrap();
        let s = empirical_spectrum(&two, &g).unwrap();
        for m in -8..8i64 {
            let want = (1.0 + if m % 2 == 0 { 1.0 } else { -1.0 }) / 2.0;
            assert!((s.coeff(&[m]).unwrap() - Complex64::new(want, 0.0)).norm() < 1e-14);
        }

        let g2 = Grid::new(2, 8).unwrap();
        let pts = EmpiricalMeasure::new(vec![wrap(&[0.1, 0.7]).unwrap(), wrap(&[0.33, 0.2]).unwrap()]).unwrap();
        let s = empirical_spectrum(&pts, &g2).unwrap();
        assert!((s.coeff(&[0, 0]).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let m = [3i64, -2];
        let direct: Complex64 = pts
            .points()
            .iter()
            .map(|p| {
                let t = -2.0 * PI * (3.0 * p.coords()[0] - 2.0 * p.coords()[1]);
                Complex64::new(t.cos(), t.sin()) / 2.0
            })
            .sum();
        assert!((s.coeff(&m).unwrap() - direct).norm() < 1e-14);
    }
}
