//! The radial bump mollifier `K(x) = c exp(-1/(1-|x|^2))`, its Fourier
//! transform, kernel density estimates on a grid and the lattice sums of the
//! smoothed Riesz symbol `v_h(m) = a(m) kappa(h m)`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::{DensitySpec, EmpiricalMeasure};
use crate::error::{invalid, Error, Result};
use crate::fft::Fft;
use crate::quadrature::Quadrature;
use crate::spectral::{empirical_spectrum, inverse_transform, SpectralField};
use crate::torus::{Grid, GridField};

/// Samples of the projected kernel per unit length on `[0, 1]`.
const SLICE_STEPS: usize = 1024;
/// Length of the transform used to tabulate `kappa`; the table spacing is
/// `SLICE_STEPS / FFT_LEN`.
const FFT_LEN: usize = 1 << 20;
/// Tabulated range of `|xi|`.
pub const KAPPA_TABLE_MAX: f64 = 200.0;
const QUAD_TOL: f64 = 1e-15;

#[inline]
pub fn bump_profile(r: f64) -> f64 {
    let r2 = r * r;
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// Surface area of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!(),
    }
}

/// Bandwidth `h` in `(0, 1/2)`, so that `K_h` is supported inside one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 0.5) {
            return Err(invalid!("bandwidth must lie in (0, 1/2), got {h}"));
        }
        Ok(Self(h))
    }

    pub fn h(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    d: usize,
    c_norm: f64,
    /// `kappa(k * step)` for `k = 0..`, `step = SLICE_STEPS / FFT_LEN`.
    table: Arc<Vec<f64>>,
    /// `max_{rho' >= rho} |kappa(rho')|` on the same knots.
    envelope: Arc<Vec<f64>>,
    /// Trapezoid-weighted projection `w_j P(j / SLICE_STEPS)`.
    slice: Arc<Vec<f64>>,
}

/// Normalized bump kernel in dimension 1, 2 or 3, with `kappa` tabulated
/// eagerly (the construction takes a fraction of a second).
pub fn bump_kernel(d: usize) -> Result<KernelSpec> {
    if !(1..=3).contains(&d) {
        return Err(invalid!("bump kernel is available for d in 1..=3, got {d}"));
    }
    let quad = Quadrature::default();
    let radial = quad.integrate(|r| bump_profile(r) * r.powi(d as i32 - 1), 0.0, 1.0, QUAD_TOL);
    let c_norm = 1.0 / (sphere_area(d) * radial);

    // P(t): integral of K over the hyperplane at signed distance t from 0
    let slice_at = |t: f64| -> f64 {
        let a2 = 1.0 - t * t;
        if a2 <= 0.0 {
            return 0.0;
        }
        match d {
            1 => c_norm * bump_profile(t),
            2 => {
                let a = a2.sqrt();
                2.0 * a * c_norm * quad.integrate(|u| (-1.0 / (a2 * (1.0 - u * u))).exp(), 0.0, 1.0, QUAD_TOL)
            }
            _ => PI * c_norm * quad.integrate(|v| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 }, 0.0, a2, QUAD_TOL),
        }
    };
    let dt = 1.0 / SLICE_STEPS as f64;
    let slice: Vec<f64> = (0..=SLICE_STEPS)
        .map(|j| {
            let w = if j == 0 || j == SLICE_STEPS { 1.0 } else { 2.0 };
            w * dt * slice_at(j as f64 * dt)
        })
        .collect();

    // kappa(rho) = sum_j slice_j cos(2 pi rho t_j); at rho = k / SLICE_STEPS this
    // is the real part of a length-FFT_LEN DFT.
    let mut data = vec![Complex64::new(0.0, 0.0); FFT_LEN];
    for (j, &s) in slice.iter().enumerate() {
        data[j] = Complex64::new(s, 0.0);
    }
    Fft::new(FFT_LEN).process(&mut data, false);
    let knots = (KAPPA_TABLE_MAX * table_density()) as usize + 3;
    let table: Vec<f64> = data[..knots].iter().map(|z| z.re).collect();
    let mut envelope = vec![0.0; knots];
    let mut run = 0.0f64;
    for k in (0..knots).rev() {
        run = run.max(table[k].abs());
        envelope[k] = run;
    }
    Ok(KernelSpec {
        d,
        c_norm,
        table: Arc::new(table),
        envelope: Arc::new(envelope),
        slice: Arc::new(slice),
    })
}

/// Table knots per unit of `|xi|`.
fn table_density() -> f64 {
    FFT_LEN as f64 / SLICE_STEPS as f64
}

impl KernelSpec {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    /// `K(x)` on `R^d` (not periodized).
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.eval_radius(r)
    }

    pub fn eval_radius(&self, r: f64) -> f64 {
        self.c_norm * bump_profile(r)
    }

    /// `K_h` at Euclidean distance `r`.
    pub fn eval_scaled(&self, h: Bandwidth, r: f64) -> f64 {
        self.eval_radius(r / h.h()) / h.h().powi(self.d as i32)
    }

    /// `kappa(xi)`, which depends only on `|xi|_2`.
    pub fn kappa(&self, xi: &[f64]) -> f64 {
        self.kappa_radial(xi.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// `kappa` at radius `rho`: cubic interpolation in the table, direct
    /// trapezoid sum beyond it.
    pub fn kappa_radial(&self, rho: f64) -> f64 {
        let rho = rho.abs();
        let s = rho * table_density();
        let i = s.floor() as usize;
        if i + 2 >= self.table.len() {
            return self.kappa_direct(rho);
        }
        let t = s - i as f64;
        let at = |k: isize| self.table[k.unsigned_abs()];
        let i = i as isize;
        let (y0, y1, y2, y3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        // 4-point Lagrange on knots -1, 0, 1, 2
        -t * (t - 1.0) * (t - 2.0) / 6.0 * y0 + (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0 * y1
            - (t + 1.0) * t * (t - 2.0) / 2.0 * y2
            + (t + 1.0) * t * (t - 1.0) / 6.0 * y3
    }

    /// Trapezoid sum over the projected kernel, without the table.
    pub fn kappa_direct(&self, rho: f64) -> f64 {
        let dt = 1.0 / SLICE_STEPS as f64;
        self.slice
            .iter()
            .enumerate()
            .map(|(j, s)| s * (2.0 * PI * rho * j as f64 * dt).cos())
            .sum()
    }

    /// Upper bound on `|kappa|` over `[rho, KAPPA_TABLE_MAX]`.
    pub fn kappa_envelope(&self, rho: f64) -> f64 {
        let k = (rho.abs() * table_density()).floor() as usize;
        self.envelope.get(k).copied().unwrap_or(0.0)
    }

    /// `(int |x|^p K(x) dx)^(1/p)`.
    pub fn c0(&self, p: f64) -> Result<f64> {
        kernel_c0(self, p)
    }
}

pub fn kernel_c0(kernel: &KernelSpec, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid!("moment order must be finite and >= 1, got {p}"));
    }
    let d = kernel.d as f64;
    let m = Quadrature::default().integrate(|r| r.powf(p + d - 1.0) * bump_profile(r), 0.0, 1.0, QUAD_TOL);
    Ok((sphere_area(kernel.d) * kernel.c_norm * m).powf(1.0 / p))
}

/// `f_h = K_h * f` on the grid, from the exact coefficients
/// `kappa(h m) f^(m)`.
pub fn smoothed_density_field(density: &DensitySpec, kernel: &KernelSpec, h: Bandwidth, grid: &Grid) -> Result<GridField> {
    check_dims(kernel, grid)?;
    let spec = density.exact_spectrum(grid)?;
    inverse_transform(&smooth_spectrum(&spec, kernel, h))
}

/// Multiplies every coefficient by `kappa(h |m|_2)`.
pub fn smooth_spectrum(spec: &SpectralField, kernel: &KernelSpec, h: Bandwidth) -> SpectralField {
    let mut out = spec.clone();
    let mut m = vec![0i64; spec.grid().dim()];
    let grid = *spec.grid();
    for (k, c) in out.coeffs_mut().iter_mut().enumerate() {
        grid.frequency_of(k, &mut m);
        let r = m.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
        *c *= kernel.kappa_radial(h.h() * r);
    }
    out
}

fn check_dims(kernel: &KernelSpec, grid: &Grid) -> Result<()> {
    if kernel.dim() != grid.dim() {
        return Err(invalid!("kernel dimension {} with grid dimension {}", kernel.dim(), grid.dim()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KdeMethod {
    /// Pointwise sums of the periodized kernel at the grid nodes.
    Direct,
    /// `kappa(h m)` times the empirical spectrum, transformed back.
    Spectral,
}

/// `f_{n,h}(x) = (1/n) sum_j K_h(x - X_j)` at the grid nodes.
pub fn kde_field(
    sample: &EmpiricalMeasure,
    kernel: &KernelSpec,
    h: Bandwidth,
    grid: &Grid,
    method: KdeMethod,
) -> Result<GridField> {
    check_dims(kernel, grid)?;
    if sample.dim() != grid.dim() {
        return Err(invalid!("sample dimension {} with grid dimension {}", sample.dim(), grid.dim()));
    }
    match method {
        KdeMethod::Direct => Ok(kde_direct(sample, kernel, h, grid)),
        KdeMethod::Spectral => {
            let nh = grid.points_per_axis() as f64 * h.h();
            if nh < 2.0 {
                return Err(Error::Resolution(alloc::format!(
                    "N*h = {nh} < 2, the kernel is not resolved by the grid"
                )));
            }
            kde_spectral(sample, kernel, h, grid)
        }
    }
}

/// `|xi|` beyond which aliased frequencies are dropped from the spectral KDE.
const ALIAS_CUTOFF: f64 = 32.0;
const MAX_ALIAS_POINTS: usize = 1 << 22;

/// Grid values of the Fourier series of `f_{n,h}`: the empirical spectrum is
/// computed on a band `r` times wider than the grid, damped by `kappa(h m)`
/// and folded onto the grid frequencies, so aliases above `N/2` are kept until
/// `kappa` is negligible.
fn kde_spectral(sample: &EmpiricalMeasure, kernel: &KernelSpec, h: Bandwidth, grid: &Grid) -> Result<GridField> {
    let (d, n) = (grid.dim(), grid.points_per_axis());
    let mut r = 1usize;
    while h.h() * (r * n) as f64 / 2.0 < ALIAS_CUTOFF && ((2 * r * n) as u64).pow(d as u32) <= MAX_ALIAS_POINTS as u64 {
        r *= 2;
    }
    let wide = Grid::new(d, r * n)?;
    let spec = smooth_spectrum(&empirical_spectrum(sample, &wide)?, kernel, h);
    let mut folded = SpectralField::zeros(*grid);
    let mut m = vec![0i64; d];
    for (k, c) in spec.coeffs().iter().enumerate() {
        wide.frequency_of(k, &mut m);
        let pos = m
            .iter()
            .fold(0usize, |acc, &mi| acc * n + mi.rem_euclid(n as i64) as usize);
        folded.coeffs_mut()[pos] += c;
    }
    inverse_transform(&folded.hermitian_part())
}

fn kde_direct(sample: &EmpiricalMeasure, kernel: &KernelSpec, h: Bandwidth, grid: &Grid) -> GridField {
    let d = grid.dim();
    let n = grid.points_per_axis();
    let spacing = grid.spacing();
    let hh = h.h();
    let h2 = hh * hh;
    let scale = 1.0 / (sample.len() as f64 * hh.powi(d as i32));
    let mut values = vec![0.0; grid.len()];
    // per axis: (node index, squared offset / h^2) for nodes within h
    let mut axes: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d];
    for x in sample.points() {
        for (axis, &xi) in axes.iter_mut().zip(x.coords()) {
            axis.clear();
            let lo = ((xi - hh) / spacing).ceil() as i64;
            let hi = ((xi + hh) / spacing).floor() as i64;
            for k in lo..=hi {
                let off = k as f64 * spacing - xi;
                let q = off * off / h2;
                if q < 1.0 {
                    axis.push((k.rem_euclid(n as i64) as usize, q));
                }
            }
        }
        accumulate(&axes, 0, 0, 0.0, n, kernel.c_norm * scale, &mut values);
    }
    GridField::new(*grid, values).expect("kernel sums are finite")
}

fn accumulate(axes: &[Vec<(usize, f64)>], level: usize, flat: usize, q: f64, n: usize, c: f64, out: &mut [f64]) {
    for &(k, qk) in &axes[level] {
        let s = q + qk;
        if s >= 1.0 {
            continue;
        }
        let idx = flat * n + k;
        if level + 1 == axes.len() {
            out[idx] += c * (-1.0 / (1.0 - s)).exp();
        } else {
            accumulate(axes, level + 1, idx, s, n, c, out);
        }
    }
}

/// Lattice sums of `|v_h(m)|^{p*}` with `v_h(m) = a(m) kappa(h m)`, split at
/// `h |m|_1 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VhSums {
    /// Over `0 < h |m|_1 <= 1`.
    pub s0: f64,
    /// Over `1 < h |m|_1` and `|m|_1 <= truncation`.
    pub s1: f64,
    /// Bound on the omitted part `|m|_1 > truncation`.
    pub tail_bound: f64,
    pub truncation: usize,
    /// Set when `truncation < 4/h` or the tail bound is not negligible.
    pub precision_warning: bool,
}

impl VhSums {
    pub fn total(&self) -> f64 {
        self.s0 + self.s1
    }
}

/// Default truncation radius, `ceil(8/h)`.
pub fn default_truncation(h: Bandwidth) -> usize {
    (8.0 / h.h()).ceil() as usize
}

/// Sums over `m != 0` with `|m|_1 <= truncation`, enumerating one
/// representative per orbit of coordinate sign changes and permutations.
pub fn v_h_sums(kernel: &KernelSpec, h: Bandwidth, p_star: f64, truncation: usize) -> Result<VhSums> {
    if !(p_star >= 1.0) || !p_star.is_finite() {
        return Err(invalid!("conjugate exponent must be finite and >= 1, got {p_star}"));
    }
    let d = kernel.dim();
    let hh = h.h();
    let t = truncation as i64;
    let (mut s0, mut s1) = (0.0, 0.0);
    let mut add = |m: &[i64]| {
        let l1: i64 = m.iter().sum();
        if l1 == 0 {
            return;
        }
        let l2 = m.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
        let v = kernel.kappa_radial(hh * l2).abs() / l1 as f64;
        let term = orbit_size(m) as f64 * v.powf(p_star);
        if hh * l1 as f64 <= 1.0 {
            s0 += term;
        } else {
            s1 += term;
        }
    };
    match d {
        1 => {
            for a in 1..=t {
                add(&[a]);
            }
        }
        2 => {
            for a in 0..=t {
                for b in 0..=a.min(t - a) {
                    add(&[a, b]);
                }
            }
        }
        _ => {
            for a in 0..=t {
                for b in 0..=a.min(t - a) {
                    for c in 0..=b.min(t - a - b) {
                        add(&[a, b, c]);
                    }
                }
            }
        }
    }

    // shells |m|_1 = r beyond the truncation, with |m|_2 >= r / sqrt(d)
    let mut tail = 0.0;
    let mut r = truncation as u64 + 1;
    let sqrt_d = (d as f64).sqrt();
    loop {
        let rho = hh * r as f64 / sqrt_d;
        if rho > KAPPA_TABLE_MAX {
            break;
        }
        let env = kernel.kappa_envelope(rho);
        tail += l1_shell_count(d, r) * (env / r as f64).powf(p_star);
        r += 1;
    }
    let total = s0 + s1;
    let precision_warning = (truncation as f64) < 4.0 / hh || tail > 1e-6 * total;
    Ok(VhSums {
        s0,
        s1,
        tail_bound: tail,
        truncation,
        precision_warning,
    })
}

/// Number of lattice points obtained from a sorted nonnegative `m` by sign
/// changes and coordinate permutations.
fn orbit_size(m: &[i64]) -> u64 {
    let nonzero = m.iter().filter(|&&x| x != 0).count() as u32;
    let mut perms: u64 = (1..=m.len() as u64).product();
    let mut i = 0;
    while i < m.len() {
        let mut j = i;
        while j < m.len() && m[j] == m[i] {
            j += 1;
        }
        perms /= (1..=(j - i) as u64).product::<u64>();
        i = j;
    }
    perms << nonzero
}

/// `#{m in Z^d : |m|_1 = r}` for `r >= 1`.
fn l1_shell_count(d: usize, r: u64) -> f64 {
    let binom = |n: u64, k: u64| -> f64 {
        if k > n {
            return 0.0;
        }
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    };
    (1..=(d as u64).min(r))
        .map(|k| (1u64 << k) as f64 * binom(d as u64, k) * binom(r - 1, k - 1))
        .sum()
}
