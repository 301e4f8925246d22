//! Falsifiable numerical checks of the inequalities behind the rate theorem.
//!
//! Inequalities whose two sides are both computable (the Peyre bound at
//! `p = 2`, the smoothing coupling, the bias-variance decomposition) are judged
//! directly. Bounds that hold only up to an unknown constant are observed as a
//! ratio `lhs / rhs_form` along a ladder of scales, and the report judges the
//! spread `max / min` of that ratio instead.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::{density_to_field, quantize, sample, DensitySpec, DiscreteMeasure, EmpiricalMeasure};
use crate::error::{invalid, Error, Result};
use crate::kernel::{
    default_truncation, kde_field, kernel_c0, smooth_spectrum, smoothed_density_field, v_h_sums, Bandwidth, KdeMethod,
    KernelSpec,
};
use crate::ot::{empirical_vs_density_wasserstein, exact_wasserstein, quantization_slack, Solver};
use crate::rate::fit_rate;
use crate::rng::derive_seed;
use crate::spectral::{
    apply_multiplier, beckmann_upper_bound, empirical_spectrum, forward_transform, inverse_transform, lp_norm_values,
    riesz_surrogate_norm, sobolev_neg_norm_exact_p2, symbol_a, SpectralField,
};
use crate::torus::{Grid, GridField};

/// Largest accepted `max / min` of an observed ratio along a ladder.
pub const RATIO_SPREAD_LIMIT: f64 = 10.0;
/// Replicates below which moment estimates carry a power warning.
pub const MIN_MOMENT_REPS: usize = 50;
/// Resolution `N h` of the grid used for the negative Sobolev norm of
/// `f_{n,h} - f` in the decomposition check.
const DECOMPOSITION_NH: f64 = 64.0;
const DECOMPOSITION_MAX_POINTS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    HoldsWithinSlack,
    Violated,
}

impl Verdict {
    pub fn judge(lhs: f64, rhs: f64, slack: f64) -> Self {
        if lhs <= rhs {
            Verdict::Holds
        } else if lhs <= rhs + slack {
            Verdict::HoldsWithinSlack
        } else {
            Verdict::Violated
        }
    }
}

/// Parameters a report was produced with.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub d: usize,
    pub p: f64,
    pub n: Option<usize>,
    pub h: Option<f64>,
    pub grid: Option<usize>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
}

/// One rung of a ladder: the quantity, the scale-dependent form it is
/// compared with, and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleObservation {
    /// `h` or `n`.
    pub scale: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Monte Carlo standard error of `lhs`, when estimated.
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, absent when `rhs = 0`.
    pub ratio: Option<f64>,
    pub slack_budget: f64,
    pub verdict: Verdict,
    pub meta: ReportMeta,
    /// What `lhs` and `rhs` measure.
    pub criterion: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<ScaleObservation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub fn new(
        name: impl Into<String>,
        criterion: impl Into<String>,
        lhs: f64,
        rhs: f64,
        slack_budget: f64,
        meta: ReportMeta,
    ) -> Result<Self> {
        let name = name.into();
        if !(lhs.is_finite() && rhs.is_finite() && slack_budget.is_finite()) || slack_budget < 0.0 {
            return Err(Error::Internal(format!(
                "{name}: report fields must be finite, got lhs {lhs}, rhs {rhs}, slack {slack_budget}"
            )));
        }
        Ok(Self {
            name,
            lhs,
            rhs,
            ratio: if rhs != 0.0 { Some(lhs / rhs) } else { None },
            slack_budget,
            verdict: Verdict::judge(lhs, rhs, slack_budget),
            meta,
            criterion: criterion.into(),
            ladder: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn is_violated(&self) -> bool {
        self.verdict == Verdict::Violated
    }

    /// Judges a ladder by the spread of its ratios against `limit`.
    pub fn from_ladder(name: impl Into<String>, ladder: Vec<ScaleObservation>, limit: f64, meta: ReportMeta) -> Result<Self> {
        let spread = ratio_spread(&ladder)?;
        let mut r = Self::new(name, format!("max/min of the observed ratio over the ladder < {limit}"), spread, limit, 0.0, meta)?;
        r.ladder = ladder;
        Ok(r)
    }
}

/// `max / min` of the ladder ratios; 1 when they all vanish.
pub fn ratio_spread(ladder: &[ScaleObservation]) -> Result<f64> {
    if ladder.len() < 2 {
        return Err(invalid!("a ladder needs at least two rungs"));
    }
    let hi = ladder.iter().map(|o| o.ratio).fold(f64::NEG_INFINITY, f64::max);
    let lo = ladder.iter().map(|o| o.ratio).fold(f64::INFINITY, f64::min);
    if !(lo >= 0.0) || !hi.is_finite() {
        return Err(Error::Internal(format!("ladder ratios out of range: [{lo}, {hi}]")));
    }
    Ok(if hi == 0.0 {
        1.0
    } else if lo == 0.0 {
        f64::MAX
    } else {
        hi / lo
    })
}

pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `p f_min^{1/p - 1} ||f - g||`.
pub fn peyre_bound(f_min: f64, p: f64, norm: f64) -> f64 {
    p * f_min.powf(1.0 / p - 1.0) * norm
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(invalid!("exponent must be finite and >= 2, got {p}"));
    }
    Ok(())
}

fn mean_zero(field: GridField) -> GridField {
    let m = field.mean();
    let grid = *field.grid();
    let values = field.into_values().into_iter().map(|v| v - m).collect();
    GridField::new(grid, values).expect("finite shift")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeyreMode {
    /// Exact `p = 2` norm by Parseval.
    ExactP2,
    /// Beckmann upper bound on the norm, valid for any `p >= 2`.
    Consequence,
}

/// `W_p(f, g) <= p f_min^{1/p-1} ||f - g||_{H^-1_p}` for a density `f` and a
/// grid density `g`. The norm is taken on the grid of `g_field`; the
/// transport problem between the two quantized measures lives on `grid`,
/// whose size must divide the size of the field grid.
pub fn peyre_check(f: &DensitySpec, g_field: &GridField, p: f64, grid: &Grid, mode: PeyreMode) -> Result<BoundReport> {
    check_p(p)?;
    if mode == PeyreMode::ExactP2 && p != 2.0 {
        return Err(invalid!("the exact norm mode needs p = 2, got {p}"));
    }
    let fine = *g_field.grid();
    let d = fine.dim();
    if f.dim() != d || grid.dim() != d {
        return Err(invalid!("dimension mismatch between density, field and grid"));
    }
    let (nf, nc) = (fine.points_per_axis(), grid.points_per_axis());
    if nc > nf || nf % nc != 0 {
        return Err(invalid!("transport grid size {nc} must divide the field grid size {nf}"));
    }
    if g_field.min() < -1e-9 {
        return Err(invalid!("g has negative values down to {}", g_field.min()));
    }
    if (g_field.mean() - 1.0).abs() > 1e-9 {
        return Err(invalid!("g must have grid mean 1, got {}", g_field.mean()));
    }
    if !(f.f_min() > 0.0) {
        return Err(invalid!("the bound needs a positive lower bound on f"));
    }

    let phi = mean_zero(density_to_field(f, &fine)?.sub(g_field)?);
    let norm = match mode {
        PeyreMode::ExactP2 => sobolev_neg_norm_exact_p2(&phi)?,
        PeyreMode::Consequence => beckmann_upper_bound(&phi, p)?,
    };
    let rhs = peyre_bound(f.f_min(), p, norm);

    let stride = nf / nc;
    let mut idx = vec![0usize; d];
    let g_coarse: Vec<f64> = (0..grid.len())
        .map(|k| {
            grid.multi_index(k, &mut idx);
            for i in idx.iter_mut() {
                *i *= stride;
            }
            g_field.values()[fine.flat_index(&idx)].max(0.0)
        })
        .collect();
    let qg = DiscreteMeasure::normalized((0..grid.len()).map(|k| grid.node(k)).collect(), g_coarse)?;
    let lhs = exact_wasserstein(&quantize(f, grid)?, &qg, p)?.wasserstein;
    let slack = 2.0 * quantization_slack(grid) * p * lhs.max(1.0);
    let name = match mode {
        PeyreMode::ExactP2 => "peyre-exact-p2",
        PeyreMode::Consequence => "peyre-beckmann",
    };
    BoundReport::new(
        name,
        "W_p(quantized f, quantized g) <= p f_min^(1/p-1) ||f - g||",
        lhs,
        rhs,
        slack,
        ReportMeta { d, p, grid: Some(nc), ..Default::default() },
    )
}

/// `||A(f_h - f)||_p` against `h f_max` at one bandwidth.
pub fn bias_ratio(f: &DensitySpec, kernel: &KernelSpec, h: Bandwidth, p: f64, grid: &Grid) -> Result<ScaleObservation> {
    check_p(p)?;
    let diff = mean_zero(smoothed_density_field(f, kernel, h, grid)?.sub(&density_to_field(f, grid)?)?);
    let lhs = riesz_surrogate_norm(&diff, p)?;
    let rhs = h.h() * f.f_max();
    Ok(ScaleObservation { scale: h.h(), lhs, rhs, ratio: lhs / rhs, std_error: None })
}

/// Bias ratios along a bandwidth ladder, judged by their spread. A warning
/// is attached where halving `h` raised the ratio by more than 10%.
pub fn bias_ladder(f: &DensitySpec, kernel: &KernelSpec, hs: &[f64], p: f64, grid: &Grid) -> Result<BoundReport> {
    let ladder = hs
        .iter()
        .map(|&h| bias_ratio(f, kernel, Bandwidth::new(h)?, p, grid))
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    for w in ladder.windows(2) {
        if w[1].scale < w[0].scale && w[1].ratio > 1.1 * w[0].ratio {
            warnings.push(format!("ratio grew from {:.4e} at h = {} to {:.4e} at h = {}", w[0].ratio, w[0].scale, w[1].ratio, w[1].scale));
        }
    }
    let meta = ReportMeta { d: f.dim(), p, grid: Some(grid.points_per_axis()), ..Default::default() };
    let mut r = BoundReport::from_ladder("bias-ratio", ladder, RATIO_SPREAD_LIMIT, meta)?;
    r.warnings = warnings;
    Ok(r)
}

/// The sample-independent parts of the moment bound at one bandwidth.
#[derive(Debug, Clone)]
pub struct RosenthalSetup {
    p: f64,
    /// `a(m) kappa(h m)`, the spectrum of `A(K_h)`.
    symbol: SpectralField,
    /// `f^(m)` on the grid.
    density: SpectralField,
    /// `int (E |U(x)|^2)^{p/2} dx`.
    pub variance_integral: f64,
    /// `int E |U(x)|^p dx`.
    pub tail_integral: f64,
}

impl RosenthalSetup {
    /// The moments `E |U(x)|^q = int f(y) |A(K_h)(x - y)|^q dy` are circular
    /// convolutions on the grid, evaluated by FFT.
    pub fn new(f: &DensitySpec, kernel: &KernelSpec, h: Bandwidth, p: f64, grid: &Grid) -> Result<Self> {
        check_p(p)?;
        let density = f.exact_spectrum(grid)?;
        let mut ones = SpectralField::zeros(*grid);
        for c in ones.coeffs_mut() {
            *c = Complex64::new(1.0, 0.0);
        }
        let symbol = apply_multiplier(&smooth_spectrum(&ones, kernel, h), &symbol_a());
        let w = inverse_transform(&symbol.hermitian_part())?;
        let f_field = inverse_transform(&density)?;
        let moment = |q: f64| -> Result<GridField> {
            let powered = GridField::new(*grid, w.values().iter().map(|v| v.abs().powf(q)).collect())?;
            let mut spec = forward_transform(&powered);
            for (c, fc) in spec.coeffs_mut().iter_mut().zip(forward_transform(&f_field).coeffs()) {
                *c *= fc;
            }
            inverse_transform(&spec)
        };
        let second = moment(2.0)?;
        let variance_integral = second.values().iter().map(|v| v.max(0.0).powf(p / 2.0)).sum::<f64>() / grid.len() as f64;
        let tail_integral = moment(p)?.mean();
        Ok(Self { p, symbol, density, variance_integral, tail_integral })
    }

    /// `n^{-p/2} int (E|U|^2)^{p/2} + n^{1-p} int E|U|^p`.
    pub fn rhs(&self, n: usize) -> f64 {
        let n = n as f64;
        n.powf(-self.p / 2.0) * self.variance_integral + n.powf(1.0 - self.p) * self.tail_integral
    }

    /// `||(1/n) sum_i (U_i - E U_i)||_p^p` for one sample.
    pub fn replicate(&self, f: &DensitySpec, n: usize, seed: u64) -> Result<f64> {
        let grid = *self.symbol.grid();
        let mut spec = empirical_spectrum(&sample(f, n, seed)?, &grid)?;
        for ((c, s), fc) in spec.coeffs_mut().iter_mut().zip(self.symbol.coeffs()).zip(self.density.coeffs()) {
            *c = (*c - fc) * s;
        }
        let field = inverse_transform(&spec.hermitian_part())?;
        Ok(lp_norm_values(field.values(), self.p)?.powf(self.p))
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Monte Carlo moment against the Rosenthal form at one sample size, from
/// replicate values produced by [`RosenthalSetup::replicate`].
pub fn rosenthal_observation(setup: &RosenthalSetup, n: usize, values: &[f64]) -> Result<ScaleObservation> {
    if values.is_empty() {
        return Err(invalid!("no replicates"));
    }
    let (lhs, se) = mean_and_se(values);
    let rhs = setup.rhs(n);
    Ok(ScaleObservation { scale: n as f64, lhs, rhs, ratio: lhs / rhs, std_error: Some(se) })
}

/// Seed of replicate `r` at sample size `n`.
pub fn ladder_seed(seed: u64, n: usize, r: usize) -> u64 {
    derive_seed(derive_seed(seed, n as u64), r as u64)
}

/// Rosenthal ratios along a ladder of sample sizes, judged by their spread.
#[allow(clippy::too_many_arguments)]
pub fn rosenthal_check(
    f: &DensitySpec,
    kernel: &KernelSpec,
    h: Bandwidth,
    p: f64,
    ns: &[usize],
    grid: &Grid,
    reps: usize,
    seed: u64,
) -> Result<BoundReport> {
    let setup = RosenthalSetup::new(f, kernel, h, p, grid)?;
    let ladder = ns
        .iter()
        .map(|&n| {
            let values = (0..reps).map(|r| setup.replicate(f, n, ladder_seed(seed, n, r))).collect::<Result<Vec<_>>>()?;
            rosenthal_observation(&setup, n, &values)
        })
        .collect::<Result<Vec<_>>>()?;
    rosenthal_report(&setup, f.dim(), h, grid, reps, seed, ladder)
}

pub fn rosenthal_report(
    setup: &RosenthalSetup,
    d: usize,
    h: Bandwidth,
    grid: &Grid,
    reps: usize,
    seed: u64,
    ladder: Vec<ScaleObservation>,
) -> Result<BoundReport> {
    let meta = ReportMeta {
        d,
        p: setup.p,
        h: Some(h.h()),
        grid: Some(grid.points_per_axis()),
        reps: Some(reps),
        seed: Some(seed),
        ..Default::default()
    };
    let mut r = BoundReport::from_ladder("rosenthal-ratio", ladder, RATIO_SPREAD_LIMIT, meta)?;
    if reps < MIN_MOMENT_REPS {
        r.warnings.push(format!("only {reps} replicates per sample size, fewer than {MIN_MOMENT_REPS}"));
    }
    Ok(r)
}

/// `h = n^{-1/d}`, kept below 1/2.
pub fn decomposition_bandwidth(n: usize, d: usize) -> f64 {
    (n as f64).powf(-1.0 / d as f64).min(0.49)
}

/// One replicate of the decomposition: the transport distance and the
/// negative Sobolev norm of `f_{n,h} - f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSample {
    pub wasserstein: f64,
    pub norm: f64,
}

/// Grid for the norm of `f_{n,h} - f`: the transport grid refined until
/// `N h >= 64`, within a budget of `2^22` points.
fn norm_grid(grid: &Grid, h: f64) -> Result<Grid> {
    let d = grid.dim();
    let mut n = grid.points_per_axis();
    while (n as f64) * h < DECOMPOSITION_NH && ((2 * n) as u64).pow(d as u32) <= DECOMPOSITION_MAX_POINTS as u64 {
        n *= 2;
    }
    Grid::new(d, n)
}

#[allow(clippy::too_many_arguments)]
pub fn decomposition_replicate(
    f: &DensitySpec,
    kernel: &KernelSpec,
    h: Bandwidth,
    n: usize,
    p: f64,
    grid: &Grid,
    solver: Solver,
    seed: u64,
) -> Result<DecompositionSample> {
    check_p(p)?;
    let s = sample(f, n, seed)?;
    let wasserstein = empirical_vs_density_wasserstein(&s, f, grid, p, solver)?.wasserstein;
    let fine = norm_grid(grid, h.h())?;
    let phi = mean_zero(kde_field(&s, kernel, h, &fine, KdeMethod::Spectral)?.sub(&density_to_field(f, &fine)?)?);
    let norm = if p == 2.0 { sobolev_neg_norm_exact_p2(&phi)? } else { beckmann_upper_bound(&phi, p)? };
    Ok(DecompositionSample { wasserstein, norm })
}

/// `E W_p(mu_n, mu) <= C_0 h + p f_min^{1/p-1} E ||f_{n,h} - f||` from
/// replicate samples. The slack is the quantization budget plus three
/// standard errors of the per-replicate difference of the two sides.
#[allow(clippy::too_many_arguments)]
pub fn decomposition_report(
    f: &DensitySpec,
    kernel: &KernelSpec,
    h: Bandwidth,
    n: usize,
    p: f64,
    grid: &Grid,
    seed: u64,
    samples: &[DecompositionSample],
) -> Result<BoundReport> {
    if samples.len() < 2 {
        return Err(invalid!("the decomposition check needs at least two replicates"));
    }
    if !(f.f_min() > 0.0) {
        return Err(invalid!("the bound needs a positive lower bound on f"));
    }
    let c0h = kernel_c0(kernel, p)? * h.h();
    let rhs_of = |s: &DecompositionSample| c0h + peyre_bound(f.f_min(), p, s.norm);
    let lhs: Vec<f64> = samples.iter().map(|s| s.wasserstein).collect();
    let rhs: Vec<f64> = samples.iter().map(rhs_of).collect();
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let (l, _) = mean_and_se(&lhs);
    let (r, _) = mean_and_se(&rhs);
    let (_, se) = mean_and_se(&diff);
    let meta = ReportMeta {
        d: f.dim(),
        p,
        n: Some(n),
        h: Some(h.h()),
        grid: Some(grid.points_per_axis()),
        reps: Some(samples.len()),
        seed: Some(seed),
    };
    BoundReport::new(
        "decomposition",
        "E W_p(mu_n, mu) <= C_0 h + p f_min^(1/p-1) E ||f_{n,h} - f||",
        l,
        r,
        quantization_slack(grid) + 3.0 * se,
        meta,
    )
}

/// Sequential driver for [`decomposition_replicate`] and
/// [`decomposition_report`] with `h = n^{-1/d}`.
#[allow(clippy::too_many_arguments)]
pub fn decomposition_check(
    f: &DensitySpec,
    kernel: &KernelSpec,
    n: usize,
    p: f64,
    grid: &Grid,
    reps: usize,
    seed: u64,
    solver: Solver,
) -> Result<BoundReport> {
    let h = Bandwidth::new(decomposition_bandwidth(n, f.dim()))?;
    let samples = (0..reps)
        .map(|r| decomposition_replicate(f, kernel, h, n, p, grid, solver, derive_seed(seed, r as u64)))
        .collect::<Result<Vec<_>>>()?;
    decomposition_report(f, kernel, h, n, p, grid, seed, &samples)
}

/// `W_p(mu_n, mu_{n,h}) <= C_0 h`, with `mu_{n,h}` quantized on `grid` from
/// the exact kernel sums at the nodes.
pub fn smoothing_coupling_check(
    sample: &EmpiricalMeasure,
    kernel: &KernelSpec,
    h: Bandwidth,
    p: f64,
    grid: &Grid,
) -> Result<BoundReport> {
    let kde = kde_field(sample, kernel, h, grid, KdeMethod::Direct)?;
    let smoothed = DiscreteMeasure::normalized((0..grid.len()).map(|k| grid.node(k)).collect(), kde.into_values())?;
    let lhs = exact_wasserstein(&DiscreteMeasure::from_empirical(sample), &smoothed, p)?.wasserstein;
    let rhs = kernel_c0(kernel, p)? * h.h();
    let meta = ReportMeta {
        d: grid.dim(),
        p,
        n: Some(sample.len()),
        h: Some(h.h()),
        grid: Some(grid.points_per_axis()),
        ..Default::default()
    };
    BoundReport::new(
        "smoothing-coupling",
        "W_p(mu_n, quantized mu_{n,h}) <= C_0 h",
        lhs,
        rhs,
        quantization_slack(grid) + 1e-9,
        meta,
    )
}

/// Scaling of `S_0 + S_1` along a bandwidth ladder. The expected behaviour
/// depends on `d` and `p*`:
///
/// * `d = 1`: bounded, spread of the sums below 3;
/// * `d = 2`, `p* = 2`: like `-log h`, spread of `(S_0 + S_1) / (-log h)` below 10;
/// * otherwise like `h^{p* - d}`: fitted log-log slope within 0.2 of `p* - d`.
pub fn s_sum_ladder(kernel: &KernelSpec, hs: &[f64], p_star: f64) -> Result<BoundReport> {
    let d = kernel.dim();
    let mut warnings = Vec::new();
    let mut ladder = Vec::with_capacity(hs.len());
    for &h in hs {
        let bw = Bandwidth::new(h)?;
        let s = v_h_sums(kernel, bw, p_star, default_truncation(bw))?;
        if s.precision_warning {
            warnings.push(format!("truncated tail not negligible at h = {h}"));
        }
        let form = if d == 1 {
            1.0
        } else if d == 2 && p_star == 2.0 {
            -h.ln()
        } else {
            h.powf(p_star - d as f64)
        };
        ladder.push(ScaleObservation { scale: h, lhs: s.total(), rhs: form, ratio: s.total() / form, std_error: None });
    }
    let meta = ReportMeta { d, p: p_star / (p_star - 1.0), ..Default::default() };
    let mut r = if d == 1 {
        BoundReport::from_ladder("s-sums", ladder, 3.0, meta)?
    } else if d == 2 && p_star == 2.0 {
        BoundReport::from_ladder("s-sums", ladder, RATIO_SPREAD_LIMIT, meta)?
    } else {
        let pts: Vec<(f64, f64)> = ladder.iter().map(|o| (o.scale, o.lhs)).collect();
        let slope = fit_rate(&pts)?.slope;
        let want = p_star - d as f64;
        let mut r = BoundReport::new(
            "s-sums",
            format!("|fitted slope of log(S_0 + S_1) vs log h - ({want})| <= 0.2"),
            (slope - want).abs(),
            0.2,
            0.0,
            meta,
        )?;
        r.ladder = ladder;
        r
    };
    r.warnings = warnings;
    Ok(r)
}
