//! Monte Carlo drivers: rate experiments and lemma suites.
//!
//! Every replicate draws its sample from a seed derived from the master seed
//! and its `(n, replicate)` coordinate, and results are gathered in ladder
//! order, so outputs do not depend on the number of worker threads.

use std::f64::consts::PI;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use torus_ot_core::bounds::{
    bias_ladder, decomposition_replicate, decomposition_report, ladder_seed, peyre_bound, peyre_check,
    rosenthal_observation, rosenthal_report, s_sum_ladder, smoothing_coupling_check, BoundReport, PeyreMode,
    ReportMeta, RosenthalSetup, Verdict,
};
use torus_ot_core::density::{cosine_mixture_density, density_to_field, sample, CosineMode, DensitySpec};
use torus_ot_core::kernel::{bump_kernel, kernel_c0, Bandwidth};
use torus_ot_core::ot::{empirical_vs_density_wasserstein, OtMethod, Solver};
use torus_ot_core::rate::{RatePoint, RateReport};
use torus_ot_core::rng::{derive_seed, rng_from_seed, uniform01, Rng};
use torus_ot_core::spectral::{
    beckmann_upper_bound, dual_ascent_lower_bound, riesz_surrogate_norm, sobolev_neg_norm_exact_p2,
};
use torus_ot_core::torus::{Grid, GridField};

use crate::config::{ExperimentConfig, RateBand, SuiteConfig};
use crate::error::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: usize,
    /// Zero out wall-clock fields so reruns are byte-identical.
    pub deterministic: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1, deterministic: true }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, LabError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| LabError::Config(format!("cannot start {jobs} worker threads: {e}")))
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub d: usize,
    pub p: f64,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub h: f64,
    pub wasserstein: f64,
    pub solver: OtMethod,
    pub runtime_ms: u64,
}

/// Entropic and exact means on the same samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub n: usize,
    pub entropic_mean: f64,
    pub exact_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandOutcome {
    pub band: RateBand,
    pub observed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub name: String,
    pub config: ExperimentConfig,
    pub report: RateReport,
    /// Fit of the per-replicate decomposition bound, when requested.
    pub decomposition: Option<RateReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spot_checks: Vec<SpotCheck>,
    pub quantization_slack: f64,
    pub band: BandOutcome,
    /// Means are nonincreasing in `n` up to three standard errors.
    pub monotone: bool,
}

#[derive(Debug, Clone)]
pub struct RateRun {
    pub summary: RateSummary,
    pub rows: Vec<ReplicateRow>,
}

struct Outcome {
    row: ReplicateRow,
    bound: Option<f64>,
    exact: Option<ReplicateRow>,
}

pub fn monotone_within_se(points: &[RatePoint]) -> bool {
    points.windows(2).all(|w| {
        let tol = 3.0 * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        w[1].mean <= w[0].mean + tol
    })
}

pub fn band_outcome(band: RateBand, report: &RateReport) -> BandOutcome {
    match band {
        RateBand::Slope { min, max } => {
            let s = report.fit.slope;
            BandOutcome { band, observed: s, passed: (min..=max).contains(&s) }
        }
        RateBand::LogRate { max_spread } => {
            let spread = report.log_rate.map(|l| l.spread).unwrap_or(f64::INFINITY);
            BandOutcome { band, observed: spread, passed: spread < max_spread }
        }
    }
}

/// Draws every `(n, replicate)` sample, measures `W_p` against the quantized
/// density and fits the rate.
pub fn run_rate_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RateRun, LabError> {
    cfg.validate()?;
    let density = cfg.density.build(cfg.d)?;
    let grid = Grid::new(cfg.d, cfg.grid)?;
    let kernel = bump_kernel(cfg.d)?;
    let solver = cfg.solver();
    let rule = cfg.h_rule();
    let spot_max = match solver {
        Solver::Entropic { .. } => cfg.exact_spot_check_max_n.unwrap_or(0),
        Solver::Exact => 0,
    };
    let items: Vec<(usize, usize)> = cfg.n_ladder.iter().flat_map(|&n| (0..cfg.reps).map(move |r| (n, r))).collect();

    let run_one = |&(n, r): &(usize, usize)| -> Result<Outcome, LabError> {
        let wrap = |source| LabError::Replicate { n, replicate: r, source };
        let seed = ladder_seed(cfg.seed, n, r);
        let h = rule.h(n);
        let start = Instant::now();
        let (w, bound) = if cfg.decomposition_bound {
            let bw = Bandwidth::new(h).map_err(wrap)?;
            let s = decomposition_replicate(&density, &kernel, bw, n, cfg.p, &grid, solver, seed).map_err(wrap)?;
            let c0 = kernel_c0(&kernel, cfg.p).map_err(wrap)?;
            (s.wasserstein, Some(c0 * h + peyre_bound(density.f_min(), cfg.p, s.norm)))
        } else {
            let s = sample(&density, n, seed).map_err(wrap)?;
            (empirical_vs_density_wasserstein(&s, &density, &grid, cfg.p, solver).map_err(wrap)?.wasserstein, None)
        };
        let elapsed = |t: Instant| if opts.deterministic { 0 } else { t.elapsed().as_millis() as u64 };
        let row = ReplicateRow {
            d: cfg.d,
            p: cfg.p,
            n,
            replicate: r,
            seed,
            h,
            wasserstein: w,
            solver: solver.method(),
            runtime_ms: elapsed(start),
        };
        let exact = if n <= spot_max {
            let t = Instant::now();
            let s = sample(&density, n, seed).map_err(wrap)?;
            let e = empirical_vs_density_wasserstein(&s, &density, &grid, cfg.p, Solver::Exact).map_err(wrap)?;
            Some(ReplicateRow { wasserstein: e.wasserstein, solver: OtMethod::Exact, runtime_ms: elapsed(t), ..row.clone() })
        } else {
            None
        };
        if r + 1 == cfg.reps {
            info!("{}: n = {n} done", cfg.name);
        }
        Ok(Outcome { row, bound, exact })
    };
    let outcomes = pool(opts.jobs)?.install(|| items.par_iter().map(run_one).collect::<Result<Vec<_>, _>>())?;

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut points = Vec::new();
    let mut bound_points = Vec::new();
    let mut spot_checks = Vec::new();
    for (k, &n) in cfg.n_ladder.iter().enumerate() {
        let chunk = &outcomes[k * cfg.reps..(k + 1) * cfg.reps];
        points.push(RatePoint::from_values(n, chunk.iter().map(|o| o.row.wasserstein).collect())?);
        if cfg.decomposition_bound {
            bound_points.push(RatePoint::from_values(n, chunk.iter().filter_map(|o| o.bound).collect())?);
        }
        if n <= spot_max {
            let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
            spot_checks.push(SpotCheck {
                n,
                entropic_mean: mean(chunk.iter().map(|o| o.row.wasserstein).collect()),
                exact_mean: mean(chunk.iter().filter_map(|o| o.exact.as_ref().map(|e| e.wasserstein)).collect()),
            });
        }
        for o in chunk {
            rows.push(o.row.clone());
            rows.extend(o.exact.clone());
        }
    }
    let boot_seed = derive_seed(cfg.seed, u64::MAX);
    let report = RateReport::from_points(cfg.d, cfg.p, points, boot_seed)?;
    let decomposition =
        if cfg.decomposition_bound { Some(RateReport::from_points(cfg.d, cfg.p, bound_points, boot_seed)?) } else { None };
    let summary = RateSummary {
        name: cfg.name.clone(),
        config: cfg.clone(),
        band: band_outcome(cfg.band(), &report),
        monotone: monotone_within_se(&report.points),
        quantization_slack: torus_ot_core::ot::quantization_slack(&grid),
        report,
        decomposition,
        spot_checks,
    };
    Ok(RateRun { summary, rows })
}

/// A trigonometric density with `modes` random cosines and total amplitude
/// at most `total`. Frequencies are uniform on the lattice points of
/// `[-max_frequency, max_frequency]^d` with `max(1, min_norm) <= |m|_2 <= max_frequency`.
pub fn random_density(
    rng: &mut Rng,
    d: usize,
    modes: usize,
    min_norm: f64,
    max_frequency: i64,
    total: f64,
) -> Result<DensitySpec, LabError> {
    let span = (2 * max_frequency + 1) as f64;
    let lo = min_norm.max(1.0);
    if max_frequency < 1 || lo > max_frequency as f64 {
        return Err(LabError::Config(format!("no frequencies with {lo} <= |m| <= {max_frequency}")));
    }
    let list = (0..modes)
        .map(|_| {
            let m = loop {
                let m: Vec<i64> = (0..d).map(|_| (uniform01(rng) * span) as i64 - max_frequency).collect();
                let norm = (m.iter().map(|&x| (x * x) as f64).sum::<f64>()).sqrt();
                if norm >= lo && norm <= max_frequency as f64 {
                    break m;
                }
            };
            CosineMode::new(m, total / modes as f64 * (0.2 + 0.8 * uniform01(rng)), 2.0 * PI * uniform01(rng))
        })
        .collect();
    Ok(cosine_mixture_density(d, list)?)
}

/// Which parts of a lemma suite to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sections {
    pub peyre: bool,
    pub smoothing: bool,
    pub bias: bool,
    pub rosenthal: bool,
    pub s_sums: bool,
    pub decomposition: bool,
    pub norms: bool,
}

impl Sections {
    pub const ALL: Sections =
        Sections { peyre: true, smoothing: true, bias: true, rosenthal: true, s_sums: true, decomposition: true, norms: true };
    pub const NONE: Sections =
        Sections { peyre: false, smoothing: false, bias: false, rosenthal: false, s_sums: false, decomposition: false, norms: false };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutput {
    pub name: String,
    pub seed: u64,
    pub config: SuiteConfig,
    pub reports: Vec<BoundReport>,
    pub violated: usize,
}

fn section_seed(seed: u64, section: u64) -> u64 {
    derive_seed(seed, 0x5ec7_0000 + section)
}

fn with_seed(mut r: BoundReport, seed: u64) -> BoundReport {
    r.meta.seed = Some(seed);
    r
}

pub fn peyre_reports(cfg: &SuiteConfig, jobs: usize) -> Result<Vec<BoundReport>, LabError> {
    let s = &cfg.peyre;
    let base = section_seed(cfg.seed, 1);
    let mode = if s.p == 2.0 { PeyreMode::ExactP2 } else { PeyreMode::Consequence };
    pool(jobs)?.install(|| {
        (0..s.pairs)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(base, i as u64);
                let mut rng = rng_from_seed(seed);
                let d = s.dims[i % s.dims.len()];
                let fine = Grid::new(d, s.grid)?;
                let coarse = Grid::new(d, s.transport_grid[d - 1].min(s.grid))?;
                let f = random_density(&mut rng, d, s.modes, 1.0, s.max_frequency, 0.8)?;
                let g = random_density(&mut rng, d, s.modes, 1.0, s.max_frequency, 0.8)?;
                let r = peyre_check(&f, &density_to_field(&g, &fine)?, s.p, &coarse, mode)?;
                Ok(with_seed(r, seed))
            })
            .collect()
    })
}

pub fn smoothing_reports(cfg: &SuiteConfig, jobs: usize) -> Result<Vec<BoundReport>, LabError> {
    let s = &cfg.smoothing;
    let base = section_seed(cfg.seed, 2);
    pool(jobs)?.install(|| {
        (0..s.instances)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(base, i as u64);
                let mut rng = rng_from_seed(seed);
                let d = s.dims[i % s.dims.len()];
                let grid = Grid::new(d, s.grid)?;
                let n = 1 + (uniform01(&mut rng) * s.max_n as f64) as usize;
                let h_min = (8.0 / s.grid as f64).min(0.25);
                let h = h_min + (0.25 - h_min) * uniform01(&mut rng);
                let f = random_density(&mut rng, d, 2, 1.0, 3, 0.7)?;
                let smp = sample(&f, n, derive_seed(seed, 1))?;
                let r = smoothing_coupling_check(&smp, &bump_kernel(d)?, Bandwidth::new(h)?, s.p, &grid)?;
                Ok(with_seed(r, seed))
            })
            .collect()
    })
}

pub fn bias_reports(cfg: &SuiteConfig, jobs: usize) -> Result<Vec<BoundReport>, LabError> {
    let s = &cfg.bias;
    let base = section_seed(cfg.seed, 3);
    let items: Vec<(usize, usize, f64)> = s
        .dims
        .iter()
        .flat_map(|&d| (0..s.densities).flat_map(move |j| s.p.iter().map(move |&p| (d, j, p))))
        .collect();
    pool(jobs)?.install(|| {
        items
            .par_iter()
            .map(|&(d, j, p)| {
                let seed = derive_seed(base, (d * 1000 + j) as u64);
                let f = random_density(&mut rng_from_seed(seed), d, s.modes, s.min_frequency, s.max_frequency, 0.6)?;
                let r = bias_ladder(&f, &bump_kernel(d)?, &s.h_ladder, p, &Grid::new(d, s.grid[d - 1])?)?;
                Ok(with_seed(r, seed))
            })
            .collect()
    })
}

pub fn rosenthal_reports(cfg: &SuiteConfig, jobs: usize) -> Result<Vec<BoundReport>, LabError> {
    let s = &cfg.rosenthal;
    let base = section_seed(cfg.seed, 4);
    let f = s.density.build(s.d)?;
    let kernel = bump_kernel(s.d)?;
    let grid = Grid::new(s.d, s.grid)?;
    let h = Bandwidth::new(s.h)?;
    let pool = pool(jobs)?;
    s.p.iter()
        .map(|&p| {
            let setup = RosenthalSetup::new(&f, &kernel, h, p, &grid)?;
            let ladder = s
                .n_ladder
                .iter()
                .map(|&n| {
                    let values = pool.install(|| {
                        (0..s.reps)
                            .into_par_iter()
                            .map(|r| {
                                setup
                                    .replicate(&f, n, ladder_seed(base, n, r))
                                    .map_err(|source| LabError::Replicate { n, replicate: r, source })
                            })
                            .collect::<Result<Vec<_>, _>>()
                    })?;
                    Ok(rosenthal_observation(&setup, n, &values)?)
                })
                .collect::<Result<Vec<_>, LabError>>()?;
            Ok(rosenthal_report(&setup, s.d, h, &grid, s.reps, base, ladder)?)
        })
        .collect()
}

pub fn s_sum_reports(cfg: &SuiteConfig, jobs: usize) -> Result<Vec<BoundReport>, LabError> {
    let s = &cfg.s_sums;
    pool(jobs)?.install(|| {
        s.dims
            .par_iter()
            .map(|&d| Ok(s_sum_ladder(&bump_kernel(d)?, &s.h_ladder, s.p_star)?))
            .collect()
    })
}

pub fn decomposition_reports(cfg: &SuiteConfig, jobs: usize) -> Result<Vec<BoundReport>, LabError> {
    let s = &cfg.decomposition;
    let base = section_seed(cfg.seed, 6);
    let f = s.density.build(s.d)?;
    let kernel = bump_kernel(s.d)?;
    let grid = Grid::new(s.d, s.grid)?;
    let h = Bandwidth::new(torus_ot_core::bounds::decomposition_bandwidth(s.n, s.d))?;
    let samples = pool(jobs)?.install(|| {
        (0..s.reps)
            .into_par_iter()
            .map(|r| {
                decomposition_replicate(&f, &kernel, h, s.n, s.p, &grid, Solver::Exact, derive_seed(base, r as u64))
                    .map_err(|source| LabError::Replicate { n: s.n, replicate: r, source })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(vec![decomposition_report(&f, &kernel, h, s.n, s.p, &grid, base, &samples)?])
}

fn random_mean_zero_field(grid: Grid, seed: u64) -> Result<GridField, LabError> {
    let mut rng = rng_from_seed(seed);
    let mut v: Vec<f64> = (0..grid.len()).map(|_| 2.0 * uniform01(&mut rng) - 1.0).collect();
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
    Ok(GridField::new(grid, v)?)
}

/// Number of fields used for the dual ascent comparison, which is the
/// expensive part of the norm section.
const DUALITY_FIELDS: usize = 10;

pub fn norm_reports(cfg: &SuiteConfig, jobs: usize) -> Result<Vec<BoundReport>, LabError> {
    let s = &cfg.norms;
    let base = section_seed(cfg.seed, 7);
    let mut out = Vec::new();
    for &d in &s.dims {
        let grid = Grid::new(d, s.grid)?;
        let ratios = pool(jobs)?.install(|| {
            (0..s.fields)
                .into_par_iter()
                .map(|i| {
                    let f = random_mean_zero_field(grid, derive_seed(base, (d * 100_000 + i) as u64))?;
                    Ok(riesz_surrogate_norm(&f, 2.0)? / sobolev_neg_norm_exact_p2(&f)?)
                })
                .collect::<Result<Vec<f64>, LabError>>()
        })?;
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let meta = ReportMeta { d, p: 2.0, grid: Some(s.grid), reps: Some(s.fields), seed: Some(base), ..Default::default() };
        out.push(BoundReport::new("norm-sandwich-upper", "max ||A phi||_2 / ||phi||_H <= 2 pi", hi, 2.0 * PI, 1e-9, meta.clone())?);
        out.push(BoundReport::new(
            "norm-sandwich-lower",
            "2 pi / sqrt(d) <= min ||A phi||_2 / ||phi||_H",
            2.0 * PI / (d as f64).sqrt(),
            lo,
            1e-9,
            meta,
        )?);
        if d <= 2 {
            for &p in &s.p {
                let worst = pool(jobs)?.install(|| {
                    (0..DUALITY_FIELDS.min(s.fields))
                        .into_par_iter()
                        .map(|i| {
                            let f = random_mean_zero_field(grid, derive_seed(base, (d * 100_000 + i) as u64))?;
                            Ok(dual_ascent_lower_bound(&f, p, 4, 100)? / beckmann_upper_bound(&f, p)?)
                        })
                        .collect::<Result<Vec<f64>, LabError>>()
                })?;
                let worst = worst.into_iter().fold(f64::NEG_INFINITY, f64::max);
                let meta = ReportMeta { d, p, grid: Some(s.grid), reps: Some(DUALITY_FIELDS.min(s.fields)), seed: Some(base), ..Default::default() };
                out.push(BoundReport::new("weak-duality", "max dual lower bound / Beckmann upper bound <= 1", worst, 1.0, 1e-9, meta)?);
            }
        }
    }
    Ok(out)
}

pub fn run_lemma_suite(cfg: &SuiteConfig, sections: Sections, jobs: usize) -> Result<SuiteOutput, LabError> {
    cfg.validate()?;
    let mut reports = Vec::new();
    type Runner = fn(&SuiteConfig, usize) -> Result<Vec<BoundReport>, LabError>;
    let plan: [(bool, bool, &str, Runner); 7] = [
        (sections.peyre, cfg.peyre.enabled, "peyre", peyre_reports),
        (sections.smoothing, cfg.smoothing.enabled, "smoothing", smoothing_reports),
        (sections.bias, cfg.bias.enabled, "bias", bias_reports),
        (sections.rosenthal, cfg.rosenthal.enabled, "rosenthal", rosenthal_reports),
        (sections.s_sums, cfg.s_sums.enabled, "s-sums", s_sum_reports),
        (sections.decomposition, cfg.decomposition.enabled, "decomposition", decomposition_reports),
        (sections.norms, cfg.norms.enabled, "norms", norm_reports),
    ];
    for (wanted, enabled, label, run) in plan {
        if wanted && enabled {
            let part = run(cfg, jobs)?;
            info!("{label}: {} reports, {} violated", part.len(), part.iter().filter(|r| r.is_violated()).count());
            reports.extend(part);
        }
    }
    if reports.is_empty() {
        return Err(LabError::Config(format!("{}: no checks selected", cfg.name)));
    }
    let violated = reports.iter().filter(|r| r.verdict == Verdict::Violated).count();
    Ok(SuiteOutput { name: cfg.name.clone(), seed: cfg.seed, config: cfg.clone(), reports, violated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DensityConfig, HRule, SolverKind};

    fn small(name: &str) -> ExperimentConfig {
        ExperimentConfig {
            name: name.into(),
            d: 1,
            p: 2.0,
            density: DensityConfig::Uniform,
            n_ladder: vec![32, 64, 128],
            h_rule: None,
            reps: 5,
            grid: 128,
            solver: SolverKind::Exact,
            epsilon: None,
            max_iter: None,
            seed: 3,
            decomposition_bound: false,
            exact_spot_check_max_n: None,
            band: None,
        }
    }

    #[test]
    fn synthetic_power_law_recovers_slope() {
        let points: Vec<RatePoint> = [100usize, 200, 400, 800]
            .iter()
            .map(|&n| RatePoint::from_values(n, vec![0.3 * (n as f64).powf(-0.5); 6]).unwrap())
            .collect();
        let r = RateReport::from_points(1, 2.0, points, 1).unwrap();
        assert!((r.fit.slope + 0.5).abs() < 1e-12);
        let b = band_outcome(RateBand::Slope { min: -0.6, max: -0.4 }, &r);
        assert!(b.passed);
        assert!(!band_outcome(RateBand::Slope { min: -0.3, max: -0.2 }, &r).passed);
    }

    #[test]
    fn rate_run_is_deterministic_across_jobs() {
        let cfg = small("det");
        let a = run_rate_experiment(&cfg, RunOptions { jobs: 1, deterministic: true }).unwrap();
        let b = run_rate_experiment(&cfg, RunOptions { jobs: 3, deterministic: true }).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(serde_json::to_string(&a.summary).unwrap(), serde_json::to_string(&b.summary).unwrap());
        assert_eq!(a.rows.len(), 15);
        assert!(a.summary.report.points.iter().all(|p| p.std_error > 0.0 && p.std_error.is_finite()));
        assert!(a.summary.monotone);
    }

    #[test]
    fn replicate_errors_carry_coordinates() {
        let mut cfg = small("err");
        cfg.d = 2;
        cfg.grid = 256;
        cfg.n_ladder = vec![16, 32];
        // 65536 grid atoms exceed the exact solver cap
        let err = run_rate_experiment(&cfg, RunOptions::default()).unwrap_err();
        assert!(matches!(err, LabError::Replicate { n: 16, .. }), "{err}");
    }

    #[test]
    fn spot_checks_use_the_same_samples() {
        let mut cfg = small("spot");
        cfg.solver = SolverKind::Entropic;
        cfg.epsilon = Some(0.01);
        cfg.exact_spot_check_max_n = Some(64);
        let run = run_rate_experiment(&cfg, RunOptions::default()).unwrap();
        assert_eq!(run.summary.spot_checks.len(), 2);
        for s in &run.summary.spot_checks {
            assert!(s.entropic_mean >= s.exact_mean - 1e-12);
        }
        assert_eq!(run.rows.len(), 15 + 10);
    }

    #[test]
    fn constant_bandwidth_flattens_the_bound() {
        let mut cfg = small("h");
        cfg.n_ladder = vec![32, 64, 128, 256];
        cfg.grid = 512;
        cfg.reps = 6;
        cfg.decomposition_bound = true;
        cfg.h_rule = Some(HRule { c: 4.0, exponent: 1.0 });
        let scaled = run_rate_experiment(&cfg, RunOptions::default()).unwrap();
        cfg.h_rule = Some(HRule { c: 0.125, exponent: 0.0 });
        let fixed = run_rate_experiment(&cfg, RunOptions::default()).unwrap();
        let s1 = scaled.summary.decomposition.unwrap().fit.slope;
        let s0 = fixed.summary.decomposition.unwrap().fit.slope;
        assert!(s0 > s1, "constant h slope {s0} vs scaled {s1}");
        assert_eq!(scaled.summary.report, fixed.summary.report);
    }

    #[test]
    fn monotone_check() {
        let p = |n, m: f64, se| RatePoint { n, mean: m, std_error: se, values: vec![] };
        assert!(monotone_within_se(&[p(1, 1.0, 0.1), p(2, 1.2, 0.1)]));
        assert!(!monotone_within_se(&[p(1, 1.0, 0.01), p(2, 1.2, 0.01)]));
    }

    #[test]
    fn suite_sections_are_deterministic() {
        let mut cfg: SuiteConfig = toml::from_str("").unwrap();
        cfg.peyre.pairs = 4;
        cfg.smoothing.instances = 4;
        cfg.smoothing.grid = 32;
        cfg.bias.densities = 1;
        cfg.rosenthal.reps = 8;
        cfg.rosenthal.n_ladder = vec![16, 64];
        cfg.decomposition.reps = 4;
        cfg.decomposition.n = 64;
        cfg.decomposition.grid = 128;
        cfg.norms.fields = 4;
        cfg.norms.dims = vec![1, 2];
        cfg.s_sums.dims = vec![1, 2];
        let a = run_lemma_suite(&cfg, Sections::ALL, 1).unwrap();
        let b = run_lemma_suite(&cfg, Sections::ALL, 2).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.violated, 0, "{:#?}", a.reports.iter().filter(|r| r.is_violated()).collect::<Vec<_>>());
        assert!(a.reports.iter().any(|r| r.name == "rosenthal-ratio" && !r.warnings.is_empty()));
        let none = run_lemma_suite(&cfg, Sections::NONE, 1);
        assert!(matches!(none, Err(LabError::Config(_))));
    }
}
