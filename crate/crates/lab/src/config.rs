//! TOML configuration for rate experiments and lemma suites.

use std::path::Path;

use serde::{Deserialize, Serialize};
use torus_ot_core::density::{cosine_mixture_density, uniform_density, CosineMode, DensitySpec};
use torus_ot_core::ot::Solver;

use crate::error::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityConfig {
    Uniform,
    CosineMixture { modes: Vec<ModeConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub m: Vec<i64>,
    pub alpha: f64,
    #[serde(default)]
    pub theta: f64,
}

impl DensityConfig {
    pub fn build(&self, d: usize) -> Result<DensitySpec, LabError> {
        let spec = match self {
            DensityConfig::Uniform => uniform_density(d),
            DensityConfig::CosineMixture { modes } => cosine_mixture_density(
                d,
                modes.iter().map(|m| CosineMode::new(m.m.clone(), m.alpha, m.theta)).collect(),
            ),
        };
        spec.map_err(|e| LabError::Config(format!("density: {e}")))
    }
}

/// `h = c n^{-exponent}`, clipped into `(0, 0.49]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HRule {
    pub c: f64,
    pub exponent: f64,
}

impl HRule {
    pub fn default_for(d: usize) -> Self {
        Self { c: if d == 1 { 0.4 } else { 0.5 }, exponent: 1.0 / d as f64 }
    }

    pub fn h(&self, n: usize) -> f64 {
        (self.c * (n as f64).powf(-self.exponent)).min(0.49)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Entropic,
}

pub const DEFAULT_EPSILON: f64 = 0.003;
pub const DEFAULT_MAX_ITER: u64 = 100_000;

/// Pass/fail band for the fitted rate; the default depends on `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateBand {
    /// Fitted power-law slope in `[min, max]`.
    Slope { min: f64, max: f64 },
    /// `max / min` of `mean sqrt(n / ln n)` below `max_spread`.
    LogRate { max_spread: f64 },
}

impl RateBand {
    pub fn default_for(d: usize) -> Self {
        match d {
            1 => RateBand::Slope { min: -0.60, max: -0.40 },
            2 => RateBand::LogRate { max_spread: 2.0 },
            _ => {
                let s = -1.0 / d as f64;
                RateBand::Slope { min: s - 0.10, max: s + 0.10 }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub d: usize,
    #[serde(default = "two")]
    pub p: f64,
    pub density: DensityConfig,
    pub n_ladder: Vec<usize>,
    #[serde(default)]
    pub h_rule: Option<HRule>,
    pub reps: usize,
    pub grid: usize,
    pub solver: SolverKind,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    /// Also evaluate `C_0 h + p f_min^{1/p-1} ||f_{n,h} - f||` per replicate.
    #[serde(default)]
    pub decomposition_bound: bool,
    /// With the entropic solver, re-solve exactly for `n` up to this size.
    #[serde(default)]
    pub exact_spot_check_max_n: Option<usize>,
    #[serde(default)]
    pub band: Option<RateBand>,
}

fn two() -> f64 {
    2.0
}

impl ExperimentConfig {
    pub fn h_rule(&self) -> HRule {
        self.h_rule.unwrap_or_else(|| HRule::default_for(self.d))
    }

    pub fn band(&self) -> RateBand {
        self.band.unwrap_or_else(|| RateBand::default_for(self.d))
    }

    pub fn solver(&self) -> Solver {
        match self.solver {
            SolverKind::Exact => Solver::Exact,
            SolverKind::Entropic => Solver::Entropic {
                epsilon: self.epsilon.unwrap_or(DEFAULT_EPSILON),
                max_iter: self.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            },
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |msg: String| Err(LabError::Config(format!("{}: {msg}", self.name)));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be a non-empty file stem".into());
        }
        if !(1..=3).contains(&self.d) {
            return bad(format!("d must be 1, 2 or 3, got {}", self.d));
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return bad(format!("p must be finite and >= 1, got {}", self.p));
        }
        if self.n_ladder.len() < 2 {
            return bad("n_ladder needs at least two sample sizes".into());
        }
        if self.n_ladder[0] == 0 || self.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_ladder must be strictly increasing and positive".into());
        }
        if self.reps < 5 {
            return bad(format!("reps must be at least 5, got {}", self.reps));
        }
        if self.grid < 2 || !self.grid.is_power_of_two() {
            return bad(format!("grid must be a power of two >= 2, got {}", self.grid));
        }
        let rule = self.h_rule();
        if !(rule.c > 0.0) || !rule.c.is_finite() || !(rule.exponent >= 0.0) || !rule.exponent.is_finite() {
            return bad(format!("invalid h rule {rule:?}"));
        }
        let h_min = self.n_ladder.iter().map(|&n| rule.h(n)).fold(f64::INFINITY, f64::min);
        if !(h_min > 0.0) {
            return bad("bandwidths must be positive".into());
        }
        if self.decomposition_bound {
            if self.p < 2.0 {
                return bad("the decomposition bound needs p >= 2".into());
            }
            let nh = self.grid as f64 * h_min;
            if nh < 8.0 {
                return bad(format!("N * min(h) = {nh} < 8, the kernel is not resolved by the grid"));
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) || !eps.is_finite() {
                return bad(format!("epsilon must be positive, got {eps}"));
            }
        }
        if let RateBand::Slope { min, max } = self.band() {
            if !(min <= max) {
                return bad("slope band must satisfy min <= max".into());
            }
        }
        self.density.build(self.d)?;
        Ok(())
    }
}

/// Sections of a lemma suite run. Missing sections take their defaults;
/// a section can be switched off with `enabled = false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    pub seed: u64,
    pub peyre: PeyreSection,
    pub smoothing: SmoothingSection,
    pub bias: BiasSection,
    pub rosenthal: RosenthalSection,
    pub s_sums: SSumSection,
    pub decomposition: DecompositionSection,
    pub norms: NormSection,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            name: "lemma-suite".into(),
            seed: 1,
            peyre: Default::default(),
            smoothing: Default::default(),
            bias: Default::default(),
            rosenthal: Default::default(),
            s_sums: Default::default(),
            decomposition: Default::default(),
            norms: Default::default(),
        }
    }
}

fn dyadic_ladder() -> Vec<f64> {
    (2..=7).map(|k| 0.5f64.powi(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeyreSection {
    pub enabled: bool,
    pub pairs: usize,
    pub dims: Vec<usize>,
    /// Grid of the norm computation.
    pub grid: usize,
    /// Grid of the transport problem, per dimension 1, 2, 3.
    pub transport_grid: [usize; 3],
    pub max_frequency: i64,
    pub modes: usize,
    pub p: f64,
}

impl Default for PeyreSection {
    fn default() -> Self {
        Self { enabled: true, pairs: 100, dims: vec![1, 2], grid: 256, transport_grid: [256, 32, 16], max_frequency: 4, modes: 3, p: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingSection {
    pub enabled: bool,
    pub instances: usize,
    pub dims: Vec<usize>,
    pub grid: usize,
    pub max_n: usize,
    pub p: f64,
}

impl Default for SmoothingSection {
    fn default() -> Self {
        Self { enabled: true, instances: 100, dims: vec![1, 2], grid: 128, max_n: 200, p: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasSection {
    pub enabled: bool,
    pub dims: Vec<usize>,
    pub densities: usize,
    pub modes: usize,
    /// Frequencies are drawn with `min_frequency <= |m|_2 <= max_frequency`.
    /// The ratio is only flat where `h |m|` is near 1, so this band should
    /// sit inside `1 / h_ladder`.
    pub min_frequency: f64,
    pub max_frequency: i64,
    pub p: Vec<f64>,
    pub h_ladder: Vec<f64>,
    /// Grid per dimension 1, 2, 3.
    pub grid: [usize; 3],
}

impl Default for BiasSection {
    fn default() -> Self {
        Self {
            enabled: true,
            dims: vec![1, 2],
            densities: 5,
            modes: 3,
            min_frequency: 8.0,
            max_frequency: 24,
            p: vec![2.0, 4.0],
            h_ladder: dyadic_ladder(),
            grid: [512, 256, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RosenthalSection {
    pub enabled: bool,
    pub d: usize,
    pub p: Vec<f64>,
    pub h: f64,
    pub n_ladder: Vec<usize>,
    pub reps: usize,
    pub grid: usize,
    pub density: DensityConfig,
}

impl Default for RosenthalSection {
    fn default() -> Self {
        Self {
            enabled: true,
            d: 1,
            p: vec![2.0],
            h: 0.05,
            n_ladder: vec![16, 64, 256, 1024],
            reps: 100,
            grid: 256,
            density: DensityConfig::CosineMixture {
                modes: vec![ModeConfig { m: vec![1], alpha: 0.3, theta: 0.2 }, ModeConfig { m: vec![3], alpha: 0.2, theta: 1.0 }],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SSumSection {
    pub enabled: bool,
    pub dims: Vec<usize>,
    pub p_star: f64,
    pub h_ladder: Vec<f64>,
}

impl Default for SSumSection {
    fn default() -> Self {
        Self { enabled: true, dims: vec![1, 2, 3], p_star: 2.0, h_ladder: dyadic_ladder() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionSection {
    pub enabled: bool,
    pub d: usize,
    pub p: f64,
    pub n: usize,
    pub grid: usize,
    pub reps: usize,
    pub density: DensityConfig,
}

impl Default for DecompositionSection {
    fn default() -> Self {
        Self { enabled: true, d: 1, p: 2.0, n: 256, grid: 512, reps: 50, density: DensityConfig::Uniform }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormSection {
    pub enabled: bool,
    pub fields: usize,
    pub dims: Vec<usize>,
    pub grid: usize,
    /// Exponents for the Beckmann / dual ascent comparison.
    pub p: Vec<f64>,
}

impl Default for NormSection {
    fn default() -> Self {
        Self { enabled: true, fields: 100, dims: vec![1, 2, 3], grid: 16, p: vec![2.0, 4.0] }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |msg: &str| Err(LabError::Config(format!("{}: {msg}", self.name)));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be a non-empty file stem");
        }
        let dims_ok = |dims: &[usize]| !dims.is_empty() && dims.iter().all(|d| (1..=3).contains(d));
        if self.peyre.enabled && (!dims_ok(&self.peyre.dims) || self.peyre.pairs == 0) {
            return bad("peyre: needs pairs > 0 and dims in 1..=3");
        }
        if self.smoothing.enabled && (!dims_ok(&self.smoothing.dims) || self.smoothing.instances == 0 || self.smoothing.max_n == 0) {
            return bad("smoothing: needs instances > 0, max_n > 0 and dims in 1..=3");
        }
        let ladder_ok = |hs: &[f64]| hs.len() >= 2 && hs.iter().all(|&h| h > 0.0 && h < 0.5);
        if self.bias.enabled && (!dims_ok(&self.bias.dims) || !ladder_ok(&self.bias.h_ladder) || self.bias.p.is_empty()) {
            return bad("bias: needs dims in 1..=3, p values and an h ladder of at least two values in (0, 1/2)");
        }
        if self.bias.enabled && !(self.bias.min_frequency <= self.bias.max_frequency as f64 && self.bias.max_frequency >= 1) {
            return bad("bias: needs 1 <= max_frequency and min_frequency <= max_frequency");
        }
        if self.rosenthal.enabled {
            let r = &self.rosenthal;
            if !(1..=3).contains(&r.d) || r.n_ladder.len() < 2 || r.n_ladder.contains(&0) || r.p.is_empty() || r.reps == 0 {
                return bad("rosenthal: needs d in 1..=3, p values, reps > 0 and an n ladder of at least two sizes");
            }
            if r.p.iter().any(|&p| p != 2.0 && p != 4.0) {
                return bad("rosenthal: moment estimates are implemented for p in {2, 4}");
            }
            r.density.build(r.d)?;
        }
        if self.s_sums.enabled && (!dims_ok(&self.s_sums.dims) || !ladder_ok(&self.s_sums.h_ladder)) {
            return bad("s_sums: needs dims in 1..=3 and an h ladder of at least two values in (0, 1/2)");
        }
        if self.decomposition.enabled {
            let c = &self.decomposition;
            if !(1..=3).contains(&c.d) || c.reps < 2 || c.n == 0 || !c.grid.is_power_of_two() {
                return bad("decomposition: needs d in 1..=3, reps >= 2, n > 0 and a power-of-two grid");
            }
            c.density.build(c.d)?;
        }
        if self.norms.enabled && (!dims_ok(&self.norms.dims) || self.norms.fields == 0 || self.norms.p.is_empty()) {
            return bad("norms: needs fields > 0, p values and dims in 1..=3");
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, LabError> {
    std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig, LabError> {
    let cfg: ExperimentConfig =
        toml::from_str(&read(path)?).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_suite(path: &Path) -> Result<SuiteConfig, LabError> {
    let cfg: SuiteConfig =
        toml::from_str(&read(path)?).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}
