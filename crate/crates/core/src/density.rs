//! Bounded densities on the torus, samples drawn from them, and finitely
//! supported measures used by the transport solvers.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{rng_from_seed, uniform01};
use crate::spectral::SpectralField;
use crate::torus::{Grid, GridField, TorusPoint};

/// One term `alpha cos(2 pi m.x + theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineMode {
    pub m: Vec<i64>,
    pub alpha: f64,
    pub theta: f64,
}

impl CosineMode {
    pub fn new(m: Vec<i64>, alpha: f64, theta: f64) -> Self {
        Self { m, alpha, theta }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let phase: f64 = self.m.iter().zip(x).map(|(&mi, &xi)| mi as f64 * xi).sum();
        self.alpha * (2.0 * PI * phase + self.theta).cos()
    }
}

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Family {
    CosineMixture(Vec<CosineMode>),
    Custom(EvalFn),
}

/// A probability density with certified bounds `0 < f_min <= f <= f_max`.
#[derive(Clone)]
pub struct DensitySpec {
    d: usize,
    f_min: f64,
    f_max: f64,
    family: Family,
}

impl fmt::Debug for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("DensitySpec");
        s.field("d", &self.d).field("f_min", &self.f_min).field("f_max", &self.f_max);
        match &self.family {
            Family::CosineMixture(modes) => s.field("modes", modes),
            Family::Custom(_) => s.field("modes", &"custom"),
        };
        s.finish()
    }
}

/// `f = 1`.
pub fn uniform_density(d: usize) -> Result<DensitySpec> {
    cosine_mixture_density(d, Vec::new())
}

/// `f(x) = 1 + sum_k alpha_k cos(2 pi m_k.x + theta_k)`.
pub fn cosine_mixture_density(d: usize, modes: Vec<CosineMode>) -> Result<DensitySpec> {
    if d == 0 {
        return Err(invalid!("dimension must be at least 1"));
    }
    let mut total = 0.0;
    for mode in &modes {
        if mode.m.len() != d {
            return Err(invalid!("mode {:?} does not have dimension {d}", mode.m));
        }
        if mode.m.iter().all(|&x| x == 0) {
            return Err(invalid!("mode frequency must be nonzero"));
        }
        if !mode.alpha.is_finite() || !mode.theta.is_finite() {
            return Err(invalid!("non-finite mode amplitude or phase"));
        }
        total += mode.alpha.abs();
    }
    if total >= 1.0 {
        return Err(Error::BoundsViolation(format!(
            "sum of |alpha| is {total}, the density could vanish"
        )));
    }
    Ok(DensitySpec {
        d,
        f_min: 1.0 - total,
        f_max: 1.0 + total,
        family: Family::CosineMixture(modes),
    })
}

/// A density given by an arbitrary rule. The caller certifies the bounds and
/// unit mass; no exact Fourier coefficients are available.
pub fn custom_density(
    d: usize,
    f_min: f64,
    f_max: f64,
    eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
) -> Result<DensitySpec> {
    if d == 0 {
        return Err(invalid!("dimension must be at least 1"));
    }
    if !(f_min > 0.0) || !(f_max >= f_min) || !f_max.is_finite() {
        return Err(Error::BoundsViolation(format!("need 0 < f_min <= f_max, got {f_min}, {f_max}")));
    }
    Ok(DensitySpec {
        d,
        f_min,
        f_max,
        family: Family::Custom(Arc::new(eval)),
    })
}

impl DensitySpec {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    /// Cosine modes, or `None` for a custom density.
    pub fn modes(&self) -> Option<&[CosineMode]> {
        match &self.family {
            Family::CosineMixture(m) => Some(m),
            Family::Custom(_) => None,
        }
    }

    pub fn eval_coords(&self, x: &[f64]) -> f64 {
        match &self.family {
            Family::CosineMixture(modes) => 1.0 + modes.iter().map(|m| m.eval(x)).sum::<f64>(),
            Family::Custom(f) => f(x),
        }
    }

    pub fn eval(&self, x: &TorusPoint) -> Result<f64> {
        if x.dim() != self.d {
            return Err(invalid!("point of dimension {} for a density on dimension {}", x.dim(), self.d));
        }
        Ok(self.eval_coords(x.coords()))
    }

    /// Nonzero Fourier coefficients, merged over repeated frequencies.
    pub fn exact_coeffs(&self) -> Result<BTreeMap<Vec<i64>, Complex64>> {
        let Family::CosineMixture(modes) = &self.family else {
            return Err(Error::UnsupportedDensity);
        };
        let mut out = BTreeMap::new();
        out.insert(vec![0; self.d], Complex64::new(1.0, 0.0));
        for mode in modes {
            let c = Complex64::from_polar(mode.alpha / 2.0, mode.theta);
            *out.entry(mode.m.clone()).or_insert_with(Complex64::default) += c;
            let neg: Vec<i64> = mode.m.iter().map(|x| -x).collect();
            *out.entry(neg).or_insert_with(Complex64::default) += c.conj();
        }
        Ok(out)
    }

    /// Exact coefficients laid out on `grid`. Every mode must satisfy
    /// `|m_i| < N/2` so that no content is aliased.
    pub fn exact_spectrum(&self, grid: &Grid) -> Result<SpectralField> {
        if grid.dim() != self.d {
            return Err(invalid!("grid dimension {} for a density on dimension {}", grid.dim(), self.d));
        }
        let half = (grid.points_per_axis() / 2) as i64;
        let mut spec = SpectralField::zeros(*grid);
        for (m, c) in self.exact_coeffs()? {
            if m.iter().any(|x| x.abs() >= half) {
                return Err(invalid!("mode {m:?} is not resolved by a grid of {} points", grid.points_per_axis()));
            }
            spec.set_coeff(&m, c)?;
        }
        Ok(spec)
    }

    /// Upper bound on the Lipschitz constant (Euclidean).
    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.modes().map(|modes| {
            modes
                .iter()
                .map(|m| {
                    let l2 = m.m.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
                    2.0 * PI * m.alpha.abs() * l2
                })
                .sum()
        })
    }
}

/// Uniform-weight measure on `n >= 1` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    points: Vec<TorusPoint>,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<TorusPoint>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(invalid!("empirical measure needs at least one point"));
        };
        let d = first.dim();
        if points.iter().any(|p| p.dim() != d) {
            return Err(invalid!("points of mixed dimension"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }
}

/// Finitely many weighted atoms. When the atoms are exactly the nodes of a
/// grid in row-major order, the grid is recorded so solvers can exploit the
/// product structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<TorusPoint>,
    weights: Vec<f64>,
    layout: Option<Grid>,
}

impl DiscreteMeasure {
    /// Weights must be nonnegative and sum to one within `1e-12`.
    pub fn new(atoms: Vec<TorusPoint>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(invalid!("{} atoms with {} weights", atoms.len(), weights.len()));
        }
        let d = atoms[0].dim();
        if atoms.iter().any(|p| p.dim() != d) {
            return Err(invalid!("atoms of mixed dimension"));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(invalid!("invalid weight {w}"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid!("weights sum to {total}, not 1"));
        }
        Ok(Self {
            atoms,
            weights,
            layout: None,
        })
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(atoms: Vec<TorusPoint>, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(invalid!("weights must have a positive finite sum"));
        }
        for w in &mut weights {
            *w /= total;
        }
        Self::new(atoms, weights)
    }

    pub fn from_empirical(sample: &EmpiricalMeasure) -> Self {
        let n = sample.len();
        Self {
            atoms: sample.points().to_vec(),
            weights: vec![1.0 / n as f64; n],
            layout: None,
        }
    }

    pub fn atoms(&self) -> &[TorusPoint] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn grid_layout(&self) -> Option<&Grid> {
        self.layout.as_ref()
    }
}

/// `n` independent draws by rejection from the uniform proposal.
pub fn sample(density: &DensitySpec, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(invalid!("sample size must be at least 1"));
    }
    let d = density.dim();
    let mut rng = rng_from_seed(seed);
    let always = density.f_min == density.f_max;
    let mut points = Vec::with_capacity(n);
    let mut x = vec![0.0; d];
    while points.len() < n {
        let mut rejected = 0u32;
        loop {
            for xi in x.iter_mut() {
                *xi = uniform01(&mut rng);
            }
            if always || uniform01(&mut rng) * density.f_max < density.eval_coords(&x) {
                break;
            }
            rejected += 1;
            if rejected >= 1_000_000 {
                return Err(Error::Internal(format!(
                    "{rejected} consecutive rejections, density bounds are inconsistent"
                )));
            }
        }
        points.push(TorusPoint::wrap(&x)?);
    }
    EmpiricalMeasure::new(points)
}

/// Atoms at the grid nodes with weights proportional to the density there.
pub fn quantize(density: &DensitySpec, grid: &Grid) -> Result<DiscreteMeasure> {
    let field = density_to_field(density, grid)?;
    let atoms = (0..grid.len()).map(|k| grid.node(k)).collect();
    let mut measure = DiscreteMeasure::normalized(atoms, field.into_values())?;
    measure.layout = Some(*grid);
    Ok(measure)
}

pub fn density_to_field(density: &DensitySpec, grid: &Grid) -> Result<GridField> {
    if grid.dim() != density.dim() {
        return Err(invalid!("grid dimension {} for a density on dimension {}", grid.dim(), density.dim()));
    }
    GridField::from_fn(*grid, |x| density.eval_coords(x))
}
