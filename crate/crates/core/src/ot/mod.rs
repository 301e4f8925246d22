//! Wasserstein distances between discrete measures on the torus under the
//! cost `rho(x, y)^p`, with `rho` the periodic distance.

mod simplex;
mod sinkhorn;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::density::{quantize, DensitySpec, DiscreteMeasure, EmpiricalMeasure};
use crate::error::{invalid, Error, Result};
use crate::kernel::{kernel_c0, Bandwidth, KernelSpec};
use crate::torus::{periodic_distance_sq, Grid};

use self::simplex::transport_simplex;
use self::sinkhorn::{sinkhorn, GridKernel, PairKernel};

/// Largest `n_source + n_target` accepted by the exact solver.
pub const EXACT_ATOM_CAP: usize = 20_000;
/// Integer scale for the exact solver's masses.
const MASS_SCALE: f64 = (1u64 << 50) as f64;
/// Cost matrices up to this many entries are materialized.
const DENSE_LIMIT: usize = 1 << 24;
/// Entropic plans are only materialized up to this many entries.
const PLAN_LIMIT: usize = 1 << 20;
/// L1 marginal tolerance of the entropic solver before rounding.
pub const SINKHORN_TOL: f64 = 1e-6;

/// Sparse coupling between a source and a target measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub n_source: usize,
    pub n_target: usize,
    /// `(source index, target index, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.n_source];
        for &(i, _, w) in &self.entries {
            r[i] += w;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_target];
        for &(_, j, w) in &self.entries {
            c[j] += w;
        }
        c
    }

    /// Largest deviation of either marginal from the given weights.
    pub fn marginal_error(&self, a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
        let r = self.row_sums();
        let c = self.col_sums();
        let er = r.iter().zip(a.weights()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let ec = c.iter().zip(b.weights()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        er.max(ec)
    }

    /// `sum pi_ij rho(a_i, b_j)^p`.
    pub fn cost(&self, a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, w)| w * pair_cost(a.atoms()[i].coords(), b.atoms()[j].coords(), p))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OtMethod {
    Exact,
    Entropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtResult {
    /// Cost of the returned plan, `C_p(pi)`.
    pub cost_p: f64,
    /// `cost_p^(1/p)`.
    pub wasserstein: f64,
    /// Always present for the exact method; for the entropic method only
    /// when the instance is small enough to store densely.
    pub plan: Option<TransportPlan>,
    pub method: OtMethod,
    /// Simplex pivots or Sinkhorn sweeps.
    pub iterations: u64,
    pub converged: bool,
    /// Entropic: L1 marginal violation before rounding. Exact: 0.
    pub marginal_error: f64,
    pub epsilon: Option<f64>,
}

/// Which solver to run and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "lowercase")]
pub enum Solver {
    Exact,
    Entropic { epsilon: f64, max_iter: u64 },
}

impl Solver {
    pub fn solve(&self, a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> Result<OtResult> {
        match *self {
            Solver::Exact => exact_wasserstein(a, b, p),
            Solver::Entropic { epsilon, max_iter } => entropic_wasserstein(a, b, p, epsilon, max_iter),
        }
    }

    pub fn method(&self) -> OtMethod {
        match self {
            Solver::Exact => OtMethod::Exact,
            Solver::Entropic { .. } => OtMethod::Entropic,
        }
    }
}

#[inline]
fn pair_cost(x: &[f64], y: &[f64], p: f64) -> f64 {
    let s = periodic_distance_sq(x, y);
    if p == 2.0 {
        s
    } else if p == 1.0 {
        s.sqrt()
    } else {
        s.powf(0.5 * p)
    }
}

fn check_pair(a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(invalid!("measures of dimension {} and {}", a.dim(), b.dim()));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid!("cost exponent must be finite and >= 1, got {p}"));
    }
    Ok(())
}

/// Largest possible cost, `(sqrt(d)/2)^p`.
pub fn diameter_cost(d: usize, p: f64) -> f64 {
    (0.25 * d as f64).powf(0.5 * p)
}

/// Dense `rho(a_i, b_j)^p`, row-major.
pub fn cost_matrix(a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> Result<Vec<Vec<f64>>> {
    check_pair(a, b, p)?;
    Ok(a.atoms()
        .iter()
        .map(|x| b.atoms().iter().map(|y| pair_cost(x.coords(), y.coords(), p)).collect())
        .collect())
}

/// Positive-weight atoms: flat coordinates, weights and original indices.
struct Support {
    coords: Vec<f64>,
    weights: Vec<f64>,
    index: Vec<usize>,
}

fn support(m: &DiscreteMeasure) -> Support {
    let mut s = Support {
        coords: Vec::new(),
        weights: Vec::new(),
        index: Vec::new(),
    };
    for (k, (x, &w)) in m.atoms().iter().zip(m.weights()).enumerate() {
        if w > 0.0 {
            s.coords.extend_from_slice(x.coords());
            s.weights.push(w);
            s.index.push(k);
        }
    }
    s
}

/// Rounds weights to integers summing exactly to `MASS_SCALE`
/// (largest remainder, ties to the lower index).
fn integer_masses(w: &[f64]) -> Vec<i64> {
    let total: f64 = w.iter().sum();
    let scaled: Vec<f64> = w.iter().map(|x| x / total * MASS_SCALE).collect();
    let mut out: Vec<i64> = scaled.iter().map(|x| x.floor() as i64).collect();
    let target = MASS_SCALE as i64;
    let deficit = target - out.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (scaled[i] - scaled[i].floor(), scaled[j] - scaled[j].floor());
        rj.partial_cmp(&ri).unwrap_or(core::cmp::Ordering::Equal).then(i.cmp(&j))
    });
    for &k in order.iter().cycle().take(deficit.max(0) as usize) {
        out[k] += 1;
    }
    out
}

/// Optimal transport by the network simplex on integerized masses.
pub fn exact_wasserstein(a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> Result<OtResult> {
    check_pair(a, b, p)?;
    let (sa, sb) = (support(a), support(b));
    if sa.weights.is_empty() || sb.weights.is_empty() {
        return Err(invalid!("measures need at least one atom of positive weight"));
    }
    if sa.weights.len() + sb.weights.len() > EXACT_ATOM_CAP {
        return Err(Error::Resource(alloc::format!(
            "{} + {} atoms exceed the exact solver cap of {EXACT_ATOM_CAP}; use the entropic solver",
            sa.weights.len(),
            sb.weights.len()
        )));
    }
    let (ia, ib) = (integer_masses(&sa.weights), integer_masses(&sb.weights));
    // drop atoms whose mass rounded to zero
    let keep_a: Vec<usize> = (0..ia.len()).filter(|&k| ia[k] > 0).collect();
    let keep_b: Vec<usize> = (0..ib.len()).filter(|&k| ib[k] > 0).collect();
    let d = a.dim();
    let xa: Vec<f64> = keep_a.iter().flat_map(|&k| sa.coords[k * d..(k + 1) * d].iter().copied()).collect();
    let xb: Vec<f64> = keep_b.iter().flat_map(|&k| sb.coords[k * d..(k + 1) * d].iter().copied()).collect();
    let supply: Vec<i64> = keep_a.iter().map(|&k| ia[k]).collect();
    let demand: Vec<i64> = keep_b.iter().map(|&k| ib[k]).collect();
    let (m, n) = (supply.len(), demand.len());
    let on_the_fly = |i: usize, j: usize| pair_cost(&xa[i * d..(i + 1) * d], &xb[j * d..(j + 1) * d], p);
    let max_cost = diameter_cost(d, p);

    let out = if m * n <= DENSE_LIMIT {
        let mut dense = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                dense.push(on_the_fly(i, j));
            }
        }
        transport_simplex(&supply, &demand, &|i: usize, j: usize| dense[i * n + j], max_cost)?
    } else {
        transport_simplex(&supply, &demand, &on_the_fly, max_cost)?
    };

    let mut cost_p = 0.0;
    let mut entries = Vec::with_capacity(out.flows.len());
    for &(i, j, f) in &out.flows {
        let mass = f as f64 / MASS_SCALE;
        cost_p += mass * on_the_fly(i, j);
        entries.push((sa.index[keep_a[i]], sb.index[keep_b[j]], mass));
    }
    Ok(OtResult {
        cost_p,
        wasserstein: cost_p.max(0.0).powf(1.0 / p),
        plan: Some(TransportPlan {
            n_source: a.len(),
            n_target: b.len(),
            entries,
        }),
        method: OtMethod::Exact,
        iterations: out.pivots,
        converged: true,
        marginal_error: 0.0,
        epsilon: None,
    })
}

/// Sinkhorn with epsilon scaling and rounding; the cost returned is that of a
/// feasible plan, hence an upper bound on the optimal cost. When one side is
/// a full grid (as produced by [`quantize`]) and `p = 2` the kernel is applied
/// axis by axis.
pub fn entropic_wasserstein(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    p: f64,
    epsilon: f64,
    max_iter: u64,
) -> Result<OtResult> {
    check_pair(a, b, p)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(invalid!("entropic regularization must be positive, got {epsilon}"));
    }
    let (sa, sb) = (support(a), support(b));
    if sa.weights.is_empty() || sb.weights.is_empty() {
        return Err(invalid!("measures need at least one atom of positive weight"));
    }
    let d = a.dim();
    let (m, n) = (sa.weights.len(), sb.weights.len());
    let want_plan = m * n <= PLAN_LIMIT;

    let full_grid = |meas: &DiscreteMeasure, s: &Support| {
        meas.grid_layout().filter(|g| s.weights.len() == g.len()).copied()
    };
    let separable = p == 2.0 && 2.0 * diameter_cost(d, p) / epsilon < 700.0;
    let mut solved = None;
    if separable {
        if let Some(g) = full_grid(b, &sb) {
            let k = GridKernel::new(&sa.coords, d, g.points_per_axis());
            if let Ok(out) = sinkhorn(&k, &sa.weights, &sb.weights, epsilon, max_iter, SINKHORN_TOL, want_plan) {
                solved = Some((out, false));
            }
        } else if let Some(g) = full_grid(a, &sa) {
            let k = GridKernel::new(&sb.coords, d, g.points_per_axis());
            if let Ok(out) = sinkhorn(&k, &sb.weights, &sa.weights, epsilon, max_iter, SINKHORN_TOL, want_plan) {
                solved = Some((out, true));
            }
        }
    }
    let (out, transposed) = match solved {
        Some(s) => s,
        None => {
            let cost = |i: usize, j: usize| pair_cost(&sa.coords[i * d..(i + 1) * d], &sb.coords[j * d..(j + 1) * d], p);
            let out = if m * n <= DENSE_LIMIT {
                let dense: Vec<f64> = (0..m * n).map(|k| cost(k / n, k % n)).collect();
                let k = PairKernel {
                    m,
                    n,
                    cost: |i: usize, j: usize| dense[i * n + j],
                };
                sinkhorn(&k, &sa.weights, &sb.weights, epsilon, max_iter, SINKHORN_TOL, want_plan)?
            } else {
                let k = PairKernel {
                    m,
                    n,
                    cost,
                };
                sinkhorn(&k, &sa.weights, &sb.weights, epsilon, max_iter, SINKHORN_TOL, want_plan)?
            };
            (out, false)
        }
    };

    let plan = out.plan.map(|entries| TransportPlan {
        n_source: a.len(),
        n_target: b.len(),
        entries: entries
            .into_iter()
            .map(|(i, j, w)| {
                if transposed {
                    (sa.index[j], sb.index[i], w)
                } else {
                    (sa.index[i], sb.index[j], w)
                }
            })
            .collect(),
    });
    let cost_p = out.cost.max(0.0);
    Ok(OtResult {
        cost_p,
        wasserstein: cost_p.powf(1.0 / p),
        plan,
        method: OtMethod::Entropic,
        iterations: out.iterations,
        converged: out.converged,
        marginal_error: out.marginal_error,
        epsilon: Some(epsilon),
    })
}

/// `W_p` cost of the explicit coupling between a measure and its
/// convolution with `K_h`: every atom is spread by `K_h`, which moves mass a
/// distance `|x|` with density `K_h(x)`, giving `C_0 h`.
pub fn explicit_smoothing_plan_cost(kernel: &KernelSpec, h: Bandwidth, p: f64) -> Result<f64> {
    Ok(kernel_c0(kernel, p)? * h.h())
}

/// `sqrt(d) / (2N)`: the farthest any point is from its nearest grid node.
pub fn quantization_slack(grid: &Grid) -> f64 {
    (grid.dim() as f64).sqrt() / (2.0 * grid.points_per_axis() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalOt {
    pub wasserstein: f64,
    /// Budget for replacing the density by its grid quantization.
    pub quantization_slack: f64,
    pub result: OtResult,
}

/// `W_p` between the sample and the quantized density.
pub fn empirical_vs_density_wasserstein(
    sample: &EmpiricalMeasure,
    density: &DensitySpec,
    grid: &Grid,
    p: f64,
    solver: Solver,
) -> Result<EmpiricalOt> {
    let target = quantize(density, grid)?;
    let source = DiscreteMeasure::from_empirical(sample);
    let result = solver.solve(&source, &target, p)?;
    Ok(EmpiricalOt {
        wasserstein: result.wasserstein,
        quantization_slack: quantization_slack(grid),
        result,
    })
}
