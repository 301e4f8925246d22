//! Entropic transport by log-domain Sinkhorn iterations with epsilon scaling,
//! followed by rounding onto the exact transport polytope.
//!
//! The plan is `pi_ij = exp((f_i + g_j - C_ij) / eps)`. All kernel access goes
//! through [`LogKernel`]; the generic implementation walks every pair, while
//! [`GridKernel`] handles a full grid on one side with the squared periodic
//! cost, where `exp(-C/eps)` factors over the axes.

use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::error::{Error, Result};
use crate::torus::coord_gap;

pub(crate) trait LogKernel {
    fn dims(&self) -> (usize, usize);
    fn cost_at(&self, i: usize, j: usize) -> f64;
    /// `out_i = log sum_j exp((g_j - C_ij) / eps)`; `hint` is a guess for the
    /// row potentials used as a stabilizing shift. Returns false on underflow.
    fn row_lse(&self, g: &[f64], hint: &[f64], eps: f64, out: &mut [f64]) -> bool;
    /// `out_j = log sum_i exp((f_i - C_ij) / eps)`.
    fn col_lse(&self, f: &[f64], hint: &[f64], eps: f64, out: &mut [f64]) -> bool;
    /// `sum_ij exp((f_i + g_j - C_ij) / eps) C_ij`.
    fn transported_cost(&self, f: &[f64], g: &[f64], eps: f64) -> f64;
    /// `sum_ij u_i v_j C_ij`.
    fn bilinear(&self, u: &[f64], v: &[f64]) -> f64;
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + values.map(|v| (v - mx).exp()).sum::<f64>().ln()
}

/// Any cost given pairwise.
pub(crate) struct PairKernel<C: Fn(usize, usize) -> f64> {
    pub m: usize,
    pub n: usize,
    pub cost: C,
}

impl<C: Fn(usize, usize) -> f64> LogKernel for PairKernel<C> {
    fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    fn cost_at(&self, i: usize, j: usize) -> f64 {
        (self.cost)(i, j)
    }

    fn row_lse(&self, g: &[f64], hint: &[f64], eps: f64, out: &mut [f64]) -> bool {
        for i in 0..self.m {
            // absorb the current potential; fall back to a max shift
            let s: f64 = (0..self.n).map(|j| ((hint[i] + g[j] - (self.cost)(i, j)) / eps).exp()).sum();
            out[i] = if s > 1e-200 && s < 1e200 {
                s.ln() - hint[i] / eps
            } else {
                log_sum_exp((0..self.n).map(|j| (g[j] - (self.cost)(i, j)) / eps))
            };
        }
        out.iter().all(|v| v.is_finite())
    }

    fn col_lse(&self, f: &[f64], hint: &[f64], eps: f64, out: &mut [f64]) -> bool {
        let mut acc = vec![0.0; self.n];
        for i in 0..self.m {
            for j in 0..self.n {
                acc[j] += ((f[i] + hint[j] - (self.cost)(i, j)) / eps).exp();
            }
        }
        for j in 0..self.n {
            out[j] = if acc[j] > 1e-200 && acc[j] < 1e200 {
                acc[j].ln() - hint[j] / eps
            } else {
                log_sum_exp((0..self.m).map(|i| (f[i] - (self.cost)(i, j)) / eps))
            };
        }
        out.iter().all(|v| v.is_finite())
    }

    fn transported_cost(&self, f: &[f64], g: &[f64], eps: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.m {
            for j in 0..self.n {
                let c = (self.cost)(i, j);
                total += ((f[i] + g[j] - c) / eps).exp() * c;
            }
        }
        total
    }

    fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut total = 0.0;
        for (i, &ui) in u.iter().enumerate() {
            if ui != 0.0 {
                total += ui * v.iter().enumerate().map(|(j, &vj)| vj * (self.cost)(i, j)).sum::<f64>();
            }
        }
        total
    }
}

/// Scattered atoms (rows) against every node of a `N^d` grid (columns) under
/// the squared periodic distance.
pub(crate) struct GridKernel {
    d: usize,
    nn: usize,
    m: usize,
    /// `gap2[k][i * N + t]`: squared gap between atom `i` and node `t` on axis `k`.
    gap2: Vec<Vec<f64>>,
    tables: RefCell<(f64, Vec<Vec<f64>>)>,
}

impl GridKernel {
    pub(crate) fn new(coords: &[f64], d: usize, nn: usize) -> Self {
        let m = coords.len() / d;
        let gap2: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                let mut t = Vec::with_capacity(m * nn);
                for i in 0..m {
                    let x = coords[i * d + k];
                    t.extend((0..nn).map(|s| {
                        let g = coord_gap(x, s as f64 / nn as f64);
                        g * g
                    }));
                }
                t
            })
            .collect();
        Self {
            d,
            nn,
            m,
            gap2,
            tables: RefCell::new((f64::NAN, Vec::new())),
        }
    }

    fn with_tables<R>(&self, eps: f64, f: impl FnOnce(&[Vec<f64>]) -> R) -> R {
        let mut cache = self.tables.borrow_mut();
        if cache.0 != eps {
            cache.1 = self.gap2.iter().map(|t| t.iter().map(|g| (-g / eps).exp()).collect()).collect();
            cache.0 = eps;
        }
        f(&cache.1)
    }

    fn cols(&self) -> usize {
        self.nn.pow(self.d as u32)
    }

    /// `T(j) = sum_i w_i prod_k E_k(i, j_k)`.
    fn spread(&self, w: &[f64], tables: &[&[f64]]) -> Vec<f64> {
        let (d, nn) = (self.d, self.nn);
        let mut out = vec![0.0; self.cols()];
        let mut prefix = vec![0.0; nn.pow(d as u32 - 1)];
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            // outer product of the leading axes
            prefix[0] = wi;
            let mut len = 1;
            for table in &tables[..d - 1] {
                let row = &table[i * nn..(i + 1) * nn];
                for q in (0..len).rev() {
                    let base = prefix[q];
                    for (t, e) in row.iter().enumerate() {
                        prefix[q * nn + t] = base * e;
                    }
                }
                len *= nn;
            }
            let last = &tables[d - 1][i * nn..(i + 1) * nn];
            for q in 0..len {
                let c = prefix[q];
                for (o, e) in out[q * nn..(q + 1) * nn].iter_mut().zip(last) {
                    *o += c * e;
                }
            }
        }
        out
    }

    /// `S(i) = sum_j v_j prod_k E_k(i, j_k)`, contracting the last axis first.
    fn gather(&self, v: &[f64], tables: &[&[f64]]) -> Vec<f64> {
        let nn = self.nn;
        let contract = |src: &[f64], row: &[f64], dst: &mut Vec<f64>| {
            dst.clear();
            dst.extend(src.chunks_exact(nn).map(|c| c.iter().zip(row).map(|(a, b)| a * b).sum::<f64>()));
        };
        let mut cur = Vec::with_capacity(v.len() / nn);
        let mut next = Vec::with_capacity(v.len() / nn);
        (0..self.m)
            .map(|i| {
                let row = |k: usize| &tables[k][i * nn..(i + 1) * nn];
                contract(v, row(self.d - 1), &mut cur);
                for k in (0..self.d - 1).rev() {
                    contract(&cur, row(k), &mut next);
                    core::mem::swap(&mut cur, &mut next);
                }
                cur[0]
            })
            .collect()
    }
}

impl LogKernel for GridKernel {
    fn dims(&self) -> (usize, usize) {
        (self.m, self.cols())
    }

    fn cost_at(&self, i: usize, j: usize) -> f64 {
        let mut rest = j;
        let mut c = 0.0;
        for k in (0..self.d).rev() {
            c += self.gap2[k][i * self.nn + rest % self.nn];
            rest /= self.nn;
        }
        c
    }

    fn row_lse(&self, g: &[f64], _hint: &[f64], eps: f64, out: &mut [f64]) -> bool {
        let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let v: Vec<f64> = g.iter().map(|x| ((x - gmax) / eps).exp()).collect();
        let s = self.with_tables(eps, |t| {
            let refs: Vec<&[f64]> = t.iter().map(|x| x.as_slice()).collect();
            self.gather(&v, &refs)
        });
        for (o, si) in out.iter_mut().zip(s) {
            *o = gmax / eps + si.ln();
        }
        out.iter().all(|x| x.is_finite())
    }

    fn col_lse(&self, f: &[f64], _hint: &[f64], eps: f64, out: &mut [f64]) -> bool {
        let fmax = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = f.iter().map(|x| ((x - fmax) / eps).exp()).collect();
        let s = self.with_tables(eps, |t| {
            let refs: Vec<&[f64]> = t.iter().map(|x| x.as_slice()).collect();
            self.spread(&w, &refs)
        });
        for (o, sj) in out.iter_mut().zip(s) {
            *o = fmax / eps + sj.ln();
        }
        out.iter().all(|x| x.is_finite())
    }

    fn transported_cost(&self, f: &[f64], g: &[f64], eps: f64) -> f64 {
        let fmax = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = f.iter().map(|x| ((x - fmax) / eps).exp()).collect();
        let v: Vec<f64> = g.iter().map(|x| ((x - gmax) / eps).exp()).collect();
        self.with_tables(eps, |t| {
            let mut total = 0.0;
            for k in 0..self.d {
                // E_k replaced by gap^2 E_k on axis k
                let weighted: Vec<f64> = t[k].iter().zip(&self.gap2[k]).map(|(e, g)| e * g).collect();
                let refs: Vec<&[f64]> = (0..self.d)
                    .map(|l| if l == k { weighted.as_slice() } else { t[l].as_slice() })
                    .collect();
                let s: f64 = self.gather(&v, &refs).iter().zip(&w).map(|(a, b)| a * b).sum();
                if s > 0.0 {
                    total += ((fmax + gmax) / eps + s.ln()).exp();
                }
            }
            total
        })
    }

    fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let nn = self.nn;
        let mut total = 0.0;
        for k in 0..self.d {
            // marginal of v on axis k
            let stride = nn.pow((self.d - 1 - k) as u32);
            let mut marginal = vec![0.0; nn];
            for (j, &vj) in v.iter().enumerate() {
                marginal[(j / stride) % nn] += vj;
            }
            for (i, &ui) in u.iter().enumerate() {
                if ui != 0.0 {
                    let row = &self.gap2[k][i * nn..(i + 1) * nn];
                    total += ui * row.iter().zip(&marginal).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        total
    }
}

pub(crate) struct SinkhornOutput {
    pub cost: f64,
    pub iterations: u64,
    pub converged: bool,
    /// L1 column-marginal violation before rounding.
    pub marginal_error: f64,
    /// Rounded plan entries, when requested.
    pub plan: Option<Vec<(usize, usize, f64)>>,
}

/// Log-domain Sinkhorn with epsilon halving from half the mean cost down to
/// `eps`, then rounding (rows scaled down, columns scaled down, the deficit
/// spread as a rank-one correction). The returned cost is that of a feasible
/// plan.
pub(crate) fn sinkhorn(
    kernel: &dyn LogKernel,
    a: &[f64],
    b: &[f64],
    eps: f64,
    max_iter: u64,
    tol: f64,
    want_plan: bool,
) -> Result<SinkhornOutput> {
    let (m, n) = kernel.dims();
    debug_assert_eq!((a.len(), b.len()), (m, n));
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mean_cost = kernel.bilinear(a, b);
    let mut stage_eps = (0.5 * mean_cost).max(eps);
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut row = vec![0.0; m];
    let mut col = vec![0.0; n];
    let mut iterations = 0u64;
    let mut err;
    let stable = |ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(Error::Internal("Sinkhorn kernel sums underflowed".into()))
        }
    };

    loop {
        let last = stage_eps <= eps;
        let stage_tol = if last { tol } else { tol.max(1e-3) };
        loop {
            stable(kernel.col_lse(&f, &g, stage_eps, &mut col))?;
            err = (0..n).map(|j| ((g[j] / stage_eps + col[j]).exp() - b[j]).abs()).sum();
            if err < stage_tol || iterations >= max_iter {
                break;
            }
            for j in 0..n {
                g[j] = stage_eps * (log_b[j] - col[j]);
            }
            stable(kernel.row_lse(&g, &f, stage_eps, &mut row))?;
            for i in 0..m {
                f[i] = stage_eps * (log_a[i] - row[i]);
            }
            iterations += 1;
        }
        if last || iterations >= max_iter {
            break;
        }
        stage_eps = (stage_eps / 2.0).max(eps);
    }
    let converged = err < tol && stage_eps <= eps;
    let e = stage_eps;

    // rounding onto the transport polytope
    stable(kernel.row_lse(&g, &f, e, &mut row))?;
    for i in 0..m {
        let r = (f[i] / e + row[i]).exp();
        if r > a[i] {
            f[i] += e * (a[i] / r).ln();
        }
    }
    stable(kernel.col_lse(&f, &g, e, &mut col))?;
    let mut err_b = vec![0.0; n];
    for j in 0..n {
        let c = (g[j] / e + col[j]).exp();
        if c > b[j] {
            g[j] += e * (b[j] / c).ln();
            err_b[j] = 0.0;
        } else {
            err_b[j] = b[j] - c;
        }
    }
    stable(kernel.row_lse(&g, &f, e, &mut row))?;
    let err_a: Vec<f64> = (0..m).map(|i| (a[i] - (f[i] / e + row[i]).exp()).max(0.0)).collect();
    let err_b: Vec<f64> = err_b.into_iter().map(|x| x.max(0.0)).collect();
    let mass: f64 = err_a.iter().sum();
    let mut cost = kernel.transported_cost(&f, &g, e);
    if mass > 0.0 {
        cost += kernel.bilinear(&err_a, &err_b) / mass;
    }

    let plan = want_plan.then(|| {
        let mut entries = Vec::new();
        for i in 0..m {
            for j in 0..n {
                let c = kernel.cost_at(i, j);
                let mut v = ((f[i] + g[j] - c) / e).exp();
                if mass > 0.0 {
                    v += err_a[i] * err_b[j] / mass;
                }
                if v > 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        entries
    });

    Ok(SinkhornOutput {
        cost,
        iterations,
        converged,
        marginal_error: err,
        plan,
    })
}
