//! Log-log regression of Monte Carlo means against the sample size.

use alloc::vec::Vec;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares line through `(ln n, ln mean)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if let Some(&(n, m)) = points.iter().find(|&&(n, m)| !(n > 0.0 && m > 0.0) || !n.is_finite() || !m.is_finite()) {
        return Err(invalid!("rate fit needs positive finite points, got ({n}, {m})"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(invalid!("rate fit needs at least two distinct sample sizes"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).min(1.0) };
    Ok(RateFit { slope, intercept, r_squared })
}

/// Monte Carlo summary at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
    pub values: Vec<f64>,
}

impl RatePoint {
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid!("need at least two replicates at n = {n}"));
        }
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
        Ok(Self { n, mean, std_error: (var / k).sqrt(), values })
    }
}

/// How well `mean * sqrt(n / ln n)` is fitted by a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRateFit {
    /// Geometric mean of the scaled values.
    pub constant: f64,
    /// Root mean square of `ln(scaled / constant)`.
    pub residual: f64,
    /// max / min of the scaled values.
    pub spread: f64,
}

pub fn log_rate_fit(points: &[(f64, f64)]) -> Result<LogRateFit> {
    if points.len() < 2 || points.iter().any(|&(n, m)| !(n > 1.0) || !(m > 0.0)) {
        return Err(invalid!("log-rate fit needs at least two points with n > 1 and positive means"));
    }
    let logs: Vec<f64> = points.iter().map(|&(n, m)| (m * (n / n.ln()).sqrt()).ln()).collect();
    let k = logs.len() as f64;
    let c = logs.iter().sum::<f64>() / k;
    let residual = (logs.iter().map(|l| (l - c) * (l - c)).sum::<f64>() / k).sqrt();
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(LogRateFit { constant: c.exp(), residual, spread: (hi - lo).exp() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub d: usize,
    pub p: f64,
    pub points: Vec<RatePoint>,
    pub fit: RateFit,
    /// 95% percentile bootstrap interval for the slope.
    pub slope_ci: (f64, f64),
    pub bootstrap_resamples: usize,
    /// Present for `d = 2`.
    pub log_rate: Option<LogRateFit>,
}

impl RateReport {
    /// Fits the means and bootstraps the slope by resampling the replicates
    /// at every sample size independently.
    pub fn from_points(d: usize, p: f64, points: Vec<RatePoint>, seed: u64) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid!("a rate report needs at least two sample sizes"));
        }
        let means: Vec<(f64, f64)> = points.iter().map(|q| (q.n as f64, q.mean)).collect();
        let fit = fit_rate(&means)?;
        let slope_ci = bootstrap_slope_ci(&points, BOOTSTRAP_RESAMPLES, seed)?;
        let slope_ci = (slope_ci.0.min(fit.slope), slope_ci.1.max(fit.slope));
        let log_rate = if d == 2 { Some(log_rate_fit(&means)?) } else { None };
        Ok(Self { d, p, points, fit, slope_ci, bootstrap_resamples: BOOTSTRAP_RESAMPLES, log_rate })
    }
}

/// Percentile interval (2.5%, 97.5%) of the bootstrap slopes.
pub fn bootstrap_slope_ci(points: &[RatePoint], resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if resamples < 40 {
        return Err(invalid!("bootstrap needs at least 40 resamples, got {resamples}"));
    }
    let mut rng = rng_from_seed(seed);
    let mut slopes = Vec::with_capacity(resamples);
    let mut means = Vec::with_capacity(points.len());
    for _ in 0..resamples {
        means.clear();
        for q in points {
            let k = q.values.len();
            let mut s = 0.0;
            for _ in 0..k {
                s += q.values[(rng.next_u64() % k as u64) as usize];
            }
            means.push((q.n as f64, s / k as f64));
        }
        slopes.push(fit_rate(&means)?.slope);
    }
    slopes.sort_by(f64::total_cmp);
    let lo = slopes[(0.025 * resamples as f64).floor() as usize];
    let hi = slopes[((0.975 * resamples as f64).ceil() as usize - 1).min(resamples - 1)];
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Internal("non-finite bootstrap slope".into()));
    }
    Ok((lo, hi))
}
