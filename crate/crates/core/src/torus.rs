//! Geometry of the unit flat torus `(R/Z)^d`: points, the periodic metric,
//! regular grids and grid-sampled scalar fields.
//!
//! Every multi-indexed layout in the crate (grid nodes, field values, Fourier
//! coefficients) is row-major with the last axis varying fastest.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A point of the torus with every coordinate in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    /// Wraps arbitrary finite coordinates onto the fundamental domain.
    pub fn wrap(x: &[f64]) -> Result<Self> {
        if x.is_empty() {
            return Err(invalid!("torus points need dimension >= 1"));
        }
        let mut coords = Vec::with_capacity(x.len());
        for &xi in x {
            if !xi.is_finite() {
                return Err(invalid!("non-finite coordinate {xi}"));
            }
            coords.push(wrap_coord(xi));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Translates by `v` and wraps back.
    pub fn shifted(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.dim() {
            return Err(invalid!("shift of dimension {} applied to point of dimension {}", v.len(), self.dim()));
        }
        let moved: Vec<f64> = self.coords.iter().zip(v).map(|(a, b)| a + b).collect();
        Self::wrap(&moved)
    }
}

/// `x - floor(x)`, clamped so that values a hair below an integer do not
/// round up to exactly 1.0.
#[inline]
pub fn wrap_coord(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Same as [`TorusPoint::wrap`].
pub fn wrap(x: &[f64]) -> Result<TorusPoint> {
    TorusPoint::wrap(x)
}

/// Shortest signed-free separation between two wrapped coordinates.
#[inline]
pub fn coord_gap(a: f64, b: f64) -> f64 {
    let g = (a - b).abs();
    if g > 0.5 {
        1.0 - g
    } else {
        g
    }
}

/// Squared periodic distance between raw coordinate slices already in `[0,1)`.
#[inline]
pub fn periodic_distance_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let g = coord_gap(a, b);
            g * g
        })
        .sum()
}

/// Euclidean distance minimized over integer shifts. The minimizing shift is
/// chosen independently per axis, which is equivalent to searching `{-1,0,1}^d`
/// for wrapped inputs.
pub fn periodic_distance(x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(invalid!("dimension mismatch: {} vs {}", x.dim(), y.dim()));
    }
    Ok(periodic_distance_sq(&x.coords, &y.coords).sqrt())
}

/// Regular grid with `n` nodes per axis at `k/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    d: usize,
    n: usize,
}

impl Grid {
    /// `n` must be a power of two, at least 4.
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid!("grid dimension must be >= 1"));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(invalid!("points per axis must be a power of two >= 4, got {n}"));
        }
        if n.checked_pow(d as u32).is_none() {
            return Err(invalid!("grid {n}^{d} overflows"));
        }
        Ok(Self { d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    /// Total number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Row-major multi-index of a flat position.
    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.d).rev() {
            out[axis] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &k| acc * self.n + k)
    }

    pub fn node(&self, flat: usize) -> TorusPoint {
        let mut idx = vec![0usize; self.d];
        self.multi_index(flat, &mut idx);
        let h = self.spacing();
        TorusPoint {
            coords: idx.iter().map(|&k| k as f64 * h).collect(),
        }
    }

    /// Signed frequency carried by array position `k` along one axis:
    /// positions `0..n/2` map to `0..n/2` and the rest to `-n/2..0`.
    #[inline]
    pub fn frequency(&self, k: usize) -> i64 {
        let n = self.n as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Array position of a signed frequency, if representable.
    #[inline]
    pub fn frequency_position(&self, m: i64) -> Option<usize> {
        let n = self.n as i64;
        if m < -n / 2 || m >= n / 2 {
            return None;
        }
        Some(m.rem_euclid(n) as usize)
    }

    /// Frequency multi-index of a flat spectral position.
    pub fn frequency_of(&self, flat: usize, out: &mut [i64]) {
        let mut f = flat;
        for axis in (0..self.d).rev() {
            out[axis] = self.frequency(f % self.n);
            f /= self.n;
        }
    }
}

/// All nodes of the grid in row-major order.
pub fn grid_nodes(grid: &Grid) -> Vec<TorusPoint> {
    (0..grid.len()).map(|k| grid.node(k)).collect()
}

/// Real values sampled at every node of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid!("field has {} values, grid needs {}", values.len(), grid.len()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid!("non-finite field value {v}"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every node; `f` receives the node coordinates.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut idx = vec![0usize; grid.dim()];
        let mut x = vec![0.0; grid.dim()];
        let h = grid.spacing();
        let values = (0..grid.len())
            .map(|k| {
                grid.multi_index(k, &mut idx);
                for (xi, &ki) in x.iter_mut().zip(&idx) {
                    *xi = ki as f64 * h;
                }
                f(&x)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `self - other`, both on the same grid.
    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> GridField {
        GridField {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        if self.grid != other.grid {
            return Err(invalid!("fields live on different grids"));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        GridField::new(self.grid, values)
    }

    pub fn max_abs_diff(&self, other: &GridField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
