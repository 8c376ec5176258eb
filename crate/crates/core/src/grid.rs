//! 1-D density grids and trapezoidal quadrature.

use crate::Real;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

/// Which variable a grid or moment set lives over: the signal `x` or its
/// logarithm `η`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    X,
    Eta,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid must be strictly increasing with at least 2 points")]
    NotIncreasing,
    #[error("grid and value lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("density values must be non-negative and finite")]
    InvalidValues,
    #[error("density integrates to {0}, cannot normalize")]
    DegenerateMass(f64),
}

/// A density sampled on a strictly increasing grid, normalized so the
/// trapezoidal integral is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DensityGrid<R: Real> {
    pub domain: Domain,
    pub points: Vec<R>,
    pub values: Vec<R>,
}

impl<R: Real> DensityGrid<R> {
    /// Builds a grid and normalizes the values to unit trapezoidal mass.
    pub fn new(domain: Domain, points: Vec<R>, values: Vec<R>) -> Result<Self, GridError> {
        if points.len() != values.len() {
            return Err(GridError::LengthMismatch(points.len(), values.len()));
        }
        if points.len() < 2 || points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GridError::NotIncreasing);
        }
        if values.iter().any(|v| !v.is_finite() || *v < R::zero()) {
            return Err(GridError::InvalidValues);
        }
        let mut grid = Self { domain, points, values };
        grid.normalize()?;
        Ok(grid)
    }

    /// Rescales values so `trapezoid(points, values) == 1`.
    pub fn normalize(&mut self) -> Result<(), GridError> {
        let mass = trapezoid(&self.points, &self.values);
        if !(mass > R::zero()) || !mass.is_finite() {
            return Err(GridError::DegenerateMass(mass.to64()));
        }
        for v in &mut self.values {
            *v /= mass;
        }
        Ok(())
    }

    pub fn integral(&self) -> R {
        trapezoid(&self.points, &self.values)
    }

    /// Linear interpolation; zero outside the grid range.
    pub fn interpolate(&self, q: R) -> R {
        interp_linear(&self.points, &self.values, q)
    }

    /// Indices of strict interior local maxima.
    pub fn interior_maxima(&self) -> Vec<usize> {
        let v = &self.values;
        (1..v.len() - 1)
            .filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1])
            .collect()
    }

    /// Two-column CSV `support,density`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "support,density")?;
        for (p, v) in self.points.iter().zip(&self.values) {
            writeln!(out, "{},{}", p.to64(), v.to64())?;
        }
        Ok(())
    }
}

/// Composite trapezoidal rule on an arbitrary strictly increasing grid.
pub fn trapezoid<R: Real>(points: &[R], values: &[R]) -> R {
    debug_assert_eq!(points.len(), values.len());
    let mut acc = R::zero();
    for i in 1..points.len() {
        acc += (points[i] - points[i - 1]) * (values[i] + values[i - 1]);
    }
    acc * R::of(0.5)
}

/// Per-node trapezoidal weights: half cells at the ends.
pub fn trapezoid_weights<R: Real>(points: &[R]) -> Vec<R> {
    let n = points.len();
    let half = R::of(0.5);
    (0..n)
        .map(|i| {
            let left = if i > 0 { points[i] - points[i - 1] } else { R::zero() };
            let right = if i + 1 < n { points[i + 1] - points[i] } else { R::zero() };
            half * (left + right)
        })
        .collect()
}

/// `n` uniformly spaced points on `[lo, hi]`.
pub fn uniform_grid<R: Real>(lo: R, hi: R, n: usize) -> Vec<R> {
    assert!(n >= 2 && hi > lo);
    let step = (hi - lo) / R::of((n - 1) as f64);
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * R::of(i as f64) })
        .collect()
}

/// Linear interpolation of `(xs, ys)` at `q`; zero outside the range.
pub fn interp_linear<R: Real>(xs: &[R], ys: &[R], q: R) -> R {
    let n = xs.len();
    if n == 0 || q < xs[0] || q > xs[n - 1] {
        return R::zero();
    }
    // binary search for the cell
    let mut lo = 0usize;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if xs[mid] <= q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = (q - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + t * (ys[hi] - ys[lo])
}
