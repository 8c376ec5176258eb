//! Gram-Charlier density reconstruction from a moment set, change of
//! variables between the log domain and the signal domain, and the
//! cumulative squared-error curve used to compare reconstructions.

use crate::grid::{interp_linear, trapezoid_weights, uniform_grid, DensityGrid, Domain};
use crate::oracle::MomentSet;
use crate::special::hermite_prob;
use crate::Real;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructError {
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("moment set carries {0} moments, expansion needs at least 2")]
    NotEnoughMoments(usize),
    #[error("reconstruction grid must be positive and strictly increasing")]
    BadGrid,
    #[error("density degenerated to zero mass on the target grid")]
    DegenerateDensity,
    #[error("comparison grids differ ({0})")]
    GridMismatch(String),
}

/// What to do with the (possibly negative) raw expansion values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativityPolicy {
    /// Clamp at zero, then renormalize to unit mass. Default.
    ClampRenormalize,
    /// Keep the signed expansion (diagnostics only; not a valid density).
    Leave,
}

/// Grid and truncation choices for the reconstruction pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ReconstructionConfig {
    /// Highest central moment used by the expansion (2..=6).
    pub order: usize,
    pub negativity: NegativityPolicy,
    /// Log-domain grid: `mu1 ± span_sigmas * sqrt(mu2)` with this many points.
    pub eta_grid_points: usize,
    pub eta_span_sigmas: f64,
    /// Signal-domain comparison grid.
    pub x_lo: f64,
    pub x_hi: f64,
    pub x_grid_points: usize,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            order: 4,
            negativity: NegativityPolicy::ClampRenormalize,
            eta_grid_points: 2001,
            eta_span_sigmas: 6.0,
            x_lo: 0.01,
            x_hi: 20.0,
            x_grid_points: 2000,
        }
    }
}

impl ReconstructionConfig {
    pub fn eta_grid<R: Real>(&self, moments: &MomentSet<R>) -> Result<Vec<R>, ReconstructError> {
        let mu2 = moments.variance().ok_or(ReconstructError::NotEnoughMoments(1))?;
        if !(mu2 > R::zero()) {
            return Err(ReconstructError::NonPositiveVariance(mu2.to64()));
        }
        let sigma = mu2.sqrt();
        let span = R::of(self.eta_span_sigmas) * sigma;
        Ok(uniform_grid(moments.mu1 - span, moments.mu1 + span, self.eta_grid_points.max(100)))
    }

    pub fn x_grid<R: Real>(&self) -> Vec<R> {
        uniform_grid(R::of(self.x_lo), R::of(self.x_hi), self.x_grid_points.max(100))
    }
}

/// Cumulants `κ₃..κ₆` from central moments `μ₂..μ₆` (as far as provided).
fn cumulants<R: Real>(moments: &MomentSet<R>) -> Vec<R> {
    let mu2 = moments.mu(2);
    let mut out = Vec::new();
    if moments.order() >= 3 {
        out.push(moments.mu(3));
    }
    if moments.order() >= 4 {
        out.push(moments.mu(4) - R::of(3.0) * mu2 * mu2);
    }
    if moments.order() >= 5 {
        out.push(moments.mu(5) - R::of(10.0) * moments.mu(3) * mu2);
    }
    if moments.order() >= 6 {
        out.push(
            moments.mu(6) - R::of(15.0) * moments.mu(4) * mu2
                - R::of(10.0) * moments.mu(3) * moments.mu(3)
                + R::of(30.0) * mu2 * mu2 * mu2,
        );
    }
    out
}

/// Gram-Charlier (type A) series around the Gaussian with mean `μ₁` and
/// variance `μ₂`:
///
/// ```text
/// p(t) = φ(z)/σ [1 + κ₃/(6σ³) He₃(z) + (κ₄)/(24σ⁴) He₄(z)
///                 + κ₅/(120σ⁵) He₅(z) + (κ₆ + 10κ₃²)/(720σ⁶) He₆(z)]
/// ```
///
/// truncated at the available order. Domain-agnostic: the result lives on
/// whatever grid is supplied and carries the moment set's domain tag.
pub fn gram_charlier<R: Real>(
    moments: &MomentSet<R>,
    grid: &[R],
    policy: NegativityPolicy,
) -> Result<DensityGrid<R>, ReconstructError> {
    if moments.order() < 2 {
        return Err(ReconstructError::NotEnoughMoments(moments.order()));
    }
    let mu2 = moments.mu(2);
    if !(mu2 > R::zero()) {
        return Err(ReconstructError::NonPositiveVariance(mu2.to64()));
    }
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ReconstructError::BadGrid);
    }
    let sigma = mu2.sqrt();
    let kappa = cumulants(moments);
    // series coefficients c_n for He_n, n = 3..6
    let mut coefs: Vec<R> = Vec::new();
    if !kappa.is_empty() {
        coefs.push(kappa[0] / (R::of(6.0) * sigma.powi(3)));
    }
    if kappa.len() >= 2 {
        coefs.push(kappa[1] / (R::of(24.0) * sigma.powi(4)));
    }
    if kappa.len() >= 3 {
        coefs.push(kappa[2] / (R::of(120.0) * sigma.powi(5)));
    }
    if kappa.len() >= 4 {
        coefs.push((kappa[3] + R::of(10.0) * kappa[0] * kappa[0]) / (R::of(720.0) * sigma.powi(6)));
    }
    let inv_sqrt_2pi = R::of(0.398_942_280_401_432_7);
    let values: Vec<R> = grid
        .iter()
        .map(|&t| {
            let z = (t - moments.mu1) / sigma;
            let phi = inv_sqrt_2pi * (-z * z * R::of(0.5)).exp();
            let mut series = R::one();
            for (i, &c) in coefs.iter().enumerate() {
                series += c * hermite_prob(i + 3, z);
            }
            phi / sigma * series
        })
        .collect();

    match policy {
        NegativityPolicy::ClampRenormalize => {
            let clamped: Vec<R> = values.iter().map(|&v| v.max(R::zero())).collect();
            DensityGrid::new(moments.domain, grid.to_vec(), clamped)
                .map_err(|_| ReconstructError::DegenerateDensity)
        }
        NegativityPolicy::Leave => Ok(DensityGrid {
            domain: moments.domain,
            points: grid.to_vec(),
            values,
        }),
    }
}

/// Log-domain Gram-Charlier expansion; the moment set must be eta-domain.
pub fn gram_charlier_eta<R: Real>(
    moments: &MomentSet<R>,
    grid_eta: &[R],
    policy: NegativityPolicy,
) -> Result<DensityGrid<R>, ReconstructError> {
    debug_assert_eq!(moments.domain, Domain::Eta);
    gram_charlier(moments, grid_eta, policy)
}

/// Change of variables `p_x(x) = p_η(log x)/x`, linearly interpolated in η
/// and renormalized on the target grid.
pub fn eta_to_x<R: Real>(
    density_eta: &DensityGrid<R>,
    grid_x: &[R],
) -> Result<DensityGrid<R>, ReconstructError> {
    if grid_x.len() < 2 || !(grid_x[0] > R::zero()) || grid_x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ReconstructError::BadGrid);
    }
    let values: Vec<R> = grid_x
        .iter()
        .map(|&x| interp_linear(&density_eta.points, &density_eta.values, x.ln()) / x)
        .collect();
    DensityGrid::new(Domain::X, grid_x.to_vec(), values)
        .map_err(|_| ReconstructError::DegenerateDensity)
}

/// Running sum of squared density error across the support:
/// `curve[t] = Σ_{i <= t} (approx_i - truth_i)² Δx_i`; the last entry is the
/// total integrated squared error.
pub fn cumulative_sq_error<R: Real>(
    approx: &DensityGrid<R>,
    truth: &DensityGrid<R>,
) -> Result<(Vec<R>, R), ReconstructError> {
    if approx.domain != truth.domain {
        return Err(ReconstructError::GridMismatch("domain tags differ".into()));
    }
    if approx.points.len() != truth.points.len() {
        return Err(ReconstructError::GridMismatch(format!(
            "lengths {} vs {}",
            approx.points.len(),
            truth.points.len()
        )));
    }
    if approx
        .points
        .iter()
        .zip(&truth.points)
        .any(|(&a, &b)| (a - b).abs() > R::of(1e-12))
    {
        return Err(ReconstructError::GridMismatch("support points differ".into()));
    }
    let w = trapezoid_weights(&approx.points);
    let mut curve = Vec::with_capacity(w.len());
    let mut acc = R::zero();
    for ((&a, &t), &wi) in approx.values.iter().zip(&truth.values).zip(&w) {
        let d = a - t;
        acc += d * d * wi;
        curve.push(acc);
    }
    Ok((curve, acc))
}
