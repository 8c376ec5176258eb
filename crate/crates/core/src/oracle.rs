//! Ground-truth engine: marginals, posteriors and posterior central moments
//! by dense grid quadrature.
//!
//! The Poisson likelihood is extended to real observations through
//! `p(y|x) = x^y e^(-x) / Γ(y+1)`, which makes `∂_y` well defined. All
//! likelihood work happens in log space with log-sum-exp normalization so
//! that large `y` and small `x` do not underflow.

use crate::fd::central_derivative;
use crate::grid::{trapezoid, trapezoid_weights, DensityGrid, Domain};
use crate::prior::PriorSpec;
use crate::special::log_gamma;
use crate::Real;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Highest supported central-moment order.
pub const MAX_MOMENT_ORDER: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("observation must be non-negative, got {0}")]
    NegativeObservation(f64),
    #[error("moment order {0} outside 1..={MAX_MOMENT_ORDER}")]
    InvalidOrder(usize),
    #[error("grid size {0} below the minimum 100")]
    GridTooSmall(usize),
    #[error("posterior underflowed to zero everywhere; widen the grid")]
    Underflow,
    #[error("finite-difference step must satisfy 0 < step <= y, got step {step} at y {y}")]
    StepDomain { step: f64, y: f64 },
}

/// Posterior central moments of `g(x)` at one observation, where `g` is
/// `log` (eta domain) or the identity (x domain). `central[k]` holds
/// `μ_{k+2}`, i.e. the list starts at the variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MomentSet<R: Real> {
    pub y: R,
    pub domain: Domain,
    pub mu1: R,
    pub central: Vec<R>,
}

impl<R: Real> MomentSet<R> {
    /// Number of moments carried, counting the mean.
    pub fn order(&self) -> usize {
        self.central.len() + 1
    }

    /// `μ_k`: the mean for `k = 1`, central moments for `k >= 2`.
    pub fn mu(&self, k: usize) -> R {
        match k {
            0 => R::one(),
            1 => self.mu1,
            _ => self.central[k - 2],
        }
    }

    pub fn variance(&self) -> Option<R> {
        self.central.first().copied()
    }
}

/// `log p(y|x)` under the continuous-observation extension.
pub fn log_likelihood<R: Real>(y: R, x: R) -> R {
    y * x.ln() - x - log_gamma(y + R::one()).expect("y + 1 > 0")
}

/// `log p(y) = log ∫ p(y|x) p(x) dx` by trapezoidal quadrature on the prior
/// grid. Returns `-inf` only when the integral is exactly zero on the grid.
pub fn marginal_log<R: Real>(prior: &PriorSpec<R>, y: R) -> Result<R, OracleError> {
    if y < R::zero() {
        return Err(OracleError::NegativeObservation(y.to64()));
    }
    let grid = prior.grid();
    Ok(marginal_log_on(&grid, y))
}

fn marginal_log_on<R: Real>(grid: &DensityGrid<R>, y: R) -> R {
    let weights = trapezoid_weights(&grid.points);
    let mut max = R::neg_infinity();
    let terms: Vec<R> = grid
        .points
        .iter()
        .zip(&grid.values)
        .zip(&weights)
        .map(|((&x, &p), &w)| {
            let t = if p > R::zero() && w > R::zero() {
                log_likelihood(y, x) + p.ln() + w.ln()
            } else {
                R::neg_infinity()
            };
            if t > max {
                max = t;
            }
            t
        })
        .collect();
    if !max.is_finite() {
        return R::neg_infinity();
    }
    let sum: R = terms.iter().map(|&t| (t - max).exp()).sum();
    max + sum.ln()
}

/// Normalized posterior `p(x|y)` on a `grid_size`-point grid over the prior
/// support.
pub fn posterior_density<R: Real>(
    prior: &PriorSpec<R>,
    y: R,
    grid_size: usize,
) -> Result<DensityGrid<R>, OracleError> {
    if grid_size < 100 {
        return Err(OracleError::GridTooSmall(grid_size));
    }
    if y < R::zero() {
        return Err(OracleError::NegativeObservation(y.to64()));
    }
    posterior_on(&prior.grid_with_points(grid_size), y)
}

fn posterior_on<R: Real>(grid: &DensityGrid<R>, y: R) -> Result<DensityGrid<R>, OracleError> {
    let log_vals: Vec<R> = grid
        .points
        .iter()
        .zip(&grid.values)
        .map(|(&x, &p)| {
            if p > R::zero() {
                log_likelihood(y, x) + p.ln()
            } else {
                R::neg_infinity()
            }
        })
        .collect();
    let max = log_vals.iter().cloned().fold(R::neg_infinity(), R::max);
    if !max.is_finite() {
        return Err(OracleError::Underflow);
    }
    let vals: Vec<R> = log_vals.into_iter().map(|lv| (lv - max).exp()).collect();
    DensityGrid::new(grid.domain, grid.points.clone(), vals).map_err(|_| OracleError::Underflow)
}

/// Posterior mean and central moments of `η = log x` (eta domain) or of `x`
/// itself (x domain), by quadrature against the posterior density.
pub fn posterior_central_moments<R: Real>(
    prior: &PriorSpec<R>,
    y: R,
    order: usize,
    domain: Domain,
) -> Result<MomentSet<R>, OracleError> {
    if order == 0 || order > MAX_MOMENT_ORDER {
        return Err(OracleError::InvalidOrder(order));
    }
    let grid = prior.grid();
    let post = posterior_on(&grid, y)?;
    let g: Vec<R> = post
        .points
        .iter()
        .map(|&x| match domain {
            Domain::Eta => x.ln(),
            Domain::X => x,
        })
        .collect();
    let weighted: Vec<R> = g.iter().zip(&post.values).map(|(&gi, &p)| gi * p).collect();
    let mu1 = trapezoid(&post.points, &weighted);
    let mut central = Vec::with_capacity(order.saturating_sub(1));
    for k in 2..=order {
        let integrand: Vec<R> = g
            .iter()
            .zip(&post.values)
            .map(|(&gi, &p)| (gi - mu1).powi(k as i32) * p)
            .collect();
        central.push(trapezoid(&post.points, &integrand));
    }
    Ok(MomentSet { y, domain, mu1, central })
}

/// Central finite difference of the log marginal:
/// `(log p(y+h) - log p(y-h)) / 2h`.
pub fn marginal_score<R: Real>(prior: &PriorSpec<R>, y: R, step: R) -> Result<R, OracleError> {
    if !(step > R::zero()) || y < step {
        return Err(OracleError::StepDomain { step: step.to64(), y: y.to64() });
    }
    let grid = prior.grid();
    central_derivative(|t| marginal_log_on(&grid, t), y, 1, step)
        .map_err(|_| OracleError::StepDomain { step: step.to64(), y: y.to64() })
}
