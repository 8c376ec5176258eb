//! Central finite-difference stencils for derivative orders 1 through 5.

use crate::Real;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdError {
    #[error("derivative order {0} outside supported range 1..=5")]
    UnsupportedOrder(usize),
    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),
}

/// Step size and highest derivative order for nested central differences.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(bound = "")]
pub struct FdConfig<R: Real> {
    pub step: R,
    pub max_order: usize,
}

impl<R: Real> FdConfig<R> {
    pub fn new(step: R, max_order: usize) -> Result<Self, FdError> {
        if !(step > R::zero()) {
            return Err(FdError::NonPositiveStep(step.to64()));
        }
        if max_order == 0 || max_order > 5 {
            return Err(FdError::UnsupportedOrder(max_order));
        }
        Ok(Self { step, max_order })
    }
}

impl<R: Real> Default for FdConfig<R> {
    fn default() -> Self {
        Self { step: R::of(1e-3), max_order: 5 }
    }
}

/// Second-order-accurate central stencils: (offsets, coefficients).
const STENCILS: [(&[i32], &[f64]); 5] = [
    (&[-1, 1], &[-0.5, 0.5]),
    (&[-1, 0, 1], &[1.0, -2.0, 1.0]),
    (&[-2, -1, 1, 2], &[-0.5, 1.0, -1.0, 0.5]),
    (&[-2, -1, 0, 1, 2], &[1.0, -4.0, 6.0, -4.0, 1.0]),
    (&[-3, -2, -1, 1, 2, 3], &[-0.5, 2.0, -2.5, 2.5, -2.0, 0.5]),
];

/// Largest stencil offset needed for derivative `order`.
pub fn stencil_radius(order: usize) -> usize {
    match order {
        1 | 2 => 1,
        3 | 4 => 2,
        5 => 3,
        _ => 0,
    }
}

/// n-th central-difference derivative of `f` at `y` with step `h`.
pub fn central_derivative<R, F>(f: F, y: R, order: usize, h: R) -> Result<R, FdError>
where
    R: Real,
    F: Fn(R) -> R,
{
    if order == 0 || order > 5 {
        return Err(FdError::UnsupportedOrder(order));
    }
    if !(h > R::zero()) {
        return Err(FdError::NonPositiveStep(h.to64()));
    }
    let (offsets, coefs) = STENCILS[order - 1];
    let mut acc = R::zero();
    for (&o, &c) in offsets.iter().zip(coefs) {
        acc += R::of(c) * f(y + R::of(o as f64) * h);
    }
    Ok(acc / h.powi(order as i32))
}

/// Roundoff-noise scale of the stencil: eps * sum|coef| * max|f| / h^order.
/// Useful to flag finite-difference amplification at high orders.
pub fn noise_floor<R, F>(f: F, y: R, order: usize, h: R) -> R
where
    R: Real,
    F: Fn(R) -> R,
{
    let (offsets, coefs) = STENCILS[order.clamp(1, 5) - 1];
    let mut scale = R::zero();
    let mut coef_sum = 0.0;
    for (&o, &c) in offsets.iter().zip(coefs) {
        scale = scale.max(f(y + R::of(o as f64) * h).abs());
        coef_sum += c.abs();
    }
    R::of(R::epsilon().to64() * coef_sum) * scale / h.powi(order as i32)
}
