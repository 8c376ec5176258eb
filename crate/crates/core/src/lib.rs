//! Log-domain Poisson denoising and posterior recovery.
//!
//! Under Poisson noise the natural parameter of the likelihood is `η = log x`,
//! and the posterior mean of `η` is tied to the marginal score through
//! `E[log x | y] = ψ(y+1) + ∂_y log p(y)`. A denoiser trained to predict
//! `E[log x | y]` therefore carries more than a point estimate: its
//! derivatives with respect to the observation determine every higher-order
//! posterior central moment of `η`, and those moments reconstruct the
//! posterior density via a Gram-Charlier expansion.
//!
//! The crate provides the full pipeline plus the machinery to validate it:
//!
//! - [`special`]: polygamma, log-gamma and probabilists' Hermite polynomials;
//! - [`prior`]: scalar priors, synthetic 1-D signals and gain-parameterized
//!   Poisson corruption;
//! - [`oracle`]: ground-truth marginals, posteriors and posterior central
//!   moments by dense grid quadrature;
//! - [`recursion`]: the moment recursion that turns a first-moment estimator
//!   and its derivatives into central moments, in log-domain and as the
//!   (intentionally wrong) x-domain baseline;
//! - [`reconstruct`]: Gram-Charlier density reconstruction, change of
//!   variables to the signal domain, and cumulative squared-error curves;
//! - [`nn`]: a small self-contained neural stack (MLP and 1-D conv net) with
//!   hand-derived gradients, Adam and early stopping;
//! - [`harness`]: the two end-to-end experiments (toy posterior recovery and
//!   the denoising benchmark) with CSV/JSON reporting.
//!
//! All numeric code is generic over the scalar type via [`Real`]
//! (`f32`/`f64`); the `*64` aliases at the crate root fix `f64` for callers
//! that do not care about the parameterization.

// `!(x > 0)` style comparisons are deliberate: they reject NaN along with
// the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fd;
pub mod grid;
pub mod harness;
pub mod nn;
pub mod oracle;
pub mod prior;
pub mod reconstruct;
pub mod recursion;
mod scalar;
pub mod special;

pub use grid::{DensityGrid, Domain};
pub use oracle::MomentSet;
pub use scalar::Real;

/// `f64` aliases for the main domain types.
pub type DensityGrid64 = grid::DensityGrid<f64>;
pub type MomentSet64 = oracle::MomentSet<f64>;
pub type PriorSpec64 = prior::PriorSpec<f64>;
pub type Observation64 = prior::Observation<f64>;
pub type FdConfig64 = fd::FdConfig<f64>;
pub type DenoiserModel64 = nn::DenoiserModel<f64>;
