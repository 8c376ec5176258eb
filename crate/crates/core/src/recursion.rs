//! Central-moment recursion: turns a first-posterior-moment estimator
//! `μ₁(y)` and its derivatives with respect to the observation into the
//! higher-order posterior central moments.
//!
//! In the scalar case the recursion is
//!
//! ```text
//! μ₂ = ∂μ₁/∂y,   μ₃ = ∂μ₂/∂y,   μ_{k+1} = ∂μ_k/∂y + k μ₂ μ_{k-1}  (k >= 3)
//! ```
//!
//! which is carried out symbolically: every `μ_k` is a polynomial in the
//! derivatives `D_n = μ₁⁽ⁿ⁾(y)`, differentiation maps `D_n -> D_{n+1}`
//! exactly, and only the final evaluation substitutes numbers (exact
//! callbacks or central finite differences). This keeps exact-callback
//! results exact instead of stacking nested difference quotients.
//!
//! The same formulas applied verbatim to an `E[x|y]` estimator form the
//! x-domain baseline; those outputs deliberately do *not* match the true
//! x-domain posterior moments.

use crate::fd::{central_derivative, noise_floor, FdConfig};
use crate::grid::Domain;
use crate::oracle::{MomentSet, MAX_MOMENT_ORDER};
use crate::special::digamma;
use crate::Real;
use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecursionError {
    #[error("moment order {0} outside 2..={MAX_MOMENT_ORDER}")]
    InvalidOrder(usize),
    #[error("finite differences failed: {0}")]
    Fd(#[from] crate::fd::FdError),
    #[error("vector length {0} exceeds the supported maximum {1}")]
    TooManyCoordinates(usize, usize),
    #[error("estimator returned a vector of length {got}, expected {expected}")]
    EvaluatorShape { got: usize, expected: usize },
}

/// How derivatives of the estimator are obtained.
pub enum DerivativeMode<'a, R: Real> {
    /// `callback(y, n)` returns the exact n-th derivative of `μ₁` at `y`.
    ExactCallback(&'a (dyn Fn(R, usize) -> R + Sync)),
    /// Central finite differences of the evaluator.
    FiniteDifference,
}

/// A first-posterior-moment estimator `μ₁(·)`: closed form, oracle-backed,
/// or network-backed.
pub struct Mu1Estimator<'a, R: Real> {
    pub eval: &'a (dyn Fn(R) -> R + Sync),
    pub mode: DerivativeMode<'a, R>,
    /// Step used when `mode` is finite differences.
    pub fd_step: R,
}

impl<'a, R: Real> Mu1Estimator<'a, R> {
    pub fn finite_difference(eval: &'a (dyn Fn(R) -> R + Sync), fd_step: R) -> Self {
        Self { eval, mode: DerivativeMode::FiniteDifference, fd_step }
    }

    pub fn exact(
        eval: &'a (dyn Fn(R) -> R + Sync),
        derivatives: &'a (dyn Fn(R, usize) -> R + Sync),
    ) -> Self {
        Self {
            eval,
            mode: DerivativeMode::ExactCallback(derivatives),
            fd_step: R::of(1e-3),
        }
    }

    pub fn fd_config(&self, max_order: usize) -> FdConfig<R> {
        FdConfig { step: self.fd_step, max_order }
    }

    fn derivative(&self, y: R, order: usize, step: R) -> Result<R, RecursionError> {
        match self.mode {
            DerivativeMode::ExactCallback(cb) => Ok(cb(y, order)),
            DerivativeMode::FiniteDifference => {
                Ok(central_derivative(self.eval, y, order, step)?)
            }
        }
    }
}

/// Scalar moments plus finite-difference diagnostics.
#[derive(Debug, Clone)]
pub struct RecursionOutcome<R: Real> {
    pub moments: MomentSet<R>,
    /// Estimated roundoff noise of each derivative `D_1..D_{K-1}` relative
    /// to its magnitude; large ratios flag amplification at high orders.
    pub fd_noise_ratio: Option<f64>,
}

/// `η̂(y) = ψ(y+1) + ∂_y log p(y)`: the posterior mean of `log x` from the
/// marginal score.
pub fn tweedie_eta<R: Real>(marginal_score: R, y: R) -> R {
    digamma(y + R::one()).expect("y must be non-negative") + marginal_score
}

/// Posterior central moments `μ₂..μ_K` of `η = log x` from a log-domain
/// first-moment estimator.
pub fn recursion_scalar<R: Real>(
    mu1: &Mu1Estimator<'_, R>,
    y: R,
    order: usize,
    fd: &FdConfig<R>,
) -> Result<RecursionOutcome<R>, RecursionError> {
    recurse(mu1, y, order, fd, Domain::Eta)
}

/// The same recursion applied verbatim to an `E[x|y]` estimator. This is the
/// x-domain baseline: its outputs are *not* the true x-domain central
/// moments (the identity behind the recursion only holds in the log domain).
pub fn baseline_x_recursion<R: Real>(
    mu1x: &Mu1Estimator<'_, R>,
    y: R,
    order: usize,
    fd: &FdConfig<R>,
) -> Result<RecursionOutcome<R>, RecursionError> {
    recurse(mu1x, y, order, fd, Domain::X)
}

fn recurse<R: Real>(
    mu1: &Mu1Estimator<'_, R>,
    y: R,
    order: usize,
    fd: &FdConfig<R>,
    domain: Domain,
) -> Result<RecursionOutcome<R>, RecursionError> {
    if !(2..=MAX_MOMENT_ORDER).contains(&order) {
        return Err(RecursionError::InvalidOrder(order));
    }
    let polys = moment_polynomials(order);
    let n_derivs = order - 1;
    let mut derivs = Vec::with_capacity(n_derivs);
    for n in 1..=n_derivs {
        derivs.push(mu1.derivative(y, n, fd.step)?);
    }
    let fd_noise_ratio = match mu1.mode {
        DerivativeMode::FiniteDifference => {
            let mut worst = 0.0f64;
            for (n, d) in derivs.iter().enumerate() {
                let floor = noise_floor(mu1.eval, y, n + 1, fd.step).to64();
                let mag = d.to64().abs().max(f64::MIN_POSITIVE);
                worst = worst.max(floor / mag);
            }
            Some(worst)
        }
        DerivativeMode::ExactCallback(_) => None,
    };
    let central: Vec<R> = polys.iter().map(|p| p.eval(&derivs)).collect();
    Ok(RecursionOutcome {
        moments: MomentSet { y, domain, mu1: (mu1.eval)(y), central },
        fd_noise_ratio,
    })
}

/// Second-order moments of a vector-valued estimator: the full Jacobian as
/// `μ₂`, optionally with the diagonal third-moment slices
/// `[μ₃]_{iii} = ∂²[μ₁]_i / ∂y_i²`.
#[derive(Debug, Clone)]
pub struct MultivariateMoments<R: Real> {
    pub y: Vec<R>,
    pub mu1: Vec<R>,
    pub mu2: Array2<R>,
    pub mu3_diag: Option<Vec<R>>,
}

impl<R: Real> MultivariateMoments<R> {
    /// `(J + Jᵀ)/2`; a posterior covariance is symmetric, the raw Jacobian
    /// of an approximate estimator need not be.
    pub fn symmetrized(&self) -> Array2<R> {
        let half = R::of(0.5);
        let t = self.mu2.t();
        let mut out = self.mu2.clone();
        out.zip_mut_with(&t, |a, &b| *a = (*a + b) * half);
        out
    }

    pub fn max_asymmetry(&self) -> R {
        let n = self.mu2.nrows();
        let mut worst = R::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.mu2[[i, j]] - self.mu2[[j, i]]).abs());
            }
        }
        worst
    }
}

/// Maximum vector length for the Jacobian sweep (2n forward evaluations).
pub const MAX_MULTIVARIATE_LEN: usize = 1024;

/// Jacobian `[μ₂]_{ij} = ∂[μ₁]_i/∂y_j` by one central difference per
/// coordinate, with optional diagonal `μ₃` slices from second differences.
pub fn recursion_multivariate<R, F>(
    mu1: F,
    y: &[R],
    fd: &FdConfig<R>,
    want_mu3_diag: bool,
) -> Result<MultivariateMoments<R>, RecursionError>
where
    R: Real,
    F: Fn(&[R]) -> Vec<R> + Sync,
{
    let n = y.len();
    if n > MAX_MULTIVARIATE_LEN {
        return Err(RecursionError::TooManyCoordinates(n, MAX_MULTIVARIATE_LEN));
    }
    if !(fd.step > R::zero()) {
        return Err(RecursionError::Fd(crate::fd::FdError::NonPositiveStep(
            fd.step.to64(),
        )));
    }
    let base = mu1(y);
    if base.len() != n {
        return Err(RecursionError::EvaluatorShape { got: base.len(), expected: n });
    }
    let h = fd.step;
    let columns: Vec<(Vec<R>, Vec<R>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut plus = y.to_vec();
            plus[j] += h;
            let mut minus = y.to_vec();
            minus[j] -= h;
            (mu1(&plus), mu1(&minus))
        })
        .collect();
    let two_h = R::of(2.0) * h;
    let mut mu2 = Array2::zeros((n, n));
    for (j, (plus, minus)) in columns.iter().enumerate() {
        if plus.len() != n || minus.len() != n {
            return Err(RecursionError::EvaluatorShape { got: plus.len(), expected: n });
        }
        for i in 0..n {
            mu2[[i, j]] = (plus[i] - minus[i]) / two_h;
        }
    }
    let mu3_diag = want_mu3_diag.then(|| {
        let h2 = h * h;
        (0..n)
            .map(|i| {
                let (plus, minus) = &columns[i];
                (plus[i] - base[i] - base[i] + minus[i]) / h2
            })
            .collect()
    });
    Ok(MultivariateMoments { y: y.to_vec(), mu1: base, mu2, mu3_diag })
}

// ---------------------------------------------------------------------------
// Symbolic layer: polynomials in the derivatives D_1..D_5 of mu1.

/// Monomial `c * D1^e1 ... D5^e5`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Monomial {
    coef: f64,
    exps: [u8; 5],
}

#[derive(Debug, Clone, PartialEq)]
struct Poly {
    terms: Vec<Monomial>,
}

impl Poly {
    fn zero() -> Self {
        Poly { terms: Vec::new() }
    }

    fn var(n: usize) -> Self {
        let mut exps = [0u8; 5];
        exps[n - 1] = 1;
        Poly { terms: vec![Monomial { coef: 1.0, exps }] }
    }

    fn compact(mut self) -> Self {
        self.terms.sort_by_key(|a| a.exps);
        let mut out: Vec<Monomial> = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            match out.last_mut() {
                Some(last) if last.exps == t.exps => last.coef += t.coef,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.coef != 0.0);
        Poly { terms: out }
    }

    fn add(&self, other: &Poly) -> Poly {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Poly { terms }.compact()
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut exps = a.exps;
                for (e, be) in exps.iter_mut().zip(&b.exps) {
                    *e += be;
                }
                terms.push(Monomial { coef: a.coef * b.coef, exps });
            }
        }
        Poly { terms }.compact()
    }

    fn scale(&self, c: f64) -> Poly {
        Poly {
            terms: self.terms.iter().map(|t| Monomial { coef: t.coef * c, ..*t }).collect(),
        }
    }

    /// d/dy via the product rule, using d(D_n)/dy = D_{n+1}.
    fn derive(&self) -> Poly {
        let mut terms = Vec::new();
        for t in &self.terms {
            for i in 0..5 {
                if t.exps[i] == 0 {
                    continue;
                }
                assert!(i + 1 < 5, "derivative order exceeds the supported D5");
                let mut exps = t.exps;
                exps[i] -= 1;
                exps[i + 1] += 1;
                terms.push(Monomial { coef: t.coef * t.exps[i] as f64, exps });
            }
        }
        Poly { terms }.compact()
    }

    fn eval<R: Real>(&self, derivs: &[R]) -> R {
        let mut acc = R::zero();
        for t in &self.terms {
            let mut prod = R::of(t.coef);
            for (i, &e) in t.exps.iter().enumerate() {
                for _ in 0..e {
                    prod *= derivs[i];
                }
            }
            acc += prod;
        }
        acc
    }
}

/// Polynomials for `μ₂..μ_K` generated by the recursion
/// `μ_{k+1} = ∂μ_k + k μ₂ μ_{k-1}` with the first central moment fixed at 0.
fn moment_polynomials(order: usize) -> Vec<Poly> {
    // mus[k] is the k-th central moment; the first central moment is 0,
    // which makes the k = 2 step collapse to mu3 = d(mu2) automatically.
    let mut mus: Vec<Poly> = vec![Poly::zero(), Poly::zero(), Poly::var(1)];
    for k in 2..order {
        let next = mus[k].derive().add(&mus[2].mul(&mus[k - 1]).scale(k as f64));
        mus.push(next);
    }
    mus.drain(..2);
    mus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::posterior_central_moments;
    use crate::prior::PriorSpec;
    use crate::special::{digamma, polygamma};
    use approx::assert_abs_diff_eq;

    #[test]
    fn moment_polynomials_match_cumulant_expansions() {
        // mu2=D1, mu3=D2, mu4=D3+3D1^2, mu5=D4+10D1D2,
        // mu6=D5+10D2^2+15D1D3+15D1^3
        let polys = moment_polynomials(6);
        let d = [1.3f64, -0.7, 0.4, 2.1, -0.9];
        assert_abs_diff_eq!(polys[0].eval(&d), 1.3, epsilon = 1e-14);
        assert_abs_diff_eq!(polys[1].eval(&d), -0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(polys[2].eval(&d), 0.4 + 3.0 * 1.3 * 1.3, epsilon = 1e-12);
        assert_abs_diff_eq!(polys[3].eval(&d), 2.1 + 10.0 * 1.3 * -0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(
            polys[4].eval(&d),
            -0.9 + 10.0 * 0.49 + 15.0 * 1.3 * 0.4 + 15.0 * 1.3f64.powi(3),
            epsilon = 1e-12
        );
    }

    /// Exact-callback estimator for the Gamma-conjugate posterior:
    /// mu1(y) = psi(shape + y) - ln(rate + 1), derivatives are polygammas.
    fn gamma_mu1<'a>(shape: f64, rate: f64) -> (impl Fn(f64) -> f64 + Sync + 'a, impl Fn(f64, usize) -> f64 + Sync + 'a)
    {
        let eval = move |y: f64| digamma(shape + y).unwrap() - (rate + 1.0).ln();
        let derivs = move |y: f64, n: usize| polygamma(n, shape + y).unwrap();
        (eval, derivs)
    }

    #[test]
    fn tweedie_map_examples() {
        // score = -psi(y+1) gives eta-hat 0
        let y = 3.0f64;
        assert_abs_diff_eq!(tweedie_eta(-digamma(4.0).unwrap(), y), 0.0, epsilon = 1e-12);
        // gamma(2,1) at y=3: psi(4) + score = psi(5) - ln 2
        let score = digamma(5.0).unwrap() - digamma(4.0).unwrap() - 2.0f64.ln();
        assert_abs_diff_eq!(tweedie_eta(score, y), 0.8129705, epsilon = 1e-7);
        // point mass at x0: score = ln x0 - psi(y+1)
        let x0 = 2.0f64;
        assert_abs_diff_eq!(
            tweedie_eta(x0.ln() - digamma(4.0).unwrap(), y),
            x0.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn exact_callback_reproduces_polygamma_closed_forms() {
        let (eval, derivs) = gamma_mu1(2.0, 1.0);
        let est = Mu1Estimator::exact(&eval, &derivs);
        let fd = FdConfig { step: 1e-3, max_order: 5 };
        let out = recursion_scalar(&est, 3.0, 4, &fd).unwrap().moments;
        assert_abs_diff_eq!(out.mu(2), polygamma(1, 5.0).unwrap(), epsilon = 1e-10);
        assert_abs_diff_eq!(out.mu(2), 0.2213230, epsilon = 1e-7);
        assert_abs_diff_eq!(out.mu(3), polygamma(2, 5.0).unwrap(), epsilon = 1e-10);
        assert_abs_diff_eq!(out.mu(3), -0.0487897, epsilon = 1e-7);
        let want4 = polygamma(3, 5.0f64).unwrap() + 3.0 * polygamma(1, 5.0f64).unwrap().powi(2);
        assert_abs_diff_eq!(out.mu(4), want4, epsilon = 1e-10);
        assert_abs_diff_eq!(out.mu(4), 0.1683791, epsilon = 5e-7);
    }

    #[test]
    fn constant_estimator_gives_zero_moments() {
        let eval = |_: f64| 2.0f64.ln();
        let est = Mu1Estimator::finite_difference(&eval, 0.05);
        let out = recursion_scalar(&est, 4.0, 6, &est.fd_config(5)).unwrap().moments;
        for k in 2..=6 {
            // cancellation is exact up to roundoff amplified by 1/h^(k-1)
            assert_abs_diff_eq!(out.mu(k), 0.0, epsilon = 1e-7);
        }
        let exact_zero = |_: f64, _: usize| 0.0f64;
        let est = Mu1Estimator::exact(&eval, &exact_zero);
        let out = recursion_scalar(&est, 4.0, 6, &FdConfig::default()).unwrap().moments;
        for k in 2..=6 {
            assert_eq!(out.mu(k), 0.0);
        }
    }

    #[test]
    fn oracle_backed_recursion_matches_quadrature_moments() {
        let prior = PriorSpec::<f64>::bimodal_log_normal();
        let eval =
            |y: f64| posterior_central_moments(&prior, y, 1, Domain::Eta).unwrap().mu1;
        let est = Mu1Estimator::finite_difference(&eval, 1e-3);
        let fd = est.fd_config(3);
        let out = recursion_scalar(&est, 4.0, 4, &fd).unwrap().moments;
        let truth = posterior_central_moments(&prior, 4.0, 4, Domain::Eta).unwrap();
        for k in 2..=4 {
            let tol = (truth.mu(k).abs() * 0.01).max(1e-3);
            assert!(
                (out.mu(k) - truth.mu(k)).abs() <= tol,
                "k={k}: {} vs {}",
                out.mu(k),
                truth.mu(k)
            );
        }
    }

    #[test]
    fn oracle_backed_recursion_matches_quadrature_on_gamma_prior() {
        let prior = PriorSpec::<f64>::gamma(2.0, 1.0).unwrap();
        let eval =
            |y: f64| posterior_central_moments(&prior, y, 1, Domain::Eta).unwrap().mu1;
        let est = Mu1Estimator::finite_difference(&eval, 1e-3);
        let fd = est.fd_config(3);
        for y in [1.0f64, 4.0, 9.0] {
            let out = recursion_scalar(&est, y, 4, &fd).unwrap().moments;
            let truth = posterior_central_moments(&prior, y, 4, Domain::Eta).unwrap();
            for k in 2..=4 {
                let tol = (truth.mu(k).abs() * 0.01).max(1e-3);
                assert!(
                    (out.mu(k) - truth.mu(k)).abs() <= tol,
                    "y={y} k={k}: {} vs {}",
                    out.mu(k),
                    truth.mu(k)
                );
            }
        }
    }

    #[test]
    fn exact_vs_finite_difference_agreement() {
        let (eval, derivs) = gamma_mu1(2.0, 1.0);
        let exact = Mu1Estimator::exact(&eval, &derivs);
        let fd_est = Mu1Estimator::finite_difference(&eval, 1e-2);
        let fd = FdConfig { step: 1e-2, max_order: 2 };
        for y in [1.0f64, 3.0, 6.5] {
            let a = recursion_scalar(&exact, y, 3, &fd).unwrap().moments;
            let b = recursion_scalar(&fd_est, y, 3, &fd).unwrap().moments;
            for k in 2..=3 {
                assert_abs_diff_eq!(a.mu(k), b.mu(k), epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn lower_order_is_prefix_of_higher_order() {
        let (eval, derivs) = gamma_mu1(2.0, 1.0);
        let est = Mu1Estimator::exact(&eval, &derivs);
        let fd = FdConfig { step: 1e-3, max_order: 5 };
        let k3 = recursion_scalar(&est, 2.0, 3, &fd).unwrap().moments;
        let k4 = recursion_scalar(&est, 2.0, 4, &fd).unwrap().moments;
        assert_eq!(k3.central[..], k4.central[..2]);
    }

    #[test]
    fn order_bounds_enforced() {
        let eval = |y: f64| y;
        let est = Mu1Estimator::finite_difference(&eval, 1e-3);
        let fd = est.fd_config(5);
        assert!(matches!(
            recursion_scalar(&est, 1.0, 1, &fd),
            Err(RecursionError::InvalidOrder(1))
        ));
        assert!(matches!(
            recursion_scalar(&est, 1.0, 7, &fd),
            Err(RecursionError::InvalidOrder(7))
        ));
    }

    #[test]
    fn baseline_gamma_variance_disagrees_with_truth() {
        // E[x|y] = (y + shape)/(rate + 1); the recursion returns its slope
        // 1/2, but the true posterior variance is (y + shape)/(rate + 1)^2.
        let eval = |y: f64| (y + 2.0) / 2.0;
        let est = Mu1Estimator::finite_difference(&eval, 1e-3);
        let out = baseline_x_recursion(&est, 3.0, 2, &est.fd_config(1)).unwrap().moments;
        assert_eq!(out.domain, Domain::X);
        assert_abs_diff_eq!(out.mu(2), 0.5, epsilon = 1e-8);
        let truth = 1.25; // (3 + 2)/(1 + 1)^2
        assert!((out.mu(2) - truth).abs() > 0.5);
    }

    #[test]
    fn baseline_point_mass_is_degenerate() {
        let eval = |_: f64| 2.0f64;
        let est = Mu1Estimator::finite_difference(&eval, 1e-3);
        let out = baseline_x_recursion(&est, 3.0, 4, &est.fd_config(3)).unwrap().moments;
        for k in 2..=4 {
            assert_abs_diff_eq!(out.mu(k), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn multivariate_product_prior_is_diagonal() {
        // coordinate-wise gamma-conjugate estimator: independent coordinates
        let mu1 = |y: &[f64]| -> Vec<f64> {
            y.iter().map(|&yi| digamma(2.0 + yi).unwrap() - 2.0f64.ln()).collect()
        };
        let y = vec![1.0f64, 3.0, 5.0, 2.0];
        let fd = FdConfig { step: 1e-3, max_order: 2 };
        let mm = recursion_multivariate(mu1, &y, &fd, true).unwrap();
        for i in 0..y.len() {
            for j in 0..y.len() {
                if i == j {
                    let scalar = polygamma(1, 2.0 + y[i]).unwrap();
                    assert_abs_diff_eq!(mm.mu2[[i, j]], scalar, epsilon = 1e-4);
                } else {
                    assert!(mm.mu2[[i, j]].abs() <= 1e-3);
                }
            }
        }
        let d3 = mm.mu3_diag.unwrap();
        for (i, &v) in d3.iter().enumerate() {
            assert_abs_diff_eq!(v, polygamma(2, 2.0 + y[i]).unwrap(), epsilon = 1e-3);
        }
    }

    #[test]
    fn multivariate_symmetrize() {
        let mu1 = |y: &[f64]| vec![y[0] + 0.5 * y[1], 0.3 * y[0] + y[1]];
        let fd = FdConfig { step: 1e-4, max_order: 2 };
        let mm = recursion_multivariate(mu1, &[1.0, 2.0], &fd, false).unwrap();
        assert!(mm.max_asymmetry() > 0.1);
        let s = mm.symmetrized();
        assert_abs_diff_eq!(s[[0, 1]], s[[1, 0]], epsilon = 1e-12);
        assert_abs_diff_eq!(s[[0, 1]], 0.4, epsilon = 1e-6);
    }

    #[test]
    fn multivariate_rejects_oversized_input() {
        let mu1 = |y: &[f64]| y.to_vec();
        let y = vec![0.0f64; MAX_MULTIVARIATE_LEN + 1];
        let fd = FdConfig { step: 1e-3, max_order: 2 };
        assert!(matches!(
            recursion_multivariate(mu1, &y, &fd, false),
            Err(RecursionError::TooManyCoordinates(..))
        ));
    }

    #[test]
    fn fd_noise_ratio_reported_for_fd_mode() {
        let eval = |y: f64| y.sin();
        let est = Mu1Estimator::finite_difference(&eval, 1e-2);
        let out = recursion_scalar(&est, 1.0, 4, &est.fd_config(3)).unwrap();
        assert!(out.fd_noise_ratio.is_some());
        let (eval2, derivs) = gamma_mu1(2.0, 1.0);
        let exact = Mu1Estimator::exact(&eval2, &derivs);
        let out2 = recursion_scalar(&exact, 1.0, 4, &FdConfig::default()).unwrap();
        assert!(out2.fd_noise_ratio.is_none());
    }
}
