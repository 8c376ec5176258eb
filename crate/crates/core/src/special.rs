//! Special functions: polygamma ψ⁽ⁿ⁾, log-gamma, and probabilists' Hermite
//! polynomials.
//!
//! ψ⁽ⁿ⁾ and ln Γ are computed by shifting the argument above 10 with the
//! exact recurrences and finishing with the Bernoulli asymptotic series;
//! eight series terms put the truncation error near machine precision for
//! `f64` over the supported range.

use crate::Real;
use thiserror::Error;

/// Highest supported polygamma order.
pub const MAX_POLYGAMMA_ORDER: usize = 6;

/// Highest Hermite degree exercised by the density expansions.
pub const MAX_HERMITE_DEGREE: usize = 8;

/// Euler-Mascheroni constant γ.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialError {
    #[error("argument must be positive, got {0}")]
    NonPositiveArgument(f64),
    #[error("polygamma order {0} exceeds the supported maximum {MAX_POLYGAMMA_ORDER}")]
    OrderTooLarge(usize),
}

/// B₂, B₄, …, B₁₆.
const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

const SHIFT_THRESHOLD: f64 = 10.0;

/// ψ⁽ⁿ⁾(x) for `0 <= n <= 6`, `x > 0`; `n = 0` is the digamma function.
pub fn polygamma<R: Real>(n: usize, x: R) -> Result<R, SpecialError> {
    if n > MAX_POLYGAMMA_ORDER {
        return Err(SpecialError::OrderTooLarge(n));
    }
    if !(x > R::zero()) {
        return Err(SpecialError::NonPositiveArgument(x.to64()));
    }

    let threshold = R::of(SHIFT_THRESHOLD);
    // psi^(n)(x) = psi^(n)(x+1) - (-1)^n n! / x^(n+1)
    let mut shift = R::zero();
    let mut w = x;
    let factorial = R::of(factorial_f64(n));
    let sign = if n.is_multiple_of(2) { R::one() } else { -R::one() };
    while w < threshold {
        shift -= sign * factorial / w.powi(n as i32 + 1);
        w += R::one();
    }
    Ok(polygamma_asymptotic(n, w) + shift)
}

/// Digamma ψ(x) = ψ⁽⁰⁾(x).
pub fn digamma<R: Real>(x: R) -> Result<R, SpecialError> {
    polygamma(0, x)
}

/// Asymptotic series at `w >= 10`.
fn polygamma_asymptotic<R: Real>(n: usize, w: R) -> R {
    let inv_w2 = (R::one() / w).powi(2);
    if n == 0 {
        // ln w - 1/(2w) - sum B_2k / (2k w^{2k})
        let mut acc = R::zero();
        let mut wp = inv_w2;
        for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
            let two_k = 2.0 * (k as f64 + 1.0);
            acc += R::of(b / two_k) * wp;
            wp *= inv_w2;
        }
        return w.ln() - R::of(0.5) / w - acc;
    }
    // (-1)^(n-1) [ (n-1)!/w^n + n!/(2 w^{n+1})
    //              + sum B_2k/(2k) (2k)(2k+1)...(2k+n-1) w^{-2k-n} ]
    let lead = R::of(factorial_f64(n - 1)) / w.powi(n as i32)
        + R::of(factorial_f64(n)) * R::of(0.5) / w.powi(n as i32 + 1);
    let mut acc = R::zero();
    let mut wp = R::one() / w.powi(n as i32 + 2);
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let two_k = 2.0 * (k as f64 + 1.0);
        let mut rising = 1.0;
        for i in 0..n {
            rising *= two_k + i as f64;
        }
        acc += R::of(b / two_k * rising) * wp;
        wp *= inv_w2;
    }
    let sign = if n % 2 == 1 { R::one() } else { -R::one() };
    sign * (lead + acc)
}

/// ln Γ(x) for `x > 0`.
pub fn log_gamma<R: Real>(x: R) -> Result<R, SpecialError> {
    if !(x > R::zero()) {
        return Err(SpecialError::NonPositiveArgument(x.to64()));
    }
    let threshold = R::of(SHIFT_THRESHOLD);
    // ln Γ(x) = ln Γ(x+1) - ln x
    let mut shift = R::zero();
    let mut w = x;
    while w < threshold {
        shift -= w.ln();
        w += R::one();
    }
    // Stirling: (w - 1/2) ln w - w + ln(2π)/2 + sum B_2k / (2k (2k-1) w^{2k-1})
    let half_ln_two_pi = R::of(0.918_938_533_204_672_7);
    let mut series = R::zero();
    let inv_w2 = (R::one() / w).powi(2);
    let mut wp = R::one() / w;
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let two_k = 2.0 * (k as f64 + 1.0);
        series += R::of(b / (two_k * (two_k - 1.0))) * wp;
        wp *= inv_w2;
    }
    Ok((w - R::of(0.5)) * w.ln() - w + half_ln_two_pi + series + shift)
}

/// Probabilists' Hermite polynomial Heₙ(z) by the recurrence
/// `He_{n+1} = z He_n - n He_{n-1}`, `He_0 = 1`, `He_1 = z`.
///
/// Total on its domain; degrees above [`MAX_HERMITE_DEGREE`] are not needed
/// by the density expansions but evaluate fine.
pub fn hermite_prob<R: Real>(n: usize, z: R) -> R {
    match n {
        0 => R::one(),
        1 => z,
        _ => {
            let mut prev = R::one();
            let mut cur = z;
            for k in 1..n {
                let next = z * cur - R::of(k as f64) * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

fn factorial_f64(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const PI: f64 = std::f64::consts::PI;

    /// Apery's constant ζ(3) by direct summation with an Euler-Maclaurin
    /// tail correction; accurate well past 1e-12.
    fn zeta3() -> f64 {
        let n = 200_000u64;
        let mut s = 0.0;
        for k in 1..=n {
            let k = k as f64;
            s += 1.0 / (k * k * k);
        }
        let nf = n as f64;
        s + 1.0 / (2.0 * nf * nf) - 1.0 / (2.0 * nf * nf * nf)
    }

    #[test]
    fn digamma_known_values() {
        // psi(1) = -gamma, psi(2) = 1 - gamma
        assert_abs_diff_eq!(digamma(1.0).unwrap(), -EULER_GAMMA, epsilon = 1e-12);
        assert_abs_diff_eq!(digamma(2.0).unwrap(), 1.0 - EULER_GAMMA, epsilon = 1e-10);
        // psi(5) = 1 + 1/2 + 1/3 + 1/4 - gamma = 25/12 - gamma
        assert_abs_diff_eq!(digamma(5.0).unwrap(), 25.0 / 12.0 - EULER_GAMMA, epsilon = 1e-10);
        assert_abs_diff_eq!(digamma(5.0).unwrap(), 1.5061176684, epsilon = 1e-10);
    }

    #[test]
    fn trigamma_at_one_is_pi_squared_over_six() {
        assert_abs_diff_eq!(polygamma(1, 1.0).unwrap(), PI * PI / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(polygamma(1, 1.0).unwrap(), 1.6449340668, epsilon = 1e-10);
    }

    #[test]
    fn tetragamma_at_five() {
        // psi''(1) = -2 zeta(3); shift up: psi''(5) = psi''(1) + 2 (1 + 1/8 + 1/27 + 1/64)
        let expected = -2.0 * zeta3() + 2.0 * (1.0 + 1.0 / 8.0 + 1.0 / 27.0 + 1.0 / 64.0);
        assert_abs_diff_eq!(polygamma(2, 5.0).unwrap(), expected, epsilon = 1e-10);
        assert_abs_diff_eq!(polygamma(2, 5.0).unwrap(), -0.0487897322, epsilon = 1e-10);
    }

    #[test]
    fn polygamma_rejects_bad_input() {
        assert!(matches!(
            polygamma(0, 0.0),
            Err(SpecialError::NonPositiveArgument(_))
        ));
        assert!(matches!(
            polygamma(0, -3.0),
            Err(SpecialError::NonPositiveArgument(_))
        ));
        assert!(matches!(polygamma(7, 1.0), Err(SpecialError::OrderTooLarge(7))));
    }

    #[test]
    fn polygamma_recurrence_consistency() {
        // psi^(n)(x+1) - psi^(n)(x) = (-1)^n n! / x^(n+1)
        for n in 0..=3usize {
            for &x in &[0.5f64, 1.0, 2.5, 10.0] {
                let lhs = polygamma(n, x + 1.0).unwrap() - polygamma(n, x).unwrap();
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let rhs = sign * (1..=n).map(|i| i as f64).product::<f64>() / x.powi(n as i32 + 1);
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn polygamma_accuracy_across_range() {
        // Spot-check against the defining series psi'(x) = sum 1/(x+k)^2.
        for &x in &[0.1, 0.7, 3.0, 25.0, 1e4] {
            let mut series = 0.0f64;
            for k in 0..2_000_000u64 {
                series += 1.0 / (x + k as f64).powi(2);
            }
            // tail: 1/(x+N) closes the sum to O(N^-2)
            series += 1.0 / (x + 2e6);
            assert_abs_diff_eq!(polygamma(1, x).unwrap(), series, epsilon = 1e-9);
        }
    }

    #[test]
    fn log_gamma_known_values() {
        assert_abs_diff_eq!(log_gamma(1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(log_gamma(5.0).unwrap(), 24.0f64.ln(), epsilon = 1e-10);
        assert_abs_diff_eq!(log_gamma(5.0).unwrap(), 3.1780538303, epsilon = 1e-10);
        // ln Γ(1/2) = ln sqrt(pi)
        assert_abs_diff_eq!(log_gamma(0.5).unwrap(), PI.sqrt().ln(), epsilon = 1e-10);
        assert_abs_diff_eq!(log_gamma(0.5).unwrap(), 0.5723649429, epsilon = 1e-10);
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.0).is_err());
    }

    #[test]
    fn log_gamma_matches_factorials_relative() {
        let mut fact = 1.0f64;
        for n in 2..=20u32 {
            fact *= (n - 1) as f64;
            let got = log_gamma(n as f64).unwrap();
            let want = fact.ln();
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn hermite_small_degrees() {
        // He2 = z^2 - 1, He3 = z^3 - 3z, He4 = z^4 - 6 z^2 + 3
        assert_abs_diff_eq!(hermite_prob(3, 0.0), 0.0);
        assert_abs_diff_eq!(hermite_prob(4, 0.0), 3.0);
        assert_abs_diff_eq!(hermite_prob(2, 2.0), 3.0);
        for &z in &[-2.5f64, -0.3, 0.9, 4.0] {
            assert_abs_diff_eq!(hermite_prob(2, z), z * z - 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(hermite_prob(3, z), z.powi(3) - 3.0 * z, epsilon = 1e-12);
            assert_abs_diff_eq!(
                hermite_prob(4, z),
                z.powi(4) - 6.0 * z * z + 3.0,
                epsilon = 1e-11
            );
        }
    }

    #[test]
    fn hermite_orthogonality_under_gaussian_weight() {
        // integral He_m He_n phi over [-10, 10]: 0 for m != n, n! for m = n.
        let n_pts = 200_001;
        let h = 20.0 / (n_pts - 1) as f64;
        for m in 0..=4usize {
            for n in 0..=4usize {
                let mut acc = 0.0;
                for i in 0..n_pts {
                    let z = -10.0 + h * i as f64;
                    let w = if i == 0 || i == n_pts - 1 { 0.5 } else { 1.0 };
                    let phi = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
                    acc += w * hermite_prob(m, z) * hermite_prob(n, z) * phi;
                }
                acc *= h;
                if m == n {
                    let fact: f64 = (1..=n).map(|i| i as f64).product();
                    assert!((acc - fact).abs() <= 1e-6 * fact.max(1.0));
                } else {
                    assert!(acc.abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let d: f32 = digamma(5.0f32).unwrap();
        assert!((d - 1.506_117_7f32).abs() < 1e-5);
        assert!((hermite_prob(4, 0.0f32) - 3.0).abs() < 1e-6);
    }
}
