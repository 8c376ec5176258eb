//! Scalar priors over `x > 0`, synthetic 1-D signal generation, and
//! gain-parameterized Poisson corruption.
//!
//! The gain convention: `z_i ~ Poisson(gain * x_i)`, `y_i = z_i / gain`, so
//! `E[y] = x` and `Var[y] = x / gain`. Larger gain means more photons per
//! unit signal and lower noise.

use crate::grid::{trapezoid, trapezoid_weights, uniform_grid, DensityGrid, Domain};
use crate::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PriorError {
    #[error("invalid prior parameters: {0}")]
    InvalidParameters(String),
    #[error("point {0} outside the prior support [{1}, {2}]")]
    OutsideSupport(f64, f64, f64),
    #[error("poisson rate {0} exceeds the overflow guard 1e9")]
    RateOverflow(f64),
    #[error("invalid signal config: {0}")]
    InvalidSignalConfig(String),
}

/// Default quadrature resolution on the prior support.
pub const DEFAULT_GRID_POINTS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", rename_all_fields = "kebab-case", bound = "")]
pub enum PriorKind<R: Real> {
    LogNormalMixture {
        weights: Vec<R>,
        locations: Vec<R>,
        scales: Vec<R>,
    },
    Gamma {
        shape: R,
        rate: R,
    },
    PointMass {
        location: R,
    },
    Tabulated {
        grid: Vec<R>,
        values: Vec<R>,
    },
}

/// A prior over `x > 0`, truncated to a closed support interval and
/// renormalized there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", rename_all = "kebab-case")]
pub struct PriorSpec<R: Real> {
    pub kind: PriorKind<R>,
    /// Closed truncation interval `[x_lo, x_hi]`, `x_lo > 0`.
    pub support: (R, R),
    /// Resolution of the canonical quadrature grid.
    pub grid_points: usize,
}

impl<R: Real> PriorSpec<R> {
    pub fn log_normal_mixture(
        weights: Vec<R>,
        locations: Vec<R>,
        scales: Vec<R>,
        support: (R, R),
    ) -> Result<Self, PriorError> {
        let spec = Self {
            kind: PriorKind::LogNormalMixture { weights, locations, scales },
            support,
            grid_points: DEFAULT_GRID_POINTS,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The equal-weight bimodal log-normal prior used by the toy experiment:
    /// components (μ=0, σ=0.35) and (μ=2, σ=0.30) on [0.01, 20], giving two
    /// well-separated modes near 1 and 7.4.
    pub fn bimodal_log_normal() -> Self {
        Self::log_normal_mixture(
            vec![R::of(0.5), R::of(0.5)],
            vec![R::zero(), R::of(2.0)],
            vec![R::of(0.35), R::of(0.30)],
            (R::of(0.01), R::of(20.0)),
        )
        .expect("built-in prior parameters are valid")
    }

    /// Gamma prior with the given shape and rate; the support upper end is
    /// placed far enough out that the truncated tail mass is negligible.
    pub fn gamma(shape: R, rate: R) -> Result<Self, PriorError> {
        if !(shape > R::zero()) || !(rate > R::zero()) {
            return Err(PriorError::InvalidParameters(
                "gamma shape and rate must be positive".into(),
            ));
        }
        let hi = (shape + R::of(30.0) * shape.sqrt() + R::of(30.0)) / rate;
        let spec = Self {
            kind: PriorKind::Gamma { shape, rate },
            support: (R::of(1e-6), hi),
            grid_points: DEFAULT_GRID_POINTS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn point_mass(location: R) -> Result<Self, PriorError> {
        if !(location > R::zero()) {
            return Err(PriorError::InvalidParameters("atom location must be positive".into()));
        }
        let lo = (location - R::one()).max(location * R::of(0.5));
        let spec = Self {
            kind: PriorKind::PointMass { location },
            support: (lo, location + R::one()),
            grid_points: DEFAULT_GRID_POINTS,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Tabulated prior on its own grid; values are renormalized to unit
    /// trapezoidal mass.
    pub fn tabulated(grid: Vec<R>, values: Vec<R>) -> Result<Self, PriorError> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(PriorError::InvalidParameters(
                "tabulated prior needs matching grid/values with >= 2 points".into(),
            ));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || !(grid[0] > R::zero()) {
            return Err(PriorError::InvalidParameters(
                "tabulated grid must be strictly increasing and positive".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= R::zero()) || !v.is_finite()) {
            return Err(PriorError::InvalidParameters("tabulated values must be non-negative".into()));
        }
        let mass = trapezoid(&grid, &values);
        if !(mass > R::zero()) {
            return Err(PriorError::InvalidParameters("tabulated values integrate to zero".into()));
        }
        let values = values.into_iter().map(|v| v / mass).collect::<Vec<_>>();
        let support = (grid[0], *grid.last().unwrap());
        let grid_points = grid.len();
        Ok(Self {
            kind: PriorKind::Tabulated { grid, values },
            support,
            grid_points,
        })
    }

    pub fn with_support(mut self, lo: R, hi: R) -> Result<Self, PriorError> {
        self.support = (lo, hi);
        self.validate()?;
        Ok(self)
    }

    pub fn with_grid_points(mut self, n: usize) -> Self {
        if !matches!(self.kind, PriorKind::Tabulated { .. }) {
            self.grid_points = n.max(2);
        }
        self
    }

    pub fn validate(&self) -> Result<(), PriorError> {
        let (lo, hi) = self.support;
        if !(lo > R::zero()) || !(hi > lo) {
            return Err(PriorError::InvalidParameters(format!(
                "support must satisfy 0 < lo < hi, got [{}, {}]",
                lo, hi
            )));
        }
        match &self.kind {
            PriorKind::LogNormalMixture { weights, locations, scales } => {
                if weights.is_empty()
                    || weights.len() != locations.len()
                    || weights.len() != scales.len()
                {
                    return Err(PriorError::InvalidParameters(
                        "mixture weights/locations/scales lengths differ".into(),
                    ));
                }
                let sum: R = weights.iter().copied().sum();
                if (sum - R::one()).abs() > R::of(1e-6) {
                    return Err(PriorError::InvalidParameters(format!(
                        "mixture weights sum to {}, expected 1",
                        sum
                    )));
                }
                if weights.iter().any(|w| *w < R::zero()) || scales.iter().any(|s| !(*s > R::zero()))
                {
                    return Err(PriorError::InvalidParameters(
                        "mixture weights must be non-negative and scales positive".into(),
                    ));
                }
            }
            PriorKind::Gamma { shape, rate } => {
                if !(*shape > R::zero()) || !(*rate > R::zero()) {
                    return Err(PriorError::InvalidParameters(
                        "gamma shape and rate must be positive".into(),
                    ));
                }
            }
            PriorKind::PointMass { location } => {
                if !(*location >= lo) || !(*location <= hi) {
                    return Err(PriorError::InvalidParameters(
                        "atom location must lie inside the support".into(),
                    ));
                }
            }
            PriorKind::Tabulated { grid, values } => {
                if grid.len() != values.len() || grid.len() < 2 {
                    return Err(PriorError::InvalidParameters("tabulated grid/values mismatch".into()));
                }
            }
        }
        Ok(())
    }

    /// Unnormalized density of the untruncated law at `x`.
    fn density_unnormalized(&self, x: R) -> R {
        match &self.kind {
            PriorKind::LogNormalMixture { weights, locations, scales } => {
                let mut acc = R::zero();
                for ((w, mu), sigma) in weights.iter().zip(locations).zip(scales) {
                    let z = (x.ln() - *mu) / *sigma;
                    let norm = x * *sigma * R::of((2.0 * std::f64::consts::PI).sqrt());
                    acc += *w * (-z * z * R::of(0.5)).exp() / norm;
                }
                acc
            }
            PriorKind::Gamma { shape, rate } => {
                // x^(a-1) e^(-bx) b^a / Γ(a), evaluated in log space
                let a = *shape;
                let b = *rate;
                let lg = crate::special::log_gamma(a).expect("validated shape");
                ((a - R::one()) * x.ln() - b * x + a * b.ln() - lg).exp()
            }
            PriorKind::PointMass { .. } | PriorKind::Tabulated { .. } => {
                unreachable!("handled by density()/grid()")
            }
        }
    }

    /// Mass of the untruncated density on the support: the truncation
    /// normalizer. Evaluated on a dense fixed grid so that pointwise density
    /// queries track the closed forms; quadrature grids normalize themselves.
    pub fn normalizer(&self) -> R {
        match &self.kind {
            PriorKind::PointMass { .. } | PriorKind::Tabulated { .. } => R::one(),
            _ => {
                let n = self.grid_points.max(200_000);
                let pts = uniform_grid(self.support.0, self.support.1, n);
                let vals: Vec<R> = pts.iter().map(|&x| self.density_unnormalized(x)).collect();
                trapezoid(&pts, &vals)
            }
        }
    }

    /// Truncated-renormalized density at `x`. Point masses report the
    /// grid-cell representation: all mass in the cell containing the atom.
    pub fn density(&self, x: R) -> Result<R, PriorError> {
        let (lo, hi) = self.support;
        if !(x >= lo) || !(x <= hi) {
            return Err(PriorError::OutsideSupport(x.to64(), lo.to64(), hi.to64()));
        }
        match &self.kind {
            PriorKind::PointMass { location } => {
                let g = self.grid();
                let idx = nearest_index(&g.points, *location);
                let w = trapezoid_weights(&g.points)[idx];
                let half = w * R::of(0.5);
                Ok(if (x - *location).abs() <= half { R::one() / w } else { R::zero() })
            }
            PriorKind::Tabulated { grid, values } => Ok(crate::grid::interp_linear(grid, values, x)),
            _ => Ok(self.density_unnormalized(x) / self.normalizer()),
        }
    }

    /// Canonical quadrature grid: the truncated prior sampled on
    /// `grid_points` uniform nodes, normalized to unit trapezoidal mass.
    pub fn grid(&self) -> DensityGrid<R> {
        self.grid_with_points(self.grid_points)
    }

    /// Same as [`PriorSpec::grid`] with an explicit resolution.
    pub fn grid_with_points(&self, n: usize) -> DensityGrid<R> {
        match &self.kind {
            PriorKind::Tabulated { grid, values } => {
                DensityGrid::new(Domain::X, grid.clone(), values.clone())
                    .expect("tabulated prior validated on construction")
            }
            PriorKind::PointMass { location } => {
                let mut pts = uniform_grid(self.support.0, self.support.1, n.max(3));
                let idx = nearest_index(&pts, *location);
                if idx > 0 && idx + 1 < pts.len() {
                    pts[idx] = *location; // put the atom exactly on a node
                }
                let mut vals = vec![R::zero(); pts.len()];
                vals[idx] = R::one();
                DensityGrid::new(Domain::X, pts, vals).expect("spike grid is valid")
            }
            _ => {
                let pts = uniform_grid(self.support.0, self.support.1, n.max(2));
                let vals: Vec<R> = pts.iter().map(|&x| self.density_unnormalized(x)).collect();
                DensityGrid::new(Domain::X, pts, vals).expect("prior density grid is valid")
            }
        }
    }

    /// `count` i.i.d. draws from the truncated prior; deterministic in `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<R> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (self.support.0.to64(), self.support.1.to64());
        let mut out = Vec::with_capacity(count);
        match &self.kind {
            PriorKind::PointMass { location } => out.resize(count, *location),
            PriorKind::LogNormalMixture { weights, locations, scales } => {
                let w64: Vec<f64> = weights.iter().map(|w| w.to64()).collect();
                let normal = rand_distr::StandardNormal;
                while out.len() < count {
                    let u: f64 = rng.random();
                    let mut k = 0usize;
                    let mut acc = 0.0;
                    for (i, w) in w64.iter().enumerate() {
                        acc += w;
                        if u <= acc {
                            k = i;
                            break;
                        }
                        k = i;
                    }
                    let z: f64 = normal.sample(&mut rng);
                    let x = (locations[k].to64() + scales[k].to64() * z).exp();
                    if (lo..=hi).contains(&x) {
                        out.push(R::of(x));
                    }
                }
            }
            PriorKind::Gamma { shape, rate } => {
                let dist = rand_distr::Gamma::new(shape.to64(), 1.0 / rate.to64())
                    .expect("validated parameters");
                while out.len() < count {
                    let x = dist.sample(&mut rng);
                    if (lo..=hi).contains(&x) {
                        out.push(R::of(x));
                    }
                }
            }
            PriorKind::Tabulated { grid, values } => {
                // inverse-CDF through the trapezoidal cumulative
                let pts: Vec<f64> = grid.iter().map(|p| p.to64()).collect();
                let vals: Vec<f64> = values.iter().map(|v| v.to64()).collect();
                let mut cdf = vec![0.0f64; pts.len()];
                for i in 1..pts.len() {
                    cdf[i] = cdf[i - 1] + 0.5 * (pts[i] - pts[i - 1]) * (vals[i] + vals[i - 1]);
                }
                let total = *cdf.last().unwrap();
                for _ in 0..count {
                    let u: f64 = rng.random::<f64>() * total;
                    let j = match cdf.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                        Ok(j) => j.max(1),
                        Err(j) => j.clamp(1, pts.len() - 1),
                    };
                    let seg = (cdf[j] - cdf[j - 1]).max(f64::MIN_POSITIVE);
                    let t = (u - cdf[j - 1]) / seg;
                    out.push(R::of(pts[j - 1] + t * (pts[j] - pts[j - 1])));
                }
            }
        }
        out
    }
}

fn nearest_index<R: Real>(pts: &[R], x: R) -> usize {
    let mut best = 0usize;
    let mut dist = R::infinity();
    for (i, p) in pts.iter().enumerate() {
        let d = (*p - x).abs();
        if d < dist {
            dist = d;
            best = i;
        }
    }
    best
}

/// Configuration of the synthetic 1-D signals: i.i.d. Gamma noise smoothed
/// with a Gaussian kernel, min-max normalized to [0, 1] and floored at `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SignalConfig {
    pub length: usize,
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    /// Smoothing kernel standard deviation, in samples.
    pub smooth_std: f64,
    /// Kernel truncation radius, in standard deviations.
    pub smooth_truncate: f64,
    /// Positivity floor applied after normalization.
    pub floor: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            length: 256,
            gamma_shape: 1.5,
            gamma_rate: 2.0,
            smooth_std: 3.0,
            smooth_truncate: 4.0,
            floor: 1e-3,
        }
    }
}

impl SignalConfig {
    pub fn validate(&self) -> Result<(), PriorError> {
        if self.length < 1 {
            return Err(PriorError::InvalidSignalConfig("length must be >= 1".into()));
        }
        if self.gamma_shape <= 0.0 || self.gamma_rate <= 0.0 {
            return Err(PriorError::InvalidSignalConfig("gamma parameters must be positive".into()));
        }
        if self.smooth_std <= 0.0 || self.smooth_truncate <= 0.0 {
            return Err(PriorError::InvalidSignalConfig("smoothing parameters must be positive".into()));
        }
        if !(self.floor > 0.0 && self.floor < 0.1) {
            return Err(PriorError::InvalidSignalConfig("floor must lie in (0, 0.1)".into()));
        }
        Ok(())
    }
}

/// Clean signal in `[floor, 1]^n`; deterministic in `seed`.
pub fn generate_signal<R: Real>(cfg: &SignalConfig, seed: u64) -> Result<Vec<R>, PriorError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = rand_distr::Gamma::new(cfg.gamma_shape, 1.0 / cfg.gamma_rate)
        .expect("validated parameters");
    let raw: Vec<f64> = (0..cfg.length).map(|_| gamma.sample(&mut rng)).collect();

    let radius = (cfg.smooth_std * cfg.smooth_truncate).ceil() as usize;
    let kernel: Vec<f64> = (-(radius as i64)..=radius as i64)
        .map(|t| (-0.5 * (t as f64 / cfg.smooth_std).powi(2)).exp())
        .collect();
    let ksum: f64 = kernel.iter().sum();

    let n = cfg.length;
    let mut smooth = vec![0.0f64; n];
    for (i, s) in smooth.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, k) in kernel.iter().enumerate() {
            let p = i as i64 + j as i64 - radius as i64;
            acc += k * raw[reflect_index(p, n)];
        }
        *s = acc / ksum;
    }

    let min = smooth.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = smooth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let out = smooth
        .into_iter()
        .map(|v| {
            let scaled = if range > 0.0 { (v - min) / range } else { 1.0 };
            R::of(scaled.clamp(cfg.floor, 1.0))
        })
        .collect();
    Ok(out)
}

/// Mirror-without-repeat boundary index (reflect about the edge samples).
fn reflect_index(p: i64, n: usize) -> usize {
    let n = n as i64;
    let mut p = p;
    loop {
        if p < 0 {
            p = -p;
        } else if p >= n {
            p = 2 * n - 2 - p;
        } else {
            return p as usize;
        }
        if n == 1 {
            return 0;
        }
    }
}

/// Gain-normalized Poisson observation of a clean signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Observation<R: Real> {
    /// Rescaled counts `z / gain`, so `E[y] = x`.
    pub y: Vec<R>,
    pub gain: R,
    pub raw_counts: Vec<u64>,
}

/// Draws `z_i ~ Poisson(gain * x_i)` and returns `y = z / gain`;
/// deterministic in `seed`.
pub fn corrupt_poisson<R: Real>(
    x: &[R],
    gain: R,
    seed: u64,
) -> Result<Observation<R>, PriorError> {
    if !(gain > R::zero()) {
        return Err(PriorError::InvalidParameters("gain must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gain.to64();
    let mut counts = Vec::with_capacity(x.len());
    for &xi in x {
        let rate = g * xi.to64();
        if rate > 1e9 {
            return Err(PriorError::RateOverflow(rate));
        }
        let z = if rate > 0.0 {
            rand_distr::Poisson::new(rate).expect("positive finite rate").sample(&mut rng)
        } else {
            0.0
        };
        counts.push(z as u64);
    }
    let y = counts.iter().map(|&z| R::of(z as f64) / gain).collect();
    Ok(Observation { y, gain, raw_counts: counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gamma_density_matches_closed_form() {
        let p = PriorSpec::<f64>::gamma(2.0, 1.0).unwrap();
        // x e^-x at x = 1; truncation mass on the default support is negligible
        assert_abs_diff_eq!(p.density(1.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-7);
        assert_abs_diff_eq!(p.density(1.0).unwrap(), 0.3678794, epsilon = 1e-6);
    }

    #[test]
    fn bimodal_mixture_density_at_one() {
        let p = PriorSpec::<f64>::bimodal_log_normal();
        // dominated by the first component: 0.5 / (0.35 sqrt(2 pi)),
        // renormalized over [0.01, 20]
        let v = p.density(1.0).unwrap();
        assert!((v - 0.5699).abs() < 2e-4, "density {v}");
    }

    #[test]
    fn density_errors_outside_support() {
        let p = PriorSpec::<f64>::bimodal_log_normal();
        assert!(matches!(p.density(0.001), Err(PriorError::OutsideSupport(..))));
        assert!(matches!(p.density(25.0), Err(PriorError::OutsideSupport(..))));
    }

    #[test]
    fn point_mass_grid_concentrates_in_one_cell() {
        let p = PriorSpec::<f64>::point_mass(2.0).unwrap();
        let g = p.grid();
        let nonzero: Vec<usize> = (0..g.values.len()).filter(|&i| g.values[i] > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_abs_diff_eq!(g.points[nonzero[0]], 2.0, epsilon = 0.0);
        assert_abs_diff_eq!(g.integral(), 1.0, epsilon = 1e-12);
        // pointwise query: atom cell vs elsewhere
        assert!(p.density(2.0).unwrap() > 0.0);
        assert_eq!(p.density(1.5).unwrap(), 0.0);
    }

    #[test]
    fn priors_integrate_to_one_on_their_grids() {
        let priors: Vec<PriorSpec<f64>> = vec![
            PriorSpec::bimodal_log_normal(),
            PriorSpec::gamma(2.0, 1.0).unwrap(),
            PriorSpec::point_mass(2.0).unwrap(),
            PriorSpec::tabulated(vec![0.5, 1.0, 1.5, 2.0], vec![0.1, 0.9, 0.9, 0.1]).unwrap(),
        ];
        for p in priors {
            assert_abs_diff_eq!(p.grid().integral(), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = PriorSpec::<f64>::bimodal_log_normal();
        assert_eq!(p.sample(100, 42), p.sample(100, 42));
        let pm = PriorSpec::<f64>::point_mass(2.0).unwrap();
        assert_eq!(pm.sample(3, 0), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn gamma_sample_mean_within_three_sigma() {
        let p = PriorSpec::<f64>::gamma(2.0, 1.0).unwrap();
        let n = 100_000;
        let draws = p.sample(n, 11);
        let mean: f64 = draws.iter().sum::<f64>() / n as f64;
        // Var = shape / rate^2 = 2
        let sigma = (2.0f64 / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn tabulated_samples_stay_on_grid_range() {
        let p = PriorSpec::<f64>::tabulated(vec![1.0, 2.0, 3.0], vec![0.5, 1.0, 0.5]).unwrap();
        for s in p.sample(1000, 5) {
            assert!((1.0..=3.0).contains(&s));
        }
    }

    #[test]
    fn signal_has_paper_shape() {
        let cfg = SignalConfig::default();
        let s: Vec<f64> = generate_signal(&cfg, 7).unwrap();
        assert_eq!(s.len(), 256);
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(max, 1.0, epsilon = 0.0);
        assert!(min >= cfg.floor);
        assert_eq!(s, generate_signal::<f64>(&cfg, 7).unwrap());
        assert_ne!(s, generate_signal::<f64>(&cfg, 8).unwrap());
    }

    #[test]
    fn signal_config_validation() {
        let cfg = SignalConfig { floor: 0.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = SignalConfig { length: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn poisson_zero_rate_gives_zero_counts() {
        // tiny floor times modest gain: almost surely all zeros
        let x = vec![1e-12f64; 64];
        let obs = corrupt_poisson(&x, 1.0, 3).unwrap();
        assert!(obs.raw_counts.iter().all(|&z| z == 0));
    }

    #[test]
    fn poisson_mean_and_variance_statistics() {
        let reps = 100_000usize;
        let x = vec![0.5f64];
        // mean of y at gain 64 within 3 sigma of 0.5
        let mut acc = 0.0;
        for seed in 0..reps {
            acc += corrupt_poisson(&x, 64.0, seed as u64).unwrap().y[0];
        }
        let mean = acc / reps as f64;
        let sd = (0.5f64 / 64.0 / reps as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sd, "mean {mean}");

        // variance of y at gain 16 within 10% of x/gain
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for seed in 0..reps {
            let y = corrupt_poisson(&x, 16.0, 1_000_000 + seed as u64).unwrap().y[0];
            sum += y;
            sumsq += y * y;
        }
        let m = sum / reps as f64;
        let var = sumsq / reps as f64 - m * m;
        assert!((var - 0.03125).abs() < 0.1 * 0.03125, "var {var}");
    }

    #[test]
    fn doubling_gain_halves_variance() {
        let reps = 100_000usize;
        let x = vec![0.5f64];
        let var_at = |gain: f64, base: u64| {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for seed in 0..reps {
                let y = corrupt_poisson(&x, gain, base + seed as u64).unwrap().y[0];
                sum += y;
                sumsq += y * y;
            }
            let m = sum / reps as f64;
            sumsq / reps as f64 - m * m
        };
        let v16 = var_at(16.0, 0);
        let v32 = var_at(32.0, 10_000_000);
        assert!((v16 / v32 - 2.0).abs() < 0.2, "ratio {}", v16 / v32);
    }

    #[test]
    fn rate_overflow_guard() {
        let x = vec![1e8f64];
        assert!(matches!(
            corrupt_poisson(&x, 100.0, 0),
            Err(PriorError::RateOverflow(_))
        ));
    }
}
