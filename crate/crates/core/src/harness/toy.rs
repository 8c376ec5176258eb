//! Posterior recovery at a single observation: quadrature ground truth vs
//! the log-domain recursion route and the x-domain baseline route, each
//! driven either by the oracle first moment or by a small trained MLP.

use super::HarnessError;
use crate::fd::FdConfig;
use crate::grid::{interp_linear, trapezoid_weights, DensityGrid, Domain};
use crate::nn::{
    build_model, forward, train, Activation, ArchSpec, TargetDomain, TrainConfig, TrainData,
    TrainSeeds,
};
use crate::oracle::{posterior_central_moments, posterior_density, MomentSet};
use crate::prior::PriorSpec;
use crate::reconstruct::{
    cumulative_sq_error, eta_to_x, gram_charlier, gram_charlier_eta, ReconstructionConfig,
};
use crate::recursion::{baseline_x_recursion, recursion_scalar, Mu1Estimator, RecursionOutcome};
use serde::{Deserialize, Serialize};

/// Deterministic seed derivation (splitmix64 step).
pub(crate) fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct MlpSettings {
    pub widths: Vec<usize>,
    pub activation: Activation,
}

impl Default for MlpSettings {
    fn default() -> Self {
        // tanh keeps the trained map smooth enough for third-order
        // finite differences
        Self { widths: vec![1, 64, 64, 1], activation: Activation::Tanh }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ToyConfig {
    pub prior: PriorSpec<f64>,
    pub y: f64,
    /// Highest central moment carried through the recursion.
    pub order: usize,
    pub recon: ReconstructionConfig,
    pub mlp: MlpSettings,
    pub train_steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub val_every: usize,
    pub patience: usize,
    pub val_size: usize,
    pub fd_step_oracle: f64,
    pub fd_step_net: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            prior: PriorSpec::bimodal_log_normal(),
            y: 4.0,
            order: 4,
            recon: ReconstructionConfig::default(),
            mlp: MlpSettings::default(),
            train_steps: 4000,
            batch_size: 64,
            lr: 1e-3,
            val_every: 50,
            patience: 20,
            val_size: 256,
            fd_step_oracle: 1e-3,
            fd_step_net: 0.05,
            seed: 7,
        }
    }
}

/// Outcome of one reconstruction route.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteResult {
    pub moments: MomentSet<f64>,
    /// Total integrated squared error against the quadrature truth.
    pub total_sq_error: f64,
    /// Strict interior maxima above 5 percent of the peak.
    pub interior_maxima: usize,
    pub fd_noise_ratio: Option<f64>,
    /// Set when the estimated variance fell below the grid-resolution floor
    /// and was replaced by it before the expansion.
    pub variance_floored: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyReport {
    pub prior: PriorSpec<f64>,
    pub y: f64,
    pub order: usize,
    pub oracle_eta: MomentSet<f64>,
    pub oracle_x: MomentSet<f64>,
    pub truth_interior_maxima: usize,
    pub eta_oracle: RouteResult,
    pub eta_net: RouteResult,
    pub x_oracle: RouteResult,
    pub x_net: RouteResult,
}

/// Shared-grid curves for plotting: densities and cumulative squared error.
#[derive(Debug, Clone)]
pub struct ToyCurves {
    pub x: Vec<f64>,
    pub truth: Vec<f64>,
    pub eta_oracle: Vec<f64>,
    pub eta_net: Vec<f64>,
    pub x_oracle: Vec<f64>,
    pub x_net: Vec<f64>,
    pub cum_eta_oracle: Vec<f64>,
    pub cum_eta_net: Vec<f64>,
    pub cum_x_oracle: Vec<f64>,
    pub cum_x_net: Vec<f64>,
}

pub struct ToyArtifacts {
    pub report: ToyReport,
    pub curves: ToyCurves,
}

fn significant_interior_maxima(d: &DensityGrid<f64>, rel: f64) -> usize {
    let peak = d.values.iter().cloned().fold(0.0f64, f64::max);
    d.interior_maxima()
        .into_iter()
        .filter(|&i| d.values[i] >= rel * peak)
        .count()
}

/// Resamples a density onto a new grid by interpolation; if that loses the
/// mass (a spike between nodes), reassigns node masses to the nearest
/// target node instead.
fn resample(truth: &DensityGrid<f64>, grid: &[f64]) -> Result<DensityGrid<f64>, HarnessError> {
    let vals: Vec<f64> = grid
        .iter()
        .map(|&x| interp_linear(&truth.points, &truth.values, x))
        .collect();
    let mass = crate::grid::trapezoid(grid, &vals);
    if mass > 0.5 {
        return Ok(DensityGrid::new(truth.domain, grid.to_vec(), vals)
            .expect("interpolated density is valid"));
    }
    // spike case: move the trapezoidal node masses across
    let w_src = trapezoid_weights(&truth.points);
    let w_dst = trapezoid_weights(grid);
    let mut masses = vec![0.0f64; grid.len()];
    for (i, (&p, &v)) in truth.points.iter().zip(&truth.values).enumerate() {
        if v == 0.0 {
            continue;
        }
        let j = grid.partition_point(|&g| g < p).clamp(0, grid.len() - 1);
        let j = if j > 0 && (grid[j] - p).abs() > (p - grid[j - 1]).abs() { j - 1 } else { j };
        masses[j] += v * w_src[i];
    }
    let vals: Vec<f64> = masses.iter().zip(&w_dst).map(|(&m, &w)| m / w).collect();
    DensityGrid::new(truth.domain, grid.to_vec(), vals)
        .map_err(|_| HarnessError::InvalidConfig("truth density lost all mass in resampling".into()))
}

struct Route {
    result: RouteResult,
    density: Vec<f64>,
    cumulative: Vec<f64>,
}

fn reconstruct_route(
    outcome: RecursionOutcome<f64>,
    cfg: &ToyConfig,
    cmp_grid: &[f64],
    truth: &DensityGrid<f64>,
) -> Result<Route, HarnessError> {
    let mut moments = outcome.moments;
    let dx = cmp_grid[1] - cmp_grid[0];
    // the comparison grid cannot resolve densities narrower than a few
    // cells; degenerate posteriors (point masses) hit this floor
    let sigma_floor = match moments.domain {
        Domain::Eta => 2.0 * dx / moments.mu1.exp().max(cmp_grid[0]),
        Domain::X => 2.0 * dx,
    };
    let var_floor = sigma_floor * sigma_floor;
    let variance_floored = moments.central[0] < var_floor;
    if variance_floored {
        moments.central[0] = var_floor;
    }
    let density = match moments.domain {
        Domain::Eta => {
            let eta_grid = cfg.recon.eta_grid(&moments)?;
            let gc = gram_charlier_eta(&moments, &eta_grid, cfg.recon.negativity)?;
            eta_to_x(&gc, cmp_grid)?
        }
        Domain::X => gram_charlier(&moments, cmp_grid, cfg.recon.negativity)?,
    };
    let (cumulative, total) = cumulative_sq_error(&density, truth)?;
    Ok(Route {
        result: RouteResult {
            moments,
            total_sq_error: total,
            interior_maxima: significant_interior_maxima(&density, 0.05),
            fd_noise_ratio: outcome.fd_noise_ratio,
            variance_floored,
        },
        density: density.values,
        cumulative,
    })
}

fn train_toy_mlp(
    cfg: &ToyConfig,
    domain: TargetDomain,
    seed_tag: u64,
) -> Result<crate::nn::DenoiserModel<f64>, HarnessError> {
    let arch = ArchSpec::Mlp {
        widths: cfg.mlp.widths.clone(),
        activation: cfg.mlp.activation,
    };
    // input standardization constants from a pilot stream
    let pilot_x = cfg.prior.sample(4096, mix(cfg.seed, 1000 + seed_tag));
    let pilot = crate::prior::corrupt_poisson(&pilot_x, 1.0, mix(cfg.seed, 2000 + seed_tag))?;
    let mean = pilot.y.iter().sum::<f64>() / pilot.y.len() as f64;
    let var =
        pilot.y.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / pilot.y.len() as f64;
    let model = build_model::<f64>(&arch, domain, mix(cfg.seed, 1 + seed_tag))?
        .with_input_normalization(mean, var.sqrt().max(1e-6))
        .with_output_floor(cfg.prior.support.0);

    let mut train_cfg = TrainConfig::new(TrainData::Toy { prior: cfg.prior.clone() });
    train_cfg.lr = cfg.lr;
    train_cfg.batch_size = cfg.batch_size;
    train_cfg.max_steps = cfg.train_steps;
    train_cfg.val_every = cfg.val_every;
    train_cfg.patience = cfg.patience;
    train_cfg.val_size = cfg.val_size;
    train_cfg.seeds = TrainSeeds {
        init: mix(cfg.seed, 1 + seed_tag),
        train: mix(cfg.seed, 2 + seed_tag),
        val: mix(cfg.seed, 3 + seed_tag),
    };
    let (model, _history) = train(model, &train_cfg).map_err(|e| HarnessError::Train(e.to_string()))?;
    Ok(model)
}

/// Runs the whole toy comparison. Returns the serializable report plus the
/// shared-grid curves.
pub fn run_toy_posterior(cfg: &ToyConfig) -> Result<ToyArtifacts, HarnessError> {
    cfg.prior.validate()?;
    if cfg.y < 3.0 * cfg.fd_step_net {
        return Err(HarnessError::InvalidConfig(
            "observation too close to zero for the derivative stencils".into(),
        ));
    }
    if !(2..=6).contains(&cfg.order) {
        return Err(HarnessError::InvalidConfig("order must lie in 2..=6".into()));
    }

    let cmp_grid = cfg.recon.x_grid::<f64>();
    let truth_src = posterior_density(&cfg.prior, cfg.y, cfg.prior.grid_points.max(100))?;
    let truth = resample(&truth_src, &cmp_grid)?;

    let oracle_eta = posterior_central_moments(&cfg.prior, cfg.y, cfg.order, Domain::Eta)?;
    let oracle_x = posterior_central_moments(&cfg.prior, cfg.y, cfg.order, Domain::X)?;

    // oracle-backed estimators over the quadrature first moments
    let prior = &cfg.prior;
    let eta_eval = move |t: f64| {
        posterior_central_moments(prior, t.max(0.0), 1, Domain::Eta)
            .expect("quadrature over a validated prior")
            .mu1
    };
    let x_eval = move |t: f64| {
        posterior_central_moments(prior, t.max(0.0), 1, Domain::X)
            .expect("quadrature over a validated prior")
            .mu1
    };
    let fd_oracle = FdConfig { step: cfg.fd_step_oracle, max_order: cfg.order - 1 };
    let est_eta = Mu1Estimator::finite_difference(&eta_eval, cfg.fd_step_oracle);
    let est_x = Mu1Estimator::finite_difference(&x_eval, cfg.fd_step_oracle);
    let eta_oracle_route = reconstruct_route(
        recursion_scalar(&est_eta, cfg.y, cfg.order, &fd_oracle)?,
        cfg,
        &cmp_grid,
        &truth,
    )?;
    let x_oracle_route = reconstruct_route(
        baseline_x_recursion(&est_x, cfg.y, cfg.order, &fd_oracle)?,
        cfg,
        &cmp_grid,
        &truth,
    )?;

    // network-backed estimators
    let log_net = train_toy_mlp(cfg, TargetDomain::LogX, 0)?;
    let x_net = train_toy_mlp(cfg, TargetDomain::X, 100)?;
    let log_eval = move |t: f64| forward(&log_net, &[t]).expect("finite input")[0];
    let xn_eval = move |t: f64| forward(&x_net, &[t]).expect("finite input")[0];
    let fd_net = FdConfig { step: cfg.fd_step_net, max_order: cfg.order - 1 };
    let est_log_net = Mu1Estimator::finite_difference(&log_eval, cfg.fd_step_net);
    let est_x_net = Mu1Estimator::finite_difference(&xn_eval, cfg.fd_step_net);
    let eta_net_route = reconstruct_route(
        recursion_scalar(&est_log_net, cfg.y, cfg.order, &fd_net)?,
        cfg,
        &cmp_grid,
        &truth,
    )?;
    let x_net_route = reconstruct_route(
        baseline_x_recursion(&est_x_net, cfg.y, cfg.order, &fd_net)?,
        cfg,
        &cmp_grid,
        &truth,
    )?;

    let report = ToyReport {
        prior: cfg.prior.clone(),
        y: cfg.y,
        order: cfg.order,
        oracle_eta,
        oracle_x,
        truth_interior_maxima: significant_interior_maxima(&truth, 0.05),
        eta_oracle: eta_oracle_route.result.clone(),
        eta_net: eta_net_route.result.clone(),
        x_oracle: x_oracle_route.result.clone(),
        x_net: x_net_route.result.clone(),
    };
    let curves = ToyCurves {
        x: cmp_grid,
        truth: truth.values,
        eta_oracle: eta_oracle_route.density,
        eta_net: eta_net_route.density,
        x_oracle: x_oracle_route.density,
        x_net: x_net_route.density,
        cum_eta_oracle: eta_oracle_route.cumulative,
        cum_eta_net: eta_net_route.cumulative,
        cum_x_oracle: x_oracle_route.cumulative,
        cum_x_net: x_net_route.cumulative,
    };
    Ok(ToyArtifacts { report, curves })
}

impl ToyArtifacts {
    /// `toy_report.json` and `toy_curves.csv` under `dir`.
    pub fn write(&self, dir: &std::path::Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_vec_pretty(&self.report)?;
        super::atomic_write(&dir.join("toy_report.json"), &json)?;

        let c = &self.curves;
        let mut csv = String::from(
            "x,truth,eta_oracle,eta_net,x_oracle,x_net,cum_eta_oracle,cum_eta_net,cum_x_oracle,cum_x_net\n",
        );
        for i in 0..c.x.len() {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                c.x[i],
                c.truth[i],
                c.eta_oracle[i],
                c.eta_net[i],
                c.x_oracle[i],
                c.x_net[i],
                c.cum_eta_oracle[i],
                c.cum_eta_net[i],
                c.cum_x_oracle[i],
                c.cum_x_net[i],
            ));
        }
        super::atomic_write(&dir.join("toy_curves.csv"), csv.as_bytes())?;
        Ok(())
    }
}
