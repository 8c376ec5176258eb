//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured numbers. Tolerances are pinned in the
//! constants below.
//!
//! Criteria:
//! 1. Conjugate-prior recursion matches the polygamma closed forms to 1e-8.
//! 2. Oracle-backed recursion matches quadrature moments on the bimodal
//!    prior within max(1e-3, 1%).
//! 3. The log-domain identity `mu1 = psi(y+1) + d/dy log p(y)` holds within
//!    1e-4 across priors.
//! 4. Log-route reconstruction beats the x-route baseline at y = 4 on the
//!    bimodal prior (oracle- and network-backed) and stays bimodal.
//! 5. Denoising benchmark lands within 1 dB of the reference table, with
//!    domain parity within 0.5 dB and PSNR monotone in the gain.
//! 6. Gradient check at 1e-4 for both architectures.
//! 7. Determinism: reruns with equal seeds produce identical artifacts.

use poisson_posterior::fd::FdConfig;
use poisson_posterior::harness::{
    metrics, run_denoise_benchmark, run_toy_posterior, BenchConfig, ToyConfig,
};
use poisson_posterior::nn::{
    build_model, grad_check, Activation, ArchSpec, Batch, TargetDomain,
};
use poisson_posterior::oracle::{marginal_score, posterior_central_moments};
use poisson_posterior::prior::{PriorSpec, SignalConfig};
use poisson_posterior::recursion::{recursion_scalar, tweedie_eta, Mu1Estimator};
use poisson_posterior::special::{digamma, polygamma};
use poisson_posterior::Domain;

const CONJUGACY_TOL: f64 = 1e-8;
const QUADRATURE_ABS_TOL: f64 = 1e-3;
const QUADRATURE_REL_TOL: f64 = 0.01;
const TWEEDIE_TOL: f64 = 1e-4;
const PSNR_BAND_DB: f64 = 1.0;
const DOMAIN_GAP_DB: f64 = 0.5;
const GRAD_CHECK_TOL: f64 = 1e-4;

/// Reference table: gain -> (log-domain PSNR, x-domain PSNR).
const REFERENCE_PSNR: [(f64, f64, f64); 3] =
    [(16.0, 24.12, 24.17), (32.0, 25.92, 25.91), (64.0, 28.08, 28.32)];

fn report(criterion: &str, pass: bool, detail: &str) {
    // write straight to stderr so the line shows up even when the harness
    // captures passing-test output
    use std::io::Write;
    let line = format!(
        "{} criterion {criterion}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_conjugate_recursion_matches_polygamma() {
    let t0 = std::time::Instant::now();
    let shape = 2.0f64;
    let rate = 1.0f64;
    let eval = move |y: f64| digamma(shape + y).unwrap() - (rate + 1.0).ln();
    let derivs = move |y: f64, n: usize| polygamma(n, shape + y).unwrap();
    let est = Mu1Estimator::exact(&eval, &derivs);
    let fd = FdConfig { step: 1e-3, max_order: 3 };
    let mut worst = 0.0f64;
    for y in 0..=10 {
        let y = y as f64;
        let out = recursion_scalar(&est, y, 4, &fd).unwrap().moments;
        let a = shape + y;
        let wants = [
            polygamma(1, a).unwrap(),
            polygamma(2, a).unwrap(),
            polygamma(3, a).unwrap() + 3.0 * polygamma(1, a).unwrap().powi(2),
        ];
        for (k, want) in (2..=4).zip(wants) {
            worst = worst.max((out.mu(k) - want).abs());
        }
    }
    let pass = worst <= CONJUGACY_TOL && t0.elapsed().as_secs_f64() < 1.0;
    report(
        "1 (conjugate recursion)",
        pass,
        &format!("max |recursion - polygamma| = {worst:.2e} (tol {CONJUGACY_TOL:.0e}), {:?}", t0.elapsed()),
    );
}

#[test]
fn criterion_2_recursion_matches_quadrature_on_bimodal_prior() {
    let t0 = std::time::Instant::now();
    let prior = PriorSpec::<f64>::bimodal_log_normal();
    let eval = |y: f64| {
        posterior_central_moments(&prior, y, 1, Domain::Eta)
            .unwrap()
            .mu1
    };
    let est = Mu1Estimator::finite_difference(&eval, 1e-3);
    let fd = FdConfig { step: 1e-3, max_order: 3 };
    let mut worst_ratio = 0.0f64;
    let mut detail = String::new();
    for y in 1..=10 {
        let y = y as f64;
        let rec = recursion_scalar(&est, y, 4, &fd).unwrap().moments;
        let truth = posterior_central_moments(&prior, y, 4, Domain::Eta).unwrap();
        for k in 2..=4 {
            let tol = (truth.mu(k).abs() * QUADRATURE_REL_TOL).max(QUADRATURE_ABS_TOL);
            let err = (rec.mu(k) - truth.mu(k)).abs();
            worst_ratio = worst_ratio.max(err / tol);
            if err / tol > 1.0 && detail.is_empty() {
                detail = format!("first failure at y={y} k={k}: err {err:.2e} tol {tol:.2e}");
            }
        }
    }
    let elapsed = t0.elapsed();
    let pass = worst_ratio <= 1.0 && elapsed.as_secs_f64() < 30.0;
    report(
        "2 (quadrature recursion)",
        pass,
        &format!("worst err/tol = {worst_ratio:.3} over y in 1..=10, K=4; {detail} {elapsed:?}"),
    );
}

#[test]
fn criterion_3_log_domain_identity_across_priors() {
    let t0 = std::time::Instant::now();
    let priors: Vec<(&str, PriorSpec<f64>)> = vec![
        ("bimodal", PriorSpec::bimodal_log_normal()),
        ("gamma(2,1)", PriorSpec::gamma(2.0, 1.0).unwrap()),
        ("point-mass(2)", PriorSpec::point_mass(2.0).unwrap()),
        (
            "tabulated",
            PriorSpec::tabulated(
                (1..=400).map(|i| 0.05 * i as f64).collect(),
                (1..=400).map(|i| ((i as f64) * 0.03).sin().abs() + 0.1).collect(),
            )
            .unwrap(),
        ),
    ];
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for (name, prior) in &priors {
        for y in 1..=10 {
            let y = y as f64;
            let mu1 = posterior_central_moments(prior, y, 1, Domain::Eta).unwrap().mu1;
            let score = marginal_score(prior, y, 1e-3).unwrap();
            let resid = (mu1 - tweedie_eta(score, y)).abs();
            if resid > worst {
                worst = resid;
                worst_at = format!("{name} y={y}");
            }
        }
    }
    let elapsed = t0.elapsed();
    let pass = worst <= TWEEDIE_TOL && elapsed.as_secs_f64() < 10.0;
    report(
        "3 (posterior-mean identity)",
        pass,
        &format!("max |residual| = {worst:.2e} at {worst_at} (tol {TWEEDIE_TOL:.0e}), {elapsed:?}"),
    );
}

#[test]
fn criterion_4_log_route_beats_x_route_and_recovers_both_modes() {
    let t0 = std::time::Instant::now();
    let cfg = ToyConfig::default();
    let art = run_toy_posterior(&cfg).unwrap();
    let r = &art.report;
    let oracle_ordering = r.eta_oracle.total_sq_error < r.x_oracle.total_sq_error;
    let net_ordering = r.eta_net.total_sq_error < r.x_net.total_sq_error;
    let bimodal = r.eta_oracle.interior_maxima >= 2 && r.eta_net.interior_maxima >= 2;
    // the harness wiring adds no error beyond module tolerances: the
    // oracle-backed recursion column equals the quadrature moment table
    let mut wiring_ok = true;
    for k in 2..=r.order {
        let tol = (r.oracle_eta.mu(k).abs() * 0.01).max(1e-3);
        wiring_ok &= (r.eta_oracle.moments.mu(k) - r.oracle_eta.mu(k)).abs() <= tol;
    }
    let elapsed = t0.elapsed();
    let pass =
        oracle_ordering && net_ordering && bimodal && wiring_ok && elapsed.as_secs_f64() < 300.0;
    report(
        "4 (posterior recovery)",
        pass,
        &format!(
            "ise log-route oracle/net = {:.4}/{:.4} vs x-route {:.4}/{:.4}; log-route modes oracle/net = {}/{}; {elapsed:?}",
            r.eta_oracle.total_sq_error,
            r.eta_net.total_sq_error,
            r.x_oracle.total_sq_error,
            r.x_net.total_sq_error,
            r.eta_oracle.interior_maxima,
            r.eta_net.interior_maxima
        ),
    );
}

#[test]
fn criterion_5_benchmark_reproduces_reference_table() {
    let t0 = std::time::Instant::now();
    let cfg = BenchConfig::default();
    let art = run_denoise_benchmark(&cfg).unwrap();
    let mut pass = true;
    let mut lines = String::new();
    let mut prev: Option<(f64, f64)> = None;
    for &(gain, ref_log, ref_x) in &REFERENCE_PSNR {
        let log_row = art.table.row(gain, TargetDomain::LogX).expect("log row");
        let x_row = art.table.row(gain, TargetDomain::X).expect("x row");
        let in_band = (log_row.psnr_mean - ref_log).abs() <= PSNR_BAND_DB
            && (x_row.psnr_mean - ref_x).abs() <= PSNR_BAND_DB;
        let parity = (log_row.psnr_mean - x_row.psnr_mean).abs() <= DOMAIN_GAP_DB;
        let monotone = prev
            .map(|(pl, px)| log_row.psnr_mean > pl && x_row.psnr_mean > px)
            .unwrap_or(true);
        pass &= in_band && parity && monotone;
        lines.push_str(&format!(
            "gain {gain}: log {:.2} (ref {ref_log}), x {:.2} (ref {ref_x}), gap {:.2}; ",
            log_row.psnr_mean,
            x_row.psnr_mean,
            (log_row.psnr_mean - x_row.psnr_mean).abs()
        ));
        prev = Some((log_row.psnr_mean, x_row.psnr_mean));
    }
    let elapsed = t0.elapsed();
    report(
        "5 (benchmark table)",
        pass,
        &format!("{lines}{elapsed:?}"),
    );
}

#[test]
fn criterion_6_gradient_check_both_architectures() {
    let t0 = std::time::Instant::now();
    let mut worst = 0.0f64;

    let mlp = ArchSpec::Mlp { widths: vec![1, 64, 64, 1], activation: Activation::Tanh };
    let m = build_model::<f64>(&mlp, TargetDomain::LogX, 3).unwrap();
    let prior = PriorSpec::<f64>::bimodal_log_normal();
    let xs = prior.sample(64, 5);
    let obs = poisson_posterior::prior::corrupt_poisson(&xs, 1.0, 6).unwrap();
    let batch = Batch {
        inputs: obs.y.iter().map(|&y| vec![y]).collect(),
        targets: xs.iter().map(|&x| vec![x.ln()]).collect(),
    };
    worst = worst.max(grad_check(&m, &batch, 1e-5));

    let conv = ArchSpec::Conv1d { layers: 5, kernel: 7, channels: 16, activation: Activation::Relu };
    let c = build_model::<f64>(&conv, TargetDomain::X, 4).unwrap();
    let sig = SignalConfig { length: 96, ..Default::default() };
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for s in 0..4u64 {
        let clean: Vec<f64> = poisson_posterior::prior::generate_signal(&sig, 100 + s).unwrap();
        let obs = poisson_posterior::prior::corrupt_poisson(&clean, 32.0, 200 + s).unwrap();
        inputs.push(obs.y);
        targets.push(clean);
    }
    worst = worst.max(grad_check(&c, &Batch { inputs, targets }, 1e-5));

    let elapsed = t0.elapsed();
    let pass = worst <= GRAD_CHECK_TOL && elapsed.as_secs_f64() < 30.0;
    report(
        "6 (gradient check)",
        pass,
        &format!("max relative error = {worst:.2e} (tol {GRAD_CHECK_TOL:.0e}), {elapsed:?}"),
    );
}

#[test]
fn criterion_7_reruns_are_byte_identical() {
    let t0 = std::time::Instant::now();
    // toy artifacts: train two MLPs twice and compare every byte written
    // determinism does not need convergence, a short run will do
    let cfg = ToyConfig { train_steps: 400, ..Default::default() };
    let dir_a = std::env::temp_dir().join("pp-accept-rerun-a");
    let dir_b = std::env::temp_dir().join("pp-accept-rerun-b");
    for d in [&dir_a, &dir_b] {
        let _ = std::fs::remove_dir_all(d);
    }
    run_toy_posterior(&cfg).unwrap().write(&dir_a).unwrap();
    run_toy_posterior(&cfg).unwrap().write(&dir_b).unwrap();
    let mut pass = true;
    for name in ["toy_report.json", "toy_curves.csv"] {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        pass &= a == b;
    }

    // metric identity spot check rides along here
    let x = vec![0.25f64; 32];
    let y = vec![0.3f64; 32];
    let (psnr, mse) = metrics(&y, &x).unwrap();
    pass &= (psnr - 10.0 * (1.0 / mse).log10()).abs() < 1e-9;

    let elapsed = t0.elapsed();
    report(
        "7 (byte-identical reruns)",
        pass,
        &format!("toy_report.json and toy_curves.csv identical across reruns, {elapsed:?}"),
    );
}
