//! Cross-module tests: trained networks driving the moment machinery, the
//! degenerate point-mass path through the toy harness, and benchmark
//! artifact wiring at a tiny scale.

use poisson_posterior::fd::FdConfig;
use poisson_posterior::harness::{
    run_denoise_benchmark, run_toy_posterior, BenchConfig, BenchTrainSettings, Precision,
    ToyConfig,
};
use poisson_posterior::nn::{
    build_model, forward, train, Activation, ArchSpec, TargetDomain, TrainConfig, TrainData,
};
use poisson_posterior::prior::{PriorSpec, SignalConfig};
use poisson_posterior::recursion::recursion_multivariate;

#[test]
fn trained_network_jacobian_is_nearly_symmetric() {
    // A posterior covariance is symmetric, so the Jacobian of a good
    // E[log x | y] estimator should be too. Piecewise-linear activations
    // leave kink artifacts in per-entry derivatives, so the check uses a
    // smooth activation, a floor that keeps log targets tame, and looks at
    // positions carrying real signal.
    let len = 48usize;
    let gain = 64.0;
    // smoother signals and a raised floor keep the trained map in the
    // regime where it tracks the true posterior mean closely
    let sig = SignalConfig { length: len, floor: 0.05, smooth_std: 4.0, ..Default::default() };
    let arch = ArchSpec::Conv1d { layers: 5, kernel: 7, channels: 16, activation: Activation::Tanh };
    let model = build_model::<f64>(&arch, TargetDomain::LogX, 11).unwrap();
    let mut cfg = TrainConfig::new(TrainData::Denoise { signal: sig.clone(), gain });
    cfg.max_steps = 2000;
    cfg.val_every = 200;
    cfg.val_size = 16;
    cfg.batch_size = 32;
    let model = train(model, &cfg).unwrap().0;

    let clean: Vec<f64> = poisson_posterior::prior::generate_signal(&sig, 400).unwrap();
    let obs = poisson_posterior::prior::corrupt_poisson(&clean, gain, 401).unwrap();
    let eval = |y: &[f64]| forward(&model, y).expect("finite signal");
    let fd = FdConfig { step: 0.05, max_order: 2 };
    let mm = recursion_multivariate(eval, &obs.y, &fd, true).unwrap();

    let keep: Vec<usize> = (0..len).filter(|&i| clean[i] >= 0.2).collect();
    assert!(keep.len() >= len / 3, "mask kept too little signal");
    let mut mean_asym = 0.0;
    let mut pairs = 0.0;
    for (a, &i) in keep.iter().enumerate() {
        for &j in &keep[a + 1..] {
            mean_asym += (mm.mu2[[i, j]] - mm.mu2[[j, i]]).abs();
            pairs += 1.0;
        }
    }
    mean_asym /= pairs;
    assert!(mean_asym <= 1e-2, "mean asymmetry {mean_asym}");

    let sym = mm.symmetrized();
    assert!((sym[[3, 7]] - sym[[7, 3]]).abs() < 1e-15);
    // diagonal variances of the log posterior are positive where the
    // estimator is trustworthy
    let diag_positive = keep.iter().filter(|&&i| mm.mu2[[i, i]] > 0.0).count();
    assert!(diag_positive * 4 >= keep.len() * 3, "only {diag_positive} positive diagonals");
    assert_eq!(mm.mu3_diag.unwrap().len(), len);
}

#[test]
fn toy_harness_handles_a_point_mass_prior() {
    let mut cfg = ToyConfig {
        prior: PriorSpec::point_mass(2.0).unwrap(),
        train_steps: 300,
        val_size: 64,
        ..Default::default()
    };
    // keep the run quick; the posterior is degenerate anyway
    cfg.recon.x_grid_points = 500;
    cfg.recon.x_lo = 1.0;
    cfg.recon.x_hi = 3.0;
    let art = run_toy_posterior(&cfg).unwrap();
    let r = &art.report;
    // both routes collapse to (nearly) the same spike reconstruction; the
    // grid-resolution variance floor kicks in for the oracle-backed routes
    assert!(r.eta_oracle.variance_floored);
    assert!(r.x_oracle.variance_floored);
    let ratio = r.eta_oracle.total_sq_error / r.x_oracle.total_sq_error.max(1e-300);
    assert!(
        (0.5..=2.0).contains(&ratio),
        "spike reconstructions should be comparably wrong: ratio {ratio}"
    );
    // the oracle moments are exactly degenerate
    assert!((r.oracle_eta.mu1 - 2.0f64.ln()).abs() < 1e-9);
    for k in 2..=4 {
        assert!(r.oracle_eta.mu(k).abs() < 1e-9);
    }
}

#[test]
fn benchmark_produces_rows_and_traces_at_tiny_scale() {
    let cfg = BenchConfig {
        signal: SignalConfig { length: 64, ..Default::default() },
        gains: vec![16.0, 64.0],
        train_seeds: vec![1, 2],
        arch: ArchSpec::Conv1d { layers: 5, kernel: 7, channels: 8, activation: Activation::Relu },
        train: BenchTrainSettings {
            max_steps: 120,
            val_every: 40,
            val_size: 8,
            batch_size: 16,
            ..Default::default()
        },
        test_signals: 32,
        test_seed: 77,
        trace_examples: 2,
        precision: Precision::F32,
    };
    let art = run_denoise_benchmark(&cfg).unwrap();
    assert_eq!(art.table.rows.len(), 4);
    for row in &art.table.rows {
        assert_eq!(row.per_seed_psnr.len(), 2);
        assert!(row.psnr_mean.is_finite() && row.psnr_mean > 5.0);
        assert!(row.mse_mean > 0.0);
    }
    // traces only at the largest gain, with both model families present
    assert_eq!(art.traces.len(), 2);
    for t in &art.traces {
        assert_eq!(t.gain, 64.0);
        assert_eq!(t.clean.len(), 64);
        assert_eq!(t.denoised_x.len(), 64);
        assert_eq!(t.denoised_log.len(), 64);
    }

    let dir = std::env::temp_dir().join("pp-bench-tiny");
    let _ = std::fs::remove_dir_all(&dir);
    art.write(&dir).unwrap();
    let table = std::fs::read_to_string(dir.join("benchmark_table.csv")).unwrap();
    assert!(table.starts_with("zeta,domain,psnr_mean"));
    assert_eq!(table.lines().count(), 5);
    let traces = std::fs::read_to_string(dir.join("denoise_traces.csv")).unwrap();
    assert_eq!(traces.lines().count(), 1 + 2 * 64);
}

#[test]
fn toy_artifacts_serialize_their_moment_sets() {
    // MomentSet JSON schema: y, domain, mu1, central
    let m = poisson_posterior::MomentSet64 {
        y: 4.0,
        domain: poisson_posterior::Domain::Eta,
        mu1: 1.5,
        central: vec![0.4, -0.3, 0.6],
    };
    let v = serde_json::to_value(&m).unwrap();
    assert_eq!(v["y"], 4.0);
    assert_eq!(v["domain"], "eta");
    assert_eq!(v["mu1"], 1.5);
    assert_eq!(v["central"].as_array().unwrap().len(), 3);
    let back: poisson_posterior::MomentSet64 = serde_json::from_value(v).unwrap();
    assert_eq!(back, m);
}
