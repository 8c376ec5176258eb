//! Command-line front end: binds JSON run configs to the experiment
//! harness and the model utilities.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical/runtime
//! failure. All output files are written atomically.

mod config;

use clap::{Parser, Subcommand};
use config::{parse_config, ConfigError, Experiment, RunConfig, TaskName};
use poisson_posterior::harness::{
    self, atomic_write, metrics, run_denoise_benchmark, run_toy_posterior, write_manifest,
    Precision,
};
use poisson_posterior::nn::{
    build_model, load_model, predict_denoised, save_model, train as train_model, TrainConfig,
    TrainData, TrainSeeds,
};
use poisson_posterior::oracle::{posterior_central_moments, posterior_density};
use poisson_posterior::prior::{corrupt_poisson, generate_signal};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "poisson-posterior",
    about = "Log-domain Poisson denoising, posterior moment recovery and density reconstruction",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct CommonArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for run artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-path config overrides, e.g. `--set prior.kind=gamma`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Posterior recovery at one observation: oracle vs recursion routes.
    ToyPosterior(CommonArgs),
    /// Train/evaluate the denoising benchmark across gains and seeds.
    DenoiseBench(CommonArgs),
    /// Train a single denoiser and save it.
    Train(CommonArgs),
    /// Evaluate a saved model on a fresh test set.
    Eval(CommonArgs),
    /// Print posterior moments (and optionally the density) from the
    /// quadrature oracle.
    OracleDump(CommonArgs),
}

enum CliError {
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<harness::HarnessError> for CliError {
    fn from(e: harness::HarnessError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    let (experiment, args) = match &cli.command {
        Command::ToyPosterior(a) => (Experiment::ToyPosterior, a.clone()),
        Command::DenoiseBench(a) => (Experiment::DenoiseBench, a.clone()),
        Command::Train(a) => (Experiment::Train, a.clone()),
        Command::Eval(a) => (Experiment::Eval, a.clone()),
        Command::OracleDump(a) => (Experiment::OracleDump, a.clone()),
    };
    match run(experiment, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// `POISSON_POSTERIOR_THREADS` caps worker parallelism (default: cores).
fn configure_threads() {
    if let Ok(v) = std::env::var("POISSON_POSTERIOR_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn load_raw_config(args: &CommonArgs) -> Result<serde_json::Value, CliError> {
    match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config file {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!(
                    "config file {} is not valid JSON: {e}",
                    path.display()
                ))
            })
        }
        None => Ok(serde_json::json!({})),
    }
}

struct ResolvedRun {
    cfg: RunConfig,
    raw: serde_json::Value,
    out_dir: Option<PathBuf>,
    overrides: Vec<String>,
}

/// Recursively merges `overlay` onto `base`: objects merge key-wise,
/// everything else replaces.
fn deep_merge(base: &mut serde_json::Value, overlay: serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn resolve(experiment: Experiment, args: &CommonArgs) -> Result<ResolvedRun, CliError> {
    let file = load_raw_config(args)?;
    if !file.is_object() {
        return Err(CliError::Config("config root must be a JSON object".into()));
    }
    // start from the full default tree so partial overrides of nested
    // objects (e.g. `arch.channels`) keep the other fields intact
    let mut raw = serde_json::to_value(RunConfig::default())
        .expect("default config serializes");
    deep_merge(&mut raw, file);
    for spec in &args.set {
        config::apply_override(&mut raw, experiment.section(), spec)?;
    }
    if let Some(seed) = args.seed {
        raw["seed"] = serde_json::json!(seed);
    }
    let cfg = parse_config(raw.clone())?;
    if let Some(declared) = cfg.experiment {
        if declared != experiment {
            return Err(CliError::Config(format!(
                "config declares experiment {:?}, but the {:?} subcommand was invoked",
                declared, experiment
            )));
        }
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from));
    Ok(ResolvedRun { cfg, raw, out_dir, overrides: args.set.clone() })
}

fn require_out(run: &ResolvedRun) -> Result<&Path, CliError> {
    run.out_dir
        .as_deref()
        .ok_or_else(|| CliError::Config("this command writes files; pass --out <dir>".into()))
}

fn manifest(run: &ResolvedRun, experiment: Experiment, outputs: &[&str]) -> serde_json::Value {
    let canonical = serde_json::to_vec(&run.raw).expect("config is serializable");
    let sha = Sha256::digest(&canonical)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    serde_json::json!({
        "version": config::CONFIG_VERSION,
        "experiment": experiment.section(),
        "config": run.raw,
        "config_sha256": sha,
        "seed": run.cfg.seed,
        "overrides": run.overrides,
        "outputs": outputs,
        "created_unix_ms": created,
    })
}

fn run(experiment: Experiment, args: &CommonArgs) -> Result<(), CliError> {
    let run = resolve(experiment, args)?;
    match experiment {
        Experiment::ToyPosterior => cmd_toy(&run),
        Experiment::DenoiseBench => cmd_bench(&run),
        Experiment::Train => cmd_train(&run),
        Experiment::Eval => cmd_eval(&run),
        Experiment::OracleDump => cmd_oracle_dump(&run),
    }
}

fn cmd_toy(run: &ResolvedRun) -> Result<(), CliError> {
    let out = require_out(run)?.to_path_buf();
    let cfg = run.cfg.toy.to_harness(run.cfg.seed)?;
    let artifacts = run_toy_posterior(&cfg)?;
    artifacts.write(&out)?;
    write_manifest(
        &out,
        &manifest(run, Experiment::ToyPosterior, &["toy_report.json", "toy_curves.csv"]),
    )?;
    let r = &artifacts.report;
    println!(
        "toy-posterior: eta-route ise {:.5} (net {:.5}), x-route ise {:.5} (net {:.5}), truth modes {}",
        r.eta_oracle.total_sq_error,
        r.eta_net.total_sq_error,
        r.x_oracle.total_sq_error,
        r.x_net.total_sq_error,
        r.truth_interior_maxima
    );
    Ok(())
}

fn cmd_bench(run: &ResolvedRun) -> Result<(), CliError> {
    let out = require_out(run)?.to_path_buf();
    let artifacts = run_denoise_benchmark(&run.cfg.bench)?;
    artifacts.write(&out)?;
    write_manifest(
        &out,
        &manifest(
            run,
            Experiment::DenoiseBench,
            &["benchmark_table.csv", "denoise_traces.csv"],
        ),
    )?;
    print!("{}", artifacts.table.to_csv());
    Ok(())
}

fn cmd_train(run: &ResolvedRun) -> Result<(), CliError> {
    let out = require_out(run)?.to_path_buf();
    std::fs::create_dir_all(&out).map_err(|e| CliError::Numerical(e.to_string()))?;
    let t = &run.cfg.train;
    let seed = run.cfg.seed.unwrap_or(t.seed);
    let data: TrainData<f64> = match t.task {
        TaskName::Denoise => TrainData::Denoise { signal: t.signal.clone(), gain: t.gain },
        TaskName::Toy => TrainData::Toy { prior: t.prior.build()? },
    };
    let mut tc = TrainConfig::new(data);
    tc.lr = t.lr;
    tc.batch_size = t.batch_size;
    tc.max_steps = t.max_steps;
    tc.val_every = t.val_every;
    tc.patience = t.patience;
    tc.val_size = t.val_size;
    tc.seeds = TrainSeeds { init: seed, train: seed ^ 0x5EED, val: seed ^ 0x7A11 };

    let (history, model_path) = match t.precision {
        Precision::F64 => {
            let model = build_model::<f64>(&t.arch, t.target_domain, tc.seeds.init)
                .map_err(|e| CliError::Numerical(e.to_string()))?
                .with_output_floor(t.signal.floor);
            let (model, history) =
                train_model(model, &tc).map_err(|e| CliError::Numerical(e.to_string()))?;
            let path = save_model_atomic(&model, &out, &t.model_file)?;
            (history, path)
        }
        Precision::F32 => {
            let model = build_model::<f32>(&t.arch, t.target_domain, tc.seeds.init)
                .map_err(|e| CliError::Numerical(e.to_string()))?
                .with_output_floor(t.signal.floor as f32);
            let tc32 = TrainConfig::<f32> {
                data: match &tc.data {
                    TrainData::Denoise { signal, gain } => {
                        TrainData::Denoise { signal: signal.clone(), gain: *gain }
                    }
                    TrainData::Toy { prior } => TrainData::Toy {
                        prior: cast_prior(prior),
                    },
                },
                lr: tc.lr,
                beta1: tc.beta1,
                beta2: tc.beta2,
                adam_eps: tc.adam_eps,
                batch_size: tc.batch_size,
                max_steps: tc.max_steps,
                val_every: tc.val_every,
                patience: tc.patience,
                val_size: tc.val_size,
                seeds: tc.seeds,
            };
            let (model, history) =
                train_model(model, &tc32).map_err(|e| CliError::Numerical(e.to_string()))?;
            let path = save_model_atomic(&model, &out, &t.model_file)?;
            (history, path)
        }
    };

    let mut csv = String::from("step,train_loss,val_psnr\n");
    for h in &history {
        csv.push_str(&format!("{},{},{}\n", h.step, h.train_loss, h.val_psnr));
    }
    atomic_write(&out.join(&t.history_file), csv.as_bytes())
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_manifest(
        &out,
        &manifest(run, Experiment::Train, &[&t.model_file, &t.history_file]),
    )?;
    println!(
        "train: saved {} after {} validation rounds (best val psnr {:.2} dB)",
        model_path.display(),
        history.len(),
        history.iter().map(|h| h.val_psnr).fold(f64::NEG_INFINITY, f64::max)
    );
    Ok(())
}

fn save_model_atomic<R: poisson_posterior::Real>(
    model: &poisson_posterior::nn::DenoiserModel<R>,
    dir: &Path,
    name: &str,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let tmp = dir.join(format!("{name}.tmp"));
    save_model(model, &tmp).map_err(|e| CliError::Numerical(e.to_string()))?;
    std::fs::rename(&tmp, &path).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(path)
}

fn cast_prior(p: &poisson_posterior::prior::PriorSpec<f64>) -> poisson_posterior::prior::PriorSpec<f32> {
    // serialize/deserialize round trip keeps the variants in sync
    let json = serde_json::to_value(p).expect("prior serializes");
    serde_json::from_value(json).expect("prior casts to f32")
}

fn cmd_eval(run: &ResolvedRun) -> Result<(), CliError> {
    let e = &run.cfg.eval;
    let model = load_model::<f64>(Path::new(&e.model_file))
        .map_err(|err| CliError::Config(format!("cannot load model {}: {err}", e.model_file)))?;
    let mut psnr_acc = 0.0;
    let mut mse_acc = 0.0;
    for i in 0..e.test_signals {
        let clean: Vec<f64> =
            generate_signal(&e.signal, mix64(e.test_seed, i as u64)).map_err(numerical)?;
        let obs = corrupt_poisson(&clean, e.gain, mix64(e.test_seed ^ e.gain.to_bits(), 0x7E57 + i as u64))
            .map_err(numerical)?;
        let xhat = predict_denoised(&model, &obs.y).map_err(numerical)?;
        let (psnr, mse) = metrics(&xhat, &clean)?;
        psnr_acc += psnr;
        mse_acc += mse;
    }
    let n = e.test_signals as f64;
    let report = serde_json::json!({
        "model": e.model_file,
        "gain": e.gain,
        "test_signals": e.test_signals,
        "psnr": psnr_acc / n,
        "mse": mse_acc / n,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{text}");
    if let Some(dir) = &run.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Numerical(e.to_string()))?;
        atomic_write(&dir.join(&e.report_file), text.as_bytes())
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        write_manifest(dir, &manifest(run, Experiment::Eval, &[&e.report_file]))?;
    }
    Ok(())
}

fn cmd_oracle_dump(run: &ResolvedRun) -> Result<(), CliError> {
    let o = &run.cfg.oracle;
    let prior = o.prior.build()?;
    let moments =
        posterior_central_moments(&prior, o.y, o.order, o.domain).map_err(numerical)?;
    let score = poisson_posterior::oracle::marginal_score(&prior, o.y.max(o.fd_step), o.fd_step)
        .map_err(numerical)?;
    let tweedie = poisson_posterior::recursion::tweedie_eta(score, o.y.max(o.fd_step));
    let report = serde_json::json!({
        "moments": moments,
        "marginal_score": score,
        "tweedie_eta": tweedie,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{text}");
    if let Some(dir) = &run.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Numerical(e.to_string()))?;
        atomic_write(&dir.join("moments.json"), text.as_bytes())
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let mut outputs = vec!["moments.json"];
        if o.density_grid >= 100 {
            let density = posterior_density(&prior, o.y, o.density_grid).map_err(numerical)?;
            let mut csv = Vec::new();
            density.write_csv(&mut csv).map_err(|e| CliError::Numerical(e.to_string()))?;
            atomic_write(&dir.join("posterior.csv"), &csv)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            outputs.push("posterior.csv");
        }
        write_manifest(dir, &manifest(run, Experiment::OracleDump, &outputs))?;
    }
    Ok(())
}

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

fn mix64(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
