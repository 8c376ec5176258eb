//! The 1-D Poisson denoising benchmark: trains x-domain and log-domain conv
//! nets at several gains and seeds, evaluates on a held-out test set, and
//! aggregates PSNR/MSE per (gain, target domain).

use super::toy::mix;
use super::{metrics, HarnessError};
use crate::nn::{
    build_model, predict_denoised, train, ArchSpec, Activation, DenoiserModel, TargetDomain,
    TrainConfig, TrainData, TrainSeeds,
};
use crate::prior::{corrupt_poisson, generate_signal, SignalConfig};
use crate::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct BenchTrainSettings {
    pub lr: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub val_every: usize,
    pub patience: usize,
    pub val_size: usize,
}

impl Default for BenchTrainSettings {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 64,
            max_steps: 600,
            val_every: 50,
            patience: 12,
            val_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct BenchConfig {
    pub signal: SignalConfig,
    pub gains: Vec<f64>,
    pub train_seeds: Vec<u64>,
    pub arch: ArchSpec,
    pub train: BenchTrainSettings,
    pub test_signals: usize,
    pub test_seed: u64,
    /// Example traces emitted at the largest gain.
    pub trace_examples: usize,
    pub precision: Precision,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            signal: SignalConfig::default(),
            gains: vec![16.0, 32.0, 64.0],
            train_seeds: vec![1, 2, 3],
            // 24 channels keeps a full sweep at desk scale; quality on this
            // task saturates well below the 64-channel default
            arch: ArchSpec::Conv1d {
                layers: 5,
                kernel: 7,
                channels: 24,
                activation: Activation::Relu,
            },
            train: BenchTrainSettings::default(),
            test_signals: 256,
            test_seed: 0xBEEF,
            trace_examples: 4,
            precision: Precision::F32,
        }
    }
}

/// Aggregated metrics for one (gain, target domain) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub gain: f64,
    pub domain: TargetDomain,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub per_seed_psnr: Vec<f64>,
    pub per_seed_mse: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchRow>,
}

impl BenchmarkTable {
    pub fn row(&self, gain: f64, domain: TargetDomain) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.gain == gain && r.domain == domain)
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("zeta,domain,psnr_mean,psnr_std,mse_mean,mse_std,n_seeds\n");
        for r in &self.rows {
            let domain = match r.domain {
                TargetDomain::X => "x",
                TargetDomain::LogX => "log-x",
            };
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{:.6},{:.6},{}\n",
                r.gain,
                domain,
                r.psnr_mean,
                r.psnr_std,
                r.mse_mean,
                r.mse_std,
                r.per_seed_psnr.len()
            ));
        }
        out
    }
}

/// Per-sample traces of a few test examples at one gain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceColumn {
    pub gain: f64,
    pub example: usize,
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    pub denoised_x: Vec<f64>,
    pub denoised_log: Vec<f64>,
}

pub struct BenchArtifacts {
    pub table: BenchmarkTable,
    pub traces: Vec<TraceColumn>,
}

/// `(noisy, clean)` pairs.
type TestSet<R> = Vec<(Vec<R>, Vec<R>)>;

/// One held-out test set per gain, disjoint from the train/val streams by
/// seed construction and shared across domains and training seeds.
fn test_set<R: Real>(cfg: &BenchConfig, gain: f64) -> Result<TestSet<R>, HarnessError> {
    let gain_tag = gain.to_bits();
    (0..cfg.test_signals)
        .map(|i| {
            let clean: Vec<R> =
                generate_signal(&cfg.signal, mix(cfg.test_seed, i as u64))?;
            let obs = corrupt_poisson(
                &clean,
                R::of(gain),
                mix(cfg.test_seed ^ gain_tag, 0x7E57 + i as u64),
            )?;
            Ok((obs.y, clean))
        })
        .collect()
}

fn train_one<R: Real>(
    cfg: &BenchConfig,
    gain: f64,
    domain: TargetDomain,
    seed: u64,
) -> Result<DenoiserModel<R>, HarnessError> {
    let model = build_model::<R>(&cfg.arch, domain, mix(seed, 0xA))?
        .with_output_floor(R::of(cfg.signal.floor));
    let mut tc = TrainConfig::new(TrainData::Denoise { signal: cfg.signal.clone(), gain });
    tc.lr = cfg.train.lr;
    tc.batch_size = cfg.train.batch_size;
    tc.max_steps = cfg.train.max_steps;
    tc.val_every = cfg.train.val_every;
    tc.patience = cfg.train.patience;
    tc.val_size = cfg.train.val_size;
    tc.seeds = TrainSeeds {
        init: mix(seed, 0xA),
        train: mix(seed, 0xB),
        val: mix(seed, 0xC),
    };
    let (model, _) = train(model, &tc).map_err(|e| HarnessError::Train(e.to_string()))?;
    Ok(model)
}

fn run_generic<R: Real>(cfg: &BenchConfig) -> Result<BenchArtifacts, HarnessError> {
    cfg.signal.validate()?;
    if cfg.gains.is_empty() || cfg.train_seeds.is_empty() {
        return Err(HarnessError::InvalidConfig("need at least one gain and one seed".into()));
    }
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let trace_gain = cfg.gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    for &gain in &cfg.gains {
        let tests = test_set::<R>(cfg, gain)?;
        let mut trace_models: Vec<(TargetDomain, DenoiserModel<R>)> = Vec::new();
        for &domain in &[TargetDomain::LogX, TargetDomain::X] {
            let mut per_seed_psnr = Vec::new();
            let mut per_seed_mse = Vec::new();
            for &seed in &cfg.train_seeds {
                let model = train_one::<R>(cfg, gain, domain, mix(seed, gain.to_bits()))?;
                let mut mse_acc = 0.0;
                for (y, clean) in &tests {
                    let xhat = predict_denoised(&model, y)?;
                    let (_, mse) = metrics(&xhat, clean)?;
                    mse_acc += mse;
                }
                // PSNR of the aggregate error keeps psnr = 10 log10(1/mse)
                // exact at the row level
                let mse = mse_acc / tests.len() as f64;
                per_seed_psnr.push(10.0 * (1.0 / mse.max(1e-10)).log10());
                per_seed_mse.push(mse);
                if gain == trace_gain && seed == cfg.train_seeds[0] {
                    trace_models.push((domain, model));
                }
            }
            let (pm, ps) = mean_std(&per_seed_psnr);
            let (mm, ms) = mean_std(&per_seed_mse);
            rows.push(BenchRow {
                gain,
                domain,
                psnr_mean: pm,
                psnr_std: ps,
                mse_mean: mm,
                mse_std: ms,
                per_seed_psnr,
                per_seed_mse,
            });
        }
        if gain == trace_gain {
            for (i, (y, clean)) in tests.iter().take(cfg.trace_examples).enumerate() {
                let mut denoised_x = Vec::new();
                let mut denoised_log = Vec::new();
                for (domain, model) in &trace_models {
                    let xhat = predict_denoised(model, y)?;
                    let xhat64: Vec<f64> = xhat.iter().map(|v| v.to64()).collect();
                    match domain {
                        TargetDomain::X => denoised_x = xhat64,
                        TargetDomain::LogX => denoised_log = xhat64,
                    }
                }
                traces.push(TraceColumn {
                    gain,
                    example: i,
                    clean: clean.iter().map(|v| v.to64()).collect(),
                    noisy: y.iter().map(|v| v.to64()).collect(),
                    denoised_x,
                    denoised_log,
                });
            }
        }
    }
    Ok(BenchArtifacts { table: BenchmarkTable { rows }, traces })
}

/// Full benchmark sweep in the configured precision.
pub fn run_denoise_benchmark(cfg: &BenchConfig) -> Result<BenchArtifacts, HarnessError> {
    match cfg.precision {
        Precision::F32 => run_generic::<f32>(cfg),
        Precision::F64 => run_generic::<f64>(cfg),
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl BenchArtifacts {
    /// `benchmark_table.csv` and `denoise_traces.csv` under `dir`.
    pub fn write(&self, dir: &std::path::Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        super::atomic_write(&dir.join("benchmark_table.csv"), self.table.to_csv().as_bytes())?;
        let mut csv = String::from("zeta,example,t,clean,noisy,denoised_x,denoised_log\n");
        for tr in &self.traces {
            for t in 0..tr.clean.len() {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    tr.gain,
                    tr.example,
                    t,
                    tr.clean[t],
                    tr.noisy[t],
                    tr.denoised_x.get(t).copied().unwrap_or(f64::NAN),
                    tr.denoised_log.get(t).copied().unwrap_or(f64::NAN),
                ));
            }
        }
        super::atomic_write(&dir.join("denoise_traces.csv"), csv.as_bytes())?;
        Ok(())
    }
}
