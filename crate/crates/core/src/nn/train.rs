//! MSE training with Adam, on-the-fly data, and early stopping on
//! validation PSNR.

use super::{predict_denoised, Batch, DenoiserModel, TargetDomain};
use crate::prior::{corrupt_poisson, generate_signal, PriorSpec, SignalConfig};
use crate::Real;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError<R: Real> {
    #[error("training diverged at step {step}; last finite checkpoint attached")]
    Diverged {
        step: usize,
        checkpoint: Box<DenoiserModel<R>>,
        history: Vec<HistoryPoint>,
    },
    #[error("data generation failed: {0}")]
    Data(#[from] crate::prior::PriorError),
    #[error(transparent)]
    Nn(#[from] super::NnError),
}

/// Seeds for the three independent streams; keeping them distinct is what
/// makes train/validation/test splits disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSeeds {
    pub init: u64,
    pub train: u64,
    pub val: u64,
}

impl Default for TrainSeeds {
    fn default() -> Self {
        Self { init: 1, train: 2, val: 3 }
    }
}

/// What the model trains on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case", bound = "")]
pub enum TrainData<R: Real> {
    /// 1-D signals corrupted at a fixed gain; targets are the clean signals
    /// (or their logs).
    Denoise { signal: SignalConfig, gain: f64 },
    /// Scalar pairs `x ~ prior`, `y | x ~ Poisson(x)` at gain 1; the network
    /// input is the raw count.
    Toy { prior: PriorSpec<R> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainConfig<R: Real> {
    pub data: TrainData<R>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    /// Validation cadence in steps.
    pub val_every: usize,
    /// Early stop after this many validation rounds without improvement.
    pub patience: usize,
    pub val_size: usize,
    pub seeds: TrainSeeds,
}

impl<R: Real> TrainConfig<R> {
    pub fn new(data: TrainData<R>) -> Self {
        Self {
            data,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 64,
            max_steps: 20_000,
            val_every: 50,
            patience: 20,
            val_size: 64,
            seeds: TrainSeeds::default(),
        }
    }
}

/// One validation round: mean train loss since the previous round and the
/// validation PSNR at this step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub step: usize,
    pub train_loss: f64,
    pub val_psnr: f64,
}

pub(super) struct Adam<R: Real> {
    m: Vec<R>,
    v: Vec<R>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl<R: Real> Adam<R> {
    pub(super) fn new(n: usize, cfg: &TrainConfig<R>) -> Self {
        Self {
            m: vec![R::zero(); n],
            v: vec![R::zero(); n],
            t: 0,
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
        }
    }

    pub(super) fn step(&mut self, weights: &mut [R], grad: &[R]) {
        self.t += 1;
        let b1 = R::of(self.beta1);
        let b2 = R::of(self.beta2);
        let one = R::one();
        let corr1 = R::of(1.0 - self.beta1.powi(self.t));
        let corr2 = R::of(1.0 - self.beta2.powi(self.t));
        let lr = R::of(self.lr);
        let eps = R::of(self.eps);
        for ((w, g), (m, v)) in weights
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = b1 * *m + (one - b1) * *g;
            *v = b2 * *v + (one - b2) * *g * *g;
            let mhat = *m / corr1;
            let vhat = *v / corr2;
            *w -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

fn target_of<R: Real>(clean: &[R], domain: TargetDomain, floor: R) -> Vec<R> {
    match domain {
        TargetDomain::X => clean.to_vec(),
        // floored so log targets stay finite; no upper clamp, toy draws
        // range over the whole prior support
        TargetDomain::LogX => clean.iter().map(|&x| x.max(floor).ln()).collect(),
    }
}

/// `(inputs, clean targets)` item lists.
pub(super) type PairSet<R> = (Vec<Vec<R>>, Vec<Vec<R>>);

/// Generates `count` (input, clean) pairs from the data stream.
pub(super) fn generate_pairs<R: Real>(
    data: &TrainData<R>,
    rng: &mut ChaCha8Rng,
    count: usize,
) -> Result<PairSet<R>, crate::prior::PriorError> {
    let mut inputs = Vec::with_capacity(count);
    let mut cleans = Vec::with_capacity(count);
    match data {
        TrainData::Denoise { signal, gain } => {
            for _ in 0..count {
                let clean: Vec<R> = generate_signal(signal, rng.next_u64())?;
                let obs = corrupt_poisson(&clean, R::of(*gain), rng.next_u64())?;
                inputs.push(obs.y);
                cleans.push(clean);
            }
        }
        TrainData::Toy { prior } => {
            let xs = prior.sample(count, rng.next_u64());
            let obs = corrupt_poisson(&xs, R::one(), rng.next_u64())?;
            for (x, y) in xs.into_iter().zip(obs.y) {
                inputs.push(vec![y]);
                cleans.push(vec![x]);
            }
        }
    }
    Ok((inputs, cleans))
}

fn batch_from<R: Real>(
    inputs: Vec<Vec<R>>,
    cleans: &[Vec<R>],
    domain: TargetDomain,
    floor: R,
) -> Batch<R> {
    let targets = cleans.iter().map(|c| target_of(c, domain, floor)).collect();
    Batch { inputs, targets }
}

/// Validation score, in dB. Denoise models report PSNR of the clamped
/// prediction against the clean signal; toy models report
/// `10 log10(1 / target-domain MSE)`, the same monotone scale.
pub(super) fn validation_psnr<R: Real>(
    model: &DenoiserModel<R>,
    data: &TrainData<R>,
    inputs: &[Vec<R>],
    cleans: &[Vec<R>],
) -> f64 {
    match data {
        TrainData::Denoise { .. } => {
            let mut acc = 0.0;
            for (y, clean) in inputs.iter().zip(cleans) {
                let xhat = predict_denoised(model, y).expect("validation inputs are finite");
                let mse = mse64(&xhat, clean);
                acc += 10.0 * (1.0 / mse.max(1e-10)).log10();
            }
            acc / inputs.len() as f64
        }
        TrainData::Toy { .. } => {
            let mut se = 0.0;
            let mut n = 0usize;
            for (y, clean) in inputs.iter().zip(cleans) {
                let out = super::forward(model, y).expect("validation inputs are finite");
                let t = target_of(clean, model.target_domain, model.output_floor);
                se += out
                    .iter()
                    .zip(&t)
                    .map(|(&o, &tv)| (o.to64() - tv.to64()).powi(2))
                    .sum::<f64>();
                n += out.len();
            }
            let mse = se / n as f64;
            10.0 * (1.0 / mse.max(1e-10)).log10()
        }
    }
}

fn mse64<R: Real>(a: &[R], b: &[R]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x.to64() - y.to64()).powi(2))
        .sum::<f64>()
        / a.len() as f64
}

/// Trains with Adam on freshly generated batches; returns the weights of
/// the best validation round and the per-round history. Fully deterministic
/// in the config seeds.
pub fn train<R: Real>(
    model: DenoiserModel<R>,
    cfg: &TrainConfig<R>,
) -> Result<(DenoiserModel<R>, Vec<HistoryPoint>), TrainError<R>> {
    let mut model = model;
    let mut history = Vec::new();
    if cfg.max_steps == 0 {
        return Ok((model, history));
    }
    let mut rng_train = ChaCha8Rng::seed_from_u64(cfg.seeds.train);
    let mut rng_val = ChaCha8Rng::seed_from_u64(cfg.seeds.val);
    let (val_inputs, val_cleans) = generate_pairs(&cfg.data, &mut rng_val, cfg.val_size)?;

    let mut adam = Adam::new(model.weights.len(), cfg);
    let mut best_weights = model.weights.clone();
    let mut best_psnr = f64::NEG_INFINITY;
    let mut rounds_since_best = 0usize;
    let mut loss_acc = 0.0f64;
    let mut loss_n = 0usize;

    for step in 1..=cfg.max_steps {
        let (inputs, cleans) = generate_pairs(&cfg.data, &mut rng_train, cfg.batch_size)?;
        let batch = batch_from(inputs, &cleans, model.target_domain, model.output_floor);
        let (loss, grad) = super::loss_and_gradient(&model, &batch);
        if !loss.is_finite() {
            let checkpoint = DenoiserModel { weights: best_weights, ..model.clone() };
            return Err(TrainError::Diverged {
                step,
                checkpoint: Box::new(checkpoint),
                history,
            });
        }
        adam.step(&mut model.weights, &grad);
        loss_acc += loss;
        loss_n += 1;

        if step % cfg.val_every == 0 || step == cfg.max_steps {
            let psnr = validation_psnr(&model, &cfg.data, &val_inputs, &val_cleans);
            history.push(HistoryPoint {
                step,
                train_loss: loss_acc / loss_n as f64,
                val_psnr: psnr,
            });
            loss_acc = 0.0;
            loss_n = 0;
            if psnr > best_psnr {
                best_psnr = psnr;
                best_weights = model.weights.clone();
                rounds_since_best = 0;
            } else {
                rounds_since_best += 1;
                if rounds_since_best >= cfg.patience {
                    break;
                }
            }
        }
    }
    model.weights = best_weights;
    Ok((model, history))
}
