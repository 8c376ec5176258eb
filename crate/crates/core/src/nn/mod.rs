//! Self-contained neural denoisers: a small MLP for scalar observations and
//! a five-layer 1-D conv net (kernel 7, reflect padding, 1x1 output head)
//! for signals. Hand-derived gradients, Adam, MSE training with early
//! stopping on validation PSNR.
//!
//! Targets live either in the signal domain (`E[x|y]`) or the log domain
//! (`E[log x|y]`); the log-domain models are the ones whose input
//! derivatives feed the moment recursion.

mod layers;
mod train;

pub use train::{train, HistoryPoint, TrainConfig, TrainData, TrainError, TrainSeeds};

use crate::Real;
use layers::{batch_loss_grad, forward_single};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("input length {got} invalid: {why}")]
    BadInput { got: usize, why: String },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("model file corrupt: {0}")]
    BadModelFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    /// Negative slope 0.01.
    LeakyRelu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<R: Real>(self, z: R) -> R {
        match self {
            Activation::Relu => z.max(R::zero()),
            Activation::LeakyRelu => {
                if z > R::zero() {
                    z
                } else {
                    z * R::of(0.01)
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    pub fn derivative_from_output<R: Real>(self, a: R) -> R {
        match self {
            Activation::Relu => {
                if a > R::zero() {
                    R::one()
                } else {
                    R::zero()
                }
            }
            Activation::LeakyRelu => {
                if a > R::zero() {
                    R::one()
                } else {
                    R::of(0.01)
                }
            }
            Activation::Tanh => R::one() - a * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetDomain {
    X,
    LogX,
}

/// Network shape. The conv net is `layers` convolutions (kernel size
/// `kernel`, `channels` wide, reflect padding) followed by a linear 1x1
/// head back to one channel; the MLP lists its layer widths explicitly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArchSpec {
    Mlp { widths: Vec<usize>, activation: Activation },
    Conv1d { layers: usize, kernel: usize, channels: usize, activation: Activation },
}

impl ArchSpec {
    /// Toy default: scalar-in scalar-out `[1, 64, 64, 1]` with tanh, smooth
    /// enough for finite-difference derivatives of the trained network.
    pub fn default_mlp() -> Self {
        ArchSpec::Mlp { widths: vec![1, 64, 64, 1], activation: Activation::Tanh }
    }

    /// Benchmark default: five conv layers, kernel 7, 64 channels, ReLU.
    pub fn default_conv1d() -> Self {
        ArchSpec::Conv1d { layers: 5, kernel: 7, channels: 64, activation: Activation::Relu }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        match self {
            ArchSpec::Mlp { widths, .. } => {
                if widths.len() < 2 || widths.contains(&0) {
                    return Err(NnError::InvalidArch(
                        "mlp needs >= 2 layer widths, all >= 1".into(),
                    ));
                }
            }
            ArchSpec::Conv1d { layers, kernel, channels, .. } => {
                if *layers == 0 || *channels == 0 {
                    return Err(NnError::InvalidArch("conv1d needs layers, channels >= 1".into()));
                }
                if *kernel % 2 == 0 || *kernel == 0 {
                    return Err(NnError::InvalidArch("conv kernel size must be odd".into()));
                }
            }
        }
        Ok(())
    }

    /// Total weight + bias count, matching the flat layout.
    pub fn param_count(&self) -> usize {
        match self {
            ArchSpec::Mlp { widths, .. } => widths
                .windows(2)
                .map(|w| w[0] * w[1] + w[1])
                .sum(),
            ArchSpec::Conv1d { layers, kernel, channels, .. } => {
                let mut count = channels * kernel + channels; // 1 -> C
                count += (layers - 1) * (channels * channels * kernel + channels);
                count + channels + 1 // 1x1 head
            }
        }
    }
}

/// Architecture, flat parameter vector, target domain and input scaling.
///
/// Flat layout, in order: for each layer, the weight matrix row-major then
/// the bias. Conv weights index as `[out][in][tap]`; the head is a plain
/// `1 x channels` linear map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DenoiserModel<R: Real> {
    pub arch: ArchSpec,
    pub target_domain: TargetDomain,
    /// Inputs enter the network as `(y - input_shift) / input_scale`.
    pub input_shift: R,
    pub input_scale: R,
    /// Positivity floor used when mapping log-domain outputs back to x.
    pub output_floor: R,
    pub weights: Vec<R>,
}

/// Fan-in scaled uniform init `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for the
/// weights, zero biases; deterministic in `seed`.
pub fn build_model<R: Real>(
    arch: &ArchSpec,
    target_domain: TargetDomain,
    seed: u64,
) -> Result<DenoiserModel<R>, NnError> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(arch.param_count());
    let push_layer = |rng: &mut ChaCha8Rng, weights: &mut Vec<R>, rows: usize, cols: usize| {
        let lim = 1.0 / (cols as f64).sqrt();
        for _ in 0..rows * cols {
            weights.push(R::of(rng.random_range(-lim..lim)));
        }
        for _ in 0..rows {
            weights.push(R::zero());
        }
    };
    match arch {
        ArchSpec::Mlp { widths, .. } => {
            for w in widths.windows(2) {
                push_layer(&mut rng, &mut weights, w[1], w[0]);
            }
        }
        ArchSpec::Conv1d { layers, kernel, channels, .. } => {
            push_layer(&mut rng, &mut weights, *channels, *kernel); // 1 -> C
            for _ in 1..*layers {
                push_layer(&mut rng, &mut weights, *channels, *channels * *kernel);
            }
            push_layer(&mut rng, &mut weights, 1, *channels); // head
        }
    }
    debug_assert_eq!(weights.len(), arch.param_count());
    Ok(DenoiserModel {
        arch: arch.clone(),
        target_domain,
        input_shift: R::zero(),
        input_scale: R::one(),
        output_floor: R::of(1e-3),
        weights,
    })
}

impl<R: Real> DenoiserModel<R> {
    pub fn with_input_normalization(mut self, shift: R, scale: R) -> Self {
        self.input_shift = shift;
        self.input_scale = scale.max(R::of(f64::MIN_POSITIVE));
        self
    }

    pub fn with_output_floor(mut self, floor: R) -> Self {
        self.output_floor = floor;
        self
    }

    /// Converts the parameter vector to another scalar type.
    pub fn cast<S: Real>(&self) -> DenoiserModel<S> {
        DenoiserModel {
            arch: self.arch.clone(),
            target_domain: self.target_domain,
            input_shift: S::of(self.input_shift.to64()),
            input_scale: S::of(self.input_scale.to64()),
            output_floor: S::of(self.output_floor.to64()),
            weights: self.weights.iter().map(|w| S::of(w.to64())).collect(),
        }
    }
}

/// Network output for one input: same length as the input for the conv net,
/// length 1 for the MLP.
pub fn forward<R: Real>(model: &DenoiserModel<R>, input: &[R]) -> Result<Vec<R>, NnError> {
    if input.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFiniteInput);
    }
    match &model.arch {
        ArchSpec::Mlp { widths, .. } => {
            if input.len() != widths[0] {
                return Err(NnError::BadInput {
                    got: input.len(),
                    why: format!("mlp expects {}", widths[0]),
                });
            }
        }
        ArchSpec::Conv1d { kernel, .. } => {
            if input.len() < *kernel {
                return Err(NnError::BadInput {
                    got: input.len(),
                    why: format!("conv needs at least the kernel footprint {}", kernel),
                });
            }
        }
    }
    Ok(forward_single(model, input))
}

/// Point estimate of the clean signal: the conv/mlp output clamped to
/// `[0, 1]` (x-domain models) or exponentiated and clamped to `[floor, 1]`
/// (log-domain models).
pub fn predict_denoised<R: Real>(model: &DenoiserModel<R>, y: &[R]) -> Result<Vec<R>, NnError> {
    let out = forward(model, y)?;
    Ok(match model.target_domain {
        TargetDomain::X => out
            .into_iter()
            .map(|v| v.max(R::zero()).min(R::one()))
            .collect(),
        TargetDomain::LogX => out
            .into_iter()
            .map(|v| v.exp().max(model.output_floor).min(R::one()))
            .collect(),
    })
}

/// One training batch: per-item inputs and same-shape targets.
#[derive(Debug, Clone)]
pub struct Batch<R: Real> {
    pub inputs: Vec<Vec<R>>,
    pub targets: Vec<Vec<R>>,
}

/// Compares the analytic loss gradient against central finite differences
/// on at least 200 deterministically sampled parameters; returns the
/// largest relative error.
///
/// A perturbation that flips a ReLU/LeakyReLU activation sign crosses a
/// point where the loss is not differentiable in that coordinate, so the
/// difference quotient is not an estimate of the analytic gradient there;
/// such probes are re-drawn.
pub fn grad_check<R: Real>(model: &DenoiserModel<R>, batch: &Batch<R>, fd_step: f64) -> f64 {
    let n_probes = 200usize;
    let kinked = !matches!(
        model.arch,
        ArchSpec::Mlp { activation: Activation::Tanh, .. }
            | ArchSpec::Conv1d { activation: Activation::Tanh, .. }
    );
    let (_, grad) = batch_loss_grad(model, batch);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let n = model.weights.len();
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut attempts = 0usize;
    while checked < n_probes.min(n) && attempts < 20 * n_probes {
        attempts += 1;
        let j = rng.random_range(0..n);
        let mut plus = model.clone();
        plus.weights[j] += R::of(fd_step);
        let mut minus = model.clone();
        minus.weights[j] -= R::of(fd_step);
        if kinked
            && layers::hidden_sign_signature(&plus, batch)
                != layers::hidden_sign_signature(&minus, batch)
        {
            continue;
        }
        let (lp, _) = batch_loss_grad(&plus, batch);
        let (lm, _) = batch_loss_grad(&minus, batch);
        let numeric = (lp - lm) / (2.0 * fd_step);
        let analytic = grad[j].to64();
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
        checked += 1;
    }
    worst
}

/// Loss and gradient on a batch; exposed for the training loop and tests.
pub fn loss_and_gradient<R: Real>(model: &DenoiserModel<R>, batch: &Batch<R>) -> (f64, Vec<R>) {
    batch_loss_grad(model, batch)
}

const MODEL_MAGIC: &[u8; 4] = b"PDNM";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    version: u32,
    arch: ArchSpec,
    target_domain: TargetDomain,
    input_shift: f64,
    input_scale: f64,
    output_floor: f64,
    weight_count: usize,
}

/// Writes magic, a JSON descriptor, then the weights as little-endian f64.
pub fn save_model<R: Real>(model: &DenoiserModel<R>, path: &Path) -> Result<(), NnError> {
    let header = ModelHeader {
        version: MODEL_VERSION,
        arch: model.arch.clone(),
        target_domain: model.target_domain,
        input_shift: model.input_shift.to64(),
        input_scale: model.input_scale.to64(),
        output_floor: model.output_floor.to64(),
        weight_count: model.weights.len(),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| NnError::BadModelFile(format!("header encode: {e}")))?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&MODEL_VERSION.to_le_bytes())?;
    out.write_all(&(header_json.len() as u32).to_le_bytes())?;
    out.write_all(&header_json)?;
    for w in &model.weights {
        out.write_all(&w.to64().to_le_bytes())?;
    }
    Ok(())
}

pub fn load_model<R: Real>(path: &Path) -> Result<DenoiserModel<R>, NnError> {
    let mut input = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(NnError::BadModelFile("bad magic".into()));
    }
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != MODEL_VERSION {
        return Err(NnError::BadModelFile(format!("unsupported version {version}")));
    }
    input.read_exact(&mut u32buf)?;
    let header_len = u32::from_le_bytes(u32buf) as usize;
    let mut header_bytes = vec![0u8; header_len];
    input.read_exact(&mut header_bytes)?;
    let header: ModelHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| NnError::BadModelFile(format!("header decode: {e}")))?;
    header.arch.validate()?;
    if header.weight_count != header.arch.param_count() {
        return Err(NnError::BadModelFile(format!(
            "weight count {} does not match the architecture ({})",
            header.weight_count,
            header.arch.param_count()
        )));
    }
    let mut weights = Vec::with_capacity(header.weight_count);
    let mut f64buf = [0u8; 8];
    for _ in 0..header.weight_count {
        input.read_exact(&mut f64buf)?;
        let w = f64::from_le_bytes(f64buf);
        if !w.is_finite() {
            return Err(NnError::BadModelFile("non-finite weight".into()));
        }
        weights.push(R::of(w));
    }
    Ok(DenoiserModel {
        arch: header.arch,
        target_domain: header.target_domain,
        input_shift: R::of(header.input_shift),
        input_scale: R::of(header.input_scale),
        output_floor: R::of(header.output_floor),
        weights,
    })
}
