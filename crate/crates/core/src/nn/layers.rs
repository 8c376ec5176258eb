//! Forward/backward kernels. Convolutions run as im2col + GEMM; the batch
//! is processed in a fixed number of chunks so gradient reductions happen
//! in a deterministic order no matter how many worker threads run.

use super::{ArchSpec, Batch, DenoiserModel};
use crate::Real;
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use std::ops::Range;

/// Weight/bias slice of one layer inside the flat parameter vector.
#[derive(Debug, Clone)]
pub(super) struct LayerSlice {
    pub w: Range<usize>,
    pub b: Range<usize>,
    pub rows: usize,
    pub cols: usize,
}

pub(super) fn layer_slices(arch: &ArchSpec) -> Vec<LayerSlice> {
    let mut out = Vec::new();
    let mut cursor = 0usize;
    let mut push = |rows: usize, cols: usize, cursor: &mut usize| {
        let w = *cursor..*cursor + rows * cols;
        let b = w.end..w.end + rows;
        *cursor = b.end;
        out.push(LayerSlice { w, b, rows, cols });
    };
    match arch {
        ArchSpec::Mlp { widths, .. } => {
            for w in widths.windows(2) {
                push(w[1], w[0], &mut cursor);
            }
        }
        ArchSpec::Conv1d { layers, kernel, channels, .. } => {
            push(*channels, *kernel, &mut cursor);
            for _ in 1..*layers {
                push(*channels, *channels * *kernel, &mut cursor);
            }
            push(1, *channels, &mut cursor);
        }
    }
    out
}

fn weight_view<'a, R: Real>(weights: &'a [R], layer: &LayerSlice) -> ArrayView2<'a, R> {
    ArrayView2::from_shape((layer.rows, layer.cols), &weights[layer.w.clone()])
        .expect("layer slice matches its shape")
}

#[inline]
fn reflect(p: i64, n: i64) -> usize {
    // mirror about the edge samples: -1 -> 1, n -> n-2
    let q = if p < 0 {
        -p
    } else if p >= n {
        2 * n - 2 - p
    } else {
        p
    };
    q.clamp(0, n - 1) as usize
}

/// Gathers kernel taps with reflect padding: input `(c_in, items*len)` to
/// `(c_in*k, items*len)`, item blocks independent.
fn im2col<R: Real>(input: &Array2<R>, k: usize, len: usize) -> Array2<R> {
    let c_in = input.nrows();
    let n = input.ncols();
    let items = n / len;
    let r = (k / 2) as i64;
    let mut cols = Array2::<R>::zeros((c_in * k, n));
    let src_all = input.as_slice().expect("standard layout");
    {
        let dst_all = cols.as_slice_mut().expect("standard layout");
        for i in 0..c_in {
            let src_row = &src_all[i * n..(i + 1) * n];
            for t in 0..k {
                let d = t as i64 - r;
                let dst_row = &mut dst_all[(i * k + t) * n..(i * k + t + 1) * n];
                for b in 0..items {
                    let src = &src_row[b * len..(b + 1) * len];
                    let dst = &mut dst_row[b * len..(b + 1) * len];
                    for (j, slot) in dst.iter_mut().enumerate() {
                        *slot = src[reflect(j as i64 + d, len as i64)];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds tap gradients back through the
/// reflected indices.
fn col2im<R: Real>(dcols: &Array2<R>, c_in: usize, k: usize, len: usize) -> Array2<R> {
    let n = dcols.ncols();
    let items = n / len;
    let r = (k / 2) as i64;
    let mut din = Array2::<R>::zeros((c_in, n));
    let src_all = dcols.as_slice().expect("standard layout");
    {
        let dst_all = din.as_slice_mut().expect("standard layout");
        for i in 0..c_in {
            let dst_row = &mut dst_all[i * n..(i + 1) * n];
            for t in 0..k {
                let d = t as i64 - r;
                let src_row = &src_all[(i * k + t) * n..(i * k + t + 1) * n];
                for b in 0..items {
                    let src = &src_row[b * len..(b + 1) * len];
                    let dst = &mut dst_row[b * len..(b + 1) * len];
                    for (j, &g) in src.iter().enumerate() {
                        dst[reflect(j as i64 + d, len as i64)] += g;
                    }
                }
            }
        }
    }
    din
}

fn add_bias<R: Real>(z: &mut Array2<R>, bias: &[R]) {
    for (mut row, &b) in z.axis_iter_mut(Axis(0)).zip(bias) {
        row.mapv_inplace(|v| v + b);
    }
}

/// Activations of every layer for one chunk, input first, output last.
fn forward_chunk<R: Real>(
    model: &DenoiserModel<R>,
    slices: &[LayerSlice],
    input: Array2<R>,
    item_len: usize,
) -> Vec<Array2<R>> {
    let mut acts: Vec<Array2<R>> = vec![input];
    match &model.arch {
        ArchSpec::Mlp { activation, .. } => {
            let last = slices.len() - 1;
            for (l, s) in slices.iter().enumerate() {
                let w = weight_view(&model.weights, s);
                let mut z = w.dot(acts.last().unwrap());
                add_bias(&mut z, &model.weights[s.b.clone()]);
                if l < last {
                    z.mapv_inplace(|v| activation.apply(v));
                }
                acts.push(z);
            }
        }
        ArchSpec::Conv1d { kernel, activation, .. } => {
            let last = slices.len() - 1;
            for (l, s) in slices.iter().enumerate() {
                let w = weight_view(&model.weights, s);
                let mut z = if l < last {
                    let cols = im2col(acts.last().unwrap(), *kernel, item_len);
                    w.dot(&cols)
                } else {
                    w.dot(acts.last().unwrap()) // 1x1 head
                };
                add_bias(&mut z, &model.weights[s.b.clone()]);
                if l < last {
                    z.mapv_inplace(|v| activation.apply(v));
                }
                acts.push(z);
            }
        }
    }
    acts
}

fn normalized_input<R: Real>(model: &DenoiserModel<R>, raw: &[R]) -> Vec<R> {
    raw.iter()
        .map(|&v| (v - model.input_shift) / model.input_scale)
        .collect()
}

/// Single-item forward pass.
pub(super) fn forward_single<R: Real>(model: &DenoiserModel<R>, input: &[R]) -> Vec<R> {
    let slices = layer_slices(&model.arch);
    let norm = normalized_input(model, input);
    let (shape, item_len) = match &model.arch {
        ArchSpec::Mlp { widths, .. } => ((widths[0], 1), 1),
        ArchSpec::Conv1d { .. } => ((1, norm.len()), norm.len()),
    };
    let a0 = Array2::from_shape_vec(shape, norm).expect("input shape");
    let acts = forward_chunk(model, &slices, a0, item_len);
    acts.last().unwrap().iter().copied().collect()
}

/// Loss + gradient contribution of one chunk of items. `scale` is
/// `1 / (total_items * item_outputs)` so chunk contributions add up to the
/// batch-mean MSE gradient.
fn chunk_loss_grad<R: Real>(
    model: &DenoiserModel<R>,
    slices: &[LayerSlice],
    inputs: &[Vec<R>],
    targets: &[Vec<R>],
    scale: f64,
) -> (f64, Vec<R>) {
    let item_len = inputs[0].len();
    let out_len = targets[0].len();
    let chunk = inputs.len();

    let (a0, conv_len) = match &model.arch {
        ArchSpec::Mlp { widths, .. } => {
            // items as columns
            let mut a0 = Array2::<R>::zeros((widths[0], chunk));
            for (c, item) in inputs.iter().enumerate() {
                for (r, &v) in normalized_input(model, item).iter().enumerate() {
                    a0[[r, c]] = v;
                }
            }
            (a0, 1)
        }
        ArchSpec::Conv1d { .. } => {
            let mut flat = Vec::with_capacity(chunk * item_len);
            for item in inputs {
                flat.extend(normalized_input(model, item));
            }
            (
                Array2::from_shape_vec((1, chunk * item_len), flat).expect("input shape"),
                item_len,
            )
        }
    };

    let acts = forward_chunk(model, slices, a0, conv_len);
    let out = acts.last().unwrap();

    // MSE and its gradient at the output
    let mut loss = 0.0f64;
    let mut dz = Array2::<R>::zeros(out.raw_dim());
    let two_scale = R::of(2.0 * scale);
    match &model.arch {
        ArchSpec::Mlp { .. } => {
            for (c, t) in targets.iter().enumerate() {
                for (r, &tv) in t.iter().enumerate() {
                    let d = out[[r, c]] - tv;
                    loss += d.to64() * d.to64();
                    dz[[r, c]] = two_scale * d;
                }
            }
        }
        ArchSpec::Conv1d { .. } => {
            for (b, t) in targets.iter().enumerate() {
                for (j, &tv) in t.iter().enumerate() {
                    let d = out[[0, b * out_len + j]] - tv;
                    loss += d.to64() * d.to64();
                    dz[[0, b * out_len + j]] = two_scale * d;
                }
            }
        }
    }
    loss *= scale;

    let mut grad = vec![R::zero(); model.weights.len()];
    let activation = match &model.arch {
        ArchSpec::Mlp { activation, .. } => *activation,
        ArchSpec::Conv1d { activation, .. } => *activation,
    };
    let kernel = match &model.arch {
        ArchSpec::Conv1d { kernel, .. } => *kernel,
        _ => 1,
    };
    let is_conv = matches!(&model.arch, ArchSpec::Conv1d { .. });

    let mut dz = dz;
    for l in (0..slices.len()).rev() {
        let s = &slices[l];
        let w = weight_view(&model.weights, s);
        let a_prev = &acts[l];
        let last = l == slices.len() - 1;

        // dW = dz . cols^T (conv) or dz . a_prev^T (dense/head)
        {
            let gw = if is_conv && !last {
                let cols = im2col(a_prev, kernel, conv_len);
                dz.dot(&cols.t())
            } else {
                dz.dot(&a_prev.t())
            };
            grad[s.w.clone()].copy_from_slice(gw.as_slice().expect("standard layout"));
            let gb = dz.sum_axis(Axis(1));
            grad[s.b.clone()].copy_from_slice(gb.as_slice().expect("standard layout"));
        }

        if l == 0 {
            break;
        }
        let upstream = w.t().dot(&dz);
        let da = if is_conv && !last {
            col2im(&upstream, a_prev.nrows(), kernel, conv_len)
        } else {
            upstream
        };
        // through the activation of layer l-1 (the head and final mlp layer
        // are linear, every hidden layer is activated)
        let mut next_dz = da;
        next_dz.zip_mut_with(&acts[l], |g, &a| {
            *g *= activation.derivative_from_output(a);
        });
        dz = next_dz;
    }

    (loss, grad)
}

/// Sign pattern of every hidden activation across the batch. Two parameter
/// perturbations with equal signatures kept the piecewise-linear structure
/// intact, so a central difference between them is a valid derivative probe.
pub(super) fn hidden_sign_signature<R: Real>(model: &DenoiserModel<R>, batch: &Batch<R>) -> u64 {
    use std::hash::{Hash, Hasher};
    let slices = layer_slices(&model.arch);
    let mut hasher = std::hash::DefaultHasher::new();
    for input in &batch.inputs {
        let norm = normalized_input(model, input);
        let (shape, item_len) = match &model.arch {
            ArchSpec::Mlp { widths, .. } => ((widths[0], 1), 1),
            ArchSpec::Conv1d { .. } => ((1, norm.len()), norm.len()),
        };
        let a0 = Array2::from_shape_vec(shape, norm).expect("input shape");
        let acts = forward_chunk(model, &slices, a0, item_len);
        for hidden in &acts[1..acts.len() - 1] {
            for &a in hidden.iter() {
                (a > R::zero()).hash(&mut hasher);
            }
        }
    }
    hasher.finish()
}

/// Deterministic chunk count: reductions are ordered the same way whatever
/// the thread count.
const GRAD_CHUNKS: usize = 4;

pub(super) fn batch_loss_grad<R: Real>(model: &DenoiserModel<R>, batch: &Batch<R>) -> (f64, Vec<R>) {
    assert_eq!(batch.inputs.len(), batch.targets.len());
    assert!(!batch.inputs.is_empty(), "empty batch");
    let total = batch.inputs.len();
    let out_len = batch.targets[0].len();
    let scale = 1.0 / (total * out_len) as f64;
    let slices = layer_slices(&model.arch);
    let chunk_size = total.div_ceil(GRAD_CHUNKS);
    let parts: Vec<(f64, Vec<R>)> = batch
        .inputs
        .par_chunks(chunk_size)
        .zip(batch.targets.par_chunks(chunk_size))
        .map(|(ins, tgts)| chunk_loss_grad(model, &slices, ins, tgts, scale))
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![R::zero(); model.weights.len()];
    for (l, g) in parts {
        loss += l;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += *gi;
        }
    }
    (loss, grad)
}
