//! Gradient verification by central finite differences.
//!
//! The reference path re-evaluates the network in `f64` with plain loops —
//! fully independent of the tape — and differences each parameter with
//! ±eps perturbations. Differencing the `f32` forward directly would drown
//! the comparison in rounding noise at the tolerances we care about.
//!
//! Central differences are invalid across a relu kink, so any parameter
//! whose perturbation flips a relu activation pattern is skipped (the
//! gradient there is genuinely one-sided).

use alloc::vec::Vec;

use crate::nn::{Activation, Mlp};
use crate::tape::Tape;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Loss under which gradients are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckLoss {
    /// Mean over all output elements of (out − target)².
    MseMean,
    /// Mean over rows of −log p(true class); the net output must already be
    /// a probability row (softmax output activation).
    NllMean,
    /// Plain sum of all outputs.
    SumAll,
}

struct LayerF64 {
    w: Vec<f64>,
    b: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
    act: Activation,
}

fn mirror_f64(net: &Mlp) -> Vec<LayerF64> {
    net.layers
        .iter()
        .map(|l| LayerF64 {
            w: l.weights.data().iter().map(|&v| v as f64).collect(),
            b: l.bias.data().iter().map(|&v| v as f64).collect(),
            in_dim: l.in_dim(),
            out_dim: l.out_dim(),
            act: l.activation,
        })
        .collect()
}

/// Forward in f64; returns the loss and a hash of the relu sign pattern.
fn forward_f64(
    layers: &[LayerF64],
    x: &[f64],
    batch: usize,
    target: &Tensor,
    loss: CheckLoss,
) -> (f64, u64) {
    let mut cur = x.to_vec();
    let mut width = layers[0].in_dim;
    let mut pattern: u64 = 0xcbf29ce484222325;
    for layer in layers {
        let mut next = alloc::vec![0.0f64; batch * layer.out_dim];
        for r in 0..batch {
            for c in 0..layer.out_dim {
                let mut acc = layer.b[c];
                for k in 0..width {
                    acc += cur[r * width + k] * layer.w[k * layer.out_dim + c];
                }
                next[r * layer.out_dim + c] = acc;
            }
        }
        match layer.act {
            Activation::Identity => {}
            Activation::Relu => {
                for v in next.iter_mut() {
                    let pos = *v > 0.0;
                    pattern = (pattern ^ pos as u64).wrapping_mul(0x100000001b3);
                    if !pos {
                        *v = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for v in next.iter_mut() {
                    *v = 1.0 / (1.0 + libm::exp(-*v));
                }
            }
            Activation::Softmax => {
                for r in 0..batch {
                    let row = &mut next[r * layer.out_dim..(r + 1) * layer.out_dim];
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for v in row.iter_mut() {
                        *v = libm::exp(*v - max);
                        sum += *v;
                    }
                    for v in row.iter_mut() {
                        *v /= sum;
                    }
                }
            }
        }
        cur = next;
        width = layer.out_dim;
    }

    let loss_value = match loss {
        CheckLoss::MseMean => {
            let mut acc = 0.0;
            for (v, &t) in cur.iter().zip(target.data()) {
                let d = v - t as f64;
                acc += d * d;
            }
            acc / cur.len() as f64
        }
        CheckLoss::NllMean => {
            let mut acc = 0.0;
            for r in 0..batch {
                let k = target
                    .row(r)
                    .iter()
                    .position(|&v| v == 1.0)
                    .expect("one-hot target");
                acc -= libm::log(cur[r * width + k].max(1e-12));
            }
            acc / batch as f64
        }
        CheckLoss::SumAll => cur.iter().sum(),
    };
    (loss_value, pattern)
}

/// Compare the tape's gradients against f64 central differences on every
/// parameter of `net`. Returns the maximum relative error, where the
/// relative error is |ad − fd| / max(|ad|, |fd|, 0.01).
pub fn finite_difference_check(
    net: &Mlp,
    input: &Tensor,
    target: &Tensor,
    loss: CheckLoss,
    eps: f32,
) -> Result<f32> {
    if eps <= 0.0 {
        return Err(Error::InvalidInput(alloc::format!(
            "eps must be positive, got {eps}"
        )));
    }
    let batch = input.rows();

    // Tape gradients.
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let taped = net.forward(&mut tape, x, true)?;
    let loss_node = match loss {
        CheckLoss::MseMean => {
            let s = tape.mse_batch_sum(taped.output, target)?;
            tape.combine(&[(s, 1.0 / batch as f32)])?
        }
        CheckLoss::NllMean => {
            let s = tape.nll_sum(taped.output, target)?;
            tape.combine(&[(s, 1.0 / batch as f32)])?
        }
        CheckLoss::SumAll => tape.sum_all(taped.output),
    };
    let grads = tape.backward(loss_node)?;
    let ad_grads: Vec<Tensor> = taped
        .params
        .iter()
        .map(|&id| {
            grads
                .get(id)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(tape.value(id).shape()))
        })
        .collect();

    // f64 reference with central differences.
    let mut mirror = mirror_f64(net);
    let x64: Vec<f64> = input.data().iter().map(|&v| v as f64).collect();
    let eps64 = eps as f64;
    let mut max_rel = 0.0f32;

    // params order: weight, bias per layer — matches TapedNet.
    let mut param_idx = 0usize;
    for li in 0..mirror.len() {
        for which in 0..2 {
            let ad = &ad_grads[param_idx];
            let n = if which == 0 {
                mirror[li].w.len()
            } else {
                mirror[li].b.len()
            };
            for i in 0..n {
                let orig = if which == 0 {
                    mirror[li].w[i]
                } else {
                    mirror[li].b[i]
                };

                set(&mut mirror, li, which, i, orig + eps64);
                let (lp, pat_p) = forward_f64(&mirror, &x64, batch, target, loss);
                set(&mut mirror, li, which, i, orig - eps64);
                let (lm, pat_m) = forward_f64(&mirror, &x64, batch, target, loss);
                set(&mut mirror, li, which, i, orig);

                if pat_p != pat_m {
                    // Perturbation crossed a relu kink; the two-sided
                    // difference is meaningless there.
                    continue;
                }
                let fd = ((lp - lm) / (2.0 * eps64)) as f32;
                let a = ad.data()[i];
                let denom = a.abs().max(fd.abs()).max(0.01);
                let rel = (a - fd).abs() / denom;
                if rel > max_rel {
                    max_rel = rel;
                }
            }
            param_idx += 1;
        }
    }
    Ok(max_rel)
}

fn set(mirror: &mut [LayerF64], layer: usize, which: usize, i: usize, v: f64) {
    if which == 0 {
        mirror[layer].w[i] = v;
    } else {
        mirror[layer].b[i] = v;
    }
}
