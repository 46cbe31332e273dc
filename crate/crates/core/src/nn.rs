//! Dense layers, MLPs, losses, and the Adam optimizer.
//!
//! All networks in the system are stacks of fully-connected layers. Hidden
//! layers use relu; output activations vary by role (identity for encoder
//! codewords, sigmoid for pixel decoders, softmax for classifiers).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::rng::Rng;
use crate::tape::{NodeId, Tape, PROB_FLOOR};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Softmax,
}

/// One fully-connected layer: `y = activation(x · W + b)`.
///
/// Weights are `[in_dim × out_dim]`, row-major.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    /// Glorot-uniform weights in ±sqrt(6/(in+out)), zero bias.
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut Rng) -> DenseLayer {
        let bound = libm::sqrtf(6.0 / (in_dim + out_dim) as f32);
        let data: Vec<f32> = (0..in_dim * out_dim)
            .map(|_| rng.uniform(-bound, bound))
            .collect();
        DenseLayer {
            weights: Tensor::from_vec(&[in_dim, out_dim], data).unwrap(),
            bias: Tensor::zeros(&[out_dim]),
            activation,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> DenseLayer {
        DenseLayer {
            weights: Tensor::zeros(&[in_dim, out_dim]),
            bias: Tensor::zeros(&[out_dim]),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn forward_pure(&self, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.in_dim() {
            return Err(Error::Shape {
                context: "dense_forward",
                expected: format!("input width {}", self.in_dim()),
                actual: x.shape_string(),
            });
        }
        let mut out = crate::tensor::matmul(x, &self.weights)?;
        for r in 0..out.rows() {
            for (o, &b) in out.row_mut(r).iter_mut().zip(self.bias.data()) {
                *o += b;
            }
        }
        apply_activation_pure(&mut out, self.activation);
        Ok(out)
    }
}

/// Record one dense layer on the tape. Returns the output node and, when
/// `trainable`, the weight and bias leaf ids.
pub fn dense_forward(
    layer: &DenseLayer,
    tape: &mut Tape,
    x: NodeId,
    trainable: bool,
) -> Result<(NodeId, Option<(NodeId, NodeId)>)> {
    let (w, b) = if trainable {
        (tape.param(&layer.weights), tape.param(&layer.bias))
    } else {
        (
            tape.constant(layer.weights.clone()),
            tape.constant(layer.bias.clone()),
        )
    };
    let z = tape.matmul(x, w)?;
    let z = tape.add_bias(z, b)?;
    let out = match layer.activation {
        Activation::Identity => z,
        Activation::Relu => tape.relu(z),
        Activation::Sigmoid => tape.sigmoid(z),
        Activation::Softmax => tape.softmax_rows(z)?,
    };
    Ok((out, trainable.then_some((w, b))))
}

fn apply_activation_pure(t: &mut Tensor, a: Activation) {
    match a {
        Activation::Identity => {}
        Activation::Relu => t.data_mut().iter_mut().for_each(|v| {
            if *v < 0.0 {
                *v = 0.0;
            }
        }),
        Activation::Sigmoid => t.data_mut().iter_mut().for_each(|v| {
            *v = 1.0 / (1.0 + libm::expf(-*v));
        }),
        Activation::Softmax => {
            for r in 0..t.rows() {
                crate::tape::softmax_row(t.row_mut(r));
            }
        }
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

/// Handle returned by a taped forward pass: the output node plus the
/// parameter leaf ids (weight, bias per layer) when the net was trainable.
pub struct TapedNet {
    pub output: NodeId,
    pub params: Vec<NodeId>,
}

impl Mlp {
    /// Build from a dimension chain, relu on hidden layers and the given
    /// activation on the output layer.
    pub fn new(dims: &[usize], output: Activation, rng: &mut Rng) -> Mlp {
        assert!(dims.len() >= 2, "an MLP needs at least one layer");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for i in 0..dims.len() - 1 {
            let act = if i == dims.len() - 2 {
                output
            } else {
                Activation::Relu
            };
            layers.push(DenseLayer::new(dims[i], dims[i + 1], act, rng));
        }
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn forward_pure(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = self.layers[0].forward_pure(x)?;
        for layer in &self.layers[1..] {
            cur = layer.forward_pure(&cur)?;
        }
        Ok(cur)
    }

    /// Record a forward pass. Frozen nets (`trainable = false`) still let
    /// gradients flow through to their inputs; their parameters are constants.
    pub fn forward(&self, tape: &mut Tape, x: NodeId, trainable: bool) -> Result<TapedNet> {
        let mut params = Vec::new();
        let mut cur = x;
        for layer in &self.layers {
            let (out, wb) = dense_forward(layer, tape, cur, trainable)?;
            if let Some((w, b)) = wb {
                params.push(w);
                params.push(b);
            }
            cur = out;
        }
        Ok(TapedNet {
            output: cur,
            params,
        })
    }

    /// Flat view of parameter tensors: weight, bias per layer in order.
    pub fn param_tensors(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weights, &l.bias])
            .collect()
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
            .collect()
    }

    /// Parameter names for checkpointing: `<prefix>.l<i>.{w,b}`.
    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("{prefix}.l{i}.w"), format!("{prefix}.l{i}.b")])
            .collect()
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-network Adam state: first/second moments per parameter tensor plus
/// the shared step count.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step_count: u64,
}

impl AdamState {
    pub fn for_net(net: &Mlp) -> AdamState {
        let m = net
            .param_tensors()
            .iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect::<Vec<_>>();
        let v = m.clone();
        AdamState {
            m,
            v,
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One Adam step over the whole net. `grads[i]` pairs with
    /// `net.param_tensors()[i]`; `None` means zero gradient.
    pub fn step(
        &mut self,
        net: &mut Mlp,
        grads: &[Option<&Tensor>],
        cfg: &AdamConfig,
    ) -> Result<()> {
        let mut params = net.param_tensors_mut();
        if grads.len() != params.len() {
            return Err(Error::Contract(format!(
                "adam_step: {} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count;
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if let Some(g) = grad {
                if g.shape() != param.shape() {
                    return Err(Error::Shape {
                        context: "adam_step",
                        expected: param.shape_string(),
                        actual: g.shape_string(),
                    });
                }
                adam_update(
                    param.data_mut(),
                    g.data(),
                    m.data_mut(),
                    v.data_mut(),
                    t,
                    cfg,
                );
            }
            // None: zero gradient; moments decay toward zero but the
            // parameter update would be exactly zero, so skip it.
        }
        Ok(())
    }
}

/// The Adam recurrence with bias correction for one parameter tensor.
pub fn adam_update(
    param: &mut [f32],
    grad: &[f32],
    m: &mut [f32],
    v: &mut [f32],
    step: u64,
    cfg: &AdamConfig,
) {
    let b1 = cfg.beta1;
    let b2 = cfg.beta2;
    let bias1 = 1.0 - libm::powf(b1, step as f32);
    let bias2 = 1.0 - libm::powf(b2, step as f32);
    for ((p, &g), (mi, vi)) in param
        .iter_mut()
        .zip(grad)
        .zip(m.iter_mut().zip(v.iter_mut()))
    {
        *mi = b1 * *mi + (1.0 - b1) * g;
        *vi = b2 * *vi + (1.0 - b2) * g * g;
        let m_hat = *mi / bias1;
        let v_hat = *vi / bias2;
        *p -= cfg.lr * m_hat / (libm::sqrtf(v_hat) + cfg.epsilon);
    }
}

/// Collect a taped net's gradients and apply one Adam step.
pub fn apply_adam(
    net: &mut Mlp,
    state: &mut AdamState,
    taped: &TapedNet,
    grads: &crate::tape::Gradients,
    cfg: &AdamConfig,
) -> Result<()> {
    let collected: Vec<Option<&Tensor>> = taped.params.iter().map(|&id| grads.get(id)).collect();
    state.step(net, &collected, cfg)
}

// ── Pure losses and metrics ──────────────────────────────────────────────

/// Row-wise softmax of a tensor (no tape).
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.cols() < 2 {
        return Err(Error::InvalidInput(format!(
            "softmax needs at least 2 classes, got shape {:?}",
            logits.shape()
        )));
    }
    let mut out = logits.clone();
    for r in 0..out.rows() {
        crate::tape::softmax_row(out.row_mut(r));
    }
    Ok(out)
}

/// −(1/B) Σ log p(true class), probabilities floored at 1e-12.
pub fn cross_entropy_nll(probs: &Tensor, onehot: &Tensor) -> Result<f32> {
    if probs.shape() != onehot.shape() {
        return Err(Error::Shape {
            context: "cross_entropy_nll",
            expected: probs.shape_string(),
            actual: onehot.shape_string(),
        });
    }
    let mut acc = 0.0f64;
    for r in 0..probs.rows() {
        let row = onehot.row(r);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::InvalidInput(format!(
                "row {r} is not one-hot: {row:?}"
            )));
        }
        let k = row.iter().position(|&v| v == 1.0).unwrap();
        acc -= libm::log(probs.row(r)[k].max(PROB_FLOOR) as f64);
    }
    Ok((acc / probs.rows() as f64) as f32)
}

/// Mean over all elements of (a − b)².
pub fn mse(a: &Tensor, b: &Tensor) -> Result<f32> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            context: "mse",
            expected: a.shape_string(),
            actual: b.shape_string(),
        });
    }
    let acc: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = (x - y) as f64;
            d * d
        })
        .sum();
    Ok((acc / a.numel() as f64) as f32)
}

/// (1/B) Σ over rows of −Σ_k p log p, with 0·log 0 = 0.
pub fn entropy(probs: &Tensor) -> Result<f32> {
    if let Some(bad) = probs.data().iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "negative probability {bad} fed to entropy"
        )));
    }
    let mut acc = 0.0f64;
    for &v in probs.data() {
        if v > 0.0 {
            acc -= (v as f64) * libm::log(v.max(PROB_FLOOR) as f64);
        }
    }
    Ok((acc / probs.rows() as f64) as f32)
}

/// Fraction of rows where the argmax of `probs` hits the one-hot class.
pub fn accuracy(probs: &Tensor, onehot: &Tensor) -> f32 {
    let mut hits = 0usize;
    for r in 0..probs.rows() {
        let pred = argmax(probs.row(r));
        let truth = argmax(onehot.row(r));
        if pred == truth {
            hits += 1;
        }
    }
    hits as f32 / probs.rows().max(1) as f32
}

pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    let mut best_v = f32::NEG_INFINITY;
    for (i, &v) in row.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// One-hot encode byte labels into `[n × classes]`.
pub fn onehot(labels: &[u8], classes: usize) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), classes]);
    for (r, &l) in labels.iter().enumerate() {
        t.row_mut(r)[l as usize] = 1.0;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dense_identity_passthrough() {
        // W = I₂, b = 0, identity activation → output equals input.
        let mut layer = DenseLayer::zeros(2, 2, Activation::Identity);
        layer.weights.data_mut()[0] = 1.0;
        layer.weights.data_mut()[3] = 1.0;
        let x = Tensor::from_vec(&[1, 2], vec![3.0, -1.0]).unwrap();
        let y = layer.forward_pure(&x).unwrap();
        assert_eq!(y.data(), &[3.0, -1.0]);
    }

    #[test]
    fn dense_relu_clamps_negative() {
        let mut layer = DenseLayer::zeros(2, 2, Activation::Relu);
        layer.weights.data_mut()[0] = 1.0;
        layer.weights.data_mut()[3] = 1.0;
        let x = Tensor::from_vec(&[1, 2], vec![3.0, -1.0]).unwrap();
        let y = layer.forward_pure(&x).unwrap();
        assert_eq!(y.data(), &[3.0, 0.0]);
    }

    #[test]
    fn dense_forward_rejects_wrong_width() {
        let layer = DenseLayer::zeros(3, 2, Activation::Identity);
        let x = Tensor::zeros(&[1, 4]);
        match layer.forward_pure(&x) {
            Err(Error::Shape {
                expected, actual, ..
            }) => {
                assert!(expected.contains('3'), "{expected}");
                assert!(actual.contains('4'), "{actual}");
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn dense_matches_hand_dot_products() {
        // Random 4×3 layer against an explicit per-element loop.
        let mut rng = Rng::new(11);
        let layer = DenseLayer::new(4, 3, Activation::Identity, &mut rng);
        let x_data: Vec<f32> = (0..8).map(|i| (i as f32) * 0.3 - 1.0).collect();
        let x = Tensor::from_vec(&[2, 4], x_data).unwrap();
        let y = layer.forward_pure(&x).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                let mut want = layer.bias.data()[c];
                for k in 0..4 {
                    want += x.row(r)[k] * layer.weights.row(k)[c];
                }
                assert!((y.row(r)[c] - want).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn softmax_examples() {
        let y = softmax(&Tensor::from_vec(&[1, 2], vec![0.0, 0.0]).unwrap()).unwrap();
        assert!((y.data()[0] - 0.5).abs() < 1e-6);
        assert!((y.data()[1] - 0.5).abs() < 1e-6);

        let y = softmax(&Tensor::from_vec(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        let want = [0.0900, 0.2447, 0.6652];
        for (got, w) in y.data().iter().zip(&want) {
            assert!((got - w).abs() < 1e-4, "{got} vs {w}");
        }
    }

    #[test]
    fn cross_entropy_examples() {
        // Confident and correct → ≈ 0.
        let p = Tensor::from_vec(&[1, 2], vec![1.0, 0.0]).unwrap();
        let y = Tensor::from_vec(&[1, 2], vec![1.0, 0.0]).unwrap();
        assert!(cross_entropy_nll(&p, &y).unwrap().abs() < 1e-6);

        // Uniform over 10 classes → ln 10.
        let p = Tensor::from_vec(&[1, 10], vec![0.1; 10]).unwrap();
        let y = onehot(&[3], 10);
        assert!((cross_entropy_nll(&p, &y).unwrap() - 2.302585).abs() < 1e-5);

        // [[0.7, 0.3]] with true class 1 → −ln 0.3.
        let p = Tensor::from_vec(&[1, 2], vec![0.7, 0.3]).unwrap();
        let y = onehot(&[1], 2);
        assert!((cross_entropy_nll(&p, &y).unwrap() - 1.20397).abs() < 1e-4);
    }

    #[test]
    fn mse_examples() {
        let a = Tensor::from_vec(&[2], vec![1.0, 1.0]).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = Tensor::from_vec(&[2], vec![0.0, 0.0]).unwrap();
        assert_eq!(mse(&a, &b).unwrap(), 1.0);

        // Random pair against an element loop.
        let mut rng = Rng::new(3);
        let xd: Vec<f32> = (0..12).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let yd: Vec<f32> = (0..12).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let x = Tensor::from_vec(&[3, 4], xd.clone()).unwrap();
        let y = Tensor::from_vec(&[3, 4], yd.clone()).unwrap();
        let mut want = 0.0f64;
        for i in 0..12 {
            want += ((xd[i] - yd[i]) as f64).powi(2);
        }
        want /= 12.0;
        assert!((mse(&x, &y).unwrap() as f64 - want).abs() < 1e-6);
    }

    #[test]
    fn entropy_examples() {
        let uniform = Tensor::from_vec(&[1, 10], vec![0.1; 10]).unwrap();
        assert!((entropy(&uniform).unwrap() - 2.302585).abs() < 1e-5);

        let hot = onehot(&[2], 5);
        assert!(entropy(&hot).unwrap().abs() < 1e-6);

        let p = Tensor::from_vec(&[1, 3], vec![0.5, 0.25, 0.25]).unwrap();
        assert!((entropy(&p).unwrap() - 1.0397).abs() < 1e-4);
    }

    #[test]
    fn adam_zero_gradient_is_noop_on_params() {
        let mut rng = Rng::new(1);
        let mut net = Mlp::new(&[3, 2], Activation::Identity, &mut rng);
        let before: Vec<f32> = net.layers[0].weights.data().to_vec();
        let mut state = AdamState::for_net(&net);
        let zero_w = Tensor::zeros(&[3, 2]);
        let zero_b = Tensor::zeros(&[2]);
        state
            .step(
                &mut net,
                &[Some(&zero_w), Some(&zero_b)],
                &AdamConfig::default(),
            )
            .unwrap();
        assert_eq!(net.layers[0].weights.data(), &before[..]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // Scalar parameter at 0, gradient 1, lr 0.001 → param ≈ −0.001.
        let mut p = [0.0f32];
        let mut m = [0.0f32];
        let mut v = [0.0f32];
        adam_update(&mut p, &[1.0], &mut m, &mut v, 1, &AdamConfig::default());
        assert!((p[0] + 0.001).abs() < 1e-6, "{}", p[0]);
    }

    #[test]
    fn adam_constant_gradient_moves_monotonically() {
        let mut p = [0.5f32];
        let mut m = [0.0f32];
        let mut v = [0.0f32];
        let cfg = AdamConfig::default();
        let mut prev = p[0];
        for t in 1..=5 {
            adam_update(&mut p, &[2.0], &mut m, &mut v, t, &cfg);
            assert!(p[0] < prev, "step {t}: {} !< {prev}", p[0]);
            prev = p[0];
        }
    }

    #[test]
    fn softmax_rows_sum_to_one_for_random_extreme_logits() {
        let mut rng = Rng::new(77);
        for _ in 0..50 {
            let data: Vec<f32> = (0..8).map(|_| rng.uniform(-1e3, 1e3)).collect();
            let t = Tensor::from_vec(&[2, 4], data).unwrap();
            let y = softmax(&t).unwrap();
            for r in 0..2 {
                let s: f32 = y.row(r).iter().sum();
                assert!((s - 1.0).abs() < 1e-6, "row sum {s}");
                assert!(y.row(r).iter().all(|v| v.is_finite() && *v >= 0.0));
            }
        }
    }
}
