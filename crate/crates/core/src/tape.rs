//! Reverse-mode differentiation over an operation tape.
//!
//! A forward pass records primitive operations into a [`Tape`]; `backward`
//! replays them once in reverse topological order (which is simply reverse
//! insertion order), accumulating adjoints. Nodes that no parameter feeds
//! into carry `requires_grad = false` and are skipped entirely, so frozen
//! networks and channel noise cost nothing on the way back.
//!
//! Scalar reductions accumulate in `f64` before narrowing to `f32`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::{matmul_at_into, matmul_bt_into, matmul_into, Tensor};
use crate::{Error, Result};

/// Probability floor applied inside every logarithm.
pub const PROB_FLOOR: f32 = 1e-12;

pub type NodeId = usize;

enum Op {
    Leaf,
    /// x [B×i] · w [i×o]
    MatMul { x: NodeId, w: NodeId },
    /// x [B×o] + bias [o] broadcast over rows
    AddBias { x: NodeId, bias: NodeId },
    Relu { x: NodeId },
    Sigmoid { x: NodeId },
    SoftmaxRows { x: NodeId },
    ConcatCols { a: NodeId, b: NodeId },
    SliceCols { x: NodeId, start: usize, len: usize },
    /// Row-wise scale to unit average power: y = x / sqrt(mean(x²)).
    RowUnitPower { x: NodeId },
    /// One global scale so the whole tensor has unit mean square.
    BatchUnitPower { x: NodeId },
    /// y = x + z with z held constant in backward.
    AddNoise { x: NodeId },
    /// Σ over rows of the per-row mean squared error against a constant target.
    MseBatchSum { pred: NodeId, target: Tensor },
    /// −Σ over rows of log(probability of the one-hot class).
    NllSum { probs: NodeId, onehot: Tensor },
    /// Σ over rows of −Σ_k p log p.
    EntropySum { probs: NodeId },
    /// Σ over rows of log(p₁ / p₀) for two-column probability rows, each
    /// row's ratio clamped to ±clamp (∞ disables clamping).
    LogRatioSum { probs2: NodeId, clamp: f32 },
    SumAll { x: NodeId },
    /// Weighted sum of scalar nodes.
    Combine { terms: Vec<(NodeId, f32)> },
}

struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Gradients keyed by the node id of each recorded leaf.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.grads.get_mut(id).and_then(|g| g.take())
    }
}

pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        id
    }

    fn req(&self, id: NodeId) -> bool {
        self.nodes[id].requires_grad
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    /// Record a constant; no gradient flows into it.
    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Leaf, t, false)
    }

    /// Record a trainable parameter leaf (copies the tensor).
    pub fn param(&mut self, t: &Tensor) -> NodeId {
        self.push(Op::Leaf, t.clone(), true)
    }

    pub fn matmul(&mut self, x: NodeId, w: NodeId) -> Result<NodeId> {
        let (xm, xk) = (self.value(x).rows(), self.value(x).cols());
        let (wk, wn) = (self.value(w).rows(), self.value(w).cols());
        if xk != wk {
            return Err(Error::Shape {
                context: "tape::matmul",
                expected: format!("input width {wk} (weight {:?})", self.value(w).shape()),
                actual: format!("input {:?}", self.value(x).shape()),
            });
        }
        let mut out = Tensor::zeros(&[xm, wn]);
        matmul_into(
            self.value(x).data(),
            self.value(w).data(),
            out.data_mut(),
            xm,
            xk,
            wn,
        );
        let rg = self.req(x) || self.req(w);
        Ok(self.push(Op::MatMul { x, w }, out, rg))
    }

    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let w = self.value(x).cols();
        if self.value(bias).numel() != w {
            return Err(Error::Shape {
                context: "tape::add_bias",
                expected: format!("bias of width {w}"),
                actual: self.value(bias).shape_string(),
            });
        }
        let mut out = self.value(x).clone();
        let b = self.value(bias).data();
        for r in 0..out.rows() {
            for (o, &bv) in out.row_mut(r).iter_mut().zip(b) {
                *o += bv;
            }
        }
        let rg = self.req(x) || self.req(bias);
        Ok(self.push(Op::AddBias { x, bias }, out, rg))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| {
            if *v < 0.0 {
                *v = 0.0;
            }
        });
        let rg = self.req(x);
        self.push(Op::Relu { x }, out, rg)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| {
            *v = 1.0 / (1.0 + libm::expf(-*v));
        });
        let rg = self.req(x);
        self.push(Op::Sigmoid { x }, out, rg)
    }

    /// Row-wise softmax, stabilized by max subtraction. Requires width ≥ 2.
    pub fn softmax_rows(&mut self, x: NodeId) -> Result<NodeId> {
        if self.value(x).cols() < 2 {
            return Err(Error::InvalidInput(format!(
                "softmax needs at least 2 classes, got shape {:?}",
                self.value(x).shape()
            )));
        }
        let mut out = self.value(x).clone();
        for r in 0..out.rows() {
            softmax_row(out.row_mut(r));
        }
        let rg = self.req(x);
        Ok(self.push(Op::SoftmaxRows { x }, out, rg))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ra, ca) = (self.value(a).rows(), self.value(a).cols());
        let (rb, cb) = (self.value(b).rows(), self.value(b).cols());
        if ra != rb {
            return Err(Error::Shape {
                context: "tape::concat_cols",
                expected: format!("{ra} rows"),
                actual: format!("{rb} rows"),
            });
        }
        let mut out = Tensor::zeros(&[ra, ca + cb]);
        for r in 0..ra {
            let row = out.row_mut(r);
            row[..ca].copy_from_slice(self.value(a).row(r));
            row[ca..].copy_from_slice(self.value(b).row(r));
        }
        let rg = self.req(a) || self.req(b);
        Ok(self.push(Op::ConcatCols { a, b }, out, rg))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (rows, cols) = (self.value(x).rows(), self.value(x).cols());
        if start + len > cols {
            return Err(Error::Shape {
                context: "tape::slice_cols",
                expected: format!("slice within width {cols}"),
                actual: format!("[{start}, {})", start + len),
            });
        }
        let mut out = Tensor::zeros(&[rows, len]);
        for r in 0..rows {
            out.row_mut(r)
                .copy_from_slice(&self.value(x).row(r)[start..start + len]);
        }
        let rg = self.req(x);
        Ok(self.push(Op::SliceCols { x, start, len }, out, rg))
    }

    /// Scale each row to unit average power. Errors on an all-zero row.
    pub fn row_unit_power(&mut self, x: NodeId) -> Result<NodeId> {
        let mut out = self.value(x).clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let rms = row_rms(row);
            if rms == 0.0 {
                return Err(Error::Degenerate(format!(
                    "row {r} is all zeros, cannot normalize power"
                )));
            }
            row.iter_mut().for_each(|v| *v /= rms);
        }
        let rg = self.req(x);
        Ok(self.push(Op::RowUnitPower { x }, out, rg))
    }

    /// Scale the whole tensor by one factor so its mean squared entry is 1.
    /// Unlike the per-row op this keeps relative row powers, so an affine
    /// receiver can undo data-dependent mixing exactly.
    pub fn batch_unit_power(&mut self, x: NodeId) -> Result<NodeId> {
        let rms = batch_rms(self.value(x).data());
        if rms == 0.0 {
            return Err(Error::Degenerate(
                "all-zero tensor, cannot normalize power".into(),
            ));
        }
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v /= rms);
        let rg = self.req(x);
        Ok(self.push(Op::BatchUnitPower { x }, out, rg))
    }

    /// Add a constant noise tensor; the gradient passes through unchanged.
    pub fn add_noise(&mut self, x: NodeId, noise: &Tensor) -> Result<NodeId> {
        if noise.shape() != self.value(x).shape() {
            return Err(Error::Shape {
                context: "tape::add_noise",
                expected: self.value(x).shape_string(),
                actual: noise.shape_string(),
            });
        }
        let mut out = self.value(x).clone();
        for (o, &z) in out.data_mut().iter_mut().zip(noise.data()) {
            *o += z;
        }
        let rg = self.req(x);
        Ok(self.push(Op::AddNoise { x }, out, rg))
    }

    /// Sum over rows of the per-row mean squared error against `target`.
    pub fn mse_batch_sum(&mut self, pred: NodeId, target: &Tensor) -> Result<NodeId> {
        if target.shape() != self.value(pred).shape() {
            return Err(Error::Shape {
                context: "tape::mse_batch_sum",
                expected: self.value(pred).shape_string(),
                actual: target.shape_string(),
            });
        }
        let cols = self.value(pred).cols().max(1);
        let mut acc = 0.0f64;
        for (p, t) in self.value(pred).data().iter().zip(target.data()) {
            let d = (*p - *t) as f64;
            acc += d * d;
        }
        let value = Tensor::scalar((acc / cols as f64) as f32);
        let rg = self.req(pred);
        Ok(self.push(
            Op::MseBatchSum {
                pred,
                target: target.clone(),
            },
            value,
            rg,
        ))
    }

    /// −Σ over rows of log p(true class). Validates the one-hot targets.
    pub fn nll_sum(&mut self, probs: NodeId, onehot: &Tensor) -> Result<NodeId> {
        if onehot.shape() != self.value(probs).shape() {
            return Err(Error::Shape {
                context: "tape::nll_sum",
                expected: self.value(probs).shape_string(),
                actual: onehot.shape_string(),
            });
        }
        validate_onehot(onehot)?;
        let p = self.value(probs);
        let mut acc = 0.0f64;
        for r in 0..p.rows() {
            let k = hot_index(onehot.row(r));
            acc -= libm::log(p.row(r)[k].max(PROB_FLOOR) as f64);
        }
        let value = Tensor::scalar(acc as f32);
        let rg = self.req(probs);
        Ok(self.push(
            Op::NllSum {
                probs,
                onehot: onehot.clone(),
            },
            value,
            rg,
        ))
    }

    /// Σ over rows of the Shannon entropy of each probability row (nats).
    pub fn entropy_sum(&mut self, probs: NodeId) -> Result<NodeId> {
        let p = self.value(probs);
        if let Some(bad) = p.data().iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "negative probability {bad} fed to entropy"
            )));
        }
        let mut acc = 0.0f64;
        for &v in p.data() {
            if v > 0.0 {
                acc -= (v as f64) * libm::log(v.max(PROB_FLOOR) as f64);
            }
        }
        let value = Tensor::scalar(acc as f32);
        let rg = self.req(probs);
        Ok(self.push(Op::EntropySum { probs }, value, rg))
    }

    /// Σ over rows of log(p₁/p₀) where each row is a floored two-class
    /// probability vector; column 1 is the "joint" class.
    pub fn log_ratio_sum(&mut self, probs2: NodeId) -> Result<NodeId> {
        self.log_ratio_sum_clamped(probs2, f32::INFINITY)
    }

    /// As `log_ratio_sum` but with each row's ratio clamped to ±clamp;
    /// clamped rows contribute zero gradient.
    pub fn log_ratio_sum_clamped(&mut self, probs2: NodeId, clamp: f32) -> Result<NodeId> {
        let p = self.value(probs2);
        if p.cols() != 2 {
            return Err(Error::Shape {
                context: "tape::log_ratio_sum",
                expected: "[B, 2]".into(),
                actual: p.shape_string(),
            });
        }
        let mut acc = 0.0f64;
        for r in 0..p.rows() {
            let row = p.row(r);
            let lr = (libm::log(row[1].max(PROB_FLOOR) as f64)
                - libm::log(row[0].max(PROB_FLOOR) as f64)) as f32;
            acc += lr.clamp(-clamp, clamp) as f64;
        }
        let value = Tensor::scalar(acc as f32);
        let rg = self.req(probs2);
        Ok(self.push(Op::LogRatioSum { probs2, clamp }, value, rg))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let acc: f64 = self.value(x).data().iter().map(|&v| v as f64).sum();
        let rg = self.req(x);
        self.push(Op::SumAll { x }, Tensor::scalar(acc as f32), rg)
    }

    /// Weighted sum of scalar nodes.
    pub fn combine(&mut self, terms: &[(NodeId, f32)]) -> Result<NodeId> {
        let mut acc = 0.0f64;
        for &(id, c) in terms {
            if !self.value(id).is_scalar() {
                return Err(Error::Contract(format!(
                    "combine expects scalar nodes, node {id} has shape {:?}",
                    self.value(id).shape()
                )));
            }
            acc += c as f64 * self.value(id).scalar_value() as f64;
        }
        let rg = terms.iter().any(|&(id, _)| self.req(id));
        Ok(self.push(
            Op::Combine {
                terms: terms.to_vec(),
            },
            Tensor::scalar(acc as f32),
            rg,
        ))
    }

    /// Reverse pass from a scalar loss node. Returns one adjoint per node id;
    /// leaves that nothing recorded against stay `None` (read as zero).
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss] = Some(Tensor::scalar(1.0));

        for id in (0..=loss).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            let Some(dout) = grads[id].take() else {
                continue;
            };
            self.backward_op(id, &dout, &mut grads);
            grads[id] = Some(dout);
        }
        Ok(Gradients { grads })
    }

    fn backward_op(&self, id: NodeId, dout: &Tensor, grads: &mut [Option<Tensor>]) {
        let accumulate = |grads: &mut [Option<Tensor>], target: NodeId, contrib: Tensor| {
            match &mut grads[target] {
                Some(existing) => {
                    for (e, c) in existing.data_mut().iter_mut().zip(contrib.data()) {
                        *e += c;
                    }
                }
                slot => *slot = Some(contrib),
            }
        };

        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::MatMul { x, w } => {
                let (m, k) = (self.value(*x).rows(), self.value(*x).cols());
                let n = self.value(*w).cols();
                if self.req(*x) {
                    // dX = dOut · Wᵀ
                    let mut dx = Tensor::zeros(&[m, k]);
                    matmul_bt_into(dout.data(), self.value(*w).data(), dx.data_mut(), m, n, k);
                    accumulate(grads, *x, dx);
                }
                if self.req(*w) {
                    // dW = Xᵀ · dOut
                    let mut dw = Tensor::zeros(&[k, n]);
                    matmul_at_into(self.value(*x).data(), dout.data(), dw.data_mut(), m, k, n);
                    accumulate(grads, *w, dw);
                }
            }
            Op::AddBias { x, bias } => {
                if self.req(*x) {
                    accumulate(grads, *x, dout.clone());
                }
                if self.req(*bias) {
                    let w = dout.cols();
                    let mut db = Tensor::zeros(&[w]);
                    for r in 0..dout.rows() {
                        for (d, &g) in db.data_mut().iter_mut().zip(dout.row(r)) {
                            *d += g;
                        }
                    }
                    accumulate(grads, *bias, db);
                }
            }
            Op::Relu { x } => {
                if self.req(*x) {
                    let mut dx = dout.clone();
                    // Gradient at exactly 0 is defined as 0.
                    for (d, &xv) in dx.data_mut().iter_mut().zip(self.value(*x).data()) {
                        if xv <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(grads, *x, dx);
                }
            }
            Op::Sigmoid { x } => {
                if self.req(*x) {
                    let y = &self.nodes[id].value;
                    let mut dx = dout.clone();
                    for (d, &yv) in dx.data_mut().iter_mut().zip(y.data()) {
                        *d *= yv * (1.0 - yv);
                    }
                    accumulate(grads, *x, dx);
                }
            }
            Op::SoftmaxRows { x } => {
                if self.req(*x) {
                    let y = &self.nodes[id].value;
                    let mut dx = Tensor::zeros(&[y.rows(), y.cols()]);
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let dr = dout.row(r);
                        let dot: f32 = yr.iter().zip(dr).map(|(a, b)| a * b).sum();
                        for ((o, &yv), &dv) in dx.row_mut(r).iter_mut().zip(yr).zip(dr) {
                            *o = yv * (dv - dot);
                        }
                    }
                    accumulate(grads, *x, dx);
                }
            }
            Op::ConcatCols { a, b } => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let rows = dout.rows();
                if self.req(*a) {
                    let mut da = Tensor::zeros(&[rows, ca]);
                    for r in 0..rows {
                        da.row_mut(r).copy_from_slice(&dout.row(r)[..ca]);
                    }
                    accumulate(grads, *a, da);
                }
                if self.req(*b) {
                    let mut db = Tensor::zeros(&[rows, cb]);
                    for r in 0..rows {
                        db.row_mut(r).copy_from_slice(&dout.row(r)[ca..]);
                    }
                    accumulate(grads, *b, db);
                }
            }
            Op::SliceCols { x, start, len } => {
                if self.req(*x) {
                    let (rows, cols) = (self.value(*x).rows(), self.value(*x).cols());
                    let mut dx = Tensor::zeros(&[rows, cols]);
                    for r in 0..rows {
                        dx.row_mut(r)[*start..start + len].copy_from_slice(dout.row(r));
                    }
                    accumulate(grads, *x, dx);
                }
            }
            Op::RowUnitPower { x } => {
                if self.req(*x) {
                    let xin = self.value(*x);
                    let y = &self.nodes[id].value;
                    let cols = xin.cols();
                    let mut dx = Tensor::zeros(&[xin.rows(), cols]);
                    for r in 0..xin.rows() {
                        let rms = row_rms(xin.row(r));
                        let yr = y.row(r);
                        let dr = dout.row(r);
                        let dot: f32 = yr.iter().zip(dr).map(|(a, b)| a * b).sum();
                        let c = dot / cols as f32;
                        for ((o, &yv), &dv) in dx.row_mut(r).iter_mut().zip(yr).zip(dr) {
                            *o = (dv - yv * c) / rms;
                        }
                    }
                    accumulate(grads, *x, dx);
                }
            }
            Op::BatchUnitPower { x } => {
                if self.req(*x) {
                    let xin = self.value(*x);
                    let y = &self.nodes[id].value;
                    let rms = batch_rms(xin.data());
                    let n = xin.numel() as f32;
                    let dot: f32 = y.data().iter().zip(dout.data()).map(|(a, b)| a * b).sum();
                    let c = dot / n;
                    let mut dx = Tensor::zeros(xin.shape());
                    for ((o, &yv), &dv) in
                        dx.data_mut().iter_mut().zip(y.data()).zip(dout.data())
                    {
                        *o = (dv - yv * c) / rms;
                    }
                    accumulate(grads, *x, dx);
                }
            }
            Op::AddNoise { x } => {
                if self.req(*x) {
                    accumulate(grads, *x, dout.clone());
                }
            }
            Op::MseBatchSum { pred, target } => {
                if self.req(*pred) {
                    let g = dout.scalar_value();
                    let p = self.value(*pred);
                    let scale = 2.0 * g / p.cols().max(1) as f32;
                    let mut dp = Tensor::zeros(&[p.rows(), p.cols()]);
                    for ((o, &pv), &tv) in
                        dp.data_mut().iter_mut().zip(p.data()).zip(target.data())
                    {
                        *o = scale * (pv - tv);
                    }
                    accumulate(grads, *pred, dp);
                }
            }
            Op::NllSum { probs, onehot } => {
                if self.req(*probs) {
                    let g = dout.scalar_value();
                    let p = self.value(*probs);
                    let mut dp = Tensor::zeros(&[p.rows(), p.cols()]);
                    for r in 0..p.rows() {
                        let k = hot_index(onehot.row(r));
                        dp.row_mut(r)[k] = -g / p.row(r)[k].max(PROB_FLOOR);
                    }
                    accumulate(grads, *probs, dp);
                }
            }
            Op::EntropySum { probs } => {
                if self.req(*probs) {
                    let g = dout.scalar_value();
                    let p = self.value(*probs);
                    let mut dp = Tensor::zeros(&[p.rows(), p.cols()]);
                    for (o, &pv) in dp.data_mut().iter_mut().zip(p.data()) {
                        *o = -g * (libm::logf(pv.max(PROB_FLOOR)) + 1.0);
                    }
                    accumulate(grads, *probs, dp);
                }
            }
            Op::LogRatioSum { probs2, clamp } => {
                if self.req(*probs2) {
                    let g = dout.scalar_value();
                    let p = self.value(*probs2);
                    let mut dp = Tensor::zeros(&[p.rows(), 2]);
                    for r in 0..p.rows() {
                        let row = p.row(r);
                        let lr = libm::logf(row[1].max(PROB_FLOOR))
                            - libm::logf(row[0].max(PROB_FLOOR));
                        if lr.abs() >= *clamp {
                            continue;
                        }
                        let d = dp.row_mut(r);
                        d[1] = g / row[1].max(PROB_FLOOR);
                        d[0] = -g / row[0].max(PROB_FLOOR);
                    }
                    accumulate(grads, *probs2, dp);
                }
            }
            Op::SumAll { x } => {
                if self.req(*x) {
                    let g = dout.scalar_value();
                    let mut dx = Tensor::zeros(self.value(*x).shape());
                    dx.fill(g);
                    accumulate(grads, *x, dx);
                }
            }
            Op::Combine { terms } => {
                let g = dout.scalar_value();
                for &(tid, c) in terms {
                    if self.req(tid) {
                        accumulate(grads, tid, Tensor::scalar(g * c));
                    }
                }
            }
        }
    }
}

fn row_rms(row: &[f32]) -> f32 {
    let acc: f64 = row.iter().map(|&v| (v as f64) * (v as f64)).sum();
    libm::sqrtf((acc / row.len() as f64) as f32)
}

fn batch_rms(data: &[f32]) -> f32 {
    row_rms(data)
}

pub(crate) fn softmax_row(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for v in row.iter_mut() {
        *v = libm::expf(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn hot_index(row: &[f32]) -> usize {
    row.iter().position(|&v| v == 1.0).unwrap_or(0)
}

fn validate_onehot(t: &Tensor) -> Result<()> {
    for r in 0..t.rows() {
        let row = t.row(r);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::InvalidInput(format!(
                "row {r} is not one-hot: {row:?}"
            )));
        }
    }
    Ok(())
}
