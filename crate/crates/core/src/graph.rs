//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! A [`Graph`] is a tape: every operation appends a node recording its input
//! ids and output tensor, so insertion order is already a topological order.
//! `backward` walks the nodes in exact reverse insertion order and is an
//! error to call twice; a fresh graph is built per training step, so
//! gradients can never silently accumulate across steps.

use crate::error::{Error, Result};
use crate::kernels::{self, ConvDims};
use crate::scalar::Scalar;
use crate::tensor::{conv_out_size, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// The differentiable operations a graph can record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Conv2d,
    Relu,
    UpsampleNearest,
    Add,
    GlobalAvgPool,
    Linear,
    Softmax,
    CrossEntropy,
}

impl OpKind {
    /// Every op the graph can record, in a fixed order; the gradient-check
    /// suite is validated against this list for coverage.
    pub const ALL: [OpKind; 8] = [
        OpKind::Conv2d,
        OpKind::Relu,
        OpKind::UpsampleNearest,
        OpKind::Add,
        OpKind::GlobalAvgPool,
        OpKind::Linear,
        OpKind::Softmax,
        OpKind::CrossEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Conv2d => "conv2d",
            OpKind::Relu => "relu",
            OpKind::UpsampleNearest => "upsample_nearest",
            OpKind::Add => "add",
            OpKind::GlobalAvgPool => "global_avg_pool",
            OpKind::Linear => "linear",
            OpKind::Softmax => "softmax",
            OpKind::CrossEntropy => "cross_entropy",
        }
    }
}

enum OpRecord<F: Scalar> {
    Leaf,
    Conv2d {
        x: Var,
        kernel: Var,
        bias: Var,
        dims: ConvDims,
    },
    Relu {
        x: Var,
    },
    UpsampleNearest {
        x: Var,
        factor: usize,
    },
    Add {
        lhs: Var,
        rhs: Var,
    },
    GlobalAvgPool {
        x: Var,
    },
    Linear {
        x: Var,
        weight: Var,
        bias: Var,
    },
    Softmax {
        logits: Var,
    },
    CrossEntropy {
        probs: Var,
        labels: Tensor<F>,
        /// When `probs` is the output of a softmax node, its logits input;
        /// the backward pass then writes (p - y)/N straight to the logits,
        /// bypassing the softmax Jacobian.
        fused_logits: Option<Var>,
    },
}

struct Node<F: Scalar> {
    op: OpRecord<F>,
    value: Tensor<F>,
}

/// Probability floor applied before the log in the cross-entropy loss.
pub const PROB_FLOOR: f64 = 1e-12;

pub struct Graph<F: Scalar> {
    nodes: Vec<Node<F>>,
    backward_run: bool,
}

impl<F: Scalar> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Graph<F> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            backward_run: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert a tensor as a leaf node.
    pub fn leaf(&mut self, tensor: Tensor<F>) -> Var {
        self.push(OpRecord::Leaf, tensor)
    }

    pub fn value(&self, var: Var) -> &Tensor<F> {
        &self.nodes[var.0].value
    }

    /// Gradient of the last `backward` seed w.r.t. this node, if it was
    /// computed (the node requires grad and participates in the loss).
    pub fn grad(&self, var: Var) -> Option<&[F]> {
        self.nodes[var.0].value.grad()
    }

    pub fn op_kind(&self, var: Var) -> Option<OpKind> {
        match self.nodes[var.0].op {
            OpRecord::Leaf => None,
            OpRecord::Conv2d { .. } => Some(OpKind::Conv2d),
            OpRecord::Relu { .. } => Some(OpKind::Relu),
            OpRecord::UpsampleNearest { .. } => Some(OpKind::UpsampleNearest),
            OpRecord::Add { .. } => Some(OpKind::Add),
            OpRecord::GlobalAvgPool { .. } => Some(OpKind::GlobalAvgPool),
            OpRecord::Linear { .. } => Some(OpKind::Linear),
            OpRecord::Softmax { .. } => Some(OpKind::Softmax),
            OpRecord::CrossEntropy { .. } => Some(OpKind::CrossEntropy),
        }
    }

    fn push(&mut self, op: OpRecord<F>, value: Tensor<F>) -> Var {
        // Inputs below sqrt(MAX)/1e6 cannot overflow any kernel here: a
        // product of two stays 1e12 under MAX, leaving room for desk-scale
        // sums. Under that gate any non-finite output is a bug. A diverging
        // run blows past the gate and reaches the training loop's loss
        // guard instead, which aborts naming epoch and batch.
        #[cfg(debug_assertions)]
        if !matches!(op, OpRecord::Leaf) && !value.all_finite() {
            let bound = F::max_value().sqrt() / F::from(1e6).unwrap();
            let inputs_sane = self.op_inputs(&op).iter().all(|v| {
                self.nodes[v.0]
                    .value
                    .data()
                    .iter()
                    .all(|x| x.is_finite() && x.abs() < bound)
            });
            debug_assert!(
                !inputs_sane,
                "non-finite value produced by a forward op on bounded finite inputs"
            );
        }
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    #[cfg(debug_assertions)]
    fn op_inputs(&self, op: &OpRecord<F>) -> Vec<Var> {
        match op {
            OpRecord::Leaf => Vec::new(),
            OpRecord::Conv2d { x, kernel, bias, .. } => vec![*x, *kernel, *bias],
            OpRecord::Relu { x } | OpRecord::UpsampleNearest { x, .. } => vec![*x],
            OpRecord::Add { lhs, rhs } => vec![*lhs, *rhs],
            OpRecord::GlobalAvgPool { x } => vec![*x],
            OpRecord::Linear { x, weight, bias } => vec![*x, *weight, *bias],
            OpRecord::Softmax { logits } => vec![*logits],
            OpRecord::CrossEntropy { probs, .. } => vec![*probs],
        }
    }

    fn any_requires_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].value.requires_grad())
    }

    /// Direct cross-correlation with zero padding over NCHW input.
    pub fn conv2d(
        &mut self,
        x: Var,
        kernel: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let (n, c_in, h, w) = self.value(x).dims4("conv2d")?;
        let (c_out, kc_in, kh, kw) = self.value(kernel).dims4("conv2d")?;
        if kc_in != c_in {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: self.value(x).shape().to_vec(),
                rhs: self.value(kernel).shape().to_vec(),
            });
        }
        if self.value(bias).shape() != [c_out] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: self.value(kernel).shape().to_vec(),
                rhs: self.value(bias).shape().to_vec(),
            });
        }
        if stride == 0 {
            return Err(Error::InvalidOperand {
                op: "conv2d",
                msg: "stride must be positive".into(),
            });
        }
        let h_out = conv_out_size(h, kh, stride, padding)?;
        let w_out = conv_out_size(w, kw, stride, padding)?;
        let dims = ConvDims {
            n,
            c_in,
            h,
            w,
            c_out,
            kh,
            kw,
            stride,
            padding,
            h_out,
            w_out,
        };
        let data = kernels::conv2d_forward(
            self.value(x).data(),
            self.value(kernel).data(),
            self.value(bias).data(),
            &dims,
        );
        let out = Tensor::new(vec![n, c_out, h_out, w_out], data)?
            .with_requires_grad(self.any_requires_grad(&[x, kernel, bias]));
        Ok(self.push(
            OpRecord::Conv2d {
                x,
                kernel,
                bias,
                dims,
            },
            out,
        ))
    }

    /// Elementwise max(0, x). The subgradient at exactly 0 is 0.
    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let xt = self.value(x);
        let data = xt
            .data()
            .iter()
            .map(|&v| if v > F::zero() { v } else { F::zero() })
            .collect();
        let out = Tensor::new(xt.shape().to_vec(), data)?
            .with_requires_grad(self.any_requires_grad(&[x]));
        Ok(self.push(OpRecord::Relu { x }, out))
    }

    /// Replicate each spatial cell factor x factor times.
    pub fn upsample_nearest(&mut self, x: Var, factor: usize) -> Result<Var> {
        if factor < 1 {
            return Err(Error::InvalidOperand {
                op: "upsample_nearest",
                msg: "factor must be >= 1".into(),
            });
        }
        let (n, c, h, w) = self.value(x).dims4("upsample_nearest")?;
        let data = kernels::upsample_forward(self.value(x).data(), n, c, h, w, factor);
        let out = Tensor::new(vec![n, c, h * factor, w * factor], data)?
            .with_requires_grad(self.any_requires_grad(&[x]));
        Ok(self.push(OpRecord::UpsampleNearest { x, factor }, out))
    }

    /// Elementwise sum of two same-shaped tensors.
    pub fn add(&mut self, lhs: Var, rhs: Var) -> Result<Var> {
        if self.value(lhs).shape() != self.value(rhs).shape() {
            return Err(Error::ShapeMismatch {
                op: "add",
                lhs: self.value(lhs).shape().to_vec(),
                rhs: self.value(rhs).shape().to_vec(),
            });
        }
        let data = self
            .value(lhs)
            .data()
            .iter()
            .zip(self.value(rhs).data())
            .map(|(&a, &b)| a + b)
            .collect();
        let out = Tensor::new(self.value(lhs).shape().to_vec(), data)?
            .with_requires_grad(self.any_requires_grad(&[lhs, rhs]));
        Ok(self.push(OpRecord::Add { lhs, rhs }, out))
    }

    /// Per-channel spatial mean: [n, c, h, w] -> [n, c].
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4("global_avg_pool")?;
        let data = kernels::gap_forward(self.value(x).data(), n, c, h, w);
        let out =
            Tensor::new(vec![n, c], data)?.with_requires_grad(self.any_requires_grad(&[x]));
        Ok(self.push(OpRecord::GlobalAvgPool { x }, out))
    }

    /// y = x * w^T + b with x: [n, c], w: [k, c], b: [k].
    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let (n, c) = self.value(x).dims2("linear")?;
        let (k, wc) = self.value(weight).dims2("linear")?;
        if wc != c {
            return Err(Error::ShapeMismatch {
                op: "linear",
                lhs: self.value(x).shape().to_vec(),
                rhs: self.value(weight).shape().to_vec(),
            });
        }
        if self.value(bias).shape() != [k] {
            return Err(Error::ShapeMismatch {
                op: "linear",
                lhs: self.value(weight).shape().to_vec(),
                rhs: self.value(bias).shape().to_vec(),
            });
        }
        let data = kernels::linear_forward(
            self.value(x).data(),
            self.value(weight).data(),
            self.value(bias).data(),
            n,
            c,
            k,
        );
        let out = Tensor::new(vec![n, k], data)?
            .with_requires_grad(self.any_requires_grad(&[x, weight, bias]));
        Ok(self.push(OpRecord::Linear { x, weight, bias }, out))
    }

    /// Row-wise softmax, computed with max-subtraction for stability.
    pub fn softmax(&mut self, logits: Var) -> Result<Var> {
        let (n, k) = self.value(logits).dims2("softmax")?;
        if k < 1 {
            return Err(Error::InvalidOperand {
                op: "softmax",
                msg: "needs at least one class".into(),
            });
        }
        let data = kernels::softmax_forward(self.value(logits).data(), n, k);
        let out = Tensor::new(vec![n, k], data)?
            .with_requires_grad(self.any_requires_grad(&[logits]));
        Ok(self.push(OpRecord::Softmax { logits }, out))
    }

    /// Mean negative log-likelihood of one-hot `labels` under `probs`.
    ///
    /// Probabilities are clamped below at [`PROB_FLOOR`] before the log. When
    /// `probs` comes straight from a softmax node, the backward pass uses the
    /// fused (p - y)/N form w.r.t. the logits.
    pub fn cross_entropy(&mut self, probs: Var, labels: &Tensor<F>) -> Result<Var> {
        let (n, k) = self.value(probs).dims2("cross_entropy")?;
        if labels.shape() != [n, k] {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                lhs: self.value(probs).shape().to_vec(),
                rhs: labels.shape().to_vec(),
            });
        }
        for i in 0..n {
            let row = &labels.data()[i * k..(i + 1) * k];
            let ones = row.iter().filter(|&&v| v == F::one()).count();
            let zeros = row.iter().filter(|&&v| v == F::zero()).count();
            if ones != 1 || zeros != k - 1 {
                return Err(Error::NotOneHot { row: i });
            }
        }
        let floor = F::from(PROB_FLOOR).unwrap();
        let p = self.value(probs).data();
        let y = labels.data();
        let mut acc = F::zero();
        for i in 0..n * k {
            if y[i] == F::one() {
                // the floor must not swallow NaN: a poisoned probability has
                // to surface as a non-finite loss for the training guard
                let q = if p[i].is_nan() { p[i] } else { p[i].max(floor) };
                acc += q.ln();
            }
        }
        let loss = -acc / F::from(n).unwrap();
        let fused_logits = match self.nodes[probs.0].op {
            OpRecord::Softmax { logits } => Some(logits),
            _ => None,
        };
        let out =
            Tensor::scalar(loss).with_requires_grad(self.any_requires_grad(&[probs]));
        Ok(self.push(
            OpRecord::CrossEntropy {
                probs,
                labels: labels.clone(),
                fused_logits,
            },
            out,
        ))
    }

    /// Smallest nonzero |input value| over all relu nodes; the distance of
    /// the nearest live activation to the non-smooth point. Inputs that are
    /// exactly zero were clamped by an upstream relu and are locally
    /// constant, so they do not endanger finite differences; values merely
    /// close to zero do. Checks are only trustworthy when this margin
    /// clears the probe step.
    pub fn relu_input_margin(&self) -> F {
        let mut margin = F::infinity();
        for node in &self.nodes {
            if let OpRecord::Relu { x } = node.op {
                for &v in self.nodes[x.0].value.data() {
                    let a = v.abs();
                    if a > F::zero() && a < margin {
                        margin = a;
                    }
                }
            }
        }
        margin
    }

    /// Reverse pass from a scalar seed.
    ///
    /// Populates `grad` on every node whose tensor requires grad. Erroring on
    /// a second call guarantees no silent accumulation across steps.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_run {
            return Err(Error::BackwardAlreadyRun);
        }
        let seed = &self.nodes[loss.0].value;
        if !seed.is_scalar() {
            return Err(Error::NonScalarSeed {
                shape: seed.shape().to_vec(),
            });
        }
        self.backward_run = true;

        let mut grads: Vec<Option<Vec<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![F::one()]);

        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            if self.nodes[idx].value.requires_grad() {
                grads[idx] = Some(g);
            }
        }
        for (idx, g) in grads.into_iter().enumerate() {
            if let Some(g) = g {
                self.nodes[idx].value.set_grad(g);
            }
        }
        Ok(())
    }

    /// Add `contribution` into the gradient accumulator of `var` if that node
    /// participates in differentiation.
    fn accumulate(&self, grads: &mut [Option<Vec<F>>], var: Var, contribution: Vec<F>) {
        if !self.nodes[var.0].value.requires_grad() {
            return;
        }
        match &mut grads[var.0] {
            Some(acc) => {
                for (a, c) in acc.iter_mut().zip(&contribution) {
                    *a += *c;
                }
            }
            slot => *slot = Some(contribution),
        }
    }

    fn propagate(&self, idx: usize, g: &[F], grads: &mut [Option<Vec<F>>]) {
        match &self.nodes[idx].op {
            OpRecord::Leaf => {}
            OpRecord::Conv2d {
                x,
                kernel,
                bias,
                dims,
            } => {
                let (dx, dk, db) = kernels::conv2d_backward(
                    self.value(*x).data(),
                    self.value(*kernel).data(),
                    dims,
                    g,
                );
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *kernel, dk);
                self.accumulate(grads, *bias, db);
            }
            OpRecord::Relu { x } => {
                let dx = self
                    .value(*x)
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&v, &gi)| if v > F::zero() { gi } else { F::zero() })
                    .collect();
                self.accumulate(grads, *x, dx);
            }
            OpRecord::UpsampleNearest { x, factor } => {
                let (n, c, h, w) = self.value(*x).dims4("upsample_nearest").unwrap();
                let dx = kernels::upsample_backward(g, n, c, h, w, *factor);
                self.accumulate(grads, *x, dx);
            }
            OpRecord::Add { lhs, rhs } => {
                self.accumulate(grads, *lhs, g.to_vec());
                self.accumulate(grads, *rhs, g.to_vec());
            }
            OpRecord::GlobalAvgPool { x } => {
                let (n, c, h, w) = self.value(*x).dims4("global_avg_pool").unwrap();
                let dx = kernels::gap_backward(g, n, c, h, w);
                self.accumulate(grads, *x, dx);
            }
            OpRecord::Linear { x, weight, bias } => {
                let (n, c) = self.value(*x).dims2("linear").unwrap();
                let k = self.value(*weight).shape()[0];
                let (dx, dw, db) = kernels::linear_backward(
                    self.value(*x).data(),
                    self.value(*weight).data(),
                    g,
                    n,
                    c,
                    k,
                );
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *weight, dw);
                self.accumulate(grads, *bias, db);
            }
            OpRecord::Softmax { logits } => {
                let y = self.nodes[idx].value.data();
                let (n, k) = self.nodes[idx].value.dims2("softmax").unwrap();
                let dz = kernels::softmax_backward(y, g, n, k);
                self.accumulate(grads, *logits, dz);
            }
            OpRecord::CrossEntropy {
                probs,
                labels,
                fused_logits,
            } => {
                let gs = g[0];
                let p = self.value(*probs).data();
                let y = labels.data();
                let (n, k) = self.value(*probs).dims2("cross_entropy").unwrap();
                let inv_n = F::one() / F::from(n).unwrap();
                match fused_logits {
                    Some(logits) => {
                        // d loss / d logits = (p - y)/N, written past the softmax
                        let dz = (0..n * k)
                            .map(|i| gs * (p[i] - y[i]) * inv_n)
                            .collect();
                        self.accumulate(grads, *logits, dz);
                    }
                    None => {
                        let floor = F::from(PROB_FLOOR).unwrap();
                        let dp = (0..n * k)
                            .map(|i| {
                                if y[i] == F::one() {
                                    -gs * inv_n / p[i].max(floor)
                                } else {
                                    F::zero()
                                }
                            })
                            .collect();
                        self.accumulate(grads, *probs, dp);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type G = Graph<f64>;

    #[test]
    fn add_routes_gradient_to_both_operands() {
        let mut g = G::new();
        let x = g.leaf(
            Tensor::new(vec![1, 1, 1, 1], vec![3.0])
                .unwrap()
                .with_requires_grad(true),
        );
        let doubled = g.add(x, x).unwrap();
        let pooled = g.global_avg_pool(doubled).unwrap();
        let w = g.leaf(Tensor::new(vec![1, 1], vec![1.0]).unwrap());
        let b = g.leaf(Tensor::new(vec![1], vec![0.0]).unwrap());
        let y = g.linear(pooled, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[6.0]);
        // [1,1] holds a single element, so it is a valid backward seed
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[2.0]);
    }

    #[test]
    fn backward_rejects_multi_element_seed() {
        let mut g = G::new();
        let x = g.leaf(
            Tensor::new(vec![1, 2], vec![0.1, 0.9])
                .unwrap()
                .with_requires_grad(true),
        );
        let y = g.relu(x).unwrap();
        let err = g.backward(y).unwrap_err();
        assert!(matches!(err, Error::NonScalarSeed { .. }));
    }

    #[test]
    fn backward_twice_errors() {
        let mut g = G::new();
        let p = g.leaf(
            Tensor::new(vec![1, 2], vec![0.5, 0.5])
                .unwrap()
                .with_requires_grad(true),
        );
        let labels = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let loss = g.cross_entropy(p, &labels).unwrap();
        g.backward(loss).unwrap();
        assert!(matches!(
            g.backward(loss),
            Err(Error::BackwardAlreadyRun)
        ));
    }

    #[test]
    fn cross_entropy_of_uniform_two_class_is_ln2() {
        let mut g = G::new();
        let p = g.leaf(Tensor::new(vec![1, 2], vec![0.5, 0.5]).unwrap());
        let labels = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let loss = g.cross_entropy(p, &labels).unwrap();
        assert!((g.value(loss).data()[0] - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_non_one_hot() {
        let mut g = G::new();
        let p = g.leaf(Tensor::new(vec![1, 2], vec![0.5, 0.5]).unwrap());
        let labels = Tensor::new(vec![1, 2], vec![0.7, 0.3]).unwrap();
        assert!(matches!(
            g.cross_entropy(p, &labels),
            Err(Error::NotOneHot { row: 0 })
        ));
    }

    #[test]
    fn loss_independent_parameter_gets_zero_grad() {
        let mut g = G::new();
        let z = g.leaf(
            Tensor::new(vec![1, 2], vec![0.2, -0.4])
                .unwrap()
                .with_requires_grad(true),
        );
        let unused = g.leaf(
            Tensor::new(vec![1, 2], vec![5.0, 5.0])
                .unwrap()
                .with_requires_grad(true),
        );
        let _parked = g.relu(unused).unwrap();
        let p = g.softmax(z).unwrap();
        let labels = Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
        let loss = g.cross_entropy(p, &labels).unwrap();
        g.backward(loss).unwrap();
        assert!(g.grad(z).is_some());
        // unused participates in no path to the loss: grad never populated
        assert!(g.grad(unused).is_none());
    }

    #[test]
    fn fused_softmax_ce_grad_is_p_minus_y_over_n() {
        let mut g = G::new();
        let z = g.leaf(
            Tensor::new(vec![2, 3], vec![0.1, 0.2, -0.3, 1.0, -1.0, 0.0])
                .unwrap()
                .with_requires_grad(true),
        );
        let p = g.softmax(z).unwrap();
        let probs = g.value(p).data().to_vec();
        let labels = Tensor::new(vec![2, 3], vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let loss = g.cross_entropy(p, &labels).unwrap();
        g.backward(loss).unwrap();
        let grad = g.grad(z).unwrap();
        let y = [0.0, 1.0, 0.0, 1.0, 0.0, 0.0];
        for i in 0..6 {
            let expect = (probs[i] - y[i]) / 2.0;
            assert!((grad[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_conv_passes_input_through() {
        let mut g = G::new();
        let x = g.leaf(Tensor::new(vec![1, 1, 2, 2], vec![1.0, -2.0, 3.0, 4.0]).unwrap());
        let k = g.leaf(Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap());
        let b = g.leaf(Tensor::new(vec![1], vec![0.0]).unwrap());
        let y = g.conv2d(x, k, b, 1, 0).unwrap();
        assert_eq!(g.value(y).data(), g.value(x).data());
    }

    #[test]
    fn conv_shape_mismatch_names_both_shapes() {
        let mut g = G::new();
        let x = g.leaf(Tensor::zeros(vec![1, 2, 4, 4]));
        let k = g.leaf(Tensor::zeros(vec![3, 1, 3, 3]));
        let b = g.leaf(Tensor::zeros(vec![3]));
        match g.conv2d(x, k, b, 1, 1) {
            Err(Error::ShapeMismatch { op, lhs, rhs }) => {
                assert_eq!(op, "conv2d");
                assert_eq!(lhs, vec![1, 2, 4, 4]);
                assert_eq!(rhs, vec![3, 1, 3, 3]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn relu_examples() {
        let mut g = G::new();
        let x = g.leaf(
            Tensor::new(vec![1, 3], vec![-1.0, 0.0, 2.0]).unwrap(),
        );
        let y = g.relu(x).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn upsample_factor_zero_errors() {
        let mut g = G::new();
        let x = g.leaf(Tensor::zeros(vec![1, 1, 2, 2]));
        assert!(g.upsample_nearest(x, 0).is_err());
        let id = g.upsample_nearest(x, 1).unwrap();
        assert_eq!(g.value(id).data(), g.value(x).data());
    }
}
