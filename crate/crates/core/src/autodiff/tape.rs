use super::kernels::{self, ConvGeom};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Conv2d {
        x: Var,
        k: Var,
        geom: ConvGeom,
    },
    Relu(Var),
    AvgPool2d {
        x: Var,
        out_h: usize,
        out_w: usize,
    },
    GlobalAvgPool(Var),
    Softmax {
        x: Var,
        temperature: f64,
    },
    SoftCrossEntropy {
        logits: Var,
        target: Tensor,
        temperature: f64,
    },
    KlDivergence {
        logits: Var,
        source_log_probs: Tensor,
        temperature: f64,
    },
    BinaryCrossEntropy {
        logits: Var,
        target: Tensor,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records one forward pass for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so every node's parents precede it.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to the grad-enabled leaves of a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `var`, or `None` when `var` is not a grad-enabled leaf.
    ///
    /// Grad-enabled leaves that the loss does not depend on get a zero tensor.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ))
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, contribution: Vec<f64>) {
    match slot {
        Some(buf) => {
            for (a, c) in buf.iter_mut().zip(contribution) {
                *a += c;
            }
        }
        None => *slot = Some(contribution),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Gradient-enabled leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var], name: &str) -> Result<Var> {
        value.ensure_finite(name)?;
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("add", va, vb)?;
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::from_parts(va.shape().to_vec(), data);
        self.push(out, Op::Add(a, b), &[a, b], "add")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("mul", va, vb)?;
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::from_parts(va.shape().to_vec(), data);
        self.push(out, Op::Mul(a, b), &[a, b], "mul")
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v * factor);
        self.push(out, Op::Scale(a, factor), &[a], "scale")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum(a), &[a], "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        let total: f64 = v.data().iter().sum();
        let mean = total / v.numel() as f64;
        self.push(Tensor::scalar(mean), Op::Mean(a), &[a], "mean")
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        self.push(out, Op::Reshape(a), &[a], "reshape")
    }

    /// `out[b,o] = sum_i x[b,i] * w[i,o] + bias[o]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (vx, vw, vb) = (self.value(x), self.value(w), self.value(b));
        match (vx.shape(), vw.shape(), vb.shape()) {
            ([_, i], [i2, o], [o2]) if i == i2 && o == o2 => {}
            (xs, ws, bs) => {
                return Err(Error::shape(
                    "linear",
                    format!("x {xs:?}, w {ws:?}, b {bs:?}"),
                ))
            }
        }
        let out = kernels::linear_forward(vx, vw, vb);
        self.push(out, Op::Linear { x, w, b }, &[x, w, b], "linear")
    }

    /// 2-D cross-correlation of `x: [B,C,H,W]` with `k: [F,C,Kh,Kw]`, no bias.
    pub fn conv2d(&mut self, x: Var, k: Var, stride: usize, pad: usize) -> Result<Var> {
        let geom = kernels::conv_geom(self.value(x), self.value(k), stride, pad)?;
        let out = kernels::conv2d_forward(self.value(x), self.value(k), geom);
        self.push(out, Op::Conv2d { x, k, geom }, &[x, k], "conv2d")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, Op::Relu(x), &[x], "relu")
    }

    /// Mean pooling of `[B,C,H,W]` onto an `out_h x out_w` grid of equal tiles.
    pub fn avgpool2d(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let v = self.value(x);
        let s = v.shape();
        if v.rank() != 4
            || out_h == 0
            || out_w == 0
            || !s[2].is_multiple_of(out_h)
            || !s[3].is_multiple_of(out_w)
        {
            return Err(Error::shape(
                "avgpool2d",
                format!("cannot tile {s:?} into {out_h}x{out_w}"),
            ));
        }
        let out = kernels::avgpool2d_forward(v, out_h, out_w);
        self.push(out, Op::AvgPool2d { x, out_h, out_w }, &[x], "avgpool2d")
    }

    /// Spatial mean: `[B,C,H,W] -> [B,C]`.
    pub fn global_avgpool(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        if v.rank() != 4 {
            return Err(Error::shape(
                "global_avgpool",
                format!("expected rank 4, got {:?}", v.shape()),
            ));
        }
        let s = v.shape();
        let pooled = kernels::avgpool2d_forward(v, 1, 1);
        let out = Tensor::from_parts(vec![s[0], s[1]], pooled.into_data());
        self.push(out, Op::GlobalAvgPool(x), &[x], "global_avgpool")
    }

    /// Row-wise `softmax(logits / temperature)` of a `[B,K]` node.
    pub fn softmax_t(&mut self, x: Var, temperature: f64) -> Result<Var> {
        let out = kernels::softmax_rows(self.value(x), temperature)?;
        self.push(out, Op::Softmax { x, temperature }, &[x], "softmax_t")
    }

    /// Batch-mean cross-entropy against a fixed distribution per row.
    /// Inputs are assumed validated by the caller.
    pub(crate) fn soft_cross_entropy(
        &mut self,
        logits: Var,
        target: Tensor,
        temperature: f64,
    ) -> Result<Var> {
        let v = kernels::soft_ce_forward(self.value(logits), &target, temperature);
        let op = Op::SoftCrossEntropy {
            logits,
            target,
            temperature,
        };
        self.push(Tensor::scalar(v), op, &[logits], "soft cross-entropy")
    }

    /// Batch-mean `KL(source || softmax(logits / t))`, source given as log-probabilities.
    pub(crate) fn kl_divergence(
        &mut self,
        logits: Var,
        source_log_probs: Tensor,
        temperature: f64,
    ) -> Result<Var> {
        let v = kernels::kl_forward(self.value(logits), &source_log_probs, temperature);
        let op = Op::KlDivergence {
            logits,
            source_log_probs,
            temperature,
        };
        self.push(Tensor::scalar(v), op, &[logits], "kl divergence")
    }

    pub(crate) fn binary_cross_entropy(&mut self, logits: Var, target: Tensor) -> Result<Var> {
        let v = kernels::bce_forward(self.value(logits), &target);
        let op = Op::BinaryCrossEntropy { logits, target };
        self.push(Tensor::scalar(v), op, &[logits], "binary cross-entropy")
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = &self.nodes[loss.0];
        if !root.value.is_scalar() {
            return Err(Error::NonScalarLoss(root.value.shape().to_vec()));
        }
        if !root.requires_grad {
            return Err(Error::Detached);
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }

        let grads = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, node)| {
                (matches!(node.op, Op::Leaf) && node.requires_grad).then(|| {
                    let shape = node.value.shape().to_vec();
                    match grads.get_mut(i).and_then(Option::take) {
                        Some(data) => Tensor::from_parts(shape, data),
                        None => Tensor::zeros(&shape),
                    }
                })
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let mut send = |v: Var, contribution: Vec<f64>| {
            if self.nodes[v.0].requires_grad {
                accumulate(&mut grads[v.0], contribution);
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                send(*a, g.to_vec());
                send(*b, g.to_vec());
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                if needs(*a) {
                    send(*a, g.iter().zip(vb).map(|(g, y)| g * y).collect());
                }
                if needs(*b) {
                    send(*b, g.iter().zip(va).map(|(g, x)| g * x).collect());
                }
            }
            Op::Scale(a, factor) => send(*a, g.iter().map(|v| v * factor).collect()),
            Op::Sum(a) => send(*a, vec![g[0]; self.value(*a).numel()]),
            Op::Mean(a) => {
                let n = self.value(*a).numel();
                send(*a, vec![g[0] / n as f64; n]);
            }
            Op::Reshape(a) => send(*a, g.to_vec()),
            Op::Linear { x, w, b } => {
                let (dx, dw, db) = kernels::linear_backward(self.value(*x), self.value(*w), g);
                send(*x, dx);
                send(*w, dw);
                send(*b, db);
            }
            Op::Conv2d { x, k, geom } => {
                let (dx, dk) = kernels::conv2d_backward(self.value(*x), self.value(*k), g, *geom);
                send(*x, dx);
                send(*k, dk);
            }
            Op::Relu(x) => {
                let vx = self.value(*x).data();
                send(
                    *x,
                    g.iter()
                        .zip(vx)
                        .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                        .collect(),
                );
            }
            Op::AvgPool2d { x, out_h, out_w } => {
                send(
                    *x,
                    kernels::avgpool2d_backward(self.value(*x).shape(), *out_h, *out_w, g),
                );
            }
            Op::GlobalAvgPool(x) => {
                send(
                    *x,
                    kernels::avgpool2d_backward(self.value(*x).shape(), 1, 1, g),
                );
            }
            Op::Softmax {
                x: src,
                temperature,
            } => {
                send(
                    *src,
                    kernels::softmax_backward(&node.value, *temperature, g),
                );
            }
            Op::SoftCrossEntropy {
                logits,
                target,
                temperature,
            } => {
                let dz = kernels::soft_ce_backward(self.value(*logits), target, *temperature, g[0]);
                send(*logits, dz);
            }
            Op::KlDivergence {
                logits,
                source_log_probs,
                temperature,
            } => {
                let dz =
                    kernels::kl_backward(self.value(*logits), source_log_probs, *temperature, g[0]);
                send(*logits, dz);
            }
            Op::BinaryCrossEntropy { logits, target } => {
                send(
                    *logits,
                    kernels::bce_backward(self.value(*logits), target, g[0]),
                );
            }
        }
    }
}
