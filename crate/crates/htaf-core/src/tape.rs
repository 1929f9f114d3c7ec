//! Reverse-mode automatic differentiation on a Wengert tape.
//!
//! Nodes are matrix-valued. Recording an operation evaluates it eagerly, so
//! the forward value of every node is always available and a backward pass
//! can never run ahead of the forward computation. [`Tape::backward`] seeds
//! the adjoint of a scalar (1x1) loss node with one and sweeps the tape in
//! reverse, accumulating adjoints by the chain rule. After the sweep every
//! node has a defined adjoint; nodes the loss does not depend on get zeros.

use crate::activations::{activation_forward_matrix, activation_grad_matrix, ActivationSpec};
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Per-column batch statistics computed by a batch-norm node, for updating
/// running averages outside the tape.
#[derive(Clone, Debug)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Biased (population) variance.
    pub var: Vec<f64>,
}

enum NodeOp {
    Input,
    /// `a * b`
    MatMul { a: NodeId, b: NodeId },
    /// `a * b^T`
    MatMulNt { a: NodeId, b: NodeId },
    /// `a + bias` with `bias` a `1 x cols` row broadcast over rows.
    AddBias { a: NodeId, bias: NodeId },
    /// Elementwise activation of `a`.
    Activation { a: NodeId, spec: ActivationSpec },
    /// Column-wise batch normalization with learnable scale and shift.
    BatchNorm {
        a: NodeId,
        gamma: NodeId,
        beta: NodeId,
        x_hat: Matrix,
        inv_std: Matrix,
    },
    /// Elementwise square.
    Square { a: NodeId },
    /// Sum of all entries, a 1x1 result.
    SumAll { a: NodeId },
    /// Mean over rows of the summed squared error, a 1x1 result.
    MseLoss { pred: NodeId, target: NodeId },
    /// Mean negative log-likelihood of the labelled class under a row-wise
    /// softmax, a 1x1 result.
    SoftmaxCrossEntropy {
        logits: NodeId,
        softmax: Matrix,
        labels: Vec<usize>,
    },
}

struct Node {
    op: NodeOp,
    value: Matrix,
}

/// Recording of a forward computation, ready for a reverse sweep.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints (d loss / d node) for every node of a tape, produced by
/// [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<Matrix>,
}

impl Gradients {
    /// Adjoint of a node. Zero-filled for nodes the loss does not reach.
    pub fn get(&self, id: NodeId) -> Result<&Matrix> {
        self.adjoints
            .get(id.0)
            .ok_or(CoreError::UnknownNode { id: id.0 })
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape { nodes: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn push(&mut self, op: NodeOp, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id.0).ok_or(CoreError::UnknownNode { id: id.0 })
    }

    /// Forward value of a node.
    pub fn value(&self, id: NodeId) -> Result<&Matrix> {
        Ok(&self.node(id)?.value)
    }

    /// Records a leaf holding data or a parameter.
    pub fn input(&mut self, value: Matrix) -> NodeId {
        self.push(NodeOp::Input, value)
    }

    /// Records `a * b`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.node(a)?.value.matmul(&self.node(b)?.value)?;
        Ok(self.push(NodeOp::MatMul { a, b }, value))
    }

    /// Records `a * b^T`. This is the layer product for weights stored as
    /// `[out_dim, in_dim]`.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.node(a)?.value.matmul_nt(&self.node(b)?.value)?;
        Ok(self.push(NodeOp::MatMulNt { a, b }, value))
    }

    /// Records `a + bias`, broadcasting the `1 x cols` bias over rows.
    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let value = self
            .node(a)?
            .value
            .add_row_broadcast(&self.node(bias)?.value)?;
        Ok(self.push(NodeOp::AddBias { a, bias }, value))
    }

    /// Records an elementwise activation.
    pub fn activation(&mut self, a: NodeId, spec: ActivationSpec) -> Result<NodeId> {
        spec.validate()?;
        let value = activation_forward_matrix(&self.node(a)?.value, &spec)?;
        Ok(self.push(NodeOp::Activation { a, spec }, value))
    }

    /// Records column-wise batch normalization using the batch's own
    /// statistics, and returns them so the caller can maintain running
    /// averages for inference.
    pub fn batch_norm(
        &mut self,
        a: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    ) -> Result<(NodeId, BatchStats)> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "batch_norm eps",
                value: eps,
            });
        }
        let x = &self.node(a)?.value;
        let m = x.rows();
        let n = x.cols();
        if m == 0 {
            return Err(CoreError::EmptyInput {
                context: "batch_norm input",
            });
        }
        let g = &self.node(gamma)?.value;
        let b = &self.node(beta)?.value;
        if g.shape() != (1, n) || b.shape() != (1, n) {
            return Err(CoreError::DimensionMismatch {
                op: "batch_norm",
                lhs: g.shape(),
                rhs: (1, n),
            });
        }

        let mean = x.col_means()?;
        let mut var = vec![0.0; n];
        let mut x_hat = Matrix::zeros(m, n);
        for j in 0..n {
            let mu = mean.get(0, j);
            let mut acc = 0.0;
            for i in 0..m {
                let d = x.get(i, j) - mu;
                acc += d * d;
            }
            var[j] = acc / m as f64;
        }
        let mut inv_std = Matrix::zeros(1, n);
        for j in 0..n {
            inv_std.set(0, j, 1.0 / (var[j] + eps).sqrt());
        }
        for j in 0..n {
            let mu = mean.get(0, j);
            let is = inv_std.get(0, j);
            for i in 0..m {
                x_hat.set(i, j, (x.get(i, j) - mu) * is);
            }
        }

        let value = x_hat.mul_row_broadcast(g)?.add_row_broadcast(b)?;
        let stats = BatchStats {
            mean: mean.row(0),
            var,
        };
        let id = self.push(
            NodeOp::BatchNorm {
                a,
                gamma,
                beta,
                x_hat,
                inv_std,
            },
            value,
        );
        Ok((id, stats))
    }

    /// Records the elementwise square.
    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.node(a)?.value.map(|v| v * v)?;
        Ok(self.push(NodeOp::Square { a }, value))
    }

    /// Records the sum of all entries as a 1x1 scalar.
    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId> {
        let value = Matrix::from_shape_vec(1, 1, vec![self.node(a)?.value.sum()])?;
        Ok(self.push(NodeOp::SumAll { a }, value))
    }

    /// Records the squared-error loss `sum((pred - target)^2) / rows`.
    /// For a single output column this is the mean squared error.
    pub fn mse_loss(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        let p = &self.node(pred)?.value;
        let t = &self.node(target)?.value;
        if p.shape() != t.shape() {
            return Err(CoreError::DimensionMismatch {
                op: "mse_loss",
                lhs: p.shape(),
                rhs: t.shape(),
            });
        }
        if p.rows() == 0 {
            return Err(CoreError::EmptyInput {
                context: "mse_loss input",
            });
        }
        let diff = p.sub(t)?;
        let loss = diff.iter().map(|v| v * v).sum::<f64>() / p.rows() as f64;
        if !loss.is_finite() {
            return Err(CoreError::NonFinite { context: "mse_loss" });
        }
        let value = Matrix::from_shape_vec(1, 1, vec![loss])?;
        Ok(self.push(NodeOp::MseLoss { pred, target }, value))
    }

    /// Records the mean cross-entropy of integer labels under a row-wise
    /// softmax of the logits.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let z = &self.node(logits)?.value;
        let (m, n) = z.shape();
        if m == 0 {
            return Err(CoreError::EmptyInput {
                context: "softmax_cross_entropy input",
            });
        }
        if labels.len() != m {
            return Err(CoreError::LengthMismatch {
                context: "softmax_cross_entropy labels",
                lhs: labels.len(),
                rhs: m,
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n) {
            return Err(CoreError::InvalidParameter {
                name: "label",
                value: bad as f64,
            });
        }

        let mut softmax = Matrix::zeros(m, n);
        let mut loss = 0.0;
        for i in 0..m {
            let row = z.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
            let denom: f64 = exps.iter().sum();
            for j in 0..n {
                softmax.set(i, j, exps[j] / denom);
            }
            // log softmax of the labelled class, computed from the shifted
            // logits to avoid log of a rounded probability.
            loss -= row[labels[i]] - max - denom.ln();
        }
        loss /= m as f64;
        if !loss.is_finite() {
            return Err(CoreError::NonFinite {
                context: "softmax_cross_entropy",
            });
        }
        let value = Matrix::from_shape_vec(1, 1, vec![loss])?;
        Ok(self.push(
            NodeOp::SoftmaxCrossEntropy {
                logits,
                softmax,
                labels: labels.to_vec(),
            },
            value,
        ))
    }

    /// Reverse sweep from a scalar loss node. Returns adjoints for every
    /// node on the tape.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let loss_node = self.node(loss)?;
        if loss_node.value.shape() != (1, 1) {
            return Err(CoreError::NonScalarLoss {
                rows: loss_node.value.rows(),
                cols: loss_node.value.cols(),
            });
        }

        let mut adjoints: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        adjoints[loss.0] = Some(Matrix::ones(1, 1));

        for id in (0..=loss.0).rev() {
            let Some(up) = adjoints[id].take() else {
                continue;
            };
            match &self.nodes[id].op {
                NodeOp::Input => {}
                NodeOp::MatMul { a, b } => {
                    let da = up.matmul_nt(&self.nodes[b.0].value)?;
                    let db = self.nodes[a.0].value.matmul_tn(&up)?;
                    accumulate(&mut adjoints[a.0], da)?;
                    accumulate(&mut adjoints[b.0], db)?;
                }
                NodeOp::MatMulNt { a, b } => {
                    let da = up.matmul(&self.nodes[b.0].value)?;
                    let db = up.matmul_tn(&self.nodes[a.0].value)?;
                    accumulate(&mut adjoints[a.0], da)?;
                    accumulate(&mut adjoints[b.0], db)?;
                }
                NodeOp::AddBias { a, bias } => {
                    let db = up.col_sums();
                    accumulate(&mut adjoints[bias.0], db)?;
                    accumulate(&mut adjoints[a.0], up.clone())?;
                }
                NodeOp::Activation { a, spec } => {
                    let local = activation_grad_matrix(&self.nodes[a.0].value, spec)?;
                    accumulate(&mut adjoints[a.0], up.mul_elem(&local)?)?;
                }
                NodeOp::BatchNorm {
                    a,
                    gamma,
                    beta,
                    x_hat,
                    inv_std,
                } => {
                    let m = up.rows() as f64;
                    let g = &self.nodes[gamma.0].value;
                    let dbeta = up.col_sums();
                    let dgamma = up.mul_elem(x_hat)?.col_sums();
                    let dx_hat = up.mul_row_broadcast(g)?;
                    // dx = inv_std * (dx_hat - mean(dx_hat) - x_hat * mean(dx_hat . x_hat))
                    let mean_dx_hat = dx_hat.col_sums().scale(1.0 / m)?;
                    let mean_dx_hat_x_hat = dx_hat.mul_elem(x_hat)?.col_sums().scale(1.0 / m)?;
                    let correction = x_hat.mul_row_broadcast(&mean_dx_hat_x_hat)?;
                    let centered = dx_hat
                        .add_row_broadcast(&mean_dx_hat.scale(-1.0)?)?
                        .sub(&correction)?;
                    let dx = centered.mul_row_broadcast(inv_std)?;
                    accumulate(&mut adjoints[beta.0], dbeta)?;
                    accumulate(&mut adjoints[gamma.0], dgamma)?;
                    accumulate(&mut adjoints[a.0], dx)?;
                }
                NodeOp::Square { a } => {
                    let two_a = self.nodes[a.0].value.scale(2.0)?;
                    accumulate(&mut adjoints[a.0], up.mul_elem(&two_a)?)?;
                }
                NodeOp::SumAll { a } => {
                    let shape = self.nodes[a.0].value.shape();
                    let da = Matrix::ones(shape.0, shape.1).scale(up.get(0, 0))?;
                    accumulate(&mut adjoints[a.0], da)?;
                }
                NodeOp::MseLoss { pred, target } => {
                    let p = &self.nodes[pred.0].value;
                    let t = &self.nodes[target.0].value;
                    let scale = 2.0 * up.get(0, 0) / p.rows() as f64;
                    let dp = p.sub(t)?.scale(scale)?;
                    let dt = dp.scale(-1.0)?;
                    accumulate(&mut adjoints[pred.0], dp)?;
                    accumulate(&mut adjoints[target.0], dt)?;
                }
                NodeOp::SoftmaxCrossEntropy {
                    logits,
                    softmax,
                    labels,
                } => {
                    let m = softmax.rows() as f64;
                    let mut dz = softmax.clone();
                    for (i, &label) in labels.iter().enumerate() {
                        dz.set(i, label, dz.get(i, label) - 1.0);
                    }
                    let dz = dz.scale(up.get(0, 0) / m)?;
                    accumulate(&mut adjoints[logits.0], dz)?;
                }
            }
            // Restore the taken adjoint so it is reported to the caller.
            adjoints[id] = Some(up);
        }

        let adjoints = adjoints
            .into_iter()
            .enumerate()
            .map(|(i, slot)| {
                slot.unwrap_or_else(|| {
                    let (r, c) = self.nodes[i].value.shape();
                    Matrix::zeros(r, c)
                })
            })
            .collect();
        Ok(Gradients { adjoints })
    }
}

fn accumulate(slot: &mut Option<Matrix>, delta: Matrix) -> Result<()> {
    match slot {
        Some(existing) => {
            *existing = existing.add(&delta)?;
        }
        None => *slot = Some(delta),
    }
    Ok(())
}
