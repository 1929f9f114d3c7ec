//! Feed-forward networks with swappable activations.
//!
//! A network is an ordered stack of dense layers, each `y = act(x W^T + b)`
//! with weights stored `[out_dim, in_dim]`, optionally batch-normalized
//! before the activation. The last layer is the head (affine for regression,
//! logits for classification); the layer before it is the feature layer
//! whose activations serve as concepts.
//!
//! Two forward paths exist. [`Network::forward`] is the inference path: it
//! uses batch-norm running statistics and applies any attached feature
//! binarization. [`Network::forward_traced`] records onto a [`Tape`] for
//! training: batch statistics, no binarization, parameters registered as
//! tape inputs so the backward pass yields their gradients.
//!
//! [`Network::swap_activations`] rebuilds the net with selected activation
//! kinds replaced (weights bit-identical), which is how a net trained with a
//! smooth step surrogate becomes a hard Heaviside net at inference time.
//! [`Network::median_binarize`] and
//! [`Network::binarize_matched_proportion`] attach post-hoc threshold
//! binarization of the feature layer, the baseline against which natively
//! binary training is compared.

use serde::{Deserialize, Serialize};

use crate::activations::{heaviside, ActivationKind, ActivationSpec};
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::tape::{NodeId, Tape};

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.9;

/// Output head of a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    /// Single linear output, squared-error training loss.
    Regression,
    /// One logit per class, softmax cross-entropy training loss.
    Classification { n_classes: usize },
}

/// Shape and behaviour of one dense layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: ActivationSpec,
    pub batch_norm: bool,
}

impl LayerSpec {
    pub fn dense(in_dim: usize, out_dim: usize, activation: ActivationSpec) -> LayerSpec {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
            batch_norm: false,
        }
    }

    pub fn with_batch_norm(mut self) -> LayerSpec {
        self.batch_norm = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct BatchNormState {
    pub(crate) gamma: Matrix,
    pub(crate) beta: Matrix,
    pub(crate) running_mean: Matrix,
    pub(crate) running_var: Matrix,
}

impl BatchNormState {
    fn fresh(width: usize) -> BatchNormState {
        BatchNormState {
            gamma: Matrix::ones(1, width),
            beta: Matrix::zeros(1, width),
            running_mean: Matrix::zeros(1, width),
            running_var: Matrix::ones(1, width),
        }
    }
}

/// Multilayer perceptron with optional batch norm and an optional
/// inference-time feature binarization stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    weights: Vec<Matrix>,
    biases: Vec<Matrix>,
    batch_norm: Vec<Option<BatchNormState>>,
    head: Head,
    /// Per-node thresholds applied to the feature layer's activations at
    /// inference time: bit = 1 exactly when activation >= threshold.
    feature_binarization: Option<Vec<f64>>,
}

/// Inference-mode forward results.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// Head outputs: `n x 1` for regression, `n x n_classes` logits for
    /// classification.
    pub output: Matrix,
    /// Per-layer inputs to the activation function (after batch norm when
    /// present).
    pub pre_activations: Vec<Matrix>,
    /// Per-layer activation outputs (after feature binarization on the
    /// feature layer when attached).
    pub activations: Vec<Matrix>,
}

/// Tape handles produced by a traced (training-mode) forward pass.
pub struct TracedForward {
    pub output: NodeId,
    /// Per-layer pre-activation nodes, for gradient-flow diagnostics.
    pub pre_activations: Vec<NodeId>,
    pub weights: Vec<NodeId>,
    pub biases: Vec<NodeId>,
    /// Batch-norm scale/shift nodes for layers that have batch norm.
    pub bn_gamma: Vec<Option<NodeId>>,
    pub bn_beta: Vec<Option<NodeId>>,
}

/// Builds a network with Xavier-uniform weights (`U(-a, a)` with
/// `a = sqrt(6 / (fan_in + fan_out))`), zero biases, and identity batch-norm
/// state, drawn from a ChaCha8 stream seeded with `seed`. Weights are drawn
/// layer by layer in row-major order, so a seed pins every parameter.
pub fn init_network(layers: Vec<LayerSpec>, head: Head, seed: u64) -> Result<Network> {
    validate_architecture(&layers, &head)?;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(layers.len());
    let mut biases = Vec::with_capacity(layers.len());
    let mut batch_norm = Vec::with_capacity(layers.len());
    for spec in &layers {
        let bound = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
        weights.push(Matrix::from_fn(spec.out_dim, spec.in_dim, |_, _| {
            rng.gen_range(-bound..bound)
        }));
        biases.push(Matrix::zeros(1, spec.out_dim));
        batch_norm.push(spec.batch_norm.then(|| BatchNormState::fresh(spec.out_dim)));
    }
    Ok(Network {
        layers,
        weights,
        biases,
        batch_norm,
        head,
        feature_binarization: None,
    })
}

fn validate_architecture(layers: &[LayerSpec], head: &Head) -> Result<()> {
    if layers.is_empty() {
        return Err(CoreError::BadArchitecture {
            reason: "a network needs at least one layer".to_string(),
        });
    }
    for (i, spec) in layers.iter().enumerate() {
        if spec.in_dim == 0 || spec.out_dim == 0 {
            return Err(CoreError::BadArchitecture {
                reason: format!("layer {i} has a zero dimension"),
            });
        }
        spec.activation.validate()?;
        if i + 1 < layers.len() && spec.out_dim != layers[i + 1].in_dim {
            return Err(CoreError::BadArchitecture {
                reason: format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    spec.out_dim,
                    i + 1,
                    layers[i + 1].in_dim
                ),
            });
        }
    }
    let out_width = layers.last().expect("non-empty").out_dim;
    match head {
        Head::Regression => {
            if out_width != 1 {
                return Err(CoreError::BadArchitecture {
                    reason: format!("regression head needs width 1, got {out_width}"),
                });
            }
        }
        Head::Classification { n_classes } => {
            if *n_classes < 2 {
                return Err(CoreError::BadArchitecture {
                    reason: format!("classification needs >= 2 classes, got {n_classes}"),
                });
            }
            if out_width != *n_classes {
                return Err(CoreError::BadArchitecture {
                    reason: format!(
                        "classification head needs width {n_classes}, got {out_width}"
                    ),
                });
            }
        }
    }
    Ok(())
}

impl Network {
    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn weight(&self, layer: usize) -> Result<&Matrix> {
        self.weights
            .get(layer)
            .ok_or(CoreError::LayerOutOfRange {
                layer,
                n_layers: self.layers.len(),
            })
    }

    pub fn bias(&self, layer: usize) -> Result<&Matrix> {
        self.biases
            .get(layer)
            .ok_or(CoreError::LayerOutOfRange {
                layer,
                n_layers: self.layers.len(),
            })
    }

    /// Replaces a layer's weight matrix. The shape must match the layer
    /// spec (`out_dim x in_dim`).
    pub fn set_weight(&mut self, layer: usize, w: Matrix) -> Result<()> {
        let spec = self.layers.get(layer).ok_or(CoreError::LayerOutOfRange {
            layer,
            n_layers: self.layers.len(),
        })?;
        if w.shape() != (spec.out_dim, spec.in_dim) {
            return Err(CoreError::DimensionMismatch {
                op: "set_weight",
                lhs: w.shape(),
                rhs: (spec.out_dim, spec.in_dim),
            });
        }
        self.weights[layer] = w;
        Ok(())
    }

    /// Replaces a layer's bias row. The shape must be `1 x out_dim`.
    pub fn set_bias(&mut self, layer: usize, b: Matrix) -> Result<()> {
        let spec = self.layers.get(layer).ok_or(CoreError::LayerOutOfRange {
            layer,
            n_layers: self.layers.len(),
        })?;
        if b.shape() != (1, spec.out_dim) {
            return Err(CoreError::DimensionMismatch {
                op: "set_bias",
                lhs: b.shape(),
                rhs: (1, spec.out_dim),
            });
        }
        self.biases[layer] = b;
        Ok(())
    }

    pub(crate) fn weight_mut(&mut self, layer: usize) -> &mut Matrix {
        &mut self.weights[layer]
    }

    pub(crate) fn bias_mut(&mut self, layer: usize) -> &mut Matrix {
        &mut self.biases[layer]
    }

    pub(crate) fn batch_norm_state_mut(&mut self, layer: usize) -> Option<&mut BatchNormState> {
        self.batch_norm[layer].as_mut()
    }

    /// Index of the feature (concept) layer: the last layer before the
    /// head. `None` for a bare affine network.
    pub fn feature_layer(&self) -> Option<usize> {
        self.layers.len().checked_sub(2)
    }

    pub fn feature_binarization(&self) -> Option<&[f64]> {
        self.feature_binarization.as_deref()
    }

    /// Inference-mode forward pass: batch norm uses running statistics and
    /// any attached feature binarization is applied before the head.
    pub fn forward(&self, x: &Matrix) -> Result<ForwardPass> {
        if x.rows() == 0 {
            return Err(CoreError::EmptyInput {
                context: "forward input",
            });
        }
        if x.cols() != self.input_dim() {
            return Err(CoreError::DimensionMismatch {
                op: "forward",
                lhs: x.shape(),
                rhs: (x.rows(), self.input_dim()),
            });
        }
        let feature_layer = self.feature_layer();
        let mut current = x.clone();
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len());
        for (l, spec) in self.layers.iter().enumerate() {
            let mut z = current
                .matmul_nt(&self.weights[l])?
                .add_row_broadcast(&self.biases[l])?;
            if let Some(bn) = &self.batch_norm[l] {
                z = apply_bn_inference(&z, bn)?;
            }
            let mut a = crate::activations::activation_forward_matrix(&z, &spec.activation)?;
            if feature_layer == Some(l) {
                if let Some(thresholds) = &self.feature_binarization {
                    a = binarize_with_thresholds(&a, thresholds)?;
                }
            }
            pre_activations.push(z);
            current = a.clone();
            activations.push(a);
        }
        Ok(ForwardPass {
            output: current,
            pre_activations,
            activations,
        })
    }

    /// Feature-layer activations in inference mode (binarized when a
    /// binarization stage is attached).
    pub fn feature_activations(&self, x: &Matrix) -> Result<Matrix> {
        let idx = self.feature_layer().ok_or_else(|| CoreError::BadArchitecture {
            reason: "a bare affine network has no feature layer".to_string(),
        })?;
        let pass = self.forward(x)?;
        Ok(pass.activations[idx].clone())
    }

    /// Training-mode forward pass recorded on a tape. Batch norm uses the
    /// batch's own statistics; when `update_running` is set the running
    /// averages are folded towards them (momentum 0.9). Feature
    /// binarization is an inference-time stage and is not recorded.
    pub fn forward_traced(
        &mut self,
        tape: &mut Tape,
        x: Matrix,
        update_running: bool,
    ) -> Result<TracedForward> {
        if x.rows() == 0 {
            return Err(CoreError::EmptyInput {
                context: "forward input",
            });
        }
        if x.cols() != self.input_dim() {
            return Err(CoreError::DimensionMismatch {
                op: "forward_traced",
                lhs: x.shape(),
                rhs: (x.rows(), self.input_dim()),
            });
        }
        let mut current = tape.input(x);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut weight_nodes = Vec::with_capacity(self.layers.len());
        let mut bias_nodes = Vec::with_capacity(self.layers.len());
        let mut gamma_nodes = Vec::with_capacity(self.layers.len());
        let mut beta_nodes = Vec::with_capacity(self.layers.len());
        for l in 0..self.layers.len() {
            let w = tape.input(self.weights[l].clone());
            let b = tape.input(self.biases[l].clone());
            weight_nodes.push(w);
            bias_nodes.push(b);
            let mut z = tape.matmul_nt(current, w)?;
            z = tape.add_bias(z, b)?;
            if self.batch_norm[l].is_some() {
                let (gamma, beta) = {
                    let bn = self.batch_norm[l].as_ref().expect("checked");
                    (tape.input(bn.gamma.clone()), tape.input(bn.beta.clone()))
                };
                let (normed, stats) = tape.batch_norm(z, gamma, beta, BN_EPS)?;
                if update_running {
                    let bn = self.batch_norm[l].as_mut().expect("checked");
                    for j in 0..stats.mean.len() {
                        let m = BN_MOMENTUM * bn.running_mean.get(0, j)
                            + (1.0 - BN_MOMENTUM) * stats.mean[j];
                        let v = BN_MOMENTUM * bn.running_var.get(0, j)
                            + (1.0 - BN_MOMENTUM) * stats.var[j];
                        bn.running_mean.set(0, j, m);
                        bn.running_var.set(0, j, v);
                    }
                }
                z = normed;
                gamma_nodes.push(Some(gamma));
                beta_nodes.push(Some(beta));
            } else {
                gamma_nodes.push(None);
                beta_nodes.push(None);
            }
            pre_activations.push(z);
            current = tape.activation(z, self.layers[l].activation)?;
        }
        Ok(TracedForward {
            output: current,
            pre_activations,
            weights: weight_nodes,
            biases: bias_nodes,
            bn_gamma: gamma_nodes,
            bn_beta: beta_nodes,
        })
    }

    /// Returns a copy with every layer whose activation kind appears in
    /// `from` re-labelled with activation `to`. Weights, biases, batch-norm
    /// state, and any binarization thresholds are copied bit for bit.
    pub fn swap_activations(
        &self,
        from: &[ActivationKind],
        to: ActivationSpec,
    ) -> Result<Network> {
        to.validate()?;
        let mut out = self.clone();
        for spec in &mut out.layers {
            if from.contains(&spec.activation.kind()) {
                spec.activation = to;
            }
        }
        Ok(out)
    }

    /// Attaches per-node median thresholds computed from feature-layer
    /// activations on training data. At inference the feature bits become
    /// `1{activation >= median}`. For an even number of rows the median is
    /// the mean of the two middle order statistics.
    pub fn median_binarize(&self, feature_activations: &Matrix) -> Result<Network> {
        let width = self.expect_feature_width()?;
        check_activation_batch(feature_activations, width)?;
        let mut thresholds = Vec::with_capacity(width);
        for j in 0..feature_activations.cols() {
            let mut col = feature_activations.col(j);
            col.sort_by(|a, b| a.partial_cmp(b).expect("finite by contract"));
            let n = col.len();
            let median = if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            };
            thresholds.push(median);
        }
        let mut out = self.clone();
        out.feature_binarization = Some(thresholds);
        Ok(out)
    }

    /// Attaches per-node quantile thresholds chosen so that the fraction of
    /// training activations mapped to one matches `one_proportion[j]`
    /// (to within 1/n, ties permitting): the threshold is the k-th largest
    /// activation with `k = round(p * n)`, or just above the maximum when
    /// `k = 0`.
    pub fn binarize_matched_proportion(
        &self,
        feature_activations: &Matrix,
        one_proportion: &[f64],
    ) -> Result<Network> {
        let width = self.expect_feature_width()?;
        check_activation_batch(feature_activations, width)?;
        if one_proportion.len() != width {
            return Err(CoreError::LengthMismatch {
                context: "binarize_matched_proportion",
                lhs: one_proportion.len(),
                rhs: width,
            });
        }
        let n = feature_activations.rows();
        let mut thresholds = Vec::with_capacity(width);
        for (j, &p) in one_proportion.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(CoreError::InvalidParameter {
                    name: "one_proportion",
                    value: p,
                });
            }
            let mut col = feature_activations.col(j);
            col.sort_by(|a, b| b.partial_cmp(a).expect("finite by contract"));
            let k = (p * n as f64).round() as usize;
            let k = k.min(n);
            let threshold = if k == 0 { col[0] + 1.0 } else { col[k - 1] };
            thresholds.push(threshold);
        }
        let mut out = self.clone();
        out.feature_binarization = Some(thresholds);
        Ok(out)
    }

    fn expect_feature_width(&self) -> Result<usize> {
        let idx = self.feature_layer().ok_or_else(|| CoreError::BadArchitecture {
            reason: "a bare affine network has no feature layer to binarize".to_string(),
        })?;
        Ok(self.layers[idx].out_dim)
    }

    /// Serializes to a versioned JSON document. Weights round-trip
    /// bit-exactly.
    pub fn to_json(&self) -> String {
        let doc = NetworkDoc {
            format_version: FORMAT_VERSION,
            layers: self.layers.clone(),
            weights: self.weights.iter().map(Matrix::to_flat_vec).collect(),
            biases: self.biases.iter().map(|b| b.row(0)).collect(),
            batch_norm: self
                .batch_norm
                .iter()
                .map(|bn| {
                    bn.as_ref().map(|s| BatchNormDoc {
                        gamma: s.gamma.row(0),
                        beta: s.beta.row(0),
                        running_mean: s.running_mean.row(0),
                        running_var: s.running_var.row(0),
                    })
                })
                .collect(),
            head: self.head,
            feature_binarization: self.feature_binarization.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("document serialization cannot fail")
    }

    /// Parses a document produced by [`Network::to_json`], re-validating
    /// the architecture and every shape.
    pub fn from_json(json: &str) -> Result<Network> {
        let doc: NetworkDoc =
            serde_json::from_str(json).map_err(|e| CoreError::BadNetworkDocument {
                reason: e.to_string(),
            })?;
        if doc.format_version != FORMAT_VERSION {
            return Err(CoreError::BadNetworkDocument {
                reason: format!(
                    "unsupported format version {} (expected {FORMAT_VERSION})",
                    doc.format_version
                ),
            });
        }
        validate_architecture(&doc.layers, &doc.head)?;
        let n = doc.layers.len();
        if doc.weights.len() != n || doc.biases.len() != n || doc.batch_norm.len() != n {
            return Err(CoreError::BadNetworkDocument {
                reason: "per-layer arrays disagree with the layer count".to_string(),
            });
        }
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        let mut batch_norm = Vec::with_capacity(n);
        for (l, spec) in doc.layers.iter().enumerate() {
            let w = Matrix::from_shape_vec(spec.out_dim, spec.in_dim, doc.weights[l].clone())
                .map_err(|e| CoreError::BadNetworkDocument {
                    reason: format!("layer {l} weights: {e}"),
                })?;
            let b = Matrix::from_shape_vec(1, spec.out_dim, doc.biases[l].clone()).map_err(
                |e| CoreError::BadNetworkDocument {
                    reason: format!("layer {l} bias: {e}"),
                },
            )?;
            let bn = match (&doc.batch_norm[l], spec.batch_norm) {
                (Some(s), true) => Some(BatchNormState {
                    gamma: row_matrix(&s.gamma, spec.out_dim, l, "gamma")?,
                    beta: row_matrix(&s.beta, spec.out_dim, l, "beta")?,
                    running_mean: row_matrix(&s.running_mean, spec.out_dim, l, "running_mean")?,
                    running_var: row_matrix(&s.running_var, spec.out_dim, l, "running_var")?,
                }),
                (None, false) => None,
                _ => {
                    return Err(CoreError::BadNetworkDocument {
                        reason: format!("layer {l} batch-norm state disagrees with its spec"),
                    })
                }
            };
            weights.push(w);
            biases.push(b);
            batch_norm.push(bn);
        }
        if let Some(t) = &doc.feature_binarization {
            let feature_width = doc
                .layers
                .len()
                .checked_sub(2)
                .map(|i| doc.layers[i].out_dim)
                .ok_or_else(|| CoreError::BadNetworkDocument {
                    reason: "binarization attached to a network with no feature layer"
                        .to_string(),
                })?;
            if t.len() != feature_width {
                return Err(CoreError::BadNetworkDocument {
                    reason: format!(
                        "binarization has {} thresholds but the feature layer is {} wide",
                        t.len(),
                        feature_width
                    ),
                });
            }
        }
        Ok(Network {
            layers: doc.layers,
            weights,
            biases,
            batch_norm,
            head: doc.head,
            feature_binarization: doc.feature_binarization,
        })
    }
}

fn row_matrix(data: &[f64], width: usize, layer: usize, what: &str) -> Result<Matrix> {
    Matrix::from_shape_vec(1, width, data.to_vec()).map_err(|e| CoreError::BadNetworkDocument {
        reason: format!("layer {layer} {what}: {e}"),
    })
}

fn check_activation_batch(acts: &Matrix, width: usize) -> Result<()> {
    if acts.rows() == 0 {
        return Err(CoreError::EmptyInput {
            context: "feature activations",
        });
    }
    if acts.cols() != width {
        return Err(CoreError::DimensionMismatch {
            op: "feature binarization",
            lhs: acts.shape(),
            rhs: (acts.rows(), width),
        });
    }
    Ok(())
}

fn apply_bn_inference(z: &Matrix, bn: &BatchNormState) -> Result<Matrix> {
    let mut scale = Matrix::zeros(1, z.cols());
    let mut shift = Matrix::zeros(1, z.cols());
    for j in 0..z.cols() {
        let inv_std = 1.0 / (bn.running_var.get(0, j) + BN_EPS).sqrt();
        let g = bn.gamma.get(0, j) * inv_std;
        scale.set(0, j, g);
        shift.set(0, j, bn.beta.get(0, j) - g * bn.running_mean.get(0, j));
    }
    z.mul_row_broadcast(&scale)?.add_row_broadcast(&shift)
}

fn binarize_with_thresholds(acts: &Matrix, thresholds: &[f64]) -> Result<Matrix> {
    if thresholds.len() != acts.cols() {
        return Err(CoreError::LengthMismatch {
            context: "feature binarization thresholds",
            lhs: thresholds.len(),
            rhs: acts.cols(),
        });
    }
    Ok(Matrix::from_fn(acts.rows(), acts.cols(), |i, j| {
        heaviside(acts.get(i, j) - thresholds[j])
    }))
}

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BatchNormDoc {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    format_version: u32,
    layers: Vec<LayerSpec>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    batch_norm: Vec<Option<BatchNormDoc>>,
    head: Head,
    feature_binarization: Option<Vec<f64>>,
}
