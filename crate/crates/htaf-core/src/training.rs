//! Minibatch training, gradient-flow tracing, and evaluation metrics.
//!
//! [`train`] runs seeded minibatch SGD or Adam over a [`TrainSet`],
//! recording each epoch's average loss and the average L2 norm of the loss
//! gradient with respect to every layer's pre-activations. That trace is
//! the raw material for [`detect_vanishing`], which flags a layer whose
//! gradient norm stays below a threshold for all epochs after the first
//! quarter of training: the signature of a saturating activation whose
//! tails have gone numerically dead.
//!
//! Determinism: all randomness (batch shuffling) comes from a ChaCha8
//! stream seeded from the config, so a fixed seed reproduces training
//! bit for bit. [`derive_seed`] folds structured indices (repeat, method,
//! grid cell) into a master seed so sweeps get decorrelated but
//! reproducible streams.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activations::{ActivationKind, ActivationSpec, HtafParams, SurrogateKind};
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::network::{Head, Network};
use crate::tape::Tape;

/// Optimizer selection. Adam keeps per-parameter first and second moment
/// estimates with bias correction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    /// Adam with the standard hyperparameters (0.9, 0.999, 1e-8).
    pub fn adam_default() -> OptimizerKind {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Training loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    SoftmaxCrossEntropy,
}

/// How the surrogate-trained network is parameterized. Carried in the
/// config so a training run can verify it was handed a network whose
/// activations actually implement the declared method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainMethod {
    /// Heavy-tailed activation at the step-surrogate layers.
    Htaf(HtafParams),
    /// Plain scaled sigmoid at the step-surrogate layers.
    ScaledSigmoid { beta0: f64 },
    /// Straight-through estimator: hard step forward, surrogate backward.
    Ste { surrogate: SurrogateKind },
    /// Conventional network, no step surrogates anywhere.
    Dnn,
}

impl TrainMethod {
    /// The activation a surrogate layer must carry under this method, or
    /// `None` for [`TrainMethod::Dnn`].
    pub fn surrogate_activation(&self) -> Option<ActivationSpec> {
        match self {
            TrainMethod::Htaf(p) => Some(ActivationSpec::Htaf(*p)),
            TrainMethod::ScaledSigmoid { beta0 } => {
                Some(ActivationSpec::ScaledSigmoid { beta0: *beta0 })
            }
            TrainMethod::Ste { surrogate } => Some(ActivationSpec::SteHeaviside {
                surrogate: *surrogate,
            }),
            TrainMethod::Dnn => None,
        }
    }
}

/// Targets for supervised training.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    /// Regression values, one per row.
    Values(Vec<f64>),
    /// Class labels, one per row.
    Labels(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(v) => v.len(),
            Targets::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Features plus aligned targets.
#[derive(Clone, Debug)]
pub struct TrainSet {
    pub x: Matrix,
    pub targets: Targets,
}

impl TrainSet {
    pub fn regression(x: Matrix, y: Vec<f64>) -> Result<TrainSet> {
        if x.rows() == 0 {
            return Err(CoreError::EmptyInput { context: "dataset" });
        }
        if y.len() != x.rows() {
            return Err(CoreError::LengthMismatch {
                context: "regression targets",
                lhs: y.len(),
                rhs: x.rows(),
            });
        }
        if let Some(&bad) = y.iter().find(|v| !v.is_finite()) {
            let _ = bad;
            return Err(CoreError::NonFinite {
                context: "regression targets",
            });
        }
        Ok(TrainSet {
            x,
            targets: Targets::Values(y),
        })
    }

    pub fn classification(x: Matrix, labels: Vec<usize>) -> Result<TrainSet> {
        if x.rows() == 0 {
            return Err(CoreError::EmptyInput { context: "dataset" });
        }
        if labels.len() != x.rows() {
            return Err(CoreError::LengthMismatch {
                context: "class labels",
                lhs: labels.len(),
                rhs: x.rows(),
            });
        }
        Ok(TrainSet {
            x,
            targets: Targets::Labels(labels),
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Full training configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub method: TrainMethod,
}

/// Per-epoch record of loss and gradient flow.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GradientTrace {
    /// `layer_grad_norms[epoch][layer]`: average over the epoch's batches
    /// of the L2 (Frobenius) norm of d loss / d pre-activation at that
    /// layer.
    pub layer_grad_norms: Vec<Vec<f64>>,
    /// Average training loss per epoch, weighted by batch size.
    pub epoch_loss: Vec<f64>,
}

/// A trained network together with its gradient-flow trace.
#[derive(Debug)]
pub struct TrainOutcome {
    pub network: Network,
    pub trace: GradientTrace,
}

/// Adam moment estimates for one parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Matrix,
    v: Matrix,
    t: u64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> AdamState {
        AdamState {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
        }
    }
}

/// One Adam update with bias correction:
/// `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`,
/// `p <- p - lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(
    param: &mut Matrix,
    grad: &Matrix,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(CoreError::DimensionMismatch {
            op: "adam_step",
            lhs: param.shape(),
            rhs: grad.shape(),
        });
    }
    state.t += 1;
    state.m.zip_update(grad, |m, g| beta1 * m + (1.0 - beta1) * g)?;
    state.v.zip_update(grad, |v, g| beta2 * v + (1.0 - beta2) * g * g)?;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    let (rows, cols) = param.shape();
    for r in 0..rows {
        for c in 0..cols {
            let m_hat = state.m.get(r, c) / bc1;
            let v_hat = state.v.get(r, c) / bc2;
            let step = lr * m_hat / (v_hat.sqrt() + epsilon);
            param.set(r, c, param.get(r, c) - step);
        }
    }
    param.ensure_finite("adam_step")
}

/// One plain gradient-descent update `p <- p - lr * g`.
pub fn sgd_step(param: &mut Matrix, grad: &Matrix, lr: f64) -> Result<()> {
    param.zip_update(grad, |p, g| p - lr * g)
}

/// Folds structured indices into a master seed with SplitMix64, giving
/// each (repeat, method, grid cell, ...) combination its own decorrelated
/// but reproducible stream.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &p in parts {
        state = splitmix64(state ^ splitmix64(p));
    }
    state
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut x = z;
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

enum ParamState {
    Sgd,
    Adam {
        weights: Vec<AdamState>,
        biases: Vec<AdamState>,
        gammas: Vec<Option<AdamState>>,
        betas: Vec<Option<AdamState>>,
    },
}

/// Trains a network with seeded minibatches. The network's activations
/// must be consistent with `cfg.method`, the loss with the head. Returns
/// the trained network and its gradient-flow trace. A NaN or infinite
/// loss (or any non-finite intermediate, which only arises from exploding
/// parameters) aborts with [`CoreError::TrainingDiverged`].
pub fn train(net: Network, data: &TrainSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_loop(net, data, cfg, |_, _| Ok(()))
}

/// Outcome of a validated run: the weights are a snapshot from the epoch
/// with the best validation metric, not the final epoch.
#[derive(Clone, Debug)]
pub struct ValidatedOutcome {
    pub network: Network,
    /// Epoch index whose snapshot is returned.
    pub best_epoch: usize,
    /// Validation metric at `best_epoch`.
    pub best_val: f64,
    /// Validation metric after every epoch.
    pub val_history: Vec<f64>,
    pub trace: GradientTrace,
}

/// Trains like [`train`], but evaluates `metric` on `val` after every epoch
/// and returns the network snapshot from the best epoch. Improvement must be
/// strict, so ties keep the earliest epoch.
pub fn train_with_validation(
    net: Network,
    data: &TrainSet,
    val: &TrainSet,
    metric: Metric,
    cfg: &TrainConfig,
) -> Result<ValidatedOutcome> {
    let mut best: Option<(usize, f64, Network)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    let lower = metric.lower_is_better();
    let outcome = train_loop(net, data, cfg, |net, epoch| {
        let v = evaluate(net, val, metric)?;
        history.push(v);
        let improved = match &best {
            None => true,
            Some((_, b, _)) => {
                if lower {
                    v < *b
                } else {
                    v > *b
                }
            }
        };
        if improved {
            best = Some((epoch, v, net.clone()));
        }
        Ok(())
    })?;
    let (best_epoch, best_val, network) = best.expect("at least one epoch");
    Ok(ValidatedOutcome {
        network,
        best_epoch,
        best_val,
        val_history: history,
        trace: outcome.trace,
    })
}

fn train_loop(
    net: Network,
    data: &TrainSet,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&Network, usize) -> Result<()>,
) -> Result<TrainOutcome> {
    validate_config(&net, data, cfg)?;
    let mut net = net;
    let n = data.len();
    let n_layers = net.n_layers();

    let mut opt = match cfg.optimizer {
        OptimizerKind::Sgd => ParamState::Sgd,
        OptimizerKind::Adam { .. } => {
            let weights = (0..n_layers)
                .map(|l| {
                    let (r, c) = net.weight(l).expect("in range").shape();
                    AdamState::new(r, c)
                })
                .collect();
            let biases = (0..n_layers)
                .map(|l| {
                    let (r, c) = net.bias(l).expect("in range").shape();
                    AdamState::new(r, c)
                })
                .collect();
            let gammas = net
                .layers()
                .iter()
                .map(|s| s.batch_norm.then(|| AdamState::new(1, s.out_dim)))
                .collect();
            let betas = net
                .layers()
                .iter()
                .map(|s| s.batch_norm.then(|| AdamState::new(1, s.out_dim)))
                .collect();
            ParamState::Adam {
                weights,
                biases,
                gammas,
                betas,
            }
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = GradientTrace::default();
    let mut indices: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut norm_sums = vec![0.0; n_layers];
        let mut n_batches = 0usize;

        for batch in indices.chunks(cfg.batch_size) {
            let bx = Matrix::from_fn(batch.len(), data.x.cols(), |i, j| {
                data.x.get(batch[i], j)
            });
            let step = run_batch(&mut net, &mut opt, cfg, data, batch, bx)
                .map_err(|e| into_divergence(e, epoch))?;
            if !step.loss.is_finite() {
                return Err(CoreError::TrainingDiverged {
                    epoch,
                    loss: step.loss,
                });
            }
            loss_sum += step.loss * batch.len() as f64;
            for (acc, norm) in norm_sums.iter_mut().zip(&step.layer_norms) {
                *acc += norm;
            }
            n_batches += 1;
        }

        trace.epoch_loss.push(loss_sum / n as f64);
        trace
            .layer_grad_norms
            .push(norm_sums.iter().map(|s| s / n_batches as f64).collect());
        on_epoch(&net, epoch)?;
    }

    Ok(TrainOutcome { network: net, trace })
}

struct BatchStep {
    loss: f64,
    layer_norms: Vec<f64>,
}

fn run_batch(
    net: &mut Network,
    opt: &mut ParamState,
    cfg: &TrainConfig,
    data: &TrainSet,
    batch: &[usize],
    bx: Matrix,
) -> Result<BatchStep> {
    let mut tape = Tape::new();
    let traced = net.forward_traced(&mut tape, bx, true)?;
    let loss_node = match (&data.targets, cfg.loss) {
        (Targets::Values(y), LossKind::Mse) => {
            let ty = Matrix::from_fn(batch.len(), 1, |i, _| y[batch[i]]);
            let t = tape.input(ty);
            tape.mse_loss(traced.output, t)?
        }
        (Targets::Labels(labels), LossKind::SoftmaxCrossEntropy) => {
            let bl: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            tape.softmax_cross_entropy(traced.output, &bl)?
        }
        _ => {
            return Err(CoreError::MethodMismatch {
                reason: "loss kind does not match the target kind".to_string(),
            })
        }
    };
    let loss = tape.value(loss_node)?.get(0, 0);
    let grads = tape.backward(loss_node)?;

    let layer_norms: Vec<f64> = traced
        .pre_activations
        .iter()
        .map(|&id| grads.get(id).map(Matrix::frobenius_norm))
        .collect::<Result<_>>()?;

    match (cfg.optimizer, &mut *opt) {
        (OptimizerKind::Sgd, ParamState::Sgd) => {
            for l in 0..net.n_layers() {
                let gw = grads.get(traced.weights[l])?.clone();
                sgd_step(net.weight_mut(l), &gw, cfg.lr)?;
                let gb = grads.get(traced.biases[l])?.clone();
                sgd_step(net.bias_mut(l), &gb, cfg.lr)?;
                if let (Some(gamma_node), Some(beta_node)) =
                    (traced.bn_gamma[l], traced.bn_beta[l])
                {
                    let gg = grads.get(gamma_node)?.clone();
                    let gb = grads.get(beta_node)?.clone();
                    let bn = net.batch_norm_state_mut(l).expect("bn layer");
                    sgd_step(&mut bn.gamma, &gg, cfg.lr)?;
                    sgd_step(&mut bn.beta, &gb, cfg.lr)?;
                }
            }
        }
        (
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            },
            ParamState::Adam {
                weights,
                biases,
                gammas,
                betas,
            },
        ) => {
            for l in 0..net.n_layers() {
                let gw = grads.get(traced.weights[l])?.clone();
                adam_step(
                    net.weight_mut(l),
                    &gw,
                    &mut weights[l],
                    cfg.lr,
                    beta1,
                    beta2,
                    epsilon,
                )?;
                let gb = grads.get(traced.biases[l])?.clone();
                adam_step(
                    net.bias_mut(l),
                    &gb,
                    &mut biases[l],
                    cfg.lr,
                    beta1,
                    beta2,
                    epsilon,
                )?;
                if let (Some(gamma_node), Some(beta_node)) =
                    (traced.bn_gamma[l], traced.bn_beta[l])
                {
                    let gg = grads.get(gamma_node)?.clone();
                    let gbt = grads.get(beta_node)?.clone();
                    let gamma_state = gammas[l].as_mut().expect("bn layer");
                    let beta_state = betas[l].as_mut().expect("bn layer");
                    let bn = net.batch_norm_state_mut(l).expect("bn layer");
                    adam_step(&mut bn.gamma, &gg, gamma_state, cfg.lr, beta1, beta2, epsilon)?;
                    adam_step(&mut bn.beta, &gbt, beta_state, cfg.lr, beta1, beta2, epsilon)?;
                }
            }
        }
        _ => unreachable!("optimizer state matches the config by construction"),
    }

    Ok(BatchStep { loss, layer_norms })
}

/// Exploding parameters surface as non-finite values mid-forward; report
/// them as divergence at the epoch where they appeared.
fn into_divergence(e: CoreError, epoch: usize) -> CoreError {
    match e {
        CoreError::NonFinite { .. } => CoreError::TrainingDiverged {
            epoch,
            loss: f64::INFINITY,
        },
        other => other,
    }
}

fn validate_config(net: &Network, data: &TrainSet, cfg: &TrainConfig) -> Result<()> {
    if data.is_empty() {
        return Err(CoreError::EmptyInput { context: "dataset" });
    }
    if data.x.cols() != net.input_dim() {
        return Err(CoreError::DimensionMismatch {
            op: "train",
            lhs: data.x.shape(),
            rhs: (data.x.rows(), net.input_dim()),
        });
    }
    if !cfg.lr.is_finite() || cfg.lr < 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "lr",
            value: cfg.lr,
        });
    }
    if cfg.epochs == 0 {
        return Err(CoreError::InvalidParameter {
            name: "epochs",
            value: 0.0,
        });
    }
    if cfg.batch_size == 0 {
        return Err(CoreError::InvalidParameter {
            name: "batch_size",
            value: 0.0,
        });
    }
    if let OptimizerKind::Adam {
        beta1,
        beta2,
        epsilon,
    } = cfg.optimizer
    {
        for (name, v, lo, hi) in [
            ("beta1", beta1, 0.0, 1.0),
            ("beta2", beta2, 0.0, 1.0),
        ] {
            if !v.is_finite() || v < lo || v >= hi {
                return Err(CoreError::InvalidParameter { name, value: v });
            }
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "adam epsilon",
                value: epsilon,
            });
        }
    }

    match (net.head(), cfg.loss, &data.targets) {
        (Head::Regression, LossKind::Mse, Targets::Values(_)) => {}
        (Head::Classification { n_classes }, LossKind::SoftmaxCrossEntropy, Targets::Labels(l)) => {
            if let Some(&bad) = l.iter().find(|&&lbl| lbl >= n_classes) {
                return Err(CoreError::InvalidParameter {
                    name: "label",
                    value: bad as f64,
                });
            }
        }
        _ => {
            return Err(CoreError::MethodMismatch {
                reason: "head, loss, and targets must agree (regression/mse/values or \
                         classification/cross-entropy/labels)"
                    .to_string(),
            })
        }
    }

    check_method(net, &cfg.method)
}

/// A network is consistent with a method when every step-surrogate layer
/// (heavy-tailed, scaled sigmoid, STE, or hard step) carries exactly the
/// method's activation, and at least one such layer exists; a plain DNN
/// must have none.
fn check_method(net: &Network, method: &TrainMethod) -> Result<()> {
    let surrogate_kinds = [
        ActivationKind::Htaf,
        ActivationKind::ScaledSigmoid,
        ActivationKind::SteHeaviside,
        ActivationKind::Heaviside,
    ];
    let surrogate_layers: Vec<&ActivationSpec> = net
        .layers()
        .iter()
        .map(|s| &s.activation)
        .filter(|a| surrogate_kinds.contains(&a.kind()))
        .collect();
    match method.surrogate_activation() {
        None => {
            if surrogate_layers.is_empty() {
                Ok(())
            } else {
                Err(CoreError::MethodMismatch {
                    reason: "dnn method but the network has step-surrogate layers".to_string(),
                })
            }
        }
        Some(expected) => {
            if surrogate_layers.is_empty() {
                return Err(CoreError::MethodMismatch {
                    reason: "method expects step-surrogate layers but the network has none"
                        .to_string(),
                });
            }
            if let Some(bad) = surrogate_layers.iter().find(|a| ***a != expected) {
                return Err(CoreError::MethodMismatch {
                    reason: format!(
                        "network carries {bad:?} where the method expects {expected:?}"
                    ),
                });
            }
            Ok(())
        }
    }
}

/// True when the layer's gradient norm falls below `threshold` at any
/// epoch after the first quarter of training (indices >= ceil(epochs/4)).
/// The early window is excluded so initialization transients cannot trip
/// the detector; single-epoch traces can never witness vanishing.
pub fn detect_vanishing(trace: &GradientTrace, layer: usize, threshold: f64) -> Result<bool> {
    if trace.layer_grad_norms.is_empty() {
        return Err(CoreError::EmptyInput {
            context: "gradient trace",
        });
    }
    let n_layers = trace.layer_grad_norms[0].len();
    if layer >= n_layers {
        return Err(CoreError::LayerOutOfRange { layer, n_layers });
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "threshold",
            value: threshold,
        });
    }
    let n = trace.layer_grad_norms.len();
    let start = n.div_ceil(4);
    if start >= n {
        return Ok(false);
    }
    Ok(trace.layer_grad_norms[start..]
        .iter()
        .any(|epoch| epoch[layer] < threshold))
}

/// Evaluation metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rmse,
    Auroc,
    Accuracy,
}

impl Metric {
    /// Whether smaller values of this metric are better.
    pub fn lower_is_better(self) -> bool {
        matches!(self, Metric::Rmse)
    }
}

/// Evaluates a network on a dataset. RMSE needs a regression head and
/// value targets; AUROC needs a two-class head (scores are the class-1
/// minus class-0 logit, ranked with Mann-Whitney midranks, so ties are
/// handled exactly); accuracy needs a classification head (argmax, ties
/// to the lower class index).
pub fn evaluate(net: &Network, data: &TrainSet, metric: Metric) -> Result<f64> {
    if data.is_empty() {
        return Err(CoreError::EmptyInput { context: "dataset" });
    }
    let pass = net.forward(&data.x)?;
    match (metric, net.head(), &data.targets) {
        (Metric::Rmse, Head::Regression, Targets::Values(y)) => {
            let preds = pass.output.col(0);
            let mse = preds
                .iter()
                .zip(y)
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>()
                / y.len() as f64;
            Ok(mse.sqrt())
        }
        (Metric::Auroc, Head::Classification { n_classes }, Targets::Labels(labels)) => {
            if n_classes != 2 {
                return Err(CoreError::MetricUndefined {
                    reason: format!("auroc needs exactly 2 classes, head has {n_classes}"),
                });
            }
            let scores: Vec<f64> = (0..pass.output.rows())
                .map(|i| pass.output.get(i, 1) - pass.output.get(i, 0))
                .collect();
            auroc_midrank(&scores, labels)
        }
        (Metric::Accuracy, Head::Classification { .. }, Targets::Labels(labels)) => {
            let mut correct = 0usize;
            for (i, &label) in labels.iter().enumerate() {
                let row = pass.output.row(i);
                let mut best = 0usize;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                if best == label {
                    correct += 1;
                }
            }
            Ok(correct as f64 / labels.len() as f64)
        }
        (m, h, _) => Err(CoreError::MetricUndefined {
            reason: format!("metric {m:?} is undefined for head {h:?} or these targets"),
        }),
    }
}

/// Mann-Whitney AUROC with midranks for tied scores.
fn auroc_midrank(scores: &[f64], labels: &[usize]) -> Result<f64> {
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(CoreError::MetricUndefined {
            reason: "auroc needs both classes present".to_string(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; tied scores share the average rank.
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}
