//! Activation functions and their exact gradients.
//!
//! The centrepiece is the heavy-tailed activation
//! `htaf(x) = sigmoid(alpha1 * tanh(alpha0 * x))`, a smooth surrogate for the
//! Heaviside step whose gradient decays like `exp(-2*alpha0*|x|)` instead of
//! the `exp(-beta0*|x|)` of a plain scaled sigmoid with matching origin slope
//! `alpha0*alpha1/4`. Alongside it: the Heaviside step itself, scaled
//! sigmoids, straight-through estimators with selectable surrogate gradients,
//! and the ordinary ReLU/sigmoid/tanh used in backbones.
//!
//! All formulas are evaluated in numerically stable forms. `1 - tanh(z)^2`
//! is computed as `4*e / (1+e)^2` with `e = exp(-2*|z|)`, and
//! `sigmoid(z)*(1 - sigmoid(z))` as `e / (1+e)^2` with `e = exp(-|z|)`, so
//! tail gradients stay accurate down to the underflow threshold instead of
//! dying from cancellation near `1 - 1`. When the tail genuinely underflows,
//! gradients return exactly `0.0`; the `_checked` variants report that via a
//! flag rather than clamping.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

/// Parameters of the heavy-tailed activation: `alpha0` controls the tail
/// decay rate (gradient ~ `exp(-2*alpha0*|x|)`), `alpha1` the saturation
/// gain. Both are strictly positive with a finite product; construction
/// enforces this.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHtafParams", into = "RawHtafParams")]
pub struct HtafParams {
    alpha0: f64,
    alpha1: f64,
}

#[derive(Serialize, Deserialize)]
struct RawHtafParams {
    alpha0: f64,
    alpha1: f64,
}

impl From<HtafParams> for RawHtafParams {
    fn from(p: HtafParams) -> RawHtafParams {
        RawHtafParams {
            alpha0: p.alpha0,
            alpha1: p.alpha1,
        }
    }
}

impl TryFrom<RawHtafParams> for HtafParams {
    type Error = String;

    fn try_from(raw: RawHtafParams) -> std::result::Result<HtafParams, String> {
        HtafParams::new(raw.alpha0, raw.alpha1).map_err(|e| e.to_string())
    }
}

impl HtafParams {
    pub fn new(alpha0: f64, alpha1: f64) -> Result<HtafParams> {
        if !alpha0.is_finite() || alpha0 <= 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "alpha0",
                value: alpha0,
            });
        }
        if !alpha1.is_finite() || alpha1 <= 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "alpha1",
                value: alpha1,
            });
        }
        if !(alpha0 * alpha1).is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "alpha0*alpha1",
                value: alpha0 * alpha1,
            });
        }
        Ok(HtafParams { alpha0, alpha1 })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    /// Derivative at the origin, `alpha0 * alpha1 / 4`.
    pub fn origin_slope(&self) -> f64 {
        self.alpha0 * self.alpha1 / 4.0
    }
}

/// Surrogate gradient used by the straight-through estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    /// `sigmoid(x) * (1 - sigmoid(x))`.
    Sigmoid,
    /// `1 - tanh(x)^2`.
    Tanh,
    /// `1` on `|x| < 1`, else `0`.
    Rectangular,
}

/// Activation attached to a network layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationSpec {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
    Htaf(HtafParams),
    ScaledSigmoid { beta0: f64 },
    /// Hard step `1{x >= 0}`. Its exact gradient is zero almost everywhere,
    /// so it is an inference-time activation; training through it requires a
    /// smooth stand-in or a straight-through estimator.
    Heaviside,
    /// Heaviside forward, surrogate gradient backward.
    SteHeaviside { surrogate: SurrogateKind },
}

/// Activation discriminant, used to select layers for activation swaps
/// without matching on parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActivationKind {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
    Htaf,
    ScaledSigmoid,
    Heaviside,
    SteHeaviside,
}

impl ActivationSpec {
    pub fn kind(&self) -> ActivationKind {
        match self {
            ActivationSpec::Identity => ActivationKind::Identity,
            ActivationSpec::Relu => ActivationKind::Relu,
            ActivationSpec::Sigmoid => ActivationKind::Sigmoid,
            ActivationSpec::Tanh => ActivationKind::Tanh,
            ActivationSpec::Htaf(_) => ActivationKind::Htaf,
            ActivationSpec::ScaledSigmoid { .. } => ActivationKind::ScaledSigmoid,
            ActivationSpec::Heaviside => ActivationKind::Heaviside,
            ActivationSpec::SteHeaviside { .. } => ActivationKind::SteHeaviside,
        }
    }

    /// Checks parameter ranges that the enum representation cannot enforce.
    pub fn validate(&self) -> Result<()> {
        match self {
            ActivationSpec::ScaledSigmoid { beta0 } => {
                if !beta0.is_finite() || *beta0 <= 0.0 {
                    Err(CoreError::InvalidParameter {
                        name: "beta0",
                        value: *beta0,
                    })
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Gradient value together with an underflow advisory. `underflowed` is set
/// when the mathematically positive gradient rounded all the way to zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradEval {
    pub value: f64,
    pub underflowed: bool,
}

/// Logistic sigmoid evaluated without overflowing `exp` for large `|z|`.
pub fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid(z) * (1 - sigmoid(z))`, computed as `e / (1+e)^2` with
/// `e = exp(-|z|)` so the small factor is represented directly instead of as
/// a difference of nearly equal numbers.
pub fn sigmoid_sym_product(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `1 - tanh(z)^2`, computed as `4e / (1+e)^2` with `e = exp(-2*|z|)` for
/// the same reason as [`sigmoid_sym_product`].
pub fn sech_sq(z: f64) -> f64 {
    let e = (-2.0 * z.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// Heavy-tailed activation value, `sigmoid(alpha1 * tanh(alpha0 * x))`.
pub fn htaf_forward(x: f64, params: &HtafParams) -> f64 {
    stable_sigmoid(params.alpha1 * (params.alpha0 * x).tanh())
}

/// Exact derivative of [`htaf_forward`] with respect to `x`:
/// `alpha1 * sigmoid'(z) * alpha0 * (1 - tanh(alpha0 x)^2)` with
/// `z = alpha1 * tanh(alpha0 x)`. Returns exactly `0.0` when the tail
/// factor underflows.
pub fn htaf_grad(x: f64, params: &HtafParams) -> f64 {
    let t = (params.alpha0 * x).tanh();
    let z = params.alpha1 * t;
    params.alpha1 * sigmoid_sym_product(z) * params.alpha0 * sech_sq(params.alpha0 * x)
}

/// [`htaf_grad`] with an underflow advisory. The true gradient is strictly
/// positive everywhere, so a zero result always means underflow.
pub fn htaf_grad_checked(x: f64, params: &HtafParams) -> GradEval {
    let value = htaf_grad(x, params);
    GradEval {
        value,
        underflowed: value == 0.0,
    }
}

/// Hard step `1{x >= 0}`. Zero is mapped to one.
pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `sigmoid(beta0 * x)`.
pub fn scaled_sigmoid(x: f64, beta0: f64) -> f64 {
    stable_sigmoid(beta0 * x)
}

/// Derivative of [`scaled_sigmoid`]: `beta0 * sigmoid'(beta0 * x)`. The tail
/// decays like `exp(-beta0 * |x|)`. Returns exactly `0.0` on underflow.
pub fn scaled_sigmoid_grad(x: f64, beta0: f64) -> f64 {
    beta0 * sigmoid_sym_product(beta0 * x)
}

/// [`scaled_sigmoid_grad`] with an underflow advisory.
pub fn scaled_sigmoid_grad_checked(x: f64, beta0: f64) -> GradEval {
    let value = scaled_sigmoid_grad(x, beta0);
    GradEval {
        value,
        underflowed: value == 0.0,
    }
}

/// Surrogate gradient for the straight-through estimator.
pub fn surrogate_grad(kind: SurrogateKind, x: f64) -> f64 {
    match kind {
        SurrogateKind::Sigmoid => sigmoid_sym_product(x),
        SurrogateKind::Tanh => sech_sq(x),
        SurrogateKind::Rectangular => {
            if x.abs() < 1.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Activation value at a single pre-activation.
pub fn activation_value(x: f64, spec: &ActivationSpec) -> f64 {
    match spec {
        ActivationSpec::Identity => x,
        ActivationSpec::Relu => {
            if x > 0.0 {
                x
            } else {
                0.0
            }
        }
        ActivationSpec::Sigmoid => stable_sigmoid(x),
        ActivationSpec::Tanh => x.tanh(),
        ActivationSpec::Htaf(p) => htaf_forward(x, p),
        ActivationSpec::ScaledSigmoid { beta0 } => scaled_sigmoid(x, *beta0),
        ActivationSpec::Heaviside => heaviside(x),
        ActivationSpec::SteHeaviside { .. } => heaviside(x),
    }
}

/// Local derivative (or surrogate) at a single pre-activation. ReLU takes
/// derivative 0 at exactly 0; the plain Heaviside has zero gradient
/// everywhere, which is precisely why it cannot be trained through directly.
pub fn activation_grad(x: f64, spec: &ActivationSpec) -> f64 {
    match spec {
        ActivationSpec::Identity => 1.0,
        ActivationSpec::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        ActivationSpec::Sigmoid => sigmoid_sym_product(x),
        ActivationSpec::Tanh => sech_sq(x),
        ActivationSpec::Htaf(p) => htaf_grad(x, p),
        ActivationSpec::ScaledSigmoid { beta0 } => scaled_sigmoid_grad(x, *beta0),
        ActivationSpec::Heaviside => 0.0,
        ActivationSpec::SteHeaviside { surrogate } => surrogate_grad(*surrogate, x),
    }
}

/// Applies the activation to a vector of pre-activations.
pub fn activation_forward(xs: &[f64], spec: &ActivationSpec) -> Vec<f64> {
    xs.iter().map(|&x| activation_value(x, spec)).collect()
}

/// Chain-rule step: `upstream[i] * d activation / d x (xs[i])`.
pub fn activation_backward(
    xs: &[f64],
    upstream: &[f64],
    spec: &ActivationSpec,
) -> Result<Vec<f64>> {
    if xs.len() != upstream.len() {
        return Err(CoreError::LengthMismatch {
            context: "activation_backward",
            lhs: xs.len(),
            rhs: upstream.len(),
        });
    }
    Ok(xs
        .iter()
        .zip(upstream)
        .map(|(&x, &u)| u * activation_grad(x, spec))
        .collect())
}

/// Matrix form of [`activation_forward`].
pub fn activation_forward_matrix(x: &Matrix, spec: &ActivationSpec) -> Result<Matrix> {
    x.map(|v| activation_value(v, spec))
}

/// Matrix of local derivatives, for the tape's activation backward rule.
pub fn activation_grad_matrix(x: &Matrix, spec: &ActivationSpec) -> Result<Matrix> {
    x.map(|v| activation_grad(v, spec))
}
