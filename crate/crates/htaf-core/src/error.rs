//! Error type shared across the core library.

use std::fmt;

/// Errors produced by matrix algebra, the tape, parameter bounds, networks,
/// training, and the concept metrics.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Inner dimensions of a matrix product (or elementwise pair) disagree.
    DimensionMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    /// A flat buffer does not match the requested matrix shape.
    DataLength {
        rows: usize,
        cols: usize,
        len: usize,
    },
    /// A value that must be finite came out NaN or infinite.
    NonFinite { context: &'static str },
    /// A scalar parameter is outside its admissible range.
    InvalidParameter { name: &'static str, value: f64 },
    /// The tolerance passed to an approximation bound must lie in (0, 1/2).
    EpsilonOutOfRange { epsilon: f64 },
    /// The saturation gain is at or below the threshold log((1-eps)/eps),
    /// where no frequency gain can meet the tolerance.
    Alpha1BelowThreshold { alpha1: f64, threshold: f64 },
    /// A sampling grid or fit interval is degenerate or outside the regime
    /// where the operation is defined.
    InvalidInterval { reason: String },
    /// Every sampled gradient value underflowed to zero; nothing to fit.
    AllPointsUnderflowed,
    /// Fewer usable points than the minimum required by a fit.
    TooFewPoints { needed: usize, got: usize },
    /// A randomly drawn network is degenerate (constant pre-activations).
    DegenerateNetwork,
    /// The node the backward pass was seeded from is not a 1x1 scalar.
    NonScalarLoss { rows: usize, cols: usize },
    /// A tape node id does not belong to this tape.
    UnknownNode { id: usize },
    /// Two vectors that must be the same length are not.
    LengthMismatch {
        context: &'static str,
        lhs: usize,
        rhs: usize,
    },
    /// Consecutive layer specs do not chain (out_dim != next in_dim), or a
    /// head/output width is inconsistent.
    BadArchitecture { reason: String },
    /// A layer index is outside the network.
    LayerOutOfRange { layer: usize, n_layers: usize },
    /// The training loss became NaN or infinite.
    TrainingDiverged { epoch: usize, loss: f64 },
    /// A dataset, activation batch, or trace with zero rows was supplied
    /// where at least one is required.
    EmptyInput { context: &'static str },
    /// The requested metric is undefined for the given head or labels
    /// (e.g. AUROC with a single class present).
    MetricUndefined { reason: String },
    /// A class label referenced by a metric does not occur in the data.
    ClassAbsent { class: usize },
    /// A concept-node index is outside the concept layer.
    NodeOutOfRange { node: usize, n_nodes: usize },
    /// Deserialized network document is malformed or has an unsupported
    /// format version.
    BadNetworkDocument { reason: String },
    /// The training method in the config does not match the activations of
    /// the network being trained.
    MethodMismatch { reason: String },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::DimensionMismatch { op, lhs, rhs } => write!(
                f,
                "{op}: dimension mismatch {}x{} vs {}x{}",
                lhs.0, lhs.1, rhs.0, rhs.1
            ),
            CoreError::DataLength { rows, cols, len } => write!(
                f,
                "buffer of length {len} cannot fill a {rows}x{cols} matrix"
            ),
            CoreError::NonFinite { context } => {
                write!(f, "non-finite value encountered in {context}")
            }
            CoreError::InvalidParameter { name, value } => {
                write!(f, "invalid parameter {name} = {value}")
            }
            CoreError::EpsilonOutOfRange { epsilon } => {
                write!(f, "epsilon must lie in (0, 0.5), got {epsilon}")
            }
            CoreError::Alpha1BelowThreshold { alpha1, threshold } => write!(
                f,
                "alpha1 = {alpha1} is not above the admissibility threshold {threshold}"
            ),
            CoreError::InvalidInterval { reason } => write!(f, "invalid interval: {reason}"),
            CoreError::AllPointsUnderflowed => {
                write!(f, "all sampled gradient values underflowed to zero")
            }
            CoreError::TooFewPoints { needed, got } => {
                write!(f, "need at least {needed} usable points, got {got}")
            }
            CoreError::DegenerateNetwork => {
                write!(f, "sampled network has constant pre-activations")
            }
            CoreError::NonScalarLoss { rows, cols } => write!(
                f,
                "backward must start from a 1x1 scalar, got {rows}x{cols}"
            ),
            CoreError::UnknownNode { id } => write!(f, "node id {id} is not on this tape"),
            CoreError::LengthMismatch { context, lhs, rhs } => {
                write!(f, "{context}: length mismatch {lhs} vs {rhs}")
            }
            CoreError::BadArchitecture { reason } => write!(f, "bad architecture: {reason}"),
            CoreError::LayerOutOfRange { layer, n_layers } => {
                write!(f, "layer {layer} out of range for {n_layers} layers")
            }
            CoreError::TrainingDiverged { epoch, loss } => {
                write!(f, "training diverged at epoch {epoch} (loss = {loss})")
            }
            CoreError::EmptyInput { context } => write!(f, "{context} must be non-empty"),
            CoreError::MetricUndefined { reason } => write!(f, "metric undefined: {reason}"),
            CoreError::ClassAbsent { class } => {
                write!(f, "class {class} does not occur in the data")
            }
            CoreError::NodeOutOfRange { node, n_nodes } => {
                write!(f, "concept node {node} out of range for {n_nodes} nodes")
            }
            CoreError::BadNetworkDocument { reason } => {
                write!(f, "bad network document: {reason}")
            }
            CoreError::MethodMismatch { reason } => write!(f, "method mismatch: {reason}"),
        }
    }
}

impl std::error::Error for CoreError {}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
