//! The concept-bottleneck pipeline: train a classifier whose last hidden
//! layer is a heavy-tailed step surrogate, swap that layer to a hard
//! Heaviside at inference, and audit the resulting binary concepts with
//! the metric suite (binarity, concept accuracy, class specificity,
//! importance, interpretation prompts).
//!
//! The post-hoc baseline reuses the same trained backbone but binarizes
//! the feature layer with data-driven thresholds (per-node medians, or
//! thresholds matched to the concept layer's one-proportions) instead of
//! the natural step at the surrogate's midpoint.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use htaf_core::activations::{ActivationSpec, HtafParams};
use htaf_core::icbm::{
    binarity_score, class_specificity, concept_accuracy, importance_scores, interpretation_prompt,
    ConceptMatrix, ImportanceTable,
};
use htaf_core::network::{init_network, Head, LayerSpec, Network};
use htaf_core::training::{
    derive_seed, evaluate, train, LossKind, Metric, OptimizerKind, Targets, TrainConfig,
    TrainMethod, TrainSet,
};

use crate::config::DataSource;
use crate::data::{split_and_scale, Task};
use crate::error::{CliError, Result};
use crate::experiment::{load_dataset, task_protocol, to_heaviside};
use crate::synth::SynthName;

/// Configuration for one concept-bottleneck run.
#[derive(Clone, Debug, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcbmConfig {
    pub dataset: DataSource,
    /// Hidden widths; the last entry is the concept layer.
    #[serde(default = "default_hidden")]
    pub hidden_dims: Vec<usize>,
    /// Surrogate parameters of the concept layer.
    #[serde(default = "default_params")]
    pub params: HtafParams,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Class names for prompt emission; empty auto-generates `class_{k}`.
    #[serde(default)]
    pub class_names: Vec<String>,
    /// Nodes listed per class in the importance ranking.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_hidden() -> Vec<usize> {
    vec![256, 256, 128]
}

// The bottleneck layer wants the sharpest step it can still train
// through. The minimum-product parameter family targets deep stacks where
// every hidden layer is a surrogate; a single concept layer fed by a
// rectifier trunk tolerates a much larger alpha0 * alpha1, which is what
// pushes soft activations out of the responsive band and keeps the
// train-time/swap-time behaviour aligned.
fn default_params() -> HtafParams {
    HtafParams::new(10.0, 22.0).expect("literal parameters are valid")
}

fn default_lr() -> f64 {
    1e-3
}

fn default_epochs() -> usize {
    60
}

fn default_batch() -> usize {
    128
}

fn default_top_k() -> usize {
    3
}

impl IcbmConfig {
    /// Defaults over a generated customer-churn-style table.
    pub fn builtin_default() -> IcbmConfig {
        IcbmConfig {
            dataset: DataSource::Builtin {
                name: SynthName::ChurnLike.as_str().to_string(),
                rows: None,
                seed: None,
            },
            hidden_dims: default_hidden(),
            params: default_params(),
            lr: default_lr(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            master_seed: 0,
            class_names: vec!["retained".to_string(), "churned".to_string()],
            top_k: default_top_k(),
        }
    }

    /// Loads a JSON config file.
    pub fn load(path: &Path) -> Result<IcbmConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: IcbmConfig = serde_json::from_str(&text).map_err(|e| CliError::Config {
            reason: format!("{}: {e}", path.display()),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() || self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(CliError::Config {
                reason: "hidden_dims must be non-empty with positive widths".to_string(),
            });
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(CliError::Config {
                reason: format!("lr must be positive and finite, got {}", self.lr),
            });
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(CliError::Config {
                reason: "epochs and batch_size must be positive".to_string(),
            });
        }
        if self.top_k == 0 {
            return Err(CliError::Config {
                reason: "top_k must be positive".to_string(),
            });
        }
        Ok(())
    }
}

/// Serialisable summary of a concept-bottleneck run.
#[derive(Clone, Debug, Serialize)]
pub struct IcbmReport {
    pub dataset: String,
    pub n_classes: usize,
    /// Task metric reported on the validation and test splits.
    pub metric: Metric,
    pub epochs: usize,
    /// Task metric of the final network on the validation split.
    pub val_metric: f64,
    pub test_metric_trainmode: f64,
    pub test_metric_heaviside: f64,
    /// Test accuracy with soft concept activations.
    pub accuracy_trainmode: f64,
    /// Test accuracy after the hard step swap.
    pub accuracy_heaviside: f64,
    /// |trainmode − heaviside| test accuracy.
    pub swap_accuracy_gap: f64,
    /// Test accuracy with per-node median thresholds fitted on train.
    pub accuracy_bm_median: f64,
    pub bm_median_accuracy_gap: f64,
    /// Test accuracy with thresholds matching the concept one-proportions.
    pub accuracy_bm_matched: f64,
    pub bm_matched_accuracy_gap: f64,
    /// Fraction of soft test-split concept activations outside (0.01, 0.99).
    pub binarity_trainmode: f64,
    /// Mean class-probe accuracy over concept nodes.
    pub concept_accuracy: f64,
    /// Per class: fraction of nodes whose one-proportion is <0.1 or >0.9.
    pub specificity_concentration: Vec<f64>,
    /// Per class: the `top_k` concept nodes by head-weight importance.
    pub top_nodes: Vec<Vec<usize>>,
}

/// Report plus the artifacts downstream consumers need.
#[derive(Debug)]
pub struct IcbmRun {
    pub report: IcbmReport,
    pub soft: Network,
    pub hard: Network,
    pub concepts: ConceptMatrix,
    pub class_names: Vec<String>,
    /// Per class, per node: one-proportions among that class's samples.
    pub specificity: Vec<Vec<f64>>,
    pub importance: ImportanceTable,
}

fn labels_of(set: &TrainSet) -> Result<Vec<usize>> {
    match &set.targets {
        Targets::Labels(l) => Ok(l.clone()),
        Targets::Values(_) => Err(CliError::Config {
            reason: "the concept pipeline needs a classification dataset".to_string(),
        }),
    }
}

fn concentration(proportions: &[f64]) -> f64 {
    let hits = proportions
        .iter()
        .filter(|&&p| p < 0.1 || p > 0.9)
        .count();
    hits as f64 / proportions.len() as f64
}

/// Trains the bottleneck classifier and computes the full metric suite.
pub fn run_icbm(cfg: &IcbmConfig) -> Result<IcbmRun> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.dataset, cfg.master_seed)?;
    let n_classes = match dataset.task {
        Task::Classification { n_classes } => n_classes,
        Task::Regression => {
            return Err(CliError::Config {
                reason: "the concept pipeline needs a classification dataset".to_string(),
            })
        }
    };
    let class_names: Vec<String> = if cfg.class_names.is_empty() {
        (0..n_classes).map(|k| format!("class_{k}")).collect()
    } else if cfg.class_names.len() == n_classes {
        cfg.class_names.clone()
    } else {
        return Err(CliError::Config {
            reason: format!(
                "{} class names for {} classes",
                cfg.class_names.len(),
                n_classes
            ),
        });
    };

    let split = split_and_scale(&dataset, derive_seed(cfg.master_seed, &[1, 0]))?;
    let train_set = split.train_set()?;
    let val_set = split.val_set()?;
    let test_set = split.test_set()?;
    let (loss, metric, head) = task_protocol(dataset.task);
    debug_assert_eq!(loss, LossKind::SoftmaxCrossEntropy);
    debug_assert!(matches!(head, Head::Classification { .. }));

    // Plain rectifier trunk; the concept layer alone carries the surrogate.
    let mut specs = Vec::with_capacity(cfg.hidden_dims.len() + 1);
    let mut prev = split.n_features();
    for (i, &d) in cfg.hidden_dims.iter().enumerate() {
        let act = if i + 1 == cfg.hidden_dims.len() {
            ActivationSpec::Htaf(cfg.params)
        } else {
            ActivationSpec::Relu
        };
        specs.push(LayerSpec::dense(prev, d, act));
        prev = d;
    }
    specs.push(LayerSpec::dense(prev, n_classes, ActivationSpec::Identity));
    let net = init_network(specs, head, derive_seed(cfg.master_seed, &[4, 0]))?;

    // The concept layer saturates late in training, so the bottleneck run
    // trains to completion instead of snapshotting the best-validation
    // epoch; an early snapshot would leave soft activations far from
    // binary and the post-swap comparison meaningless.
    let train_cfg = TrainConfig {
        optimizer: OptimizerKind::adam_default(),
        lr: cfg.lr,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: derive_seed(cfg.master_seed, &[4, 1]),
        loss,
        method: TrainMethod::Htaf(cfg.params),
    };
    let outcome = train(net, &train_set, &train_cfg)?;
    let soft = outcome.network;
    let hard = to_heaviside(&soft)?;
    let val_metric = evaluate(&soft, &val_set, metric)?;

    let test_metric_trainmode = evaluate(&soft, &test_set, metric)?;
    let test_metric_heaviside = evaluate(&hard, &test_set, metric)?;
    let accuracy_trainmode = evaluate(&soft, &test_set, Metric::Accuracy)?;
    let accuracy_heaviside = evaluate(&hard, &test_set, Metric::Accuracy)?;

    // Post-hoc thresholds are fitted on the training split only.
    let train_soft_acts = soft.feature_activations(&train_set.x)?;
    let bm_median = soft.median_binarize(&train_soft_acts)?;
    let accuracy_bm_median = evaluate(&bm_median, &test_set, Metric::Accuracy)?;

    let train_hard_bits = hard.feature_activations(&train_set.x)?;
    let one_proportion: Vec<f64> = (0..train_hard_bits.cols())
        .map(|j| {
            let col = train_hard_bits.col(j);
            col.iter().sum::<f64>() / col.len() as f64
        })
        .collect();
    let bm_matched = soft.binarize_matched_proportion(&train_soft_acts, &one_proportion)?;
    let accuracy_bm_matched = evaluate(&bm_matched, &test_set, Metric::Accuracy)?;

    let test_soft_acts = soft.feature_activations(&test_set.x)?;
    let binarity_trainmode = binarity_score(&test_soft_acts)?;

    let test_bits = hard.feature_activations(&test_set.x)?;
    let concepts = ConceptMatrix::binary(test_bits, labels_of(&test_set)?)?;
    let concept_acc = concept_accuracy(&concepts)?;
    let mut specificity = Vec::with_capacity(n_classes);
    let mut specificity_concentration = Vec::with_capacity(n_classes);
    for k in 0..n_classes {
        let props = class_specificity(&concepts, k)?;
        specificity_concentration.push(concentration(&props));
        specificity.push(props);
    }

    let head_layer = soft.layers().len() - 1;
    let importance = importance_scores(soft.weight(head_layer)?);
    let mut top_nodes = Vec::with_capacity(n_classes);
    for k in 0..n_classes {
        top_nodes.push(importance.top_nodes(k, cfg.top_k.min(importance.n_nodes()))?);
    }

    let report = IcbmReport {
        dataset: dataset.name.clone(),
        n_classes,
        metric,
        epochs: cfg.epochs,
        val_metric,
        test_metric_trainmode,
        test_metric_heaviside,
        accuracy_trainmode,
        accuracy_heaviside,
        swap_accuracy_gap: (accuracy_trainmode - accuracy_heaviside).abs(),
        accuracy_bm_median,
        bm_median_accuracy_gap: (accuracy_trainmode - accuracy_bm_median).abs(),
        accuracy_bm_matched,
        bm_matched_accuracy_gap: (accuracy_trainmode - accuracy_bm_matched).abs(),
        binarity_trainmode,
        concept_accuracy: concept_acc,
        specificity_concentration,
        top_nodes,
    };
    Ok(IcbmRun {
        report,
        soft,
        hard,
        concepts,
        class_names,
        specificity,
        importance,
    })
}

/// Writes the report as pretty JSON.
pub fn write_icbm_json(report: &IcbmReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| CliError::Config {
        reason: format!("report serialisation failed: {e}"),
    })?;
    std::fs::write(path, text + "\n").map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Emits one interpretation-prompt file per distinct top node, named
/// `node_{j}.txt`, and returns the written paths in node order.
pub fn emit_prompt_files(run: &IcbmRun, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let nodes: BTreeSet<usize> = run.report.top_nodes.iter().flatten().copied().collect();
    let mut paths = Vec::with_capacity(nodes.len());
    for node in nodes {
        let text = interpretation_prompt(&run.concepts, &run.class_names, node)?;
        let path = dir.join(format!("node_{node}.txt"));
        std::fs::write(&path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> IcbmConfig {
        let mut cfg = IcbmConfig::builtin_default();
        cfg.dataset = DataSource::Builtin {
            name: "churn_like".to_string(),
            rows: Some(400),
            seed: Some(11),
        };
        cfg.hidden_dims = vec![16, 12];
        cfg.epochs = 4;
        cfg.batch_size = 64;
        cfg.master_seed = 5;
        cfg.top_k = 2;
        cfg
    }

    #[test]
    fn icbm_run_produces_consistent_report() {
        let run = run_icbm(&tiny_config()).unwrap();
        let r = &run.report;
        assert_eq!(r.dataset, "churn_like");
        assert_eq!(r.n_classes, 2);
        assert_eq!(r.metric, Metric::Auroc);
        assert!((0.0..=1.0).contains(&r.accuracy_trainmode));
        assert!((0.0..=1.0).contains(&r.binarity_trainmode));
        assert!((0.0..=1.0).contains(&r.concept_accuracy));
        assert_eq!(
            r.swap_accuracy_gap,
            (r.accuracy_trainmode - r.accuracy_heaviside).abs()
        );
        assert_eq!(r.top_nodes.len(), 2);
        assert_eq!(r.top_nodes[0].len(), 2);
        assert_eq!(run.specificity.len(), 2);
        assert_eq!(run.specificity[0].len(), 12);
    }

    #[test]
    fn icbm_concepts_are_exactly_binary() {
        let run = run_icbm(&tiny_config()).unwrap();
        assert!(run.concepts.is_binary());
        for &v in run.concepts.entries().iter() {
            assert!(v == 0.0 || v == 1.0);
        }
    }

    #[test]
    fn icbm_is_deterministic() {
        let cfg = tiny_config();
        let a = serde_json::to_string(&run_icbm(&cfg).unwrap().report).unwrap();
        let b = serde_json::to_string(&run_icbm(&cfg).unwrap().report).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn icbm_rejects_regression_data() {
        let mut cfg = tiny_config();
        cfg.dataset = DataSource::Builtin {
            name: "wine_like".to_string(),
            rows: Some(200),
            seed: Some(3),
        };
        let err = run_icbm(&cfg).unwrap_err();
        assert!(matches!(err, CliError::Config { .. }));
    }

    #[test]
    fn icbm_rejects_mismatched_class_names() {
        let mut cfg = tiny_config();
        cfg.class_names = vec!["only_one".to_string()];
        let err = run_icbm(&cfg).unwrap_err();
        assert!(matches!(err, CliError::Config { .. }));
    }

    #[test]
    fn prompt_files_cover_distinct_top_nodes() {
        let run = run_icbm(&tiny_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_prompt_files(&run, dir.path()).unwrap();
        let distinct: BTreeSet<usize> =
            run.report.top_nodes.iter().flatten().copied().collect();
        assert_eq!(paths.len(), distinct.len());
        for p in &paths {
            let text = std::fs::read_to_string(p).unwrap();
            assert!(text.contains("Group A"));
            assert!(text.contains("Group B"));
        }
    }

    #[test]
    fn concentration_counts_extreme_proportions() {
        assert_eq!(concentration(&[0.05, 0.95, 0.5, 0.91]), 0.75);
        assert_eq!(concentration(&[0.1, 0.9]), 0.0);
    }
}
