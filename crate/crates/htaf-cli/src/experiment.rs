//! The tabular comparison protocol: repeated train/validate/test runs over
//! method grids, with candidate selection on the validation metric and a
//! paired evaluation of every selected model in training mode and after the
//! swap to hard Heaviside steps.
//!
//! Within a repeat every method sees the same split; across repeats the
//! split changes. All seeds derive from the config's master seed, so a
//! report is a pure function of its config.

use std::path::Path;

use serde::Serialize;

use htaf_core::activations::{ActivationKind, ActivationSpec};
use htaf_core::network::{init_network, Head, LayerSpec, Network};
use htaf_core::training::{
    derive_seed, evaluate, train_with_validation, LossKind, Metric, OptimizerKind, TrainConfig,
    TrainMethod, ValidatedOutcome,
};

use crate::config::{DataSource, RunConfig};
use crate::data::{load_csv, split_and_scale, Dataset, Scaling, Task};
use crate::error::{CliError, Result};
use crate::synth::{generate, generate_rows, SynthName};

/// Activation kinds that act as step surrogates during training and are
/// replaced by the hard step at inference.
pub const SURROGATE_KINDS: [ActivationKind; 3] = [
    ActivationKind::Htaf,
    ActivationKind::ScaledSigmoid,
    ActivationKind::SteHeaviside,
];

/// Loss, selection metric, and head implied by a task.
pub fn task_protocol(task: Task) -> (LossKind, Metric, Head) {
    match task {
        Task::Regression => (LossKind::Mse, Metric::Rmse, Head::Regression),
        Task::Classification { n_classes } => {
            let metric = if n_classes == 2 {
                Metric::Auroc
            } else {
                Metric::Accuracy
            };
            (
                LossKind::SoftmaxCrossEntropy,
                metric,
                Head::Classification { n_classes },
            )
        }
    }
}

/// Loads the configured dataset. Builtin sources generate rows with their
/// own seed when given, else with the experiment's master seed.
pub fn load_dataset(source: &DataSource, master_seed: u64) -> Result<Dataset> {
    match source {
        DataSource::Builtin { name, rows, seed } => {
            let name = SynthName::parse(name).ok_or_else(|| CliError::Config {
                reason: format!("unknown builtin dataset {name:?}"),
            })?;
            let seed = seed.unwrap_or(master_seed);
            Ok(match rows {
                Some(n) => generate_rows(name, seed, *n),
                None => generate(name, seed),
            })
        }
        DataSource::Csv { path, schema } => load_csv(path, schema),
    }
}

/// Builds the method's network: hidden layers carry the method's surrogate
/// activation (ReLU for the plain-network baseline), the output layer is
/// linear.
pub fn build_network(
    method: &TrainMethod,
    in_dim: usize,
    hidden_dims: &[usize],
    head: Head,
    batch_norm: bool,
    seed: u64,
) -> Result<Network> {
    let act = method
        .surrogate_activation()
        .unwrap_or(ActivationSpec::Relu);
    build_network_with(act, in_dim, hidden_dims, head, batch_norm, seed)
}

/// Builds a network with an explicit hidden activation.
pub fn build_network_with(
    act: ActivationSpec,
    in_dim: usize,
    hidden_dims: &[usize],
    head: Head,
    batch_norm: bool,
    seed: u64,
) -> Result<Network> {
    let out_dim = match head {
        Head::Regression => 1,
        Head::Classification { n_classes } => n_classes,
    };
    let mut specs = Vec::with_capacity(hidden_dims.len() + 1);
    let mut prev = in_dim;
    for &d in hidden_dims {
        specs.push(LayerSpec {
            in_dim: prev,
            out_dim: d,
            activation: act.clone(),
            batch_norm,
        });
        prev = d;
    }
    specs.push(LayerSpec::dense(prev, out_dim, ActivationSpec::Identity));
    Ok(init_network(specs, head, seed)?)
}

/// Returns a copy with every surrogate layer re-labelled as a hard
/// Heaviside step. Networks without surrogate layers come back unchanged.
pub fn to_heaviside(net: &Network) -> Result<Network> {
    Ok(net.swap_activations(&SURROGATE_KINDS, ActivationSpec::Heaviside)?)
}

/// One repeat of one method grid.
#[derive(Clone, Debug, Serialize)]
pub struct RepeatReport {
    pub repeat: usize,
    /// The grid candidate that won validation selection.
    pub selected: TrainMethod,
    /// Best-epoch index of the winning run.
    pub best_epoch: usize,
    /// Validation metric of the winning run at its best epoch.
    pub val_metric: f64,
    /// Test metric with the training-time activations.
    pub test_metric_trainmode: f64,
    /// Test metric after the swap to hard steps.
    pub test_metric_heaviside: f64,
}

/// Aggregate over repeats for one method grid.
#[derive(Clone, Debug, Serialize)]
pub struct MethodReport {
    pub name: String,
    pub repeats: Vec<RepeatReport>,
    pub mean_trainmode: f64,
    pub stderr_trainmode: f64,
    pub mean_heaviside: f64,
    pub stderr_heaviside: f64,
}

/// The full experiment result.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub task: Task,
    pub metric: Metric,
    pub n_repeats: usize,
    pub master_seed: u64,
    pub methods: Vec<MethodReport>,
}

/// Heavy per-run artifacts kept out of the serialised report: the winning
/// validated outcome (best-epoch network, gradient trace, val history),
/// its hard-swapped counterpart, and the split's fitted feature scaling.
pub struct RepeatArtifacts {
    pub outcome: ValidatedOutcome,
    pub heaviside: Network,
    pub scaling: Scaling,
}

/// Report plus artifacts for downstream diagnostics.
pub struct ExperimentRun {
    pub report: ExperimentReport,
    /// `artifacts[g][r]` is grid `g`, repeat `r`.
    pub artifacts: Vec<Vec<RepeatArtifacts>>,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct RepeatResult {
    grid_reports: Vec<RepeatReport>,
    grid_artifacts: Vec<RepeatArtifacts>,
}

/// Runs the full protocol. Repeats execute on separate threads; the derived
/// seed scheme makes the result independent of scheduling.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.dataset, cfg.master_seed)?;
    let (loss, metric, head) = task_protocol(dataset.task);

    let mut repeat_results: Vec<Option<RepeatResult>> = Vec::new();
    repeat_results.resize_with(cfg.n_repeats, || None);

    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::with_capacity(cfg.n_repeats);
        for (r, slot) in repeat_results.iter_mut().enumerate() {
            let dataset = &dataset;
            let cfg_ref = cfg;
            handles.push(scope.spawn(move || -> Result<()> {
                *slot = Some(run_repeat(cfg_ref, dataset, r, loss, metric, head)?);
                Ok(())
            }));
        }
        for handle in handles {
            handle.join().expect("repeat thread panicked")?;
        }
        Ok(())
    })?;

    let mut per_grid_reports: Vec<Vec<RepeatReport>> =
        (0..cfg.methods.len()).map(|_| Vec::new()).collect();
    let mut artifacts: Vec<Vec<RepeatArtifacts>> =
        (0..cfg.methods.len()).map(|_| Vec::new()).collect();
    for slot in repeat_results {
        let result = slot.expect("every repeat ran");
        for (g, (rep, art)) in result
            .grid_reports
            .into_iter()
            .zip(result.grid_artifacts)
            .enumerate()
        {
            per_grid_reports[g].push(rep);
            artifacts[g].push(art);
        }
    }

    let methods = cfg
        .methods
        .iter()
        .zip(per_grid_reports)
        .map(|(grid, repeats)| {
            let soft: Vec<f64> = repeats.iter().map(|r| r.test_metric_trainmode).collect();
            let hard: Vec<f64> = repeats.iter().map(|r| r.test_metric_heaviside).collect();
            let (mean_trainmode, stderr_trainmode) = mean_stderr(&soft);
            let (mean_heaviside, stderr_heaviside) = mean_stderr(&hard);
            MethodReport {
                name: grid.name.clone(),
                repeats,
                mean_trainmode,
                stderr_trainmode,
                mean_heaviside,
                stderr_heaviside,
            }
        })
        .collect();

    Ok(ExperimentRun {
        report: ExperimentReport {
            dataset: dataset.name.clone(),
            n_rows: dataset.n_rows(),
            n_features: dataset.n_features(),
            task: dataset.task,
            metric,
            n_repeats: cfg.n_repeats,
            master_seed: cfg.master_seed,
            methods,
        },
        artifacts,
    })
}

fn run_repeat(
    cfg: &RunConfig,
    dataset: &Dataset,
    repeat: usize,
    loss: LossKind,
    metric: Metric,
    head: Head,
) -> Result<RepeatResult> {
    let r = repeat as u64;
    let split_seed = derive_seed(cfg.master_seed, &[1, r]);
    let split = split_and_scale(dataset, split_seed)?;
    let train_set = split.train_set()?;
    let val_set = split.val_set()?;
    let test_set = split.test_set()?;

    let mut grid_reports = Vec::with_capacity(cfg.methods.len());
    let mut grid_artifacts = Vec::with_capacity(cfg.methods.len());
    for (g, grid) in cfg.methods.iter().enumerate() {
        let mut best: Option<(usize, ValidatedOutcome)> = None;
        for (c, candidate) in grid.candidates.iter().enumerate() {
            let init_seed = derive_seed(cfg.master_seed, &[2, r, g as u64, c as u64]);
            let shuffle_seed = derive_seed(cfg.master_seed, &[3, r, g as u64, c as u64]);
            let net = build_network(
                candidate,
                split.n_features(),
                &cfg.hidden_dims,
                head,
                cfg.batch_norm,
                init_seed,
            )?;
            let train_cfg = TrainConfig {
                optimizer: OptimizerKind::adam_default(),
                lr: cfg.lr,
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                seed: shuffle_seed,
                loss,
                method: candidate.clone(),
            };
            let outcome = train_with_validation(net, &train_set, &val_set, metric, &train_cfg)?;
            let better = match &best {
                None => true,
                Some((_, b)) => {
                    if metric.lower_is_better() {
                        outcome.best_val < b.best_val
                    } else {
                        outcome.best_val > b.best_val
                    }
                }
            };
            if better {
                best = Some((c, outcome));
            }
        }
        let (won, outcome) = best.expect("grids are non-empty");
        let heaviside = to_heaviside(&outcome.network)?;
        let test_metric_trainmode = evaluate(&outcome.network, &test_set, metric)?;
        let test_metric_heaviside = evaluate(&heaviside, &test_set, metric)?;
        grid_reports.push(RepeatReport {
            repeat,
            selected: grid.candidates[won].clone(),
            best_epoch: outcome.best_epoch,
            val_metric: outcome.best_val,
            test_metric_trainmode,
            test_metric_heaviside,
        });
        grid_artifacts.push(RepeatArtifacts {
            outcome,
            heaviside,
            scaling: split.scaling.clone().expect("split_and_scale fits scaling"),
        });
    }
    Ok(RepeatResult {
        grid_reports,
        grid_artifacts,
    })
}

/// Writes the report as pretty JSON.
pub fn write_report_json(report: &ExperimentReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| CliError::Config {
        reason: format!("report serialisation failed: {e}"),
    })?;
    std::fs::write(path, text + "\n").map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes one CSV row per (method, repeat) with full-precision metrics.
pub fn write_report_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::BadCsv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    w.write_record([
        "dataset",
        "method",
        "repeat",
        "selected",
        "best_epoch",
        "val_metric",
        "test_metric_trainmode",
        "test_metric_heaviside",
    ])
    .map_err(|e| CliError::BadCsv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    for method in &report.methods {
        for rep in &method.repeats {
            let selected = serde_json::to_string(&rep.selected).map_err(|e| CliError::Config {
                reason: format!("selected-method serialisation failed: {e}"),
            })?;
            w.write_record([
                report.dataset.as_str(),
                method.name.as_str(),
                &rep.repeat.to_string(),
                &selected,
                &rep.best_epoch.to_string(),
                &rep.val_metric.to_string(),
                &rep.test_metric_trainmode.to_string(),
                &rep.test_metric_heaviside.to_string(),
            ])
            .map_err(|e| CliError::BadCsv {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        }
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A trained model plus everything needed to score raw feature rows:
/// the fitted min-max scaling and the evaluation metric.
#[derive(serde::Deserialize, Serialize)]
pub struct ModelBundle {
    pub dataset: String,
    pub method: String,
    pub repeat: usize,
    pub metric: Metric,
    pub scaling: Scaling,
    pub network: serde_json::Value,
}

impl ModelBundle {
    /// Packages one (grid, repeat) artifact of a finished run.
    pub fn from_run(run: &ExperimentRun, grid: usize, repeat: usize) -> Result<ModelBundle> {
        let method = run
            .report
            .methods
            .get(grid)
            .ok_or_else(|| CliError::Config {
                reason: format!("no method grid {grid} in the report"),
            })?;
        let art = &run.artifacts[grid][repeat];
        let network =
            serde_json::from_str(&art.outcome.network.to_json()).map_err(|e| CliError::Config {
                reason: format!("network serialisation failed: {e}"),
            })?;
        Ok(ModelBundle {
            dataset: run.report.dataset.clone(),
            method: method.name.clone(),
            repeat,
            metric: run.report.metric,
            scaling: art.scaling.clone(),
            network,
        })
    }

    pub fn network(&self) -> Result<Network> {
        let text = serde_json::to_string(&self.network).map_err(|e| CliError::Config {
            reason: format!("network serialisation failed: {e}"),
        })?;
        Ok(Network::from_json(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Config {
            reason: format!("bundle serialisation failed: {e}"),
        })?;
        std::fs::write(path, text + "\n").map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<ModelBundle> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            reason: format!("{}: not a model bundle: {e}", path.display()),
        })
    }
}

/// Index of the repeat with the best validation metric for one grid,
/// ties to the earlier repeat.
pub fn best_repeat(report: &MethodReport, metric: Metric) -> usize {
    let lower = metric.lower_is_better();
    let mut best = 0usize;
    for (r, rep) in report.repeats.iter().enumerate().skip(1) {
        let better = if lower {
            rep.val_metric < report.repeats[best].val_metric
        } else {
            rep.val_metric > report.repeats[best].val_metric
        };
        if better {
            best = r;
        }
    }
    best
}
