//! JSON run configuration for the experiment harness.
//!
//! A run file names a data source, the network shape, the method grids to
//! compare, and the training protocol. Every field except the dataset has a
//! default matching the reference protocol, so a minimal file is just
//! `{"dataset": {"kind": "builtin", "name": "wine_like"}}`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use htaf_core::activations::{HtafParams, SurrogateKind};
use htaf_core::training::TrainMethod;

use crate::data::Schema;
use crate::error::{CliError, Result};
use crate::synth::SynthName;

/// Where the dataset rows come from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// One of the built-in generators (`wine_like`, `abalone_like`,
    /// `churn_like`, `fico_like`), with an optional row-count override.
    Builtin {
        name: String,
        #[serde(default)]
        rows: Option<usize>,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// A CSV file read with the given schema.
    Csv { path: PathBuf, schema: Schema },
}

/// A named family of candidate methods. Candidates are trained in order;
/// the one with the best validation metric is selected, ties keeping the
/// earlier candidate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodGrid {
    /// Report key, e.g. `"htaf"`.
    pub name: String,
    pub candidates: Vec<TrainMethod>,
}

/// Full experiment configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DataSource,
    /// Hidden layer widths; the output layer is appended automatically.
    #[serde(default = "default_hidden_dims")]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodGrid>,
    /// Batch norm on every hidden layer.
    #[serde(default = "default_batch_norm")]
    pub batch_norm: bool,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_repeats")]
    pub n_repeats: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Output directory for reports; falls back to `HTAF_OUT_ROOT`, then to
    /// the current directory.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_hidden_dims() -> Vec<usize> {
    vec![256, 256, 128]
}

fn default_batch_norm() -> bool {
    true
}

fn default_lr() -> f64 {
    1e-3
}

fn default_epochs() -> usize {
    60
}

fn default_batch_size() -> usize {
    128
}

fn default_repeats() -> usize {
    5
}

/// Reference lr sweep for protocol reproductions; `default_lr` is the value
/// the reported tables use.
pub const LR_GRID: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// The default method grids: the published candidate sets for each family.
fn default_methods() -> Vec<MethodGrid> {
    let htaf_pairs = [
        (0.1, 220.0),
        (0.5, 44.0),
        (1.0, 22.0),
        (2.0, 11.0),
        (3.0, 7.3),
        (5.0, 4.4),
    ];
    vec![
        MethodGrid {
            name: "htaf".to_string(),
            candidates: htaf_pairs
                .iter()
                .map(|&(a0, a1)| {
                    TrainMethod::Htaf(HtafParams::new(a0, a1).expect("valid default"))
                })
                .collect(),
        },
        MethodGrid {
            name: "scaled_sigmoid".to_string(),
            candidates: [10.0, 22.0, 50.0, 100.0]
                .iter()
                .map(|&beta0| TrainMethod::ScaledSigmoid { beta0 })
                .collect(),
        },
        MethodGrid {
            name: "ste".to_string(),
            candidates: vec![
                TrainMethod::Ste {
                    surrogate: SurrogateKind::Sigmoid,
                },
                TrainMethod::Ste {
                    surrogate: SurrogateKind::Tanh,
                },
                TrainMethod::Ste {
                    surrogate: SurrogateKind::Rectangular,
                },
            ],
        },
        MethodGrid {
            name: "dnn".to_string(),
            candidates: vec![TrainMethod::Dnn],
        },
    ]
}

impl RunConfig {
    /// A config for one builtin dataset with all defaults.
    pub fn builtin(name: SynthName) -> RunConfig {
        RunConfig {
            dataset: DataSource::Builtin {
                name: name.as_str().to_string(),
                rows: None,
                seed: None,
            },
            hidden_dims: default_hidden_dims(),
            methods: default_methods(),
            batch_norm: default_batch_norm(),
            lr: default_lr(),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            n_repeats: default_repeats(),
            master_seed: 0,
            out_dir: None,
        }
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Config {
            reason: format!("{}: {e}", path.display()),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Builtin { name, rows, .. } = &self.dataset {
            if SynthName::parse(name).is_none() {
                return Err(CliError::Config {
                    reason: format!("unknown builtin dataset {name:?}"),
                });
            }
            if rows.is_some_and(|r| r < 10) {
                return Err(CliError::Config {
                    reason: "builtin row override must be at least 10".to_string(),
                });
            }
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(CliError::Config {
                reason: "hidden_dims must be non-empty with positive widths".to_string(),
            });
        }
        if self.methods.is_empty() {
            return Err(CliError::Config {
                reason: "at least one method grid is required".to_string(),
            });
        }
        for grid in &self.methods {
            if grid.name.is_empty() {
                return Err(CliError::Config {
                    reason: "method grid names must be non-empty".to_string(),
                });
            }
            if grid.candidates.is_empty() {
                return Err(CliError::Config {
                    reason: format!("method grid {:?} has no candidates", grid.name),
                });
            }
            let first = std::mem::discriminant(&grid.candidates[0]);
            if grid
                .candidates
                .iter()
                .any(|c| std::mem::discriminant(c) != first)
            {
                return Err(CliError::Config {
                    reason: format!("method grid {:?} mixes method families", grid.name),
                });
            }
            for c in &grid.candidates {
                if let TrainMethod::ScaledSigmoid { beta0 } = c {
                    if !beta0.is_finite() || *beta0 <= 0.0 {
                        return Err(CliError::Config {
                            reason: format!("scaled_sigmoid beta0 must be positive, got {beta0}"),
                        });
                    }
                }
            }
        }
        let names: std::collections::BTreeSet<&str> =
            self.methods.iter().map(|g| g.name.as_str()).collect();
        if names.len() != self.methods.len() {
            return Err(CliError::Config {
                reason: "method grid names must be unique".to_string(),
            });
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(CliError::Config {
                reason: format!("lr must be positive and finite, got {}", self.lr),
            });
        }
        if self.epochs == 0 || self.batch_size == 0 || self.n_repeats == 0 {
            return Err(CliError::Config {
                reason: "epochs, batch_size, and n_repeats must be positive".to_string(),
            });
        }
        Ok(())
    }

    /// The directory reports are written to: `out_dir` if set, else the
    /// `HTAF_OUT_ROOT` environment variable, else the current directory.
    pub fn resolve_out_dir(&self) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return dir.clone();
        }
        if let Ok(root) = std::env::var("HTAF_OUT_ROOT") {
            if !root.is_empty() {
                return PathBuf::from(root);
            }
        }
        PathBuf::from(".")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        r#"{"dataset": {"kind": "builtin", "name": "wine_like"}}"#
    }

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let cfg: RunConfig = serde_json::from_str(minimal_json()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.hidden_dims, vec![256, 256, 128]);
        assert!(cfg.batch_norm);
        assert_eq!(cfg.lr, 1e-3);
        assert_eq!(cfg.epochs, 60);
        assert_eq!(cfg.batch_size, 128);
        assert_eq!(cfg.n_repeats, 5);
        assert_eq!(cfg.master_seed, 0);
        assert_eq!(cfg.methods.len(), 4);
        assert_eq!(cfg.methods[0].name, "htaf");
        assert_eq!(cfg.methods[0].candidates.len(), 6);
        assert_eq!(cfg.methods[1].candidates.len(), 4);
        assert_eq!(cfg.methods[2].candidates.len(), 3);
        assert_eq!(cfg.methods[3].candidates, vec![TrainMethod::Dnn]);
    }

    #[test]
    fn full_config_round_trips() {
        let cfg = RunConfig::builtin(SynthName::ChurnLike);
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.hidden_dims, cfg.hidden_dims);
        assert_eq!(back.methods.len(), cfg.methods.len());
        for (a, b) in back.methods.iter().zip(&cfg.methods) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.candidates, b.candidates);
        }
    }

    #[test]
    fn method_tags_use_snake_case() {
        let cfg = RunConfig::builtin(SynthName::WineLike);
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains(r#""kind":"htaf""#));
        assert!(json.contains(r#""kind":"scaled_sigmoid""#));
        assert!(json.contains(r#""kind":"ste""#));
        assert!(json.contains(r#""kind":"dnn""#));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let json = r#"{"dataset": {"kind": "builtin", "name": "wine_like"}, "leaning_rate": 0.1}"#;
        assert!(serde_json::from_str::<RunConfig>(json).is_err());
    }

    #[test]
    fn unknown_builtin_name_is_rejected() {
        let json = r#"{"dataset": {"kind": "builtin", "name": "iris"}}"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        assert!(matches!(
            cfg.validate(),
            Err(CliError::Config { .. })
        ));
    }

    #[test]
    fn bad_numeric_fields_are_rejected() {
        let mut cfg = RunConfig::builtin(SynthName::WineLike);
        cfg.lr = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::builtin(SynthName::WineLike);
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::builtin(SynthName::WineLike);
        cfg.hidden_dims = vec![256, 0];
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::builtin(SynthName::WineLike);
        cfg.n_repeats = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mixed_family_grid_is_rejected() {
        let mut cfg = RunConfig::builtin(SynthName::WineLike);
        cfg.methods = vec![MethodGrid {
            name: "mixed".to_string(),
            candidates: vec![TrainMethod::Dnn, TrainMethod::ScaledSigmoid { beta0: 22.0 }],
        }];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn duplicate_grid_names_are_rejected() {
        let mut cfg = RunConfig::builtin(SynthName::WineLike);
        cfg.methods = vec![
            MethodGrid {
                name: "dnn".to_string(),
                candidates: vec![TrainMethod::Dnn],
            },
            MethodGrid {
                name: "dnn".to_string(),
                candidates: vec![TrainMethod::Dnn],
            },
        ];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn nonpositive_htaf_candidates_fail_to_parse() {
        let json = r#"{"kind": "htaf", "alpha0": -2.0, "alpha1": 11.0}"#;
        assert!(serde_json::from_str::<TrainMethod>(json).is_err());
        let json = r#"{"kind": "htaf", "alpha0": 2.0, "alpha1": 0.0}"#;
        assert!(serde_json::from_str::<TrainMethod>(json).is_err());
    }

    #[test]
    fn out_dir_resolution_precedence() {
        let mut cfg = RunConfig::builtin(SynthName::WineLike);
        cfg.out_dir = Some(PathBuf::from("/tmp/reports"));
        assert_eq!(cfg.resolve_out_dir(), PathBuf::from("/tmp/reports"));

        cfg.out_dir = None;
        std::env::set_var("HTAF_OUT_ROOT", "/tmp/env-root");
        assert_eq!(cfg.resolve_out_dir(), PathBuf::from("/tmp/env-root"));
        std::env::remove_var("HTAF_OUT_ROOT");
        assert_eq!(cfg.resolve_out_dir(), PathBuf::from("."));
    }
}
