//! Tabular dataset loading, splitting, and feature scaling.
//!
//! Datasets arrive as headered CSV files. [`load_csv`] parses them with
//! row-numbered errors and preserves file order; [`split_and_scale`]
//! draws a seeded 70/10/20 train/validation/test partition and fits
//! min-max feature scaling on the training split only, so the training
//! features land in [0, 1] exactly while validation and test may
//! spill outside. Targets are never scaled.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use htaf_core::matrix::Matrix;
use htaf_core::training::{Targets, TrainSet};

use crate::error::{CliError, Result};

/// Prediction task of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification { n_classes: usize },
}

/// Which columns to read and how to interpret the target.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Schema {
    /// Name of the target column.
    pub target: String,
    /// Feature columns in order; `None` takes every non-target column in
    /// file order.
    #[serde(default)]
    pub features: Option<Vec<String>>,
    /// `true` parses the target as a non-negative integer class label.
    pub classification: bool,
}

/// Per-feature min-max parameters fitted on the training split.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scaling {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Scaling {
    fn fit(features: &Matrix, rows: &[usize]) -> Scaling {
        let cols = features.cols();
        let mut mins = vec![f64::INFINITY; cols];
        let mut maxs = vec![f64::NEG_INFINITY; cols];
        for &i in rows {
            for j in 0..cols {
                let v = features.get(i, j);
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Scaling { mins, maxs }
    }

    /// `(x - min) / (max - min)`; a constant feature maps to 0.
    pub fn apply(&self, features: &Matrix) -> Matrix {
        Matrix::from_fn(features.rows(), features.cols(), |i, j| {
            let range = self.maxs[j] - self.mins[j];
            if range == 0.0 {
                0.0
            } else {
                (features.get(i, j) - self.mins[j]) / range
            }
        })
    }

    /// Inverse of [`Scaling::apply`]; constant features recover their
    /// training value.
    pub fn invert(&self, scaled: &Matrix) -> Matrix {
        Matrix::from_fn(scaled.rows(), scaled.cols(), |i, j| {
            let range = self.maxs[j] - self.mins[j];
            self.mins[j] + scaled.get(i, j) * range
        })
    }
}

/// Disjoint, exhaustive row-index partition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// A loaded tabular dataset. `features` holds scaled values once
/// [`split_and_scale`] has run (the fitted parameters stay in `scaling`
/// for inversion).
#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub targets: Targets,
    pub task: Task,
    pub scaling: Option<Scaling>,
    pub split: Option<Split>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    fn subset(&self, rows: &[usize]) -> Result<TrainSet> {
        let x = Matrix::from_fn(rows.len(), self.n_features(), |i, j| {
            self.features.get(rows[i], j)
        });
        let set = match &self.targets {
            Targets::Values(v) => {
                TrainSet::regression(x, rows.iter().map(|&i| v[i]).collect())?
            }
            Targets::Labels(l) => {
                TrainSet::classification(x, rows.iter().map(|&i| l[i]).collect())?
            }
        };
        Ok(set)
    }

    fn split_ref(&self) -> Result<&Split> {
        self.split.as_ref().ok_or_else(|| CliError::Config {
            reason: "dataset has not been split".to_string(),
        })
    }

    pub fn train_set(&self) -> Result<TrainSet> {
        self.subset(&self.split_ref()?.train)
    }

    pub fn val_set(&self) -> Result<TrainSet> {
        self.subset(&self.split_ref()?.val)
    }

    pub fn test_set(&self) -> Result<TrainSet> {
        self.subset(&self.split_ref()?.test)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads a headered CSV into an unsplit dataset. Rows keep file order;
/// the first unparseable cell aborts the load with its 1-based data-row
/// number and column name.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| {
            if e.is_io_error() {
                match e.into_kind() {
                    csv::ErrorKind::Io(source) => CliError::Io {
                        path: path.to_path_buf(),
                        source,
                    },
                    _ => unreachable!("is_io_error guarantees an io kind"),
                }
            } else {
                CliError::BadCsv {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                }
            }
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::BadCsv {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();

    let column_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };

    let target_idx = column_index(&schema.target)?;
    let feature_idx: Vec<(usize, String)> = match &schema.features {
        Some(names) => names
            .iter()
            .map(|n| Ok((column_index(n)?, n.clone())))
            .collect::<Result<_>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_idx)
            .map(|(i, n)| (i, n.clone()))
            .collect(),
    };
    if feature_idx.is_empty() {
        return Err(CliError::Config {
            reason: "schema selects no feature columns".to_string(),
        });
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::BadCsv {
            path: path.to_path_buf(),
            reason: format!("row {}: {e}", row_no + 1),
        })?;
        let cell = |idx: usize, column: &str| -> Result<&str> {
            record.get(idx).ok_or_else(|| CliError::BadCsv {
                path: path.to_path_buf(),
                reason: format!("row {}: missing column '{column}'", row_no + 1),
            })
        };

        let mut row = Vec::with_capacity(feature_idx.len());
        for (idx, name) in &feature_idx {
            let raw = cell(*idx, name)?;
            let parsed: f64 = raw.parse().map_err(|_| CliError::BadCell {
                path: path.to_path_buf(),
                row: row_no + 1,
                column: name.clone(),
                value: raw.to_string(),
            })?;
            if !parsed.is_finite() {
                return Err(CliError::BadCell {
                    path: path.to_path_buf(),
                    row: row_no + 1,
                    column: name.clone(),
                    value: raw.to_string(),
                });
            }
            row.push(parsed);
        }
        rows.push(row);

        let raw = cell(target_idx, &schema.target)?;
        if schema.classification {
            let label: usize = raw.parse().map_err(|_| CliError::BadCell {
                path: path.to_path_buf(),
                row: row_no + 1,
                column: schema.target.clone(),
                value: raw.to_string(),
            })?;
            labels.push(label);
        } else {
            let value: f64 = raw.parse().map_err(|_| CliError::BadCell {
                path: path.to_path_buf(),
                row: row_no + 1,
                column: schema.target.clone(),
                value: raw.to_string(),
            })?;
            if !value.is_finite() {
                return Err(CliError::BadCell {
                    path: path.to_path_buf(),
                    row: row_no + 1,
                    column: schema.target.clone(),
                    value: raw.to_string(),
                });
            }
            values.push(value);
        }
    }

    if rows.is_empty() {
        return Err(CliError::EmptyDataset {
            path: path.to_path_buf(),
        });
    }

    let features = Matrix::from_rows(&rows)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());

    let (targets, task) = if schema.classification {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        if n_classes < 2 {
            return Err(CliError::Config {
                reason: format!("classification target has {n_classes} classes; need at least 2"),
            });
        }
        (Targets::Labels(labels), Task::Classification { n_classes })
    } else {
        (Targets::Values(values), Task::Regression)
    };

    Ok(Dataset {
        name,
        features,
        targets,
        task,
        scaling: None,
        split: None,
    })
}

/// Draws the seeded 70/10/20 split (sizes floor/floor/remainder), fits
/// min-max scaling on the training rows, and applies it to every row.
pub fn split_and_scale(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let n = ds.n_rows();
    if n < 10 {
        return Err(CliError::TooFewRows { needed: 10, got: n });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let n_train = n * 7 / 10;
    let n_val = n / 10;
    let split = Split {
        train: indices[..n_train].to_vec(),
        val: indices[n_train..n_train + n_val].to_vec(),
        test: indices[n_train + n_val..].to_vec(),
    };

    let scaling = Scaling::fit(&ds.features, &split.train);
    let features = scaling.apply(&ds.features);

    Ok(Dataset {
        name: ds.name.clone(),
        features,
        targets: ds.targets.clone(),
        task: ds.task,
        scaling: Some(scaling),
        split: Some(split),
    })
}

/// Writes a dataset's current feature values to CSV with columns
/// `f1..fd` and a final `target` column, loadable by [`load_csv`].
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for j in 0..ds.n_features() {
        out.push_str(&format!("f{},", j + 1));
    }
    out.push_str("target\n");
    for i in 0..ds.n_rows() {
        for j in 0..ds.n_features() {
            out.push_str(&format!("{:.17e},", ds.features.get(i, j)));
        }
        match &ds.targets {
            Targets::Values(v) => out.push_str(&format!("{:.17e}\n", v[i])),
            Targets::Labels(l) => out.push_str(&format!("{}\n", l[i])),
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// The schema for CSV files produced by [`write_csv`].
pub fn synth_schema(classification: bool) -> Schema {
    Schema {
        target: "target".to_string(),
        features: None,
        classification,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use std::path::PathBuf;

    fn write_tmp(content: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        (dir, path)
    }

    fn reg_schema() -> Schema {
        Schema {
            target: "y".to_string(),
            features: None,
            classification: false,
        }
    }

    #[test]
    fn loads_features_in_file_order() {
        let (_d, path) = write_tmp("a,b,y\n1,2,0.5\n3,4,0.6\n5,6,0.7\n");
        let ds = load_csv(&path, &reg_schema()).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.features.to_flat_vec(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(ds.targets, Targets::Values(vec![0.5, 0.6, 0.7]));
        assert_eq!(ds.task, Task::Regression);
        assert_eq!(ds.name, "data");
    }

    #[test]
    fn explicit_feature_selection_reorders_columns() {
        let (_d, path) = write_tmp("a,b,y\n1,2,0.5\n3,4,0.6\n");
        let schema = Schema {
            target: "y".to_string(),
            features: Some(vec!["b".to_string(), "a".to_string()]),
            classification: false,
        };
        let ds = load_csv(&path, &schema).unwrap();
        assert_eq!(ds.features.to_flat_vec(), vec![2.0, 1.0, 4.0, 3.0]);
    }

    #[test]
    fn classification_target_counts_classes() {
        let (_d, path) = write_tmp("a,y\n1,0\n2,1\n3,2\n4,1\n");
        let schema = Schema {
            target: "y".to_string(),
            features: None,
            classification: true,
        };
        let ds = load_csv(&path, &schema).unwrap();
        assert_eq!(ds.task, Task::Classification { n_classes: 3 });
        assert_eq!(ds.targets, Targets::Labels(vec![0, 1, 2, 1]));
    }

    #[test]
    fn missing_column_is_reported_by_name() {
        let (_d, path) = write_tmp("a,b\n1,2\n");
        match load_csv(&path, &reg_schema()) {
            Err(CliError::MissingColumn { column, .. }) => assert_eq!(column, "y"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn bad_cell_is_reported_with_row_number() {
        let (_d, path) = write_tmp("a,y\n1,0.5\noops,0.6\n3,0.7\n");
        match load_csv(&path, &reg_schema()) {
            Err(CliError::BadCell { row, column, value, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
                assert_eq!(value, "oops");
            }
            other => panic!("expected BadCell, got {other:?}"),
        }
    }

    #[test]
    fn header_only_file_is_an_empty_dataset() {
        let (_d, path) = write_tmp("a,y\n");
        assert!(matches!(
            load_csv(&path, &reg_schema()),
            Err(CliError::EmptyDataset { .. })
        ));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("absent.csv");
        assert!(matches!(
            load_csv(&path, &reg_schema()),
            Err(CliError::Io { .. })
        ));
    }

    #[test]
    fn non_finite_cells_are_rejected() {
        let (_d, path) = write_tmp("a,y\ninf,0.5\n");
        assert!(matches!(
            load_csv(&path, &reg_schema()),
            Err(CliError::BadCell { row: 1, .. })
        ));
    }

    fn synth_rows(n: usize) -> Dataset {
        let features = Matrix::from_fn(n, 3, |i, j| (i * 3 + j) as f64);
        let targets = Targets::Values((0..n).map(|i| i as f64).collect());
        Dataset {
            name: "toy".to_string(),
            features,
            targets,
            task: Task::Regression,
            scaling: None,
            split: None,
        }
    }

    #[test]
    fn split_sizes_follow_the_ratio() {
        let ds = synth_rows(100);
        let split = split_and_scale(&ds, 1).unwrap();
        let s = split.split.unwrap();
        assert_eq!(s.train.len(), 70);
        assert_eq!(s.val.len(), 10);
        assert_eq!(s.test.len(), 20);

        let ds = synth_rows(57);
        let s = split_and_scale(&ds, 1).unwrap().split.unwrap();
        assert_eq!(s.train.len(), 39);
        assert_eq!(s.val.len(), 5);
        assert_eq!(s.test.len(), 13);
    }

    #[test]
    fn split_is_disjoint_and_exhaustive() {
        let ds = synth_rows(43);
        let s = split_and_scale(&ds, 9).unwrap().split.unwrap();
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.val)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..43).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_seed_deterministic() {
        let ds = synth_rows(50);
        let a = split_and_scale(&ds, 5).unwrap().split.unwrap();
        let b = split_and_scale(&ds, 5).unwrap().split.unwrap();
        let c = split_and_scale(&ds, 6).unwrap().split.unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.val, b.val);
        assert_eq!(a.test, b.test);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let ds = synth_rows(9);
        assert!(matches!(
            split_and_scale(&ds, 1),
            Err(CliError::TooFewRows { needed: 10, got: 9 })
        ));
    }

    #[test]
    fn train_features_scale_into_the_unit_interval() {
        let ds = synth_rows(40);
        let scaled = split_and_scale(&ds, 3).unwrap();
        let split = scaled.split.as_ref().unwrap();
        for &i in &split.train {
            for j in 0..scaled.n_features() {
                let v = scaled.features.get(i, j);
                assert!((0.0..=1.0).contains(&v), "train value {v} out of range");
            }
        }
        // Min and max both occur in the training rows.
        for j in 0..scaled.n_features() {
            let vals: Vec<f64> = split.train.iter().map(|&i| scaled.features.get(i, j)).collect();
            assert_eq!(vals.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }
    }

    #[test]
    fn midpoint_scales_to_half() {
        // Train range [2, 6]: the value 4 must scale to exactly 0.5.
        let scaling = Scaling {
            mins: vec![2.0],
            maxs: vec![6.0],
        };
        let m = Matrix::from_rows(&[vec![4.0]]).unwrap();
        assert_eq!(scaling.apply(&m).get(0, 0), 0.5);
    }

    #[test]
    fn constant_features_scale_to_zero() {
        let features = Matrix::from_fn(12, 2, |i, j| if j == 0 { 7.0 } else { i as f64 });
        let ds = Dataset {
            name: "const".to_string(),
            features,
            targets: Targets::Values(vec![0.0; 12]),
            task: Task::Regression,
            scaling: None,
            split: None,
        };
        let scaled = split_and_scale(&ds, 2).unwrap();
        for i in 0..12 {
            assert_eq!(scaled.features.get(i, 0), 0.0);
        }
    }

    #[test]
    fn scaling_round_trips_the_training_rows() {
        let ds = synth_rows(30);
        let scaled = split_and_scale(&ds, 4).unwrap();
        let recovered = scaled
            .scaling
            .as_ref()
            .unwrap()
            .invert(&scaled.features);
        for &i in &scaled.split.as_ref().unwrap().train {
            for j in 0..ds.n_features() {
                assert!(
                    (recovered.get(i, j) - ds.features.get(i, j)).abs() < 1e-12,
                    "round trip failed at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn subsets_align_features_with_targets() {
        let ds = synth_rows(20);
        let scaled = split_and_scale(&ds, 8).unwrap();
        let split = scaled.split.as_ref().unwrap().clone();
        let train = scaled.train_set().unwrap();
        assert_eq!(train.len(), split.train.len());
        match &train.targets {
            Targets::Values(v) => {
                for (pos, &orig_row) in split.train.iter().enumerate() {
                    assert_eq!(v[pos], orig_row as f64);
                }
            }
            _ => panic!("expected values"),
        }
    }

    #[test]
    fn csv_write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let ds = synth_rows(15);
        write_csv(&ds, &path).unwrap();
        let back = load_csv(&path, &synth_schema(false)).unwrap();
        assert_eq!(back.n_rows(), 15);
        assert_eq!(back.features, ds.features);
        assert_eq!(back.targets, ds.targets);
    }
}
