//! Concept-bottleneck evaluation metrics and prompt generation.
//!
//! An inference-time concept network exposes a feature layer whose
//! activations are bits. This module measures how bit-like the trained
//! activations actually are ([`binarity_score`]), how predictable each
//! concept node is from the class label alone ([`concept_accuracy`]),
//! how concentrated each node is within a class ([`class_specificity`]),
//! and which nodes the linear head leans on ([`importance_scores`]).
//! [`interpretation_prompt`] renders the class split induced by a node
//! as a text prompt for a human or language-model annotator; callers
//! write it to a file, nothing is ever sent anywhere.

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

/// Concept activations with aligned class labels. `binary` mode requires
/// every entry to be exactly 0 or 1 (inference-time bits); `continuous`
/// mode admits reals in [0, 1] (training-mode audits).
#[derive(Clone, Debug)]
pub struct ConceptMatrix {
    entries: Matrix,
    labels: Vec<usize>,
    binary: bool,
}

impl ConceptMatrix {
    /// Wraps a {0,1}-valued activation matrix.
    pub fn binary(entries: Matrix, labels: Vec<usize>) -> Result<ConceptMatrix> {
        Self::validate(&entries, &labels)?;
        for &v in entries.iter() {
            if v != 0.0 && v != 1.0 {
                return Err(CoreError::InvalidParameter {
                    name: "concept entry",
                    value: v,
                });
            }
        }
        Ok(ConceptMatrix {
            entries,
            labels,
            binary: true,
        })
    }

    /// Wraps a [0,1]-valued activation matrix.
    pub fn continuous(entries: Matrix, labels: Vec<usize>) -> Result<ConceptMatrix> {
        Self::validate(&entries, &labels)?;
        for &v in entries.iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(CoreError::InvalidParameter {
                    name: "concept entry",
                    value: v,
                });
            }
        }
        Ok(ConceptMatrix {
            entries,
            labels,
            binary: false,
        })
    }

    fn validate(entries: &Matrix, labels: &[usize]) -> Result<()> {
        if entries.rows() == 0 || entries.cols() == 0 {
            return Err(CoreError::EmptyInput {
                context: "concept matrix",
            });
        }
        if labels.len() != entries.rows() {
            return Err(CoreError::LengthMismatch {
                context: "concept labels",
                lhs: labels.len(),
                rhs: entries.rows(),
            });
        }
        Ok(())
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.entries.rows()
    }

    pub fn n_nodes(&self) -> usize {
        self.entries.cols()
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    fn require_binary(&self, metric: &str) -> Result<()> {
        if self.binary {
            Ok(())
        } else {
            Err(CoreError::MetricUndefined {
                reason: format!("{metric} needs binary concepts"),
            })
        }
    }

    /// Per class: (count, per-node count of ones), keyed by label in
    /// ascending order.
    fn class_stats(&self) -> Vec<(usize, usize, Vec<usize>)> {
        let mut by_class: std::collections::BTreeMap<usize, (usize, Vec<usize>)> =
            std::collections::BTreeMap::new();
        for (i, &label) in self.labels.iter().enumerate() {
            let entry = by_class
                .entry(label)
                .or_insert_with(|| (0, vec![0; self.n_nodes()]));
            entry.0 += 1;
            for j in 0..self.n_nodes() {
                if self.entries.get(i, j) == 1.0 {
                    entry.1[j] += 1;
                }
            }
        }
        by_class
            .into_iter()
            .map(|(label, (count, ones))| (label, count, ones))
            .collect()
    }
}

/// Fraction of activation entries that are nearly saturated: strictly
/// above 0.99 or strictly below 0.01. Entries must lie in [0, 1].
pub fn binarity_score(activations: &Matrix) -> Result<f64> {
    if activations.rows() == 0 || activations.cols() == 0 {
        return Err(CoreError::EmptyInput {
            context: "activation matrix",
        });
    }
    let mut saturated = 0usize;
    for &a in activations.iter() {
        if !(0.0..=1.0).contains(&a) {
            return Err(CoreError::InvalidParameter {
                name: "activation entry",
                value: a,
            });
        }
        if a > 0.99 || a < 0.01 {
            saturated += 1;
        }
    }
    Ok(saturated as f64 / (activations.rows() * activations.cols()) as f64)
}

/// How predictable the concept bits are from the class label alone: per
/// node, a logistic regressor maps the one-hot class to the bit, and the
/// node's score is the probe's training accuracy; the result is the mean
/// over nodes. Needs binary concepts and at least two samples in every
/// class that occurs.
///
/// With a one-hot input and no shared bias the per-class weights are
/// decoupled, so the full-batch gradient for class k depends only on the
/// class size and its count of ones. The descent loop below iterates that
/// exact gradient (lr 0.1, at most 2000 steps, stop when the sup-norm of
/// the gradient falls below 1e-8), which reproduces sample-by-sample
/// full-batch descent to the bit.
pub fn concept_accuracy(concepts: &ConceptMatrix) -> Result<f64> {
    concepts.require_binary("concept accuracy")?;
    let stats = concepts.class_stats();
    for (label, count, _) in &stats {
        if *count < 2 {
            return Err(CoreError::MetricUndefined {
                reason: format!(
                    "concept accuracy needs at least 2 samples per class, class {label} has {count}"
                ),
            });
        }
    }
    let n = concepts.n_samples() as f64;
    let mut total = 0.0;
    for j in 0..concepts.n_nodes() {
        let per_class: Vec<(usize, usize)> = stats
            .iter()
            .map(|(_, count, ones)| (*count, ones[j]))
            .collect();
        total += probe_accuracy(&per_class, n);
    }
    Ok(total / concepts.n_nodes() as f64)
}

fn probe_accuracy(per_class: &[(usize, usize)], n: f64) -> f64 {
    let mut w = vec![0.0f64; per_class.len()];
    for _ in 0..2000 {
        let mut grad_max = 0.0f64;
        for (k, &(count, ones)) in per_class.iter().enumerate() {
            let p = ones as f64 / count as f64;
            let g = count as f64 / n * (crate::activations::stable_sigmoid(w[k]) - p);
            w[k] -= 0.1 * g;
            grad_max = grad_max.max(g.abs());
        }
        if grad_max < 1e-8 {
            break;
        }
    }
    let mut correct = 0usize;
    for (k, &(count, ones)) in per_class.iter().enumerate() {
        correct += if w[k] >= 0.0 { ones } else { count - ones };
    }
    correct as f64 / n
}

/// Per-node proportion of ones among the samples of class `class_k`.
pub fn class_specificity(concepts: &ConceptMatrix, class_k: usize) -> Result<Vec<f64>> {
    concepts.require_binary("class specificity")?;
    let rows: Vec<usize> = concepts
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == class_k)
        .map(|(i, _)| i)
        .collect();
    if rows.is_empty() {
        return Err(CoreError::ClassAbsent { class: class_k });
    }
    Ok((0..concepts.n_nodes())
        .map(|j| {
            let ones = rows
                .iter()
                .filter(|&&i| concepts.entries().get(i, j) == 1.0)
                .count();
            ones as f64 / rows.len() as f64
        })
        .collect())
}

/// Absolute head weights indexed by (concept node, class).
#[derive(Clone, Debug)]
pub struct ImportanceTable {
    scores: Matrix,
}

impl ImportanceTable {
    pub fn n_nodes(&self) -> usize {
        self.scores.rows()
    }

    pub fn n_classes(&self) -> usize {
        self.scores.cols()
    }

    pub fn score(&self, node: usize, class: usize) -> Result<f64> {
        if node >= self.n_nodes() {
            return Err(CoreError::NodeOutOfRange {
                node,
                n_nodes: self.n_nodes(),
            });
        }
        if class >= self.n_classes() {
            return Err(CoreError::ClassAbsent { class });
        }
        Ok(self.scores.get(node, class))
    }

    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    /// The `m` highest-scoring nodes for a class, descending; equal
    /// scores rank the lower node index first.
    pub fn top_nodes(&self, class: usize, m: usize) -> Result<Vec<usize>> {
        if class >= self.n_classes() {
            return Err(CoreError::ClassAbsent { class });
        }
        let mut order: Vec<usize> = (0..self.n_nodes()).collect();
        order.sort_by(|&a, &b| {
            self.scores
                .get(b, class)
                .partial_cmp(&self.scores.get(a, class))
                .expect("scores are finite")
                .then(a.cmp(&b))
        });
        order.truncate(m);
        Ok(order)
    }
}

/// Builds the importance table from a linear head's weight matrix
/// (shape: classes x concept nodes): the importance of node j for class
/// k is `|w[k][j]|`.
pub fn importance_scores(head_weights: &Matrix) -> ImportanceTable {
    let scores = Matrix::from_fn(head_weights.cols(), head_weights.rows(), |j, k| {
        head_weights.get(k, j).abs()
    });
    ImportanceTable { scores }
}

/// Renders the concept-interpretation prompt for one node. Group A holds
/// the classes whose samples majority-activate the node (ties and
/// sample-less classes fall to Group B); each group lists class names in
/// ascending class-index order. The returned document is byte-stable for
/// fixed inputs; callers persist it to a file.
pub fn interpretation_prompt(
    concepts: &ConceptMatrix,
    class_names: &[String],
    node: usize,
) -> Result<String> {
    concepts.require_binary("prompt emission")?;
    if node >= concepts.n_nodes() {
        return Err(CoreError::NodeOutOfRange {
            node,
            n_nodes: concepts.n_nodes(),
        });
    }
    if let Some(&max_label) = concepts.labels().iter().max() {
        if max_label >= class_names.len() {
            return Err(CoreError::LengthMismatch {
                context: "class names",
                lhs: class_names.len(),
                rhs: max_label + 1,
            });
        }
    }
    let mut counts = vec![(0usize, 0usize); class_names.len()];
    for (i, &label) in concepts.labels().iter().enumerate() {
        counts[label].0 += 1;
        if concepts.entries().get(i, node) == 1.0 {
            counts[label].1 += 1;
        }
    }
    let mut group_a = Vec::new();
    let mut group_b = Vec::new();
    for (k, &(count, ones)) in counts.iter().enumerate() {
        if 2 * ones > count {
            group_a.push(class_names[k].as_str());
        } else {
            group_b.push(class_names[k].as_str());
        }
    }
    Ok(format!(
        "Task: Concept-based Visual Explanation\n\
         \n\
         Group A: [{}]\n\
         Group B: [{}]\n\
         \n\
         Identify the attribute that distinguishes Group A from Group B based on the two class lists. \n\
         Provide the inferred concept and a brief justification.\n",
        group_a.join(", "),
        group_b.join(", ")
    ))
}
