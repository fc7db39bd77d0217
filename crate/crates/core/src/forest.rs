//! Bagged ensembles of greedy or lookahead trees.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::par;
use crate::seed::{self, stream};
use crate::tree::{self, TreeNode, TreeParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    /// Train each tree on a size-`N` resample drawn with replacement.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            tree: TreeParams::default(),
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::param("n_trees", "must be at least 1"));
        }
        self.tree.validate()
    }

    /// Seed of tree `index`: a pure function of the master seed and the index,
    /// so trees can be trained in any order.
    pub fn tree_seed(&self, index: usize) -> u64 {
        seed::derive_seed(self.seed, &[stream::TREE, index as u64])
    }
}

/// Range and median of a training feature, kept for heatmaps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

impl FeatureSummary {
    fn of(values: &mut [f64]) -> Self {
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let median = if n % 2 == 1 {
            values[n / 2]
        } else {
            0.5 * (values[n / 2 - 1] + values[n / 2])
        };
        Self {
            min: values[0],
            max: values[n - 1],
            median,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    pub feature_names: Vec<String>,
    pub feature_summaries: Vec<FeatureSummary>,
    pub trees: Vec<TreeNode>,
}

/// Split-count importance: per feature, the share of all split nodes in the
/// forest that test it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub feature_names: Vec<String>,
    pub split_counts: Vec<u64>,
    pub importance: Vec<f64>,
}

impl ImportanceReport {
    pub fn total_splits(&self) -> u64 {
        self.split_counts.iter().sum()
    }
}

/// How often an unordered feature pair appears as (block root, child split).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFrequency {
    pub features: (usize, usize),
    pub count: u64,
    pub frequency: f64,
}

/// `Pos` iff `p_plus > 0.5`.
pub fn classify_probability(p_plus: f64) -> Label {
    Label::from_bool(p_plus > 0.5)
}

impl Forest {
    /// Trains `n_trees` trees. Tree `i` uses its own generator seeded by
    /// [`ForestParams::tree_seed`] for both its bootstrap draw and its feature
    /// subsets, so the result does not depend on how trees are scheduled.
    pub fn fit(dataset: &LabeledDataset, params: &ForestParams) -> Result<Self> {
        params.validate()?;
        let n = dataset.n_rows();
        let trees = par::map_indexed(params.n_trees, |i| {
            let mut rng = seed::rng(params.tree_seed(i));
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            tree::grow(dataset, &rows, &params.tree, &mut rng)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let feature_summaries = (0..dataset.n_features())
            .map(|f| FeatureSummary::of(&mut dataset.column(f).collect::<Vec<_>>()))
            .collect();
        Ok(Self {
            params: *params,
            feature_names: dataset.feature_names().to_vec(),
            feature_summaries,
            trees,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_width(&self, sample: &[f64]) -> Result<()> {
        if sample.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: sample.len(),
            });
        }
        Ok(())
    }

    /// Unweighted mean of the trees' leaf `P+`.
    pub fn predict_proba(&self, sample: &[f64]) -> Result<f64> {
        self.check_width(sample)?;
        let sum: f64 = self.trees.iter().map(|t| t.predict_proba(sample)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn classify(&self, sample: &[f64]) -> Result<Label> {
        self.predict_proba(sample).map(classify_probability)
    }

    fn check_schema(&self, dataset: &LabeledDataset) -> Result<()> {
        if dataset.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: dataset.n_features(),
            });
        }
        Ok(())
    }

    /// `P+` for every row of `dataset`, in row order.
    pub fn predict_proba_all(&self, dataset: &LabeledDataset) -> Result<Vec<f64>> {
        self.check_schema(dataset)?;
        Ok(par::map_indexed(dataset.n_rows(), |r| {
            let sample = dataset.row(r);
            let sum: f64 = self.trees.iter().map(|t| t.predict_proba(sample)).sum();
            sum / self.trees.len() as f64
        }))
    }

    /// Fraction of rows whose predicted class equals the label.
    pub fn accuracy(&self, test: &LabeledDataset) -> Result<f64> {
        let probs = self.predict_proba_all(test)?;
        let correct = probs
            .iter()
            .zip(test.labels())
            .filter(|(&p, &l)| classify_probability(p) == l)
            .count();
        Ok(correct as f64 / test.n_rows() as f64)
    }

    pub fn feature_importance(&self) -> ImportanceReport {
        let mut split_counts = alloc::vec![0u64; self.n_features()];
        for t in &self.trees {
            t.walk(&mut |node, _| {
                if let TreeNode::Split { split, .. } = node {
                    split_counts[split.feature] += 1;
                }
            });
        }
        let total: u64 = split_counts.iter().sum();
        let importance = split_counts
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect();
        ImportanceReport {
            feature_names: self.feature_names.clone(),
            split_counts,
            importance,
        }
    }

    /// Feature pairs that co-occur inside depth-2 blocks: for every split
    /// node at even depth (a block root), each split child contributes the
    /// unordered pair `(root feature, child feature)`; same-feature pairs are
    /// skipped. Sorted by descending count, then ascending pair.
    pub fn block_pair_frequencies(&self) -> Vec<PairFrequency> {
        let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for t in &self.trees {
            t.walk(&mut |node, depth| {
                let TreeNode::Split { split, left, right } = node else {
                    return;
                };
                if depth % 2 != 0 {
                    return;
                }
                for child in [left, right] {
                    if let TreeNode::Split { split: c, .. } = child.as_ref() {
                        if c.feature != split.feature {
                            let key = (split.feature.min(c.feature), split.feature.max(c.feature));
                            *counts.entry(key).or_insert(0) += 1;
                        }
                    }
                }
            });
        }
        let total: u64 = counts.values().sum();
        let mut out: Vec<PairFrequency> = counts
            .into_iter()
            .map(|(features, count)| PairFrequency {
                features,
                count,
                frequency: count as f64 / total as f64,
            })
            .collect();
        out.sort_by(|a, b| b.count.cmp(&a.count).then(a.features.cmp(&b.features)));
        out
    }
}
