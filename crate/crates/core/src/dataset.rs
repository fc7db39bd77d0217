//! Labeled feature matrices and the data plumbing shared by all learners.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::seed;

/// Binary class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn is_pos(self) -> bool {
        self == Label::Pos
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    /// `1` for positive, `0` for negative.
    pub fn as_u8(self) -> u8 {
        self.is_pos() as u8
    }
}

/// An `N x k` matrix of finite feature values with named columns and one
/// binary label per row. Rows are stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    feature_names: Vec<String>,
    values: Vec<f64>,
    labels: Vec<Label>,
}

impl LabeledDataset {
    /// Builds a dataset from row-major values. `values.len()` must equal
    /// `labels.len() * feature_names.len()`.
    pub fn from_row_major(
        feature_names: Vec<String>,
        values: Vec<f64>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        let k = feature_names.len();
        if k == 0 {
            return Err(Error::Shape("dataset needs at least one feature".into()));
        }
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if values.len() != labels.len() * k {
            return Err(Error::Shape(format!(
                "{} values do not fill {} rows of {} features",
                values.len(),
                labels.len(),
                k
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateFeatureName(name.clone()));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / k,
                column: pos % k,
            });
        }
        Ok(Self {
            feature_names,
            values,
            labels,
        })
    }

    pub fn from_rows(
        feature_names: Vec<String>,
        rows: &[Vec<f64>],
        labels: Vec<Label>,
    ) -> Result<Self> {
        let k = feature_names.len();
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Shape(format!(
                    "row {i} has {} values, expected {k}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_row_major(feature_names, values, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, row: usize) -> Label {
        self.labels[row]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let k = self.n_features();
        &self.values[row * k..(row + 1) * k]
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.values[row * self.n_features() + feature]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_features())
    }

    pub fn column(&self, feature: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[feature])
    }

    /// New dataset holding the given rows, in the given order (repeats allowed).
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let k = self.n_features();
        let mut values = Vec::with_capacity(rows.len() * k);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            values.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Ok(Self {
            feature_names: self.feature_names.clone(),
            values,
            labels,
        })
    }

    /// New dataset keeping only the given feature columns, in the given order.
    pub fn select_features(&self, features: &[usize]) -> Result<Self> {
        if let Some(&bad) = features.iter().find(|&&f| f >= self.n_features()) {
            return Err(Error::param(
                "features",
                format!("feature index {bad} out of range"),
            ));
        }
        let names = features
            .iter()
            .map(|&f| self.feature_names[f].clone())
            .collect();
        let mut values = Vec::with_capacity(self.n_rows() * features.len());
        for row in self.rows() {
            values.extend(features.iter().map(|&f| row[f]));
        }
        Self::from_row_major(names, values, self.labels.clone())
    }

    /// Same features with every label flipped.
    pub fn with_flipped_labels(&self) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            values: self.values.clone(),
            labels: self.labels.iter().map(|l| l.flipped()).collect(),
        }
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|l| l.is_pos()).count()
    }
}

/// Candidate split thresholds for one feature: distinct interpolated sample
/// quantiles, strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileThresholds {
    pub feature_index: usize,
    pub thresholds: Vec<f64>,
}

impl QuantileThresholds {
    /// Number of thresholds `t` with `t <= x`. A sample goes right of the
    /// `j`-th threshold (1-based) exactly when its bucket is `>= j`.
    #[inline]
    pub fn bucket_of(&self, x: f64) -> usize {
        self.thresholds.partition_point(|&t| t <= x)
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// Distinct values of the linearly interpolated `j/B` quantiles,
/// `j = 1..B-1`, of `sorted` (ascending, non-empty). Values equal to the
/// minimum are dropped since they separate nothing.
pub(crate) fn interpolated_quantiles(sorted: &[f64], n_buckets: usize) -> Vec<f64> {
    let n = sorted.len();
    let mut out: Vec<f64> = Vec::with_capacity(n_buckets.saturating_sub(1));
    for j in 1..n_buckets {
        let h = (n - 1) as f64 * j as f64 / n_buckets as f64;
        let lo = math::floor(h) as usize;
        let q = if lo + 1 < n {
            let frac = h - lo as f64;
            sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
        } else {
            sorted[n - 1]
        };
        // Rounding can nudge an interpolated value below its left neighbour.
        let q = q.clamp(sorted[lo], sorted[(lo + 1).min(n - 1)]);
        // A threshold at the minimum sends every sample right.
        if q > sorted[0] && out.last().is_none_or(|&last| q > last) {
            out.push(q);
        }
    }
    out
}

/// Candidate thresholds for `feature_index` from the `B`-bucket quantiles of
/// the whole dataset.
pub fn quantile_thresholds(
    dataset: &LabeledDataset,
    feature_index: usize,
    n_buckets: usize,
) -> Result<QuantileThresholds> {
    if feature_index >= dataset.n_features() {
        return Err(Error::param(
            "feature_index",
            format!("{feature_index} >= {} features", dataset.n_features()),
        ));
    }
    let n = dataset.n_rows();
    if n_buckets < 2 || n_buckets > n {
        return Err(Error::param(
            "n_buckets",
            format!("must lie in [2, {n}], got {n_buckets}"),
        ));
    }
    let mut sorted: Vec<f64> = dataset.column(feature_index).collect();
    sorted.sort_by(f64::total_cmp);
    Ok(QuantileThresholds {
        feature_index,
        thresholds: interpolated_quantiles(&sorted, n_buckets),
    })
}

/// Assignment of `N` samples to `n_folds` near-equal folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![0; self.n_folds];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Shuffles `0..n` with `seed` and deals the permutation round-robin into folds,
/// so the first `n % n_folds` folds carry one extra sample.
pub fn make_folds(n: usize, n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 || n_folds > n {
        return Err(Error::param(
            "n_folds",
            format!("must lie in [2, {n}], got {n_folds}"),
        ));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed));
    let mut assignments = alloc::vec![0; n];
    for (pos, &sample) in perm.iter().enumerate() {
        assignments[sample] = pos % n_folds;
    }
    Ok(FoldPlan {
        n_folds,
        assignments,
    })
}

/// Row indices of a train/test split: `ceil(f * N)` training rows.
/// Chronological splits keep the leading rows for training; random splits
/// draw them with `seed`. Both parts come back in ascending row order.
pub fn holdout_indices(
    n: usize,
    train_fraction: f64,
    seed: u64,
    chronological: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::param(
            "train_fraction",
            format!("must lie in (0, 1), got {train_fraction}"),
        ));
    }
    let n_train = math::ceil(train_fraction * n as f64 - 1e-9) as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::param(
            "train_fraction",
            format!("{train_fraction} of {n} rows leaves an empty part"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if !chronological {
        order.shuffle(&mut seed::rng(seed));
    }
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn holdout_split(
    dataset: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
    chronological: bool,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = holdout_indices(dataset.n_rows(), train_fraction, seed, chronological)?;
    Ok((dataset.subset(&train)?, dataset.subset(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("f{i}")).collect()
    }

    fn column_dataset(values: Vec<f64>) -> LabeledDataset {
        let labels = values.iter().map(|&v| Label::from_bool(v > 0.5)).collect();
        LabeledDataset::from_row_major(names(1), values, labels).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_duplicates() {
        let err = LabeledDataset::from_row_major(names(2), vec![0.0, f64::NAN], vec![Label::Pos]);
        assert_eq!(err, Err(Error::NonFinite { row: 0, column: 1 }));
        let err = LabeledDataset::from_row_major(
            vec!["a".to_string(), "a".to_string()],
            vec![0.0, 1.0],
            vec![Label::Pos],
        );
        assert_eq!(err, Err(Error::DuplicateFeatureName("a".into())));
        let err = LabeledDataset::from_row_major(names(2), vec![], vec![]);
        assert_eq!(err, Err(Error::EmptyDataset));
    }

    #[test]
    fn quantiles_of_hundredths() {
        // Sorted x_i = i/100; the q-quantile sits at position 99q between
        // neighbours: 24.75 -> 0.2575, 49.5 -> 0.505, 74.25 -> 0.7525.
        let ds = column_dataset((1..=100).map(|i| i as f64 / 100.0).collect());
        let q = quantile_thresholds(&ds, 0, 4).unwrap();
        let expected = [0.2575, 0.505, 0.7525];
        assert_eq!(q.thresholds.len(), 3);
        for (got, want) in q.thresholds.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn constant_feature_has_no_thresholds() {
        let ds = column_dataset(vec![0.5; 20]);
        for b in [2, 5, 20] {
            assert!(quantile_thresholds(&ds, 0, b).unwrap().is_empty());
        }
    }

    #[test]
    fn b_equal_n_stays_between_order_statistics() {
        let vals: Vec<f64> = vec![0.9, 0.1, 0.4, 0.3, 0.7, 0.2];
        let ds = column_dataset(vals.clone());
        let q = quantile_thresholds(&ds, 0, vals.len()).unwrap();
        assert!(q.thresholds.len() < vals.len());
        let mut sorted = vals;
        sorted.sort_by(f64::total_cmp);
        for t in &q.thresholds {
            assert!(*t >= sorted[0] && *t <= sorted[sorted.len() - 1]);
        }
        assert!(q.thresholds.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn bucket_count_out_of_range() {
        let ds = column_dataset(vec![0.1, 0.2, 0.3]);
        assert!(quantile_thresholds(&ds, 0, 1).is_err());
        assert!(quantile_thresholds(&ds, 0, 4).is_err());
        assert!(quantile_thresholds(&ds, 1, 2).is_err());
    }

    #[test]
    fn bucket_routing_is_ge_right() {
        let q = QuantileThresholds {
            feature_index: 0,
            thresholds: vec![0.25, 0.5, 0.75],
        };
        assert_eq!(q.bucket_of(0.1), 0);
        assert_eq!(q.bucket_of(0.25), 1);
        assert_eq!(q.bucket_of(0.5), 2);
        assert_eq!(q.bucket_of(0.99), 3);
    }

    #[test]
    fn folds_of_2000_by_5() {
        let plan = make_folds(2000, 5, 11).unwrap();
        assert_eq!(plan.fold_sizes(), vec![400; 5]);
    }

    #[test]
    fn folds_of_10_by_3() {
        let plan = make_folds(10, 3, 3).unwrap();
        assert_eq!(plan.fold_sizes(), vec![4, 3, 3]);
        assert_eq!(plan, make_folds(10, 3, 3).unwrap());
        assert!(make_folds(10, 1, 3).is_err());
        assert!(make_folds(10, 11, 3).is_err());
    }

    #[test]
    fn holdout_sizes() {
        let ds = column_dataset((0..2000).map(|i| i as f64 / 2000.0).collect());
        let (tr, te) = holdout_split(&ds, 0.75, 1, false).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (1500, 500));

        let ds = column_dataset(vec![0.0, 1.0, 2.0, 3.0]);
        let (tr, te) = holdout_split(&ds, 0.5, 1, true).unwrap();
        assert_eq!(tr.column(0).collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert_eq!(te.column(0).collect::<Vec<_>>(), vec![2.0, 3.0]);
        assert!(holdout_split(&ds, 1.0, 1, true).is_err());
        assert!(holdout_split(&ds, 0.0, 1, true).is_err());
    }
}
