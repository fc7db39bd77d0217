//! Decision-tree induction: impurity scores, greedy single-node split search,
//! jointly optimized depth-2 lookahead blocks, recursive growth and
//! prediction.
//!
//! Candidate thresholds come from per-feature quantile buckets. Each training
//! row is coded once per feature by its bucket, so any candidate split is a
//! comparison of integer codes and both searches run on class-count
//! histograms instead of raw values.
//!
//! Routing rule everywhere: a sample goes right when its value is `>=` the
//! split threshold.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Sub};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{interpolated_quantiles, Label, LabeledDataset, QuantileThresholds};
use crate::error::{Error, Result};
use crate::math;

/// Positive and negative sample counts of a node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassCounts {
    pub n_pos: u64,
    pub n_neg: u64,
}

impl ClassCounts {
    pub const fn new(n_pos: u64, n_neg: u64) -> Self {
        Self { n_pos, n_neg }
    }

    pub fn of(label: Label) -> Self {
        match label {
            Label::Pos => Self::new(1, 0),
            Label::Neg => Self::new(0, 1),
        }
    }

    pub fn total(&self) -> u64 {
        self.n_pos + self.n_neg
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// True when at most one class is present.
    pub fn is_pure(&self) -> bool {
        self.n_pos == 0 || self.n_neg == 0
    }

    /// Fraction of positive samples; `None` for an empty node.
    pub fn p_pos(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.n_pos as f64 / self.total() as f64)
    }

    pub fn add_label(&mut self, label: Label) {
        match label {
            Label::Pos => self.n_pos += 1,
            Label::Neg => self.n_neg += 1,
        }
    }
}

impl Add for ClassCounts {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.n_pos + rhs.n_pos, self.n_neg + rhs.n_neg)
    }
}

impl AddAssign for ClassCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.n_pos += rhs.n_pos;
        self.n_neg += rhs.n_neg;
    }
}

impl Sub for ClassCounts {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.n_pos - rhs.n_pos, self.n_neg - rhs.n_neg)
    }
}

/// Gini impurity `2 P+ (1 - P+)` of a non-empty node.
pub fn gini(counts: ClassCounts) -> Result<f64> {
    let p = counts.p_pos().ok_or(Error::EmptyCounts)?;
    Ok(2.0 * p * (1.0 - p))
}

/// `n * G` of a node, zero when empty. Every impurity score in this module is
/// assembled from this one expression, so equal partitions always compare equal.
#[inline]
pub fn weighted_impurity(counts: ClassCounts) -> f64 {
    match counts.p_pos() {
        Some(p) => counts.total() as f64 * (2.0 * p * (1.0 - p)),
        None => 0.0,
    }
}

/// Sample-weighted mean Gini of two children, `(n1 G1 + n2 G2) / (n1 + n2)`.
pub fn weighted_gini(left: ClassCounts, right: ClassCounts) -> Result<f64> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::EmptyCounts);
    }
    Ok((weighted_impurity(left) + weighted_impurity(right)) / (left + right).total() as f64)
}

/// Unnormalized cumulative Gini `sum n_i G_i` of the four leaves of a depth-2
/// block, ordered `[L0, L1, L2, L3]` left to right.
pub fn cumulative_gini(leaves: &[ClassCounts; 4]) -> Result<f64> {
    if leaves.iter().any(ClassCounts::is_empty) {
        return Err(Error::EmptyCounts);
    }
    let [l0, l1, l2, l3] = leaves.map(weighted_impurity);
    Ok((l0 + l1) + (l2 + l3))
}

/// A split rule: rows with `value[feature] >= threshold` go right.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub feature: usize,
    pub threshold: f64,
}

impl SplitSpec {
    #[inline]
    pub fn goes_right(&self, sample: &[f64]) -> bool {
        sample[self.feature] >= self.threshold
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        split: SplitSpec,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        counts: ClassCounts,
    },
}

impl TreeNode {
    pub fn leaf(counts: ClassCounts) -> Self {
        TreeNode::Leaf { counts }
    }

    pub fn split(split: SplitSpec, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Split {
            split,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Leaf reached by `sample`. No bounds checks beyond slice indexing.
    pub fn leaf_for(&self, sample: &[f64]) -> ClassCounts {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { counts } => return *counts,
                TreeNode::Split { split, left, right } => {
                    node = if split.goes_right(sample) { right } else { left };
                }
            }
        }
    }

    /// Leaf `P+` for `sample`.
    pub fn predict_proba(&self, sample: &[f64]) -> f64 {
        self.leaf_for(sample).p_pos().unwrap_or(0.5)
    }

    /// Calls `visit(node, depth)` for every node, parents before children,
    /// left before right.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a TreeNode, usize)) {
        fn go<'a>(node: &'a TreeNode, depth: usize, visit: &mut impl FnMut(&'a TreeNode, usize)) {
            visit(node, depth);
            if let TreeNode::Split { left, right, .. } = node {
                go(left, depth + 1, visit);
                go(right, depth + 1, visit);
            }
        }
        go(self, 0, visit);
    }

    pub fn n_splits(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |node, _| n += matches!(node, TreeNode::Split { .. }) as usize);
        n
    }

    pub fn n_leaves(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |node, _| n += matches!(node, TreeNode::Leaf { .. }) as usize);
        n
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        let mut d = 0;
        self.walk(&mut |_, depth| d = d.max(depth));
        d
    }

    /// Leaf counts, left to right.
    pub fn leaves(&self) -> Vec<ClassCounts> {
        let mut out = Vec::new();
        self.walk(&mut |node, _| {
            if let TreeNode::Leaf { counts } = node {
                out.push(*counts);
            }
        });
        out
    }
}

/// How many features a node (or lookahead block) gets to see.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSubset {
    /// `ceil(sqrt(k))`
    Sqrt,
    /// `max(1, ceil(log2(k)))`
    Log2,
    All,
}

impl FeatureSubset {
    pub fn size(self, k: usize) -> usize {
        let size = match self {
            FeatureSubset::Sqrt => math::ceil(math::sqrt(k as f64)) as usize,
            FeatureSubset::Log2 => (math::ceil(math::log2(k as f64)) as usize).max(1),
            FeatureSubset::All => k,
        };
        size.clamp(1, k.max(1))
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSubset::Sqrt => "sqrt",
            FeatureSubset::Log2 => "log2",
            FeatureSubset::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InductionMode {
    Greedy,
    Lookahead,
}

impl InductionMode {
    pub fn name(self) -> &'static str {
        match self {
            InductionMode::Greedy => "greedy",
            InductionMode::Lookahead => "lookahead",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub feature_subset: FeatureSubset,
    /// Quantile bucket count `B`; a feature offers at most `B - 1` thresholds.
    pub n_buckets: usize,
    pub mode: InductionMode,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 2,
            min_samples_leaf: 1,
            feature_subset: FeatureSubset::All,
            n_buckets: 32,
            mode: InductionMode::Lookahead,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::param("max_depth", "must be at least 1"));
        }
        if self.mode == InductionMode::Lookahead && self.max_depth % 2 != 0 {
            return Err(Error::param(
                "max_depth",
                format!("lookahead trees grow in depth-2 steps, got {}", self.max_depth),
            ));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::param("min_samples_leaf", "must be at least 1"));
        }
        if self.n_buckets < 2 {
            return Err(Error::param("n_buckets", "must be at least 2"));
        }
        Ok(())
    }
}

/// Bucket-coded view of a dataset: per-feature candidate thresholds and, for
/// every dataset row, the bucket each value falls in.
#[derive(Clone, Debug)]
pub struct SplitCandidates<'a> {
    dataset: &'a LabeledDataset,
    thresholds: Vec<QuantileThresholds>,
    /// Feature-major bucket codes: `codes[f * n_rows + row]`.
    codes: Vec<u32>,
}

impl<'a> SplitCandidates<'a> {
    /// Uses the given thresholds; features without an entry get none.
    pub fn new(dataset: &'a LabeledDataset, thresholds: Vec<QuantileThresholds>) -> Result<Self> {
        let k = dataset.n_features();
        let mut by_feature: Vec<QuantileThresholds> = (0..k)
            .map(|f| QuantileThresholds {
                feature_index: f,
                thresholds: Vec::new(),
            })
            .collect();
        for q in thresholds {
            if q.feature_index >= k {
                return Err(Error::param(
                    "thresholds",
                    format!("feature index {} out of range", q.feature_index),
                ));
            }
            if q.thresholds.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::param("thresholds", "must be strictly increasing"));
            }
            let f = q.feature_index;
            by_feature[f] = q;
        }
        Ok(Self::with_thresholds(dataset, by_feature))
    }

    /// Thresholds from the `B`-bucket quantiles of the multiset of values at
    /// `rows` (repeats count). `B` is capped at the number of rows.
    pub fn from_rows(dataset: &'a LabeledDataset, rows: &[usize], n_buckets: usize) -> Self {
        let b = n_buckets.min(rows.len());
        let mut sorted = Vec::with_capacity(rows.len());
        let thresholds = (0..dataset.n_features())
            .map(|f| {
                sorted.clear();
                sorted.extend(rows.iter().map(|&r| dataset.value(r, f)));
                sorted.sort_by(f64::total_cmp);
                let thresholds = if b >= 2 {
                    interpolated_quantiles(&sorted, b)
                } else {
                    Vec::new()
                };
                QuantileThresholds {
                    feature_index: f,
                    thresholds,
                }
            })
            .collect();
        Self::with_thresholds(dataset, thresholds)
    }

    fn with_thresholds(dataset: &'a LabeledDataset, thresholds: Vec<QuantileThresholds>) -> Self {
        let n = dataset.n_rows();
        let mut codes = vec![0u32; n * dataset.n_features()];
        for (f, q) in thresholds.iter().enumerate() {
            if q.is_empty() {
                continue;
            }
            for r in 0..n {
                codes[f * n + r] = q.bucket_of(dataset.value(r, f)) as u32;
            }
        }
        Self {
            dataset,
            thresholds,
            codes,
        }
    }

    pub fn dataset(&self) -> &'a LabeledDataset {
        self.dataset
    }

    pub fn thresholds(&self, feature: usize) -> &QuantileThresholds {
        &self.thresholds[feature]
    }

    #[inline]
    fn code(&self, feature: usize, row: usize) -> usize {
        self.codes[feature * self.dataset.n_rows() + row] as usize
    }

    /// Buckets of `feature`: one more than its threshold count.
    #[inline]
    fn n_bins(&self, feature: usize) -> usize {
        self.thresholds[feature].len() + 1
    }

    fn spec(&self, cut: Cut) -> SplitSpec {
        SplitSpec {
            feature: cut.feature,
            threshold: self.thresholds[cut.feature].thresholds[cut.bin - 1],
        }
    }

    fn counts(&self, rows: &[usize]) -> ClassCounts {
        let mut c = ClassCounts::default();
        for &r in rows {
            c.add_label(self.dataset.label(r));
        }
        c
    }

    fn partition(&self, rows: &[usize], cut: Cut) -> (Vec<usize>, Vec<usize>) {
        rows.iter()
            .partition(|&&r| self.code(cut.feature, r) < cut.bin)
    }
}

/// Split on threshold number `bin` (1-based) of `feature`: left iff code < bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Cut {
    feature: usize,
    bin: usize,
}

/// Column layout of a set of per-feature bucket histograms laid end to end.
struct HistLayout {
    features: Vec<usize>,
    offsets: Vec<usize>,
    width: usize,
}

impl HistLayout {
    fn new(candidates: &SplitCandidates<'_>, features: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(features.len());
        let mut width = 0;
        for &f in features {
            offsets.push(width);
            width += candidates.n_bins(f);
        }
        Self {
            features: features.to_vec(),
            offsets,
            width,
        }
    }
}

struct ChildChoice {
    cut: Cut,
    cost: f64,
    left: ClassCounts,
    right: ClassCounts,
}

/// Lowest-cost admissible cut over the histograms in `hist`, scanning features
/// and thresholds in ascending order and keeping the first strict minimum.
fn best_cut(
    layout: &HistLayout,
    hist: &[ClassCounts],
    total: ClassCounts,
    min_leaf: u64,
) -> Option<ChildChoice> {
    let mut best: Option<ChildChoice> = None;
    for (gi, &g) in layout.features.iter().enumerate() {
        let start = layout.offsets[gi];
        let end = layout.offsets.get(gi + 1).copied().unwrap_or(layout.width);
        let mut left = ClassCounts::default();
        for (bin, &c) in hist[start..end - 1].iter().enumerate() {
            left += c;
            let right = total - left;
            if left.total() < min_leaf || right.total() < min_leaf {
                continue;
            }
            let cost = weighted_impurity(left) + weighted_impurity(right);
            if best.as_ref().is_none_or(|b| cost < b.cost) {
                best = Some(ChildChoice {
                    cut: Cut {
                        feature: g,
                        bin: bin + 1,
                    },
                    cost,
                    left,
                    right,
                });
            }
        }
    }
    best
}

fn normalized_features(candidates: &SplitCandidates<'_>, features: &[usize]) -> Vec<usize> {
    let mut fs: Vec<usize> = features
        .iter()
        .copied()
        .filter(|&f| f < candidates.dataset.n_features())
        .collect();
    fs.sort_unstable();
    fs.dedup();
    fs
}

/// Result of a greedy single-node search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreedySplit {
    pub split: SplitSpec,
    pub weighted_gini: f64,
    pub left: ClassCounts,
    pub right: ClassCounts,
}

/// Best single split of `rows` by sample-weighted child Gini.
///
/// Only cuts leaving at least `min_samples_leaf` rows on each side are
/// admissible. Ties go to the lowest `(feature, threshold)`. Returns `None`
/// for pure nodes, nodes with fewer than `2 * min_samples_leaf` rows, and
/// when nothing is admissible. A split is returned even when it does not
/// lower the impurity.
pub fn greedy_best_split(
    candidates: &SplitCandidates<'_>,
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<GreedySplit> {
    let features = normalized_features(candidates, features);
    let choice = greedy_cut(candidates, rows, &features, min_samples_leaf)?;
    Some(GreedySplit {
        split: candidates.spec(choice.cut),
        weighted_gini: choice.cost / rows.len() as f64,
        left: choice.left,
        right: choice.right,
    })
}

fn greedy_cut(
    candidates: &SplitCandidates<'_>,
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<ChildChoice> {
    let total = candidates.counts(rows);
    let min_leaf = min_samples_leaf as u64;
    if total.is_pure() || total.total() < 2 * min_leaf {
        return None;
    }
    let layout = HistLayout::new(candidates, features);
    let mut hist = vec![ClassCounts::default(); layout.width];
    for &r in rows {
        let label = candidates.dataset.label(r);
        for (gi, &g) in layout.features.iter().enumerate() {
            hist[layout.offsets[gi] + candidates.code(g, r)].add_label(label);
        }
    }
    best_cut(&layout, &hist, total, min_leaf)
}

/// A jointly optimized depth-2 block: a root split and an optional split on
/// each side. A side carries no split when it is pure or has no admissible cut.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LookaheadBlock {
    pub root: SplitSpec,
    pub left: Option<SplitSpec>,
    pub right: Option<SplitSpec>,
    /// Cumulative Gini `sum n_i G_i` over the block's leaves; a side without a
    /// split contributes its own `n G`.
    pub cumulative_gini: f64,
}

struct BlockChoice {
    root: Cut,
    left: Option<Cut>,
    right: Option<Cut>,
    cost: f64,
}

/// Best depth-2 block of `rows` by cumulative leaf Gini.
///
/// Given the root cut, the left side's contribution depends only on the left
/// child's split and the right side's only on the right child's, so each child
/// is optimized on its own and the best root is kept. This is the exact joint
/// optimum over all `(root, left, right)` triples. Ties resolve
/// lexicographically on `(root feature, root threshold, left feature, left
/// threshold, right feature, right threshold)`.
///
/// The three nodes share the candidate `features`. Returns `None` for pure
/// nodes, nodes with fewer than `2 * min_samples_leaf` rows, and when no root
/// cut is admissible.
pub fn lookahead_best_block(
    candidates: &SplitCandidates<'_>,
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<LookaheadBlock> {
    let features = normalized_features(candidates, features);
    let choice = lookahead_choice(candidates, rows, &features, min_samples_leaf)?;
    Some(LookaheadBlock {
        root: candidates.spec(choice.root),
        left: choice.left.map(|c| candidates.spec(c)),
        right: choice.right.map(|c| candidates.spec(c)),
        cumulative_gini: choice.cost,
    })
}

fn lookahead_choice(
    candidates: &SplitCandidates<'_>,
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<BlockChoice> {
    let total = candidates.counts(rows);
    let min_leaf = min_samples_leaf as u64;
    if total.is_pure() || total.total() < 2 * min_leaf {
        return None;
    }
    let layout = HistLayout::new(candidates, features);
    let width = layout.width;

    // Histogram of every candidate feature over all rows; the right side's
    // histogram is this minus the left side's.
    let mut whole = vec![ClassCounts::default(); width];
    for &r in rows {
        let label = candidates.dataset.label(r);
        for (gi, &g) in layout.features.iter().enumerate() {
            whole[layout.offsets[gi] + candidates.code(g, r)].add_label(label);
        }
    }

    let side_cost = |hist: &[ClassCounts], side: ClassCounts| -> (Option<Cut>, f64) {
        if side.is_pure() || side.total() < 2 * min_leaf {
            return (None, weighted_impurity(side));
        }
        match best_cut(&layout, hist, side, min_leaf) {
            Some(c) => (Some(c.cut), c.cost),
            None => (None, weighted_impurity(side)),
        }
    };

    let mut best: Option<BlockChoice> = None;
    let mut joint: Vec<ClassCounts> = Vec::new();
    let mut left_hist = vec![ClassCounts::default(); width];
    let mut right_hist = vec![ClassCounts::default(); width];

    for &f in &layout.features {
        let bins = candidates.n_bins(f);
        if bins < 2 {
            continue;
        }
        // joint[b * width + col]: class counts of rows whose root-feature
        // bucket is b, by candidate-feature bucket column.
        joint.clear();
        joint.resize(bins * width, ClassCounts::default());
        let mut root_hist = vec![ClassCounts::default(); bins];
        for &r in rows {
            let label = candidates.dataset.label(r);
            let b = candidates.code(f, r);
            root_hist[b].add_label(label);
            let base = b * width;
            for (gi, &g) in layout.features.iter().enumerate() {
                joint[base + layout.offsets[gi] + candidates.code(g, r)].add_label(label);
            }
        }

        left_hist.fill(ClassCounts::default());
        let mut left_total = ClassCounts::default();
        for bin in 1..bins {
            let moved = root_hist[bin - 1];
            left_total += moved;
            for (acc, &c) in left_hist
                .iter_mut()
                .zip(&joint[(bin - 1) * width..bin * width])
            {
                *acc += c;
            }
            // An empty bucket leaves the partition unchanged, and the earlier
            // threshold already won any tie.
            if bin > 1 && moved.is_empty() {
                continue;
            }
            let right_total = total - left_total;
            if left_total.total() < min_leaf || right_total.total() < min_leaf {
                continue;
            }
            for ((r, &w), &l) in right_hist.iter_mut().zip(&whole).zip(&left_hist) {
                *r = w - l;
            }
            let (left_cut, left_cost) = side_cost(&left_hist, left_total);
            let (right_cut, right_cost) = side_cost(&right_hist, right_total);
            let cost = left_cost + right_cost;
            if best.as_ref().is_none_or(|b| cost < b.cost) {
                best = Some(BlockChoice {
                    root: Cut { feature: f, bin },
                    left: left_cut,
                    right: right_cut,
                    cost,
                });
            }
        }
    }
    best
}

fn sample_features<R: Rng + ?Sized>(rng: &mut R, k: usize, subset: usize) -> Vec<usize> {
    if subset >= k {
        return (0..k).collect();
    }
    let mut fs = index::sample(rng, k, subset).into_vec();
    fs.sort_unstable();
    fs
}

/// Grows a tree on `rows` of `dataset` (repeats allowed, as in a bootstrap
/// sample).
///
/// Candidate thresholds are the `B`-bucket quantiles of the rows' values.
/// Greedy mode draws a fresh feature subset for every node; lookahead mode
/// draws one per depth-2 block and shares it across the block's three nodes.
/// Growth stops at `max_depth`, at pure nodes, and when a node cannot give
/// each child `min_samples_leaf` rows.
pub fn grow<R: Rng + ?Sized>(
    dataset: &LabeledDataset,
    rows: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> Result<TreeNode> {
    params.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= dataset.n_rows()) {
        return Err(Error::param("rows", format!("row {bad} out of range")));
    }
    let candidates = SplitCandidates::from_rows(dataset, rows, params.n_buckets);
    let mut grower = Grower {
        candidates: &candidates,
        params,
        subset: params.feature_subset.size(dataset.n_features()),
        rng,
    };
    Ok(match params.mode {
        InductionMode::Greedy => grower.greedy(rows, 0),
        InductionMode::Lookahead => grower.lookahead(rows, 0),
    })
}

struct Grower<'c, 'd, 'r, R: Rng + ?Sized> {
    candidates: &'c SplitCandidates<'d>,
    params: &'c TreeParams,
    subset: usize,
    rng: &'r mut R,
}

impl<R: Rng + ?Sized> Grower<'_, '_, '_, R> {
    fn can_split(&self, counts: ClassCounts) -> bool {
        !counts.is_pure() && counts.total() >= 2 * self.params.min_samples_leaf as u64
    }

    fn features(&mut self) -> Vec<usize> {
        sample_features(self.rng, self.candidates.dataset.n_features(), self.subset)
    }

    fn greedy(&mut self, rows: &[usize], depth: usize) -> TreeNode {
        let counts = self.candidates.counts(rows);
        if depth >= self.params.max_depth || !self.can_split(counts) {
            return TreeNode::leaf(counts);
        }
        let features = self.features();
        let Some(choice) = greedy_cut(
            self.candidates,
            rows,
            &features,
            self.params.min_samples_leaf,
        ) else {
            return TreeNode::leaf(counts);
        };
        let (l, r) = self.candidates.partition(rows, choice.cut);
        let left = self.greedy(&l, depth + 1);
        let right = self.greedy(&r, depth + 1);
        TreeNode::split(self.candidates.spec(choice.cut), left, right)
    }

    fn lookahead(&mut self, rows: &[usize], depth: usize) -> TreeNode {
        let counts = self.candidates.counts(rows);
        if depth + 2 > self.params.max_depth || !self.can_split(counts) {
            return TreeNode::leaf(counts);
        }
        let features = self.features();
        let Some(block) = lookahead_choice(
            self.candidates,
            rows,
            &features,
            self.params.min_samples_leaf,
        ) else {
            return TreeNode::leaf(counts);
        };
        let (l, r) = self.candidates.partition(rows, block.root);
        let left = self.block_side(&l, block.left, depth);
        let right = self.block_side(&r, block.right, depth);
        TreeNode::split(self.candidates.spec(block.root), left, right)
    }

    fn block_side(&mut self, rows: &[usize], cut: Option<Cut>, depth: usize) -> TreeNode {
        match cut {
            None => TreeNode::leaf(self.candidates.counts(rows)),
            Some(cut) => {
                let (l, r) = self.candidates.partition(rows, cut);
                let left = self.lookahead(&l, depth + 2);
                let right = self.lookahead(&r, depth + 2);
                TreeNode::split(self.candidates.spec(cut), left, right)
            }
        }
    }
}

/// A standalone tree that remembers its input width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub root: TreeNode,
}

impl DecisionTree {
    /// Grows a tree on every row of `dataset`.
    pub fn fit<R: Rng + ?Sized>(
        dataset: &LabeledDataset,
        params: &TreeParams,
        rng: &mut R,
    ) -> Result<Self> {
        let rows: Vec<usize> = (0..dataset.n_rows()).collect();
        Ok(Self {
            n_features: dataset.n_features(),
            root: grow(dataset, &rows, params, rng)?,
        })
    }

    pub fn predict_proba(&self, sample: &[f64]) -> Result<f64> {
        if sample.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: sample.len(),
            });
        }
        Ok(self.root.predict_proba(sample))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use alloc::string::String;

    fn dataset(rows: &[Vec<f64>], labels: &[u8]) -> LabeledDataset {
        let k = rows[0].len();
        let names: Vec<String> = (0..k).map(|i| format!("f{i}")).collect();
        let labels = labels.iter().map(|&l| Label::from_bool(l == 1)).collect();
        LabeledDataset::from_rows(names, rows, labels).unwrap()
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(ClassCounts::new(15, 15)).unwrap(), 0.5);
        assert_eq!(gini(ClassCounts::new(30, 0)).unwrap(), 0.0);
        // p = 1/3: 2 * 1/3 * 2/3 = 4/9
        assert!((gini(ClassCounts::new(10, 20)).unwrap() - 4.0 / 9.0).abs() < 1e-12);
        assert_eq!(gini(ClassCounts::default()), Err(Error::EmptyCounts));
    }

    #[test]
    fn weighted_and_cumulative_gini() {
        // (10 * 0 + 20 * 0.5) / 30
        let w = weighted_gini(ClassCounts::new(10, 0), ClassCounts::new(10, 10)).unwrap();
        assert!((w - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            weighted_gini(ClassCounts::new(3, 0), ClassCounts::new(0, 4)).unwrap(),
            0.0
        );
        let c = ClassCounts::new(4, 7);
        assert!((weighted_gini(c, c).unwrap() - gini(c).unwrap()).abs() < 1e-15);
        assert!(weighted_gini(c, ClassCounts::default()).is_err());

        // 25 samples cannot split evenly: 4 * 25 * 2 * (12/25) * (13/25) = 49.92.
        let near = [ClassCounts::new(12, 13); 4];
        assert!((cumulative_gini(&near).unwrap() - 49.92).abs() < 1e-12);
        let balanced = [ClassCounts::new(25, 25); 4];
        assert!((cumulative_gini(&balanced).unwrap() - 100.0).abs() < 1e-12);
        let pure = [
            ClassCounts::new(5, 0),
            ClassCounts::new(0, 5),
            ClassCounts::new(1, 0),
            ClassCounts::new(0, 9),
        ];
        assert_eq!(cumulative_gini(&pure).unwrap(), 0.0);
        let singles = [
            ClassCounts::new(1, 0),
            ClassCounts::new(0, 1),
            ClassCounts::new(0, 1),
            ClassCounts::new(1, 0),
        ];
        assert_eq!(cumulative_gini(&singles).unwrap(), 0.0);
        let mut with_empty = singles;
        with_empty[2] = ClassCounts::default();
        assert!(cumulative_gini(&with_empty).is_err());
    }

    #[test]
    fn greedy_separates_one_dimensional_data() {
        let ds = dataset(
            &[vec![0.1], vec![0.2], vec![0.8], vec![0.9]],
            &[0, 0, 1, 1],
        );
        let cands = SplitCandidates::from_rows(&ds, &[0, 1, 2, 3], 4);
        let s = greedy_best_split(&cands, &[0, 1, 2, 3], &[0], 1).unwrap();
        assert_eq!(s.weighted_gini, 0.0);
        assert!(s.split.threshold > 0.2 && s.split.threshold <= 0.8);
        assert_eq!(s.left, ClassCounts::new(0, 2));
    }

    #[test]
    fn greedy_stops_on_pure_or_small_nodes() {
        let ds = dataset(&[vec![0.1], vec![0.2], vec![0.8]], &[1, 1, 1]);
        let cands = SplitCandidates::from_rows(&ds, &[0, 1, 2], 3);
        assert!(greedy_best_split(&cands, &[0, 1, 2], &[0], 1).is_none());
        let ds = dataset(&[vec![0.1], vec![0.2], vec![0.8]], &[1, 0, 1]);
        let cands = SplitCandidates::from_rows(&ds, &[0, 1, 2], 3);
        assert!(greedy_best_split(&cands, &[0, 1, 2], &[0], 2).is_none());
        assert!(lookahead_best_block(&cands, &[0, 1, 2], &[0], 2).is_none());
    }

    #[test]
    fn greedy_ties_pick_lowest_threshold() {
        // Labels alternate so every cut of a balanced 8-row node is equally bad
        // at the same sizes; the first admissible threshold must win.
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let ds = dataset(&rows, &[0, 1, 1, 0, 0, 1, 1, 0]);
        let all: Vec<usize> = (0..8).collect();
        let cands = SplitCandidates::from_rows(&ds, &all, 8);
        let s = greedy_best_split(&cands, &all, &[0], 4).unwrap();
        assert_eq!(s.split.threshold, cands.thresholds(0).thresholds[3]);
    }

    #[test]
    fn prediction_routes_ties_right() {
        let tree = TreeNode::split(
            SplitSpec {
                feature: 0,
                threshold: 0.5,
            },
            TreeNode::leaf(ClassCounts::new(0, 4)),
            TreeNode::leaf(ClassCounts::new(3, 1)),
        );
        assert_eq!(tree.predict_proba(&[0.5]), 0.75);
        assert_eq!(tree.predict_proba(&[0.4999]), 0.0);
        let stump = DecisionTree {
            n_features: 2,
            root: TreeNode::leaf(ClassCounts::new(3, 1)),
        };
        assert_eq!(stump.predict_proba(&[9.0, -1.0]).unwrap(), 0.75);
        assert!(stump.predict_proba(&[1.0]).is_err());
    }

    #[test]
    fn grow_stops_on_purity_and_leaf_size() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * 7 % 10) as f64]).collect();
        let mut rng = seed::rng(1);
        let same = dataset(&rows, &[1; 10]);
        let t = DecisionTree::fit(&same, &TreeParams::default(), &mut rng).unwrap();
        assert_eq!(t.root.n_splits(), 0);

        let mixed = dataset(&rows, &[1, 0, 1, 1, 0, 0, 1, 0, 1, 0]);
        let params = TreeParams {
            min_samples_leaf: 10,
            ..TreeParams::default()
        };
        let t = DecisionTree::fit(&mixed, &params, &mut rng).unwrap();
        assert_eq!(t.root.n_splits(), 0);
        assert!(grow(&mixed, &[], &TreeParams::default(), &mut rng).is_err());
    }

    #[test]
    fn odd_lookahead_depth_rejected() {
        let p = TreeParams {
            max_depth: 3,
            ..TreeParams::default()
        };
        assert!(p.validate().is_err());
        let g = TreeParams {
            mode: InductionMode::Greedy,
            ..p
        };
        assert!(g.validate().is_ok());
    }

    #[test]
    fn subset_sizes() {
        assert_eq!(FeatureSubset::Sqrt.size(8), 3);
        assert_eq!(FeatureSubset::Log2.size(8), 3);
        assert_eq!(FeatureSubset::All.size(8), 8);
        assert_eq!(FeatureSubset::Log2.size(1), 1);
        assert_eq!(FeatureSubset::Sqrt.size(2), 2);
    }

    #[test]
    fn greedy_depth_two_on_separable_data() {
        // f0 at 0.5 is the best root (left 3/15 positive, right 12/15); each
        // half still needs its own f1 cut. f2 is irrelevant.
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..6 {
            for j in 0..5 {
                let (x, y) = (0.05 + i as f64 * 0.18, 0.07 + j as f64 * 0.21);
                rows.push(vec![x, y, ((i * 5 + j) % 3) as f64]);
                labels.push(if x < 0.5 { y >= 0.8 } else { y >= 0.2 } as u8);
            }
        }
        let ds = dataset(&rows, &labels);
        let params = TreeParams {
            mode: InductionMode::Greedy,
            n_buckets: 30,
            ..TreeParams::default()
        };
        let t = DecisionTree::fit(&ds, &params, &mut seed::rng(0)).unwrap();
        assert_eq!(t.root.depth(), 2);
        assert_eq!(t.root.n_splits(), 3);
        assert_eq!(t.root.n_leaves(), 4);
    }
}
