//! Hyperparameter selection by k-fold cross-validation over a grid.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::{make_folds, LabeledDataset};
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestParams};
use crate::math;
use crate::par;
use crate::seed::{self, stream};
use crate::tree::{FeatureSubset, InductionMode, TreeParams};

/// Candidate values per hyperparameter. Candidates are the Cartesian product,
/// enumerated with `max_depth` outermost and `n_trees` innermost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamGrid {
    pub max_depth: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub feature_subset: Vec<FeatureSubset>,
    pub n_buckets: Vec<usize>,
    pub n_trees: Vec<usize>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
    /// Trading thresholds; only strategies read them.
    #[serde(default = "default_theta")]
    pub theta: Vec<f64>,
}

fn default_bootstrap() -> bool {
    true
}

fn default_theta() -> Vec<f64> {
    alloc::vec![0.0]
}

impl ParamGrid {
    /// A grid with exactly one candidate.
    pub fn single(params: &ForestParams) -> Self {
        Self {
            max_depth: alloc::vec![params.tree.max_depth],
            min_samples_leaf: alloc::vec![params.tree.min_samples_leaf],
            feature_subset: alloc::vec![params.tree.feature_subset],
            n_buckets: alloc::vec![params.tree.n_buckets],
            n_trees: alloc::vec![params.n_trees],
            bootstrap: params.bootstrap,
            theta: default_theta(),
        }
    }

    pub fn validate(&self, mode: InductionMode) -> Result<()> {
        fn non_empty<T>(name: &'static str, v: &[T]) -> Result<()> {
            if v.is_empty() {
                return Err(Error::param(name, "candidate list is empty"));
            }
            Ok(())
        }
        non_empty("max_depth", &self.max_depth)?;
        non_empty("min_samples_leaf", &self.min_samples_leaf)?;
        non_empty("feature_subset", &self.feature_subset)?;
        non_empty("n_buckets", &self.n_buckets)?;
        non_empty("n_trees", &self.n_trees)?;
        non_empty("theta", &self.theta)?;
        if let Some(&t) = self.theta.iter().find(|&&t| !(0.0..0.5).contains(&t)) {
            return Err(Error::param("theta", format!("{t} outside [0, 0.5)")));
        }
        for c in self.candidates(mode) {
            c.validate()?;
        }
        Ok(())
    }

    pub fn n_candidates(&self) -> usize {
        self.max_depth.len()
            * self.min_samples_leaf.len()
            * self.feature_subset.len()
            * self.n_buckets.len()
            * self.n_trees.len()
    }

    /// Forest candidates for `mode`, all with seed 0.
    pub fn candidates(&self, mode: InductionMode) -> Vec<ForestParams> {
        let mut out = Vec::with_capacity(self.n_candidates());
        for &max_depth in &self.max_depth {
            for &min_samples_leaf in &self.min_samples_leaf {
                for &feature_subset in &self.feature_subset {
                    for &n_buckets in &self.n_buckets {
                        for &n_trees in &self.n_trees {
                            out.push(ForestParams {
                                n_trees,
                                tree: TreeParams {
                                    max_depth,
                                    min_samples_leaf,
                                    feature_subset,
                                    n_buckets,
                                    mode,
                                },
                                bootstrap: self.bootstrap,
                                seed: 0,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Simplicity order for tie-breaks: shallower, then larger leaves, then fewer
/// trees. `Less` means `a` is simpler.
pub fn simplicity_order(a: &ForestParams, b: &ForestParams) -> Ordering {
    a.tree
        .max_depth
        .cmp(&b.tree.max_depth)
        .then(b.tree.min_samples_leaf.cmp(&a.tree.min_samples_leaf))
        .then(a.n_trees.cmp(&b.n_trees))
}

/// True when `(score, params)` should replace the incumbent: strictly higher
/// score, or an equal score with strictly simpler params. Earlier candidates
/// win remaining ties.
pub(crate) fn beats(score: f64, params: &ForestParams, best_score: f64, best: &ForestParams) -> bool {
    score > best_score || (score == best_score && simplicity_order(params, best) == Ordering::Less)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub params: ForestParams,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub n_folds: usize,
    pub candidates: Vec<CandidateScore>,
    pub selected: usize,
}

impl CvResult {
    pub fn selected_params(&self) -> &ForestParams {
        &self.candidates[self.selected].params
    }
}

/// Scores every grid candidate by mean held-out accuracy over `n_folds`
/// shuffled folds and selects the best, ties going to the simpler model.
///
/// The fold plan and the forest seed of each fold derive from `seed`; every
/// candidate sees the same folds and the same per-fold seed.
pub fn cross_validate(
    dataset: &LabeledDataset,
    grid: &ParamGrid,
    n_folds: usize,
    mode: InductionMode,
    seed: u64,
) -> Result<CvResult> {
    grid.validate(mode)?;
    let folds = make_folds(
        dataset.n_rows(),
        n_folds,
        seed::derive_seed(seed, &[stream::FOLDS]),
    )?;
    let splits = (0..n_folds)
        .map(|k| {
            Ok((
                dataset.subset(&folds.train_indices(k))?,
                dataset.subset(&folds.test_indices(k))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let candidates = grid.candidates(mode);
    let scores = par::map_indexed(candidates.len() * n_folds, |job| {
        let (c, k) = (job / n_folds, job % n_folds);
        let params = ForestParams {
            seed: seed::derive_seed(seed, &[stream::CV_FIT, k as u64]),
            ..candidates[c]
        };
        let (train, test) = &splits[k];
        Forest::fit(train, &params)?.accuracy(test)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let candidates: Vec<CandidateScore> = candidates
        .into_iter()
        .zip(scores.chunks_exact(n_folds))
        .map(|(params, fold_scores)| CandidateScore {
            params,
            fold_scores: fold_scores.to_vec(),
            mean: math::mean(fold_scores),
            std: math::sample_std(fold_scores),
        })
        .collect();
    let mut selected = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let best = &candidates[selected];
        if beats(c.mean, &c.params, best.mean, &best.params) {
            selected = i;
        }
    }
    Ok(CvResult {
        n_folds,
        candidates,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label;
    use alloc::string::String;
    use alloc::vec;

    fn xor_data(n: usize) -> LabeledDataset {
        let mut rng = seed::rng(3);
        use rand::Rng;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let r: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            labels.push(Label::from_bool((r[0] >= 0.5) != (r[1] >= 0.5)));
            rows.push(r);
        }
        let names: Vec<String> = (0..3).map(|i| format!("f{i}")).collect();
        LabeledDataset::from_rows(names, &rows, labels).unwrap()
    }

    fn grid() -> ParamGrid {
        ParamGrid {
            max_depth: vec![2],
            min_samples_leaf: vec![1],
            feature_subset: vec![FeatureSubset::All],
            n_buckets: vec![16],
            n_trees: vec![5],
            bootstrap: true,
            theta: vec![0.0],
        }
    }

    #[test]
    fn single_candidate_reports_its_fold_mean() {
        let ds = xor_data(120);
        let cv = cross_validate(&ds, &grid(), 4, InductionMode::Lookahead, 1).unwrap();
        assert_eq!(cv.selected, 0);
        let c = &cv.candidates[0];
        assert_eq!(c.fold_scores.len(), 4);
        assert_eq!(c.mean, c.fold_scores.iter().sum::<f64>() / 4.0);
        assert_eq!(cv, cross_validate(&ds, &grid(), 4, InductionMode::Lookahead, 1).unwrap());
    }

    #[test]
    fn dominating_candidate_wins() {
        // A one-leaf-minimum of 200 rows turns every tree into a stump.
        let ds = xor_data(200);
        let g = ParamGrid {
            min_samples_leaf: vec![200, 1],
            ..grid()
        };
        let cv = cross_validate(&ds, &g, 5, InductionMode::Lookahead, 2).unwrap();
        let (stump, good) = (&cv.candidates[0], &cv.candidates[1]);
        assert!(good
            .fold_scores
            .iter()
            .zip(&stump.fold_scores)
            .all(|(g, s)| g > s));
        assert_eq!(cv.selected, 1);
    }

    #[test]
    fn ties_prefer_simpler_models() {
        let a = ForestParams::default();
        let deeper = ForestParams {
            tree: TreeParams {
                max_depth: 4,
                ..a.tree
            },
            ..a
        };
        assert!(beats(0.5, &a, 0.5, &deeper));
        assert!(!beats(0.5, &deeper, 0.5, &a));
        assert!(beats(0.6, &deeper, 0.5, &a));
        let bigger_leaf = ForestParams {
            tree: TreeParams {
                min_samples_leaf: 10,
                ..a.tree
            },
            ..a
        };
        assert!(beats(0.5, &bigger_leaf, 0.5, &a));
        let fewer = ForestParams { n_trees: 10, ..a };
        assert!(beats(0.5, &fewer, 0.5, &a));
    }

    #[test]
    fn grid_validation() {
        let mut g = grid();
        g.max_depth = vec![3];
        assert!(g.validate(InductionMode::Lookahead).is_err());
        assert!(g.validate(InductionMode::Greedy).is_ok());
        g.n_trees.clear();
        assert!(g.validate(InductionMode::Greedy).is_err());
        let mut g = grid();
        g.theta = vec![0.5];
        assert!(g.validate(InductionMode::Greedy).is_err());
        let ds = xor_data(10);
        assert!(cross_validate(&ds, &grid(), 1, InductionMode::Greedy, 0).is_err());
    }
}
