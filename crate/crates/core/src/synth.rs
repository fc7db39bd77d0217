//! Synthetic XOR data with a tunable signal-to-noise ratio, the
//! accuracy-versus-ρ experiment, and an OHLCV series whose next-day return
//! signs follow the same XOR rule.
//!
//! A sample's label agrees with the XOR oracle `Θ(F0) ≠ Θ(F1)` with
//! probability `ρ`, where `Θ(x) = 1` iff `x ≥ 1/2`. At `ρ = 1` the label is
//! the oracle itself; at `ρ = 1/2` it is a fair coin.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{holdout_split, Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::finance::{self, OhlcvBar};
use crate::forest::Forest;
use crate::math;
use crate::par;
use crate::seed::{self, stream};
use crate::tree::{FeatureSubset, InductionMode};
use crate::tuning::{cross_validate, ParamGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub rho: f64,
    /// Uniform features independent of the label.
    pub n_noise: usize,
    /// Features shifted by `±beta` toward the label, then clamped to `[0, 1]`.
    pub n_linear: usize,
    pub beta: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            rho: 0.75,
            n_noise: 6,
            n_linear: 0,
            beta: 0.05,
            seed: 0,
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.5..=1.0).contains(&rho) {
        return Err(Error::param("rho", format!("must lie in [0.5, 1], got {rho}")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        check_rho(self.rho)?;
        if self.n_samples == 0 {
            return Err(Error::param("n_samples", "must be at least 1"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::param(
                "beta",
                format!("must be finite and non-negative, got {}", self.beta),
            ));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        2 + self.n_noise + self.n_linear
    }

    /// `x0`, `x1`, then `noise_*`, then `linear_*`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = alloc::vec![String::from("x0"), String::from("x1")];
        names.extend((0..self.n_noise).map(|i| format!("noise_{i}")));
        names.extend((0..self.n_linear).map(|i| format!("linear_{i}")));
        names
    }
}

/// The label when the thresholded features are `high0`, `high1` and the
/// signal draw is `keep`: `Pos` iff "the features disagree" equals `keep`.
pub fn xor_label(high0: bool, high1: bool, keep: bool) -> Label {
    Label::from_bool((high0 != high1) == keep)
}

/// Accuracy of the oracle that answers the XOR of the thresholded features.
pub fn bayes_accuracy(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(rho)
}

pub fn generate(config: &SynthConfig) -> Result<LabeledDataset> {
    config.validate()?;
    let mut rng = seed::rng(config.seed);
    let k = config.n_features();
    let mut values = Vec::with_capacity(config.n_samples * k);
    let mut labels = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        let x0: f64 = rng.random();
        let x1: f64 = rng.random();
        let keep = rng.random_bool(config.rho);
        let label = xor_label(x0 >= 0.5, x1 >= 0.5, keep);
        values.push(x0);
        values.push(x1);
        for _ in 0..config.n_noise {
            values.push(rng.random());
        }
        let shift = if label.is_pos() { config.beta } else { -config.beta };
        for _ in 0..config.n_linear {
            values.push((rng.random::<f64>() + shift).clamp(0.0, 1.0));
        }
        labels.push(label);
    }
    LabeledDataset::from_row_major(config.feature_names(), values, labels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Classifier {
    /// Forest of lookahead trees.
    Lrf,
    /// Forest of greedy trees.
    Grf,
    /// A single greedy tree.
    Gdt,
}

impl Classifier {
    pub const ALL: [Classifier; 3] = [Classifier::Lrf, Classifier::Grf, Classifier::Gdt];

    pub fn mode(self) -> InductionMode {
        match self {
            Classifier::Lrf => InductionMode::Lookahead,
            Classifier::Grf | Classifier::Gdt => InductionMode::Greedy,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Classifier::Lrf => "LRF",
            Classifier::Grf => "GRF",
            Classifier::Gdt => "GDT",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierGrids {
    pub lrf: ParamGrid,
    pub grf: ParamGrid,
    pub gdt: ParamGrid,
}

impl ClassifierGrids {
    pub fn get(&self, classifier: Classifier) -> &ParamGrid {
        match classifier {
            Classifier::Lrf => &self.lrf,
            Classifier::Grf => &self.grf,
            Classifier::Gdt => &self.gdt,
        }
    }
}

impl Default for ClassifierGrids {
    fn default() -> Self {
        use alloc::vec;
        let forest = |max_depth: Vec<usize>| ParamGrid {
            max_depth,
            min_samples_leaf: vec![5, 20],
            feature_subset: vec![FeatureSubset::Sqrt, FeatureSubset::All],
            n_buckets: vec![32],
            n_trees: vec![100],
            bootstrap: true,
            theta: vec![0.0],
        };
        Self {
            lrf: forest(vec![2, 4]),
            grf: forest(vec![2, 4, 6, 8]),
            gdt: ParamGrid {
                feature_subset: vec![FeatureSubset::All],
                n_trees: vec![1],
                bootstrap: false,
                ..forest(vec![2, 4, 6, 8])
            },
        }
    }
}

pub const DEFAULT_RHO_VALUES: [f64; 11] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub rho_values: Vec<f64>,
    /// Everything but `rho` and `seed` is taken from here; `seed` is the
    /// master seed of the whole sweep.
    pub template: SynthConfig,
    pub classifiers: Vec<Classifier>,
    pub repeats: usize,
    pub grids: ClassifierGrids,
    pub n_folds: usize,
    pub train_fraction: f64,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            rho_values: DEFAULT_RHO_VALUES.to_vec(),
            template: SynthConfig::default(),
            classifiers: Classifier::ALL.to_vec(),
            repeats: 20,
            grids: ClassifierGrids::default(),
            n_folds: 5,
            train_fraction: 0.75,
        }
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.rho_values.is_empty() {
            return Err(Error::param("rho_values", "list is empty"));
        }
        for &rho in &self.rho_values {
            SynthConfig { rho, ..self.template.clone() }.validate()?;
        }
        if self.classifiers.is_empty() {
            return Err(Error::param("classifiers", "list is empty"));
        }
        if self.repeats == 0 {
            return Err(Error::param("repeats", "must be at least 1"));
        }
        if self.n_folds < 2 {
            return Err(Error::param("n_folds", "must be at least 2"));
        }
        for &c in &self.classifiers {
            self.grids.get(c).validate(c.mode())?;
        }
        Ok(())
    }

    /// The dataset of one `(rho, repeat)` cell. Its seed depends on the
    /// value of `rho`, not its position in the list, so a sub-sweep
    /// reproduces the matching cells of a larger one.
    pub fn dataset_config(&self, rho: f64, repeat: usize) -> SynthConfig {
        SynthConfig {
            rho,
            seed: self.cell_seed(stream::DATA, rho, repeat),
            ..self.template.clone()
        }
    }

    fn cell_seed(&self, tag: u64, rho: f64, repeat: usize) -> u64 {
        seed::derive_seed(self.template.seed, &[tag, rho.to_bits(), repeat as u64])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub rho: f64,
    pub classifier: Classifier,
    pub repeat: usize,
    pub accuracy: f64,
    pub n_test: usize,
    pub cv_mean: f64,
    pub selected: crate::forest::ForestParams,
    pub importance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub feature_names: Vec<String>,
    /// Ordered by rho (as listed), then repeat, then classifier (as listed).
    pub cells: Vec<SweepCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummaryRow {
    pub rho: f64,
    pub classifier: Classifier,
    pub n_repeats: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_importance: Vec<f64>,
}

impl SweepResult {
    /// Cells of one `(rho, classifier)` pair in repeat order.
    pub fn cells_for(&self, rho: f64, classifier: Classifier) -> Vec<&SweepCell> {
        let mut cells: Vec<&SweepCell> = self
            .cells
            .iter()
            .filter(|c| c.rho == rho && c.classifier == classifier)
            .collect();
        cells.sort_by_key(|c| c.repeat);
        cells
    }

    /// Mean and sample standard deviation across repeats per
    /// `(rho, classifier)`, in first-appearance order.
    pub fn summary(&self) -> Vec<SweepSummaryRow> {
        let mut keys: Vec<(f64, Classifier)> = Vec::new();
        for c in &self.cells {
            if !keys.iter().any(|&(r, k)| r == c.rho && k == c.classifier) {
                keys.push((c.rho, c.classifier));
            }
        }
        keys.into_iter()
            .map(|(rho, classifier)| {
                let cells = self.cells_for(rho, classifier);
                let acc: Vec<f64> = cells.iter().map(|c| c.accuracy).collect();
                let mean_importance = (0..self.feature_names.len())
                    .map(|f| cells.iter().map(|c| c.importance[f]).sum::<f64>() / cells.len() as f64)
                    .collect();
                SweepSummaryRow {
                    rho,
                    classifier,
                    n_repeats: cells.len(),
                    mean_accuracy: math::mean(&acc),
                    std_accuracy: math::sample_std(&acc),
                    mean_importance,
                }
            })
            .collect()
    }
}

/// Runs one cell: fresh data, holdout split, CV over the classifier's grid,
/// refit of the selected candidate on the whole training part, test accuracy.
pub fn run_cell(plan: &SweepPlan, rho: f64, repeat: usize, classifier: Classifier) -> Result<SweepCell> {
    let data = generate(&plan.dataset_config(rho, repeat))?;
    let (train, test) = holdout_split(
        &data,
        plan.train_fraction,
        plan.cell_seed(stream::SPLIT, rho, repeat),
        false,
    )?;
    let cv = cross_validate(
        &train,
        plan.grids.get(classifier),
        plan.n_folds,
        classifier.mode(),
        plan.cell_seed(stream::CV_FIT, rho, repeat),
    )?;
    let params = crate::forest::ForestParams {
        seed: plan.cell_seed(stream::MODEL, rho, repeat),
        ..*cv.selected_params()
    };
    let forest = Forest::fit(&train, &params)?;
    Ok(SweepCell {
        rho,
        classifier,
        repeat,
        accuracy: forest.accuracy(&test)?,
        n_test: test.n_rows(),
        cv_mean: cv.candidates[cv.selected].mean,
        selected: params,
        importance: forest.feature_importance().importance,
    })
}

pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let (n_rep, n_cls) = (plan.repeats, plan.classifiers.len());
    let cells = par::map_indexed(plan.rho_values.len() * n_rep * n_cls, |job| {
        let rho = plan.rho_values[job / (n_rep * n_cls)];
        let repeat = job / n_cls % n_rep;
        run_cell(plan, rho, repeat, plan.classifiers[job % n_cls])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        feature_names: plan.template.feature_names(),
        cells,
    })
}

/// A daily OHLCV series whose next-day return sign is the XOR label of two
/// of its own indicators: `Θ(rsi_20 ≥ 50)` and `Θ(vol_z_5 ≥ 0)`. With
/// probability `rho` the sign follows the rule, otherwise its opposite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XorMarketConfig {
    pub n_bars: usize,
    pub rho: f64,
    /// Standard deviation of daily close-to-close returns.
    pub daily_vol: f64,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for XorMarketConfig {
    fn default() -> Self {
        Self {
            n_bars: 2500,
            rho: 0.65,
            daily_vol: 0.01,
            start_date: NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date"),
            seed: 0,
        }
    }
}

fn next_weekday(date: NaiveDate) -> NaiveDate {
    let mut d = date + Days::new(1);
    while matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
        d = d + Days::new(1);
    }
    d
}

pub fn generate_xor_market(config: &XorMarketConfig) -> Result<Vec<OhlcvBar>> {
    check_rho(config.rho)?;
    if config.n_bars < finance::WARM_UP + 2 {
        return Err(Error::InsufficientHistory {
            needed: finance::WARM_UP + 2,
            available: config.n_bars,
        });
    }
    if !(config.daily_vol > 0.0 && config.daily_vol < 0.2) {
        return Err(Error::param(
            "daily_vol",
            format!("must lie in (0, 0.2), got {}", config.daily_vol),
        ));
    }
    let mut rng = seed::rng(config.seed);
    let normal = |rng: &mut seed::StreamRng| -> f64 { StandardNormal.sample(rng) };
    let n = config.n_bars;
    let volumes: Vec<f64> = (0..n)
        .map(|_| 1.0e6 * (1.0 + 0.25 * normal(&mut rng)).max(0.2))
        .collect();
    let mut closes = Vec::with_capacity(n);
    closes.push(100.0);
    for t in 0..n - 1 {
        let up = if t >= finance::WARM_UP {
            let rsi = finance::rsi_window(&closes[t - 20..=t]);
            let z = finance::zscore_window(&volumes[t - 4..=t]);
            xor_label(rsi >= 50.0, z >= 0.0, rng.random_bool(config.rho)).is_pos()
        } else {
            rng.random_bool(0.5)
        };
        let size = (config.daily_vol * normal(&mut rng).abs()).clamp(1e-5, 0.5);
        closes.push(closes[t] * if up { 1.0 + size } else { 1.0 - size });
    }
    let mut date = config.start_date;
    let mut bars = Vec::with_capacity(n);
    for t in 0..n {
        let close = closes[t];
        let open = if t == 0 {
            close
        } else {
            closes[t - 1] * (1.0 + 0.2 * config.daily_vol * normal(&mut rng))
        };
        let upper_wick = 0.3 * config.daily_vol * normal(&mut rng).abs();
        let lower_wick = 0.3 * config.daily_vol * normal(&mut rng).abs();
        let high = open.max(close) * (1.0 + upper_wick);
        let low = open.min(close) * (1.0 - lower_wick);
        bars.push(OhlcvBar {
            date,
            open,
            high,
            low,
            close,
            volume: volumes[t],
        });
        date = next_weekday(date);
    }
    Ok(bars)
}
