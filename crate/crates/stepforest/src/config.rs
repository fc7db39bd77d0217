//! Run configuration loaded from TOML.
//!
//! Every section and key is optional and falls back to the defaults shipped
//! in `configs/default.toml`. Unknown keys are rejected, and value checks run
//! while the file is parsed, so a bad value is reported with its line and
//! column.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use stepforest_core::backtest::WindowPlan;
use stepforest_core::synth::{Classifier, ClassifierGrids, SweepPlan, SynthConfig, XorMarketConfig};
use stepforest_core::tuning::ParamGrid;
use stepforest_core::{FeatureSubset, InductionMode};

use crate::error::{IoError, Result};
use crate::io::LabelTokens;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed of every random stream.
    pub seed: u64,
    pub data: DataSection,
    pub synth: SynthSection,
    pub train: TrainSection,
    pub backtest: BacktestSection,
    pub heatmap: HeatmapSection,
    pub market: MarketSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| IoError::Config {
            path: origin.into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
            path: path.into(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    pub fn sweep_plan(&self) -> SweepPlan {
        let s = &self.synth;
        SweepPlan {
            rho_values: s.rho_values.clone(),
            template: SynthConfig {
                n_samples: s.n_samples,
                rho: s.rho_values[0],
                n_noise: s.n_noise,
                n_linear: s.n_linear,
                beta: s.beta,
                seed: self.seed,
            },
            classifiers: s.classifiers.clone(),
            repeats: s.repeats,
            grids: s.grids.clone().into(),
            n_folds: s.n_folds,
            train_fraction: s.train_fraction,
        }
    }

    /// A single synthetic dataset at `rho` with the sweep's feature layout.
    pub fn synth_config(&self, rho: f64) -> SynthConfig {
        SynthConfig {
            rho,
            ..self.sweep_plan().template
        }
    }

    pub fn market_config(&self) -> XorMarketConfig {
        XorMarketConfig {
            n_bars: self.market.n_bars,
            rho: self.market.rho,
            daily_vol: self.market.daily_vol,
            seed: self.seed,
            ..XorMarketConfig::default()
        }
    }
}

fn invalid<'de, D: Deserializer<'de>>(msg: String) -> D::Error {
    serde::de::Error::custom(msg)
}

fn at_least_one<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
    let v = usize::deserialize(d)?;
    if v == 0 {
        return Err(invalid::<D>("must be at least 1".into()));
    }
    Ok(v)
}

fn at_least_two<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
    let v = usize::deserialize(d)?;
    if v < 2 {
        return Err(invalid::<D>(format!("must be at least 2, got {v}")));
    }
    Ok(v)
}

fn rho_value<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if !(0.5..=1.0).contains(&v) {
        return Err(invalid::<D>(format!("rho must lie in [0.5, 1], got {v}")));
    }
    Ok(v)
}

fn rho_list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    let v = Vec::<f64>::deserialize(d)?;
    if v.is_empty() {
        return Err(invalid::<D>("rho list is empty".into()));
    }
    if let Some(bad) = v.iter().find(|r| !(0.5..=1.0).contains(*r)) {
        return Err(invalid::<D>(format!("rho must lie in [0.5, 1], got {bad}")));
    }
    Ok(v)
}

fn open_unit<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if !(v > 0.0 && v < 1.0) {
        return Err(invalid::<D>(format!("must lie in (0, 1), got {v}")));
    }
    Ok(v)
}

fn non_negative<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(invalid::<D>(format!("must be finite and non-negative, got {v}")));
    }
    Ok(v)
}

fn classifier_list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Classifier>, D::Error> {
    let v = Vec::<Classifier>::deserialize(d)?;
    if v.is_empty() {
        return Err(invalid::<D>("classifier list is empty".into()));
    }
    Ok(v)
}

fn grid_for<'de, D: Deserializer<'de>>(d: D, mode: InductionMode) -> Result<ParamGrid, D::Error> {
    let g = ParamGrid::deserialize(d)?;
    g.validate(mode).map_err(|e| invalid::<D>(e.to_string()))?;
    Ok(g)
}

fn lookahead_grid<'de, D: Deserializer<'de>>(d: D) -> Result<ParamGrid, D::Error> {
    grid_for(d, InductionMode::Lookahead)
}

fn greedy_grid<'de, D: Deserializer<'de>>(d: D) -> Result<ParamGrid, D::Error> {
    grid_for(d, InductionMode::Greedy)
}

fn window_plan<'de, D: Deserializer<'de>>(d: D) -> Result<WindowPlan, D::Error> {
    let w = WindowPlan::deserialize(d)?;
    w.validate().map_err(|e| invalid::<D>(e.to_string()))?;
    Ok(w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub label_column: String,
    pub labels: LabelTokens,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            label_column: "y".into(),
            labels: LabelTokens::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridsSection {
    #[serde(deserialize_with = "lookahead_grid")]
    pub lrf: ParamGrid,
    #[serde(deserialize_with = "greedy_grid")]
    pub grf: ParamGrid,
    #[serde(deserialize_with = "greedy_grid")]
    pub gdt: ParamGrid,
}

impl Default for GridsSection {
    fn default() -> Self {
        let g = ClassifierGrids::default();
        Self {
            lrf: g.lrf,
            grf: g.grf,
            gdt: g.gdt,
        }
    }
}

impl From<GridsSection> for ClassifierGrids {
    fn from(g: GridsSection) -> Self {
        Self {
            lrf: g.lrf,
            grf: g.grf,
            gdt: g.gdt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    #[serde(deserialize_with = "rho_list")]
    pub rho_values: Vec<f64>,
    #[serde(deserialize_with = "at_least_one")]
    pub repeats: usize,
    #[serde(deserialize_with = "classifier_list")]
    pub classifiers: Vec<Classifier>,
    #[serde(deserialize_with = "at_least_two")]
    pub n_folds: usize,
    #[serde(deserialize_with = "open_unit")]
    pub train_fraction: f64,
    #[serde(deserialize_with = "at_least_one")]
    pub n_samples: usize,
    pub n_noise: usize,
    pub n_linear: usize,
    #[serde(deserialize_with = "non_negative")]
    pub beta: f64,
    pub grids: GridsSection,
}

impl Default for SynthSection {
    fn default() -> Self {
        let plan = SweepPlan::default();
        Self {
            rho_values: plan.rho_values,
            repeats: plan.repeats,
            classifiers: plan.classifiers,
            n_folds: plan.n_folds,
            train_fraction: plan.train_fraction,
            n_samples: plan.template.n_samples,
            n_noise: plan.template.n_noise,
            n_linear: plan.template.n_linear,
            beta: plan.template.beta,
            grids: GridsSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrainSection {
    #[serde(default = "default_train_mode")]
    mode: InductionMode,
    #[serde(default = "default_folds")]
    n_folds: usize,
    #[serde(default = "default_train_grid")]
    grid: ParamGrid,
}

fn default_train_mode() -> InductionMode {
    InductionMode::Lookahead
}

fn default_folds() -> usize {
    5
}

fn default_train_grid() -> ParamGrid {
    ClassifierGrids::default().lrf
}

/// Training grid; a grid with one candidate is fit directly without CV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawTrainSection")]
pub struct TrainSection {
    pub mode: InductionMode,
    pub n_folds: usize,
    pub grid: ParamGrid,
}

impl TryFrom<RawTrainSection> for TrainSection {
    type Error = String;

    fn try_from(raw: RawTrainSection) -> Result<Self, String> {
        if raw.n_folds < 2 {
            return Err(format!("n_folds must be at least 2, got {}", raw.n_folds));
        }
        raw.grid
            .validate(raw.mode)
            .map_err(|e| format!("grid for {} mode: {e}", raw.mode.name()))?;
        Ok(Self {
            mode: raw.mode,
            n_folds: raw.n_folds,
            grid: raw.grid,
        })
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            mode: default_train_mode(),
            n_folds: default_folds(),
            grid: default_train_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestSection {
    #[serde(deserialize_with = "window_plan")]
    pub window: WindowPlan,
    #[serde(deserialize_with = "lookahead_grid")]
    pub lrf: ParamGrid,
    #[serde(deserialize_with = "greedy_grid")]
    pub grf: ParamGrid,
    /// Re-run every window on perturbed future bars and report the result.
    pub audit: bool,
}

/// Backtest grid reconstruction: forests of 200 trees, all features per
/// node, θ ∈ {0, 0.02, 0.05}; greedy trees get deeper candidates.
pub fn default_backtest_grid(max_depth: Vec<usize>) -> ParamGrid {
    ParamGrid {
        max_depth,
        min_samples_leaf: vec![20, 50],
        feature_subset: vec![FeatureSubset::All],
        n_buckets: vec![32],
        n_trees: vec![200],
        bootstrap: true,
        theta: vec![0.0, 0.02, 0.05],
    }
}

impl Default for BacktestSection {
    fn default() -> Self {
        Self {
            window: WindowPlan::default(),
            lrf: default_backtest_grid(vec![2, 4]),
            grf: default_backtest_grid(vec![2, 4, 6, 8]),
            audit: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatmapSection {
    #[serde(deserialize_with = "at_least_one")]
    pub resolution: usize,
    /// Number of block pairs listed.
    pub top_pairs: usize,
}

impl Default for HeatmapSection {
    fn default() -> Self {
        Self {
            resolution: 100,
            top_pairs: 5,
        }
    }
}

/// Synthetic OHLCV series written by `gen-market`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketSection {
    #[serde(deserialize_with = "at_least_one")]
    pub n_bars: usize,
    #[serde(deserialize_with = "rho_value")]
    pub rho: f64,
    #[serde(deserialize_with = "open_unit")]
    pub daily_vol: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        let m = XorMarketConfig::default();
        Self {
            n_bars: m.n_bars,
            rho: m.rho,
            daily_vol: m.daily_vol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_toml_str(text, Path::new("test.toml"))
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn shipped_default_matches_code_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
        assert_eq!(RunConfig::load(&path).unwrap(), RunConfig::default());
    }

    #[test]
    fn bad_rho_is_reported_with_its_line() {
        let e = parse("seed = 3\n\n[synth]\nrepeats = 2\nrho_values = [0.4, 0.6]\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 5"), "{msg}");
        assert!(msg.contains("[0.5, 1]"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse("[synth]\nrepeat = 2\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("repeat"), "{e}");
        assert!(parse("colour = 1\n").is_err());
    }

    #[test]
    fn odd_lookahead_depth_is_rejected() {
        let text = "[backtest.lrf]\nmax_depth = [3]\nmin_samples_leaf = [5]\nfeature_subset = [\"all\"]\nn_buckets = [8]\nn_trees = [4]\n";
        let e = parse(text).unwrap_err().to_string();
        assert!(e.contains("max_depth"), "{e}");
        let e = parse("[train]\nmode = \"lookahead\"\n[train.grid]\nmax_depth = [3]\nmin_samples_leaf = [5]\nfeature_subset = [\"all\"]\nn_buckets = [8]\nn_trees = [4]\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("line"), "{e}");
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = parse("[synth]\nrho_values = [0.65]\nclassifiers = [\"LRF\", \"GRF\"]\n").unwrap();
        assert_eq!(c.synth.rho_values, vec![0.65]);
        assert_eq!(c.synth.repeats, SynthSection::default().repeats);
        let plan = c.sweep_plan();
        assert_eq!(plan.classifiers, vec![Classifier::Lrf, Classifier::Grf]);
        assert!(plan.validate().is_ok());
    }
}
