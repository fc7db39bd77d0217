//! Walk-forward long/short backtests driven by forest probabilities,
//! performance metrics, a no-lookahead audit, and two-feature heatmaps.
//!
//! Row `t` of a [`MarketDataset`] holds indicators of bar `t`; the position
//! taken at bar `t`'s close earns the close-to-close return to bar `t + 1`.
//! Windows are laid out over dataset rows:
//!
//! ```text
//! | IS (is_len) | CV (cv_len) | OS (os_len) |
//!   step ->| IS          | CV          | OS          |
//! ```
//!
//! Per window, every grid candidate is fit on IS and scored by the Sharpe
//! ratio of its simulated CV segment for every θ; the winner is refit on
//! IS + CV and trades the OS segment.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finance::{self, MarketDataset, OhlcvBar};
use crate::forest::{Forest, ForestParams};
use crate::math;
use crate::par;
use crate::seed::{self, stream};
use crate::tree::InductionMode;
use crate::tuning::{beats, ParamGrid};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Long,
    Short,
    Flat,
}

impl Position {
    pub fn exposure(self) -> f64 {
        match self {
            Position::Long => 1.0,
            Position::Short => -1.0,
            Position::Flat => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Position::Long => "long",
            Position::Short => "short",
            Position::Flat => "flat",
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..0.5).contains(&theta) {
        return Err(Error::param("theta", format!("must lie in [0, 0.5), got {theta}")));
    }
    Ok(())
}

/// `Long` iff `p_plus ≥ 0.5 + θ`, else `Short` iff `p_plus ≤ 0.5 − θ`,
/// else `Flat`. At `θ = 0` every day is positioned, and `p_plus = 0.5`
/// goes long.
pub fn signal_to_position(p_plus: f64, theta: f64) -> Result<Position> {
    if !(0.0..=1.0).contains(&p_plus) {
        return Err(Error::param("p_plus", format!("must lie in [0, 1], got {p_plus}")));
    }
    check_theta(theta)?;
    Ok(if p_plus >= 0.5 + theta {
        Position::Long
    } else if p_plus <= 0.5 - theta {
        Position::Short
    } else {
        Position::Flat
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowPlan {
    pub is_len: usize,
    pub cv_len: usize,
    pub os_len: usize,
    pub step: usize,
}

impl Default for WindowPlan {
    fn default() -> Self {
        Self {
            is_len: 1000,
            cv_len: 250,
            os_len: 75,
            step: 75,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub index: usize,
    pub is: Range<usize>,
    pub cv: Range<usize>,
    pub os: Range<usize>,
}

impl WindowPlan {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("is_len", self.is_len),
            ("cv_len", self.cv_len),
            ("os_len", self.os_len),
            ("step", self.step),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if self.step < self.os_len {
            return Err(Error::param(
                "step",
                format!("{} is shorter than os_len {}; OS segments would overlap", self.step, self.os_len),
            ));
        }
        Ok(())
    }

    /// Windows over `n_rows` dataset rows, starting at row 0 and advancing by
    /// `step`. The first OS segment must be complete; the last may be cut
    /// short by the end of the data.
    pub fn windows(&self, n_rows: usize) -> Result<Vec<Window>> {
        self.validate()?;
        let needed = self.is_len + self.cv_len + self.os_len;
        if n_rows < needed {
            return Err(Error::InsufficientHistory {
                needed,
                available: n_rows,
            });
        }
        let mut out = Vec::new();
        let mut start = 0;
        while start + self.is_len + self.cv_len < n_rows {
            let cv_start = start + self.is_len;
            let os_start = cv_start + self.cv_len;
            out.push(Window {
                index: out.len(),
                is: start..cv_start,
                cv: cv_start..os_start,
                os: os_start..(os_start + self.os_len).min(n_rows),
            });
            start += self.step;
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub theta: f64,
    pub forest: ForestParams,
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        self.forest.validate()
    }
}

/// Sharpe ratio `√252 · mean / std` of daily returns (sample std, zero
/// risk-free rate); `None` for fewer than two returns or zero variance.
pub fn sharpe(daily_returns: &[f64]) -> Option<f64> {
    if daily_returns.len() < 2 {
        return None;
    }
    let sd = math::sample_std(daily_returns);
    if sd == 0.0 || !sd.is_finite() {
        return None;
    }
    Some(math::sqrt(TRADING_DAYS_PER_YEAR) * math::mean(daily_returns) / sd)
}

/// Largest relative fall from a running peak; the first value is the
/// starting equity.
pub fn max_drawdown(equity: &[f64]) -> Result<f64> {
    if equity.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::NonPositiveEquity);
    }
    let mut peak = f64::NEG_INFINITY;
    let mut mdd: f64 = 0.0;
    for &e in equity {
        peak = peak.max(e);
        mdd = mdd.max(1.0 - e / peak);
    }
    Ok(mdd)
}

/// Compound annual growth `(last / first)^(252 / days) − 1`, where `equity`
/// holds the starting value followed by one value per day.
pub fn cagr(equity: &[f64], trading_days_per_year: f64) -> Result<f64> {
    if equity.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            available: equity.len(),
        });
    }
    if equity.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::NonPositiveEquity);
    }
    let days = (equity.len() - 1) as f64;
    Ok(math::powf(equity[equity.len() - 1] / equity[0], trading_days_per_year / days) - 1.0)
}

/// Share of positioned days whose strategy return is strictly positive.
pub fn success_rate(positions: &[Position], daily_returns: &[f64]) -> Result<f64> {
    if positions.len() != daily_returns.len() {
        return Err(Error::DimensionMismatch {
            expected: positions.len(),
            found: daily_returns.len(),
        });
    }
    let (mut active, mut wins) = (0usize, 0usize);
    for (p, r) in positions.iter().zip(daily_returns) {
        if *p != Position::Flat {
            active += 1;
            wins += usize::from(*r > 0.0);
        }
    }
    if active == 0 {
        return Err(Error::NoPositionedDays);
    }
    Ok(wins as f64 / active as f64)
}

/// Equity after each daily return, starting from 1.
pub fn compound(daily_returns: &[f64]) -> Result<Vec<f64>> {
    let mut equity = 1.0;
    let mut out = Vec::with_capacity(daily_returns.len());
    for r in daily_returns {
        equity *= 1.0 + r;
        if !(equity > 0.0) {
            return Err(Error::NonPositiveEquity);
        }
        out.push(equity);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquityPoint {
    /// Date the return is realized.
    pub date: NaiveDate,
    pub position: Position,
    pub daily_return: f64,
    pub equity: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EquityCurve {
    pub points: Vec<EquityPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub n_days: usize,
    pub cagr: f64,
    /// `None` when the returns have no variance.
    pub sharpe: Option<f64>,
    /// `None` when no day is positioned.
    pub success_rate: Option<f64>,
    pub mdd: f64,
    pub frac_long: f64,
    pub frac_short: f64,
    pub final_equity: f64,
}

impl EquityCurve {
    /// Strategy returns `position · forward_return` for the given rows.
    pub fn from_positions(market: &MarketDataset, rows: &[usize], positions: &[Position]) -> Result<Self> {
        if rows.len() != positions.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: positions.len(),
            });
        }
        let returns: Vec<f64> = rows
            .iter()
            .zip(positions)
            .map(|(&r, p)| p.exposure() * market.forward_returns[r])
            .collect();
        let equity = compound(&returns)?;
        let points = rows
            .iter()
            .zip(positions)
            .zip(returns.iter().zip(equity))
            .map(|((&r, &position), (&daily_return, equity))| EquityPoint {
                date: market.next_dates[r],
                position,
                daily_return,
                equity,
            })
            .collect();
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn daily_returns(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.daily_return).collect()
    }

    pub fn positions(&self) -> Vec<Position> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn report(&self) -> Result<PerfReport> {
        if self.points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let returns = self.daily_returns();
        let positions = self.positions();
        let mut equity = Vec::with_capacity(self.points.len() + 1);
        equity.push(1.0);
        equity.extend(self.points.iter().map(|p| p.equity));
        let n = self.points.len() as f64;
        let share = |which: Position| positions.iter().filter(|&&p| p == which).count() as f64 / n;
        Ok(PerfReport {
            n_days: self.points.len(),
            cagr: cagr(&equity, TRADING_DAYS_PER_YEAR)?,
            sharpe: sharpe(&returns),
            success_rate: match success_rate(&positions, &returns) {
                Ok(v) => Some(v),
                Err(Error::NoPositionedDays) => None,
                Err(e) => return Err(e),
            },
            mdd: max_drawdown(&equity)?,
            frac_long: share(Position::Long),
            frac_short: share(Position::Short),
            final_equity: equity[equity.len() - 1],
        })
    }
}

/// Positions for rows given their forest probabilities.
pub fn positions_for(p_plus: &[f64], theta: f64) -> Result<Vec<Position>> {
    p_plus.iter().map(|&p| signal_to_position(p, theta)).collect()
}

fn range_rows(r: &Range<usize>) -> Vec<usize> {
    r.clone().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    pub window: Window,
    pub selected: StrategyParams,
    pub cv_sharpe: Option<f64>,
    /// Forest probability per OS row.
    pub p_plus: Vec<f64>,
    pub positions: Vec<Position>,
}

/// `Some` beats `None`; larger Sharpe beats smaller.
fn sharpe_key(s: Option<f64>) -> f64 {
    s.unwrap_or(f64::NEG_INFINITY)
}

/// Runs one window. Candidate fits share one seed, so candidates differ only
/// in their hyperparameters.
pub fn run_window(
    market: &MarketDataset,
    window: &Window,
    grid: &ParamGrid,
    mode: InductionMode,
    seed: u64,
) -> Result<WindowOutcome> {
    let ds = &market.dataset;
    let is = ds.subset(&range_rows(&window.is))?;
    let cv_rows = range_rows(&window.cv);
    let cv = ds.subset(&cv_rows)?;
    let fit_seed = seed::derive_seed(seed, &[stream::WINDOW, window.index as u64, stream::CV_FIT]);
    let candidates = grid.candidates(mode);
    let scored = par::map_indexed(candidates.len(), |c| -> Result<Vec<Option<f64>>> {
        let params = ForestParams {
            seed: fit_seed,
            ..candidates[c]
        };
        let p = Forest::fit(&is, &params)?.predict_proba_all(&cv)?;
        grid.theta
            .iter()
            .map(|&theta| {
                let curve = EquityCurve::from_positions(market, &cv_rows, &positions_for(&p, theta)?)?;
                Ok(sharpe(&curve.daily_returns()))
            })
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut theta_order: Vec<usize> = (0..grid.theta.len()).collect();
    theta_order.sort_by(|&a, &b| grid.theta[a].total_cmp(&grid.theta[b]));
    let mut best: Option<(f64, ForestParams, f64, Option<f64>)> = None;
    for (c, scores) in scored.iter().enumerate() {
        for &t in &theta_order {
            let (theta, s) = (grid.theta[t], scores[t]);
            let key = sharpe_key(s);
            let replace = match &best {
                None => true,
                Some((bkey, bparams, btheta, _)) => {
                    beats(key, &candidates[c], *bkey, bparams)
                        || (key == *bkey && candidates[c] == *bparams && theta < *btheta)
                }
            };
            if replace {
                best = Some((key, candidates[c], theta, s));
            }
        }
    }
    let (_, forest_params, theta, cv_sharpe) = best.ok_or(Error::param("grid", "no candidates"))?;

    let train = ds.subset(&range_rows(&(window.is.start..window.cv.end)))?;
    let final_params = ForestParams {
        seed: seed::derive_seed(seed, &[stream::WINDOW, window.index as u64, stream::FINAL_FIT]),
        ..forest_params
    };
    let forest = Forest::fit(&train, &final_params)?;
    let os = ds.subset(&range_rows(&window.os))?;
    let p_plus = forest.predict_proba_all(&os)?;
    let positions = positions_for(&p_plus, theta)?;
    Ok(WindowOutcome {
        window: window.clone(),
        selected: StrategyParams {
            theta,
            forest: final_params,
        },
        cv_sharpe,
        p_plus,
        positions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkForwardResult {
    pub mode: InductionMode,
    pub windows: Vec<WindowOutcome>,
    pub curve: EquityCurve,
}

impl WalkForwardResult {
    /// Dataset rows traded, in date order.
    pub fn os_rows(&self) -> Vec<usize> {
        self.windows.iter().flat_map(|w| w.window.os.clone()).collect()
    }
}

/// Rows traded across windows; `step > os_len` leaves gaps between segments.
fn os_rows(windows: &[Window]) -> Vec<usize> {
    windows.iter().flat_map(|w| w.os.clone()).collect()
}

pub fn run_walkforward_on(
    market: &MarketDataset,
    plan: &WindowPlan,
    grid: &ParamGrid,
    mode: InductionMode,
    seed: u64,
) -> Result<WalkForwardResult> {
    grid.validate(mode)?;
    let windows = plan.windows(market.n_rows())?;
    let outcomes = par::map_indexed(windows.len(), |w| run_window(market, &windows[w], grid, mode, seed))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let positions: Vec<Position> = outcomes.iter().flat_map(|o| o.positions.iter().copied()).collect();
    let curve = EquityCurve::from_positions(market, &os_rows(&windows), &positions)?;
    Ok(WalkForwardResult {
        mode,
        windows: outcomes,
        curve,
    })
}

pub fn run_walkforward(
    bars: &[OhlcvBar],
    plan: &WindowPlan,
    grid: &ParamGrid,
    mode: InductionMode,
    seed: u64,
) -> Result<WalkForwardResult> {
    run_walkforward_on(&finance::build_dataset(bars)?, plan, grid, mode, seed)
}

/// Always long over the same OS rows as a walk-forward run.
pub fn buy_and_hold(market: &MarketDataset, plan: &WindowPlan) -> Result<EquityCurve> {
    let rows = os_rows(&plan.windows(market.n_rows())?);
    EquityCurve::from_positions(market, &rows, &alloc::vec![Position::Long; rows.len()])
}

/// Direction accuracy of the OS probabilities against the realized labels,
/// tested against always predicting the OS majority class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub n_days: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub majority_baseline: f64,
    /// `None` when the baseline is degenerate (a single class).
    pub p_value: Option<f64>,
}

pub fn significance(market: &MarketDataset, result: &WalkForwardResult) -> Result<Significance> {
    let rows = result.os_rows();
    let labels: Vec<_> = rows.iter().map(|&r| market.dataset.label(r)).collect();
    let (baseline, _) = finance::majority_baseline(&labels)?;
    let p_plus = result.windows.iter().flat_map(|w| w.p_plus.iter().copied());
    let correct = p_plus
        .zip(&labels)
        .filter(|(p, l)| crate::forest::classify_probability(*p) == **l)
        .count();
    let p_value = if baseline < 1.0 {
        Some(finance::binomial_test(correct as u64, rows.len() as u64, baseline)?)
    } else {
        None
    };
    Ok(Significance {
        n_days: rows.len(),
        correct,
        accuracy: correct as f64 / rows.len() as f64,
        majority_baseline: baseline,
        p_value,
    })
}

/// Result of re-running one window on a series whose bars after the cut
/// were randomly rescaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub window: usize,
    /// OS rows `0..=cut` must be unaffected by the perturbation.
    pub cut: usize,
    pub same_selection: bool,
    pub same_positions: bool,
}

impl AuditRecord {
    pub fn passed(&self) -> bool {
        self.same_selection && self.same_positions
    }
}

/// Copies `bars`, rescaling prices and volume of every bar after `last_kept`
/// by random factors. The result stays a valid series.
pub fn perturb_after<R: Rng + ?Sized>(bars: &[OhlcvBar], last_kept: usize, rng: &mut R) -> Vec<OhlcvBar> {
    bars.iter()
        .enumerate()
        .map(|(i, b)| {
            if i <= last_kept {
                return *b;
            }
            let price = rng.random_range(0.5..1.5);
            let volume = rng.random_range(0.2..5.0);
            OhlcvBar {
                open: b.open * price,
                high: b.high * price,
                low: b.low * price,
                close: b.close * price,
                volume: b.volume * volume,
                ..*b
            }
        })
        .collect()
}

/// For each window, picks a random cut in its OS segment, rescales every
/// later bar, re-runs the window and checks that the selected model and the
/// positions up to the cut are unchanged.
pub fn audit_walkforward(
    bars: &[OhlcvBar],
    grid: &ParamGrid,
    result: &WalkForwardResult,
    seed: u64,
    audit_seed: u64,
) -> Result<Vec<AuditRecord>> {
    let market = finance::build_dataset(bars)?;
    par::map_indexed(result.windows.len(), |w| {
        let original = &result.windows[w];
        let window = &original.window;
        let mut rng = seed::derived_rng(audit_seed, &[stream::AUDIT, w as u64]);
        let cut = rng.random_range(0..window.os.len());
        let last_kept = market.first_bar + window.os.start + cut;
        let perturbed = finance::build_dataset(&perturb_after(bars, last_kept, &mut rng))?;
        debug_assert_eq!(perturbed.n_rows(), market.n_rows());
        let rerun = run_window(&perturbed, window, grid, result.mode, seed)?;
        Ok(AuditRecord {
            window: w,
            cut,
            same_selection: rerun.selected == original.selected,
            same_positions: rerun.positions[..=cut] == original.positions[..=cut]
                && rerun.p_plus[..=cut] == original.p_plus[..=cut],
        })
    })
    .into_iter()
    .collect()
}

/// Forest probabilities on a `resolution × resolution` grid over two
/// features. `p_plus[iy * resolution + ix]` belongs to `(xs[ix], ys[iy])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub feature_x: usize,
    pub feature_y: usize,
    pub name_x: String,
    pub name_y: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub p_plus: Vec<f64>,
}

fn cell_centers(min: f64, max: f64, resolution: usize) -> Vec<f64> {
    let width = (max - min) / resolution as f64;
    (0..resolution).map(|i| min + (i as f64 + 0.5) * width).collect()
}

/// Evaluates the forest over the training ranges of features `i` and `j`,
/// cell centers spaced evenly. The other features are pinned to `fixed`
/// (one value per remaining feature, in index order), or to their training
/// medians when `fixed` is `None`.
pub fn heatmap_grid(
    forest: &Forest,
    i: usize,
    j: usize,
    resolution: usize,
    fixed: Option<&[f64]>,
) -> Result<Heatmap> {
    let k = forest.n_features();
    if i >= k || j >= k || i == j {
        return Err(Error::param(
            "features",
            format!("need two distinct indices below {k}, got {i} and {j}"),
        ));
    }
    if resolution == 0 {
        return Err(Error::param("resolution", "must be at least 1"));
    }
    let mut base: Vec<f64> = forest.feature_summaries.iter().map(|s| s.median).collect();
    if let Some(values) = fixed {
        if values.len() != k - 2 {
            return Err(Error::DimensionMismatch {
                expected: k - 2,
                found: values.len(),
            });
        }
        let others = (0..k).filter(|&f| f != i && f != j);
        for (f, &v) in others.zip(values) {
            base[f] = v;
        }
    }
    let (sx, sy) = (forest.feature_summaries[i], forest.feature_summaries[j]);
    let xs = cell_centers(sx.min, sx.max, resolution);
    let ys = cell_centers(sy.min, sy.max, resolution);
    let mut p_plus = Vec::with_capacity(resolution * resolution);
    let mut sample = base;
    for &y in &ys {
        for &x in &xs {
            sample[i] = x;
            sample[j] = y;
            p_plus.push(forest.predict_proba(&sample)?);
        }
    }
    Ok(Heatmap {
        feature_x: i,
        feature_y: j,
        name_x: forest.feature_names[i].clone(),
        name_y: forest.feature_names[j].clone(),
        xs,
        ys,
        p_plus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label;
    use crate::tree::{FeatureSubset, TreeParams};
    use alloc::vec;

    #[test]
    fn positions_from_signal() {
        assert_eq!(signal_to_position(0.70, 0.10).unwrap(), Position::Long);
        assert_eq!(signal_to_position(0.55, 0.10).unwrap(), Position::Flat);
        assert_eq!(signal_to_position(0.35, 0.10).unwrap(), Position::Short);
        assert_eq!(signal_to_position(0.60, 0.10).unwrap(), Position::Long);
        assert_eq!(signal_to_position(0.40, 0.10).unwrap(), Position::Short);
        assert_eq!(signal_to_position(0.5, 0.0).unwrap(), Position::Long);
        assert!(signal_to_position(1.2, 0.0).is_err());
        assert!(signal_to_position(0.5, 0.5).is_err());
    }

    #[test]
    fn window_tiling() {
        let plan = WindowPlan { is_len: 10, cv_len: 5, os_len: 3, step: 3 };
        let w = plan.windows(25).unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(w[0].os, 15..18);
        assert_eq!(w[1].is, 3..13);
        assert_eq!(w[3].os, 24..25);
        for pair in w.windows(2) {
            assert_eq!(pair[0].os.end, pair[1].os.start);
        }
        assert!(plan.windows(17).is_err());
        assert!(WindowPlan { step: 2, ..plan }.windows(25).is_err());
        assert!(WindowPlan { is_len: 0, ..plan }.windows(25).is_err());
    }

    #[test]
    fn sharpe_values() {
        // Alternating 0.011 / -0.009: mean 0.001.
        let r: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.011 } else { -0.009 }).collect();
        let sd = math::sample_std(&r);
        let expect = 252f64.sqrt() * 0.001 / sd;
        assert!((sharpe(&r).unwrap() - expect).abs() < 1e-12);
        let neg: Vec<f64> = r.iter().map(|x| -x).collect();
        assert!((sharpe(&neg).unwrap() + expect).abs() < 1e-12);
        assert_eq!(sharpe(&[0.0; 10]), None);
        assert_eq!(sharpe(&[0.01]), None);
    }

    #[test]
    fn drawdown_and_growth() {
        assert!((max_drawdown(&[1.0, 1.2, 0.9, 1.1]).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(max_drawdown(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(max_drawdown(&[1.0]).unwrap(), 0.0);
        assert!(max_drawdown(&[1.0, 0.0]).is_err());

        assert_eq!(cagr(&[1.0, 1.0], 252.0).unwrap(), 0.0);
        let mut doubling = vec![1.0; 253];
        doubling[252] = 2.0;
        assert!((cagr(&doubling, 252.0).unwrap() - 1.0).abs() < 1e-12);
        let mut ten = vec![1.0; 505];
        ten[504] = 1.1;
        assert!((cagr(&ten, 252.0).unwrap() - (1.1f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!(cagr(&[1.0], 252.0).is_err());
    }

    #[test]
    fn success_rates() {
        let r = [0.01, -0.02, 0.03, -0.01];
        let oracle: Vec<Position> = r
            .iter()
            .map(|&x| if x > 0.0 { Position::Long } else { Position::Short })
            .collect();
        let strat: Vec<f64> = oracle.iter().zip(&r).map(|(p, x)| p.exposure() * x).collect();
        assert_eq!(success_rate(&oracle, &strat).unwrap(), 1.0);
        let inverted: Vec<f64> = strat.iter().map(|x| -x).collect();
        assert_eq!(success_rate(&oracle, &inverted).unwrap(), 0.0);
        assert_eq!(success_rate(&oracle, &[0.1, -0.1, 0.1, -0.1]).unwrap(), 0.5);
        assert_eq!(
            success_rate(&[Position::Flat; 2], &[0.0, 0.0]),
            Err(Error::NoPositionedDays)
        );
    }

    fn toy_market(n: usize) -> MarketDataset {
        let bars = crate::synth::generate_xor_market(&crate::synth::XorMarketConfig {
            n_bars: n,
            rho: 0.9,
            ..Default::default()
        })
        .unwrap();
        finance::build_dataset(&bars).unwrap()
    }

    #[test]
    fn flat_curve_is_zero() {
        let m = toy_market(60);
        let rows: Vec<usize> = (0..m.n_rows()).collect();
        let c = EquityCurve::from_positions(&m, &rows, &vec![Position::Flat; rows.len()]).unwrap();
        assert!(c.daily_returns().iter().all(|&r| r == 0.0));
        let rep = c.report().unwrap();
        assert_eq!(rep.sharpe, None);
        assert_eq!(rep.success_rate, None);
        assert_eq!(rep.cagr, 0.0);
        assert_eq!(rep.final_equity, 1.0);
    }

    #[test]
    fn oracle_curve_always_wins() {
        let m = toy_market(80);
        let rows: Vec<usize> = (0..m.n_rows()).collect();
        let pos: Vec<Position> = rows
            .iter()
            .map(|&r| if m.dataset.label(r) == Label::Pos { Position::Long } else { Position::Short })
            .collect();
        let rep = EquityCurve::from_positions(&m, &rows, &pos).unwrap().report().unwrap();
        assert_eq!(rep.success_rate, Some(1.0));
        assert_eq!(rep.mdd, 0.0);
        assert!(rep.frac_long + rep.frac_short <= 1.0);
    }

    fn small_grid() -> ParamGrid {
        ParamGrid {
            max_depth: vec![2],
            min_samples_leaf: vec![10, 20],
            feature_subset: vec![FeatureSubset::All],
            n_buckets: vec![16],
            n_trees: vec![10],
            bootstrap: true,
            theta: vec![0.0, 0.05],
        }
    }

    #[test]
    fn walkforward_alignment_and_audit() {
        let bars = crate::synth::generate_xor_market(&crate::synth::XorMarketConfig {
            n_bars: 400,
            rho: 0.9,
            ..Default::default()
        })
        .unwrap();
        let plan = WindowPlan { is_len: 200, cv_len: 80, os_len: 40, step: 40 };
        let res = run_walkforward(&bars, &plan, &small_grid(), InductionMode::Lookahead, 3).unwrap();
        let market = finance::build_dataset(&bars).unwrap();
        let bh = buy_and_hold(&market, &plan).unwrap();
        assert_eq!(res.curve.len(), bh.len());
        assert_eq!(res.curve.points[0].date, bh.points[0].date);
        let rows = res.os_rows();
        assert_eq!(rows.len(), market.n_rows() - 280);
        let audit = audit_walkforward(&bars, &small_grid(), &res, 3, 11).unwrap();
        assert_eq!(audit.len(), res.windows.len());
        assert!(audit.iter().all(AuditRecord::passed));
        let sig = significance(&market, &res).unwrap();
        assert_eq!(sig.n_days, rows.len());
    }

    #[test]
    fn heatmap_of_xor_forest() {
        let cfg = crate::synth::SynthConfig {
            n_samples: 1000,
            rho: 1.0,
            n_noise: 0,
            ..Default::default()
        };
        let ds = crate::synth::generate(&cfg).unwrap();
        let params = ForestParams {
            n_trees: 20,
            tree: TreeParams {
                n_buckets: 20,
                ..TreeParams::default()
            },
            ..ForestParams::default()
        };
        let forest = Forest::fit(&ds, &params).unwrap();
        let h = heatmap_grid(&forest, 0, 1, 10, Some(&[])).unwrap();
        assert_eq!(h.p_plus.len(), 100);
        let at = |ix: usize, iy: usize| h.p_plus[iy * 10 + ix];
        assert!(at(1, 1) < 0.2 && at(8, 8) < 0.2);
        assert!(at(1, 8) > 0.8 && at(8, 1) > 0.8);
        let one = heatmap_grid(&forest, 0, 1, 1, None).unwrap();
        let s = forest.feature_summaries[0];
        assert!((one.xs[0] - 0.5 * (s.min + s.max)).abs() < 1e-12);
        assert!(heatmap_grid(&forest, 0, 0, 4, None).is_err());
        assert!(heatmap_grid(&forest, 0, 1, 4, Some(&[0.3])).is_err());
    }

    #[test]
    fn theta_never_adds_positions() {
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            let mut was_flat = false;
            for t in [0.0, 0.05, 0.1, 0.2, 0.3, 0.49] {
                let flat = signal_to_position(p, t).unwrap() == Position::Flat;
                assert!(!was_flat || flat);
                was_flat = flat;
            }
        }
    }
}
