//! Daily OHLCV bars, the eight technical indicators used as features, the
//! next-day-sign dataset, and the majority/binomial baselines.
//!
//! Indicator definitions are the common textbook ones:
//!
//! | name            | value at day `t`                                                        |
//! |-----------------|-------------------------------------------------------------------------|
//! | `rsi_n`         | Cutler RSI: `100 - 100 / (1 + avg_gain / avg_loss)` over the last `n` close-to-close moves |
//! | `vol_z_n`       | `(v_t - mean) / std` over the last `n` volumes including `t` (sample std) |
//! | `sign_corr_n`   | Pearson correlation of `sign(r_s)` and `sign(r_{s-1})` over the last `n` pairs |
//! | `overnight_gap` | `open_t / close_{t-1} - 1`                                              |
//! | `clv`           | `((close - low) - (high - close)) / (high - low)`                       |
//!
//! Every indicator at `t` reads bars `<= t` only.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcvBar {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidBar {
            date: self.date,
            reason,
        };
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(bad("prices must be positive and finite".into()));
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err(bad("volume must be non-negative and finite".into()));
        }
        if self.low > self.high {
            return Err(bad(format!("low {} > high {}", self.low, self.high)));
        }
        let (lo, hi) = (self.open.min(self.close), self.open.max(self.close));
        if self.low > lo || hi > self.high {
            return Err(bad("open/close outside the low-high range".into()));
        }
        Ok(())
    }
}

/// Validates every bar and sorts by date; duplicate dates are rejected.
pub fn normalize_series(mut bars: Vec<OhlcvBar>) -> Result<Vec<OhlcvBar>> {
    for b in &bars {
        b.validate()?;
    }
    bars.sort_by_key(|b| b.date);
    if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(Error::DuplicateDate(w[0].date));
    }
    Ok(bars)
}

/// Cutler RSI of a window of `n + 1` closes. A window without moves is 50.
pub fn rsi_window(closes: &[f64]) -> f64 {
    let (mut gain, mut loss) = (0.0, 0.0);
    for w in closes.windows(2) {
        let d = w[1] - w[0];
        if d > 0.0 {
            gain += d;
        } else {
            loss -= d;
        }
    }
    match (gain > 0.0, loss > 0.0) {
        (false, false) => 50.0,
        (true, false) => 100.0,
        (false, true) => 0.0,
        // The common 1/n factors cancel in the ratio.
        (true, true) => 100.0 - 100.0 / (1.0 + gain / loss),
    }
}

/// Z-score of the last value of `window` against the window's mean and
/// sample standard deviation; 0 when the window is constant.
pub fn zscore_window(window: &[f64]) -> f64 {
    let sd = math::sample_std(window);
    if sd == 0.0 {
        return 0.0;
    }
    (window[window.len() - 1] - math::mean(window)) / sd
}

/// Aligned `n`-day RSI: `None` for the first `n` days.
pub fn rsi(closes: &[f64], n: usize) -> Vec<Option<f64>> {
    (0..closes.len())
        .map(|t| (n >= 1 && t >= n).then(|| rsi_window(&closes[t - n..=t])))
        .collect()
}

/// Aligned `n`-day volume Z-score: `None` for the first `n - 1` days.
pub fn volume_zscore(volumes: &[f64], n: usize) -> Vec<Option<f64>> {
    (0..volumes.len())
        .map(|t| (n >= 2 && t + 1 >= n).then(|| zscore_window(&volumes[t + 1 - n..=t])))
        .collect()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (math::mean(xs), math::mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0)
}

/// Aligned lag-1 sign autocorrelation of close-to-close returns over the
/// last `n` return pairs: `None` for the first `n + 1` days.
pub fn sign_correlation(closes: &[f64], n: usize) -> Vec<Option<f64>> {
    let signs: Vec<f64> = (0..closes.len())
        .map(|t| if t == 0 { 0.0 } else { sign(closes[t] / closes[t - 1] - 1.0) })
        .collect();
    (0..closes.len())
        .map(|t| {
            (n >= 2 && t > n).then(|| {
                let cur = &signs[t + 1 - n..=t];
                let lag = &signs[t - n..t];
                pearson(cur, lag)
            })
        })
        .collect()
}

/// Aligned overnight gap `open_t / close_{t-1} - 1`: `None` on the first day.
pub fn overnight_gap(bars: &[OhlcvBar]) -> Vec<Option<f64>> {
    (0..bars.len())
        .map(|t| (t >= 1).then(|| bars[t].open / bars[t - 1].close - 1.0))
        .collect()
}

/// Close location value in `[-1, 1]`; 0 for a bar with no range.
pub fn clv(bar: &OhlcvBar) -> f64 {
    let range = bar.high - bar.low;
    if range == 0.0 {
        return 0.0;
    }
    (((bar.close - bar.low) - (bar.high - bar.close)) / range).clamp(-1.0, 1.0)
}

pub const INDICATOR_NAMES: [&str; 8] = [
    "rsi_5",
    "rsi_20",
    "vol_z_5",
    "vol_z_20",
    "sign_corr_5",
    "sign_corr_20",
    "overnight_gap",
    "clv",
];

/// Index of the first bar at which every indicator is defined.
pub const WARM_UP: usize = 21;

/// Indicator values per bar, warm-up trimmed: row `i` belongs to bar
/// `first_bar + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorMatrix {
    pub first_bar: usize,
    pub dates: Vec<NaiveDate>,
    pub rows: Vec<[f64; 8]>,
}

pub fn indicator_matrix(bars: &[OhlcvBar]) -> IndicatorMatrix {
    let closes: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let volumes: Vec<f64> = bars.iter().map(|b| b.volume).collect();
    let columns = [
        rsi(&closes, 5),
        rsi(&closes, 20),
        volume_zscore(&volumes, 5),
        volume_zscore(&volumes, 20),
        sign_correlation(&closes, 5),
        sign_correlation(&closes, 20),
        overnight_gap(bars),
        bars.iter().map(|b| Some(clv(b))).collect(),
    ];
    let mut out = IndicatorMatrix {
        first_bar: WARM_UP,
        dates: Vec::new(),
        rows: Vec::new(),
    };
    for t in WARM_UP..bars.len() {
        let mut row = [0.0; 8];
        for (slot, col) in row.iter_mut().zip(&columns) {
            *slot = col[t].expect("every indicator is defined after the warm-up");
        }
        out.dates.push(bars[t].date);
        out.rows.push(row);
    }
    out
}

/// Indicator features labeled by the sign of the next day's return.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketDataset {
    pub dataset: LabeledDataset,
    /// Row `i` holds the features of bar `first_bar + i`.
    pub first_bar: usize,
    /// Date of each row's feature bar.
    pub dates: Vec<NaiveDate>,
    /// Date the row's forward return is realized (the next bar).
    pub next_dates: Vec<NaiveDate>,
    /// `close_{t+1} / close_t - 1` per row.
    pub forward_returns: Vec<f64>,
}

impl MarketDataset {
    pub fn n_rows(&self) -> usize {
        self.dataset.n_rows()
    }
}

/// Features from bars `<= t`, label `Pos` iff `close_{t+1} > close_t`. The
/// warm-up rows and the last bar (no forward return) are dropped.
pub fn build_dataset(bars: &[OhlcvBar]) -> Result<MarketDataset> {
    let needed = WARM_UP + 2;
    if bars.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: bars.len(),
        });
    }
    let ind = indicator_matrix(&bars[..bars.len() - 1]);
    let mut values = Vec::with_capacity(ind.rows.len() * 8);
    let mut labels = Vec::with_capacity(ind.rows.len());
    let mut forward_returns = Vec::with_capacity(ind.rows.len());
    let mut next_dates = Vec::with_capacity(ind.rows.len());
    for (i, row) in ind.rows.iter().enumerate() {
        let t = ind.first_bar + i;
        values.extend_from_slice(row);
        labels.push(Label::from_bool(bars[t + 1].close > bars[t].close));
        forward_returns.push(bars[t + 1].close / bars[t].close - 1.0);
        next_dates.push(bars[t + 1].date);
    }
    let names = INDICATOR_NAMES.iter().map(|s| s.to_string()).collect();
    Ok(MarketDataset {
        dataset: LabeledDataset::from_row_major(names, values, labels)?,
        first_bar: ind.first_bar,
        dates: ind.dates,
        next_dates,
        forward_returns,
    })
}

/// One-sided exact binomial tail `P[X >= correct]`, `X ~ Bin(total, p0)`.
pub fn binomial_test(correct: u64, total: u64, baseline_p: f64) -> Result<f64> {
    if correct > total {
        return Err(Error::param(
            "correct",
            format!("{correct} exceeds total {total}"),
        ));
    }
    if !(baseline_p > 0.0 && baseline_p < 1.0) {
        return Err(Error::param(
            "baseline_p",
            format!("must lie in (0, 1), got {baseline_p}"),
        ));
    }
    if correct == 0 {
        return Ok(1.0);
    }
    let n = total as f64;
    let k0 = correct as f64;
    let log_pmf = math::ln_gamma(n + 1.0) - math::ln_gamma(k0 + 1.0) - math::ln_gamma(n - k0 + 1.0)
        + k0 * math::ln(baseline_p)
        + (n - k0) * math::ln(1.0 - baseline_p);
    let odds = baseline_p / (1.0 - baseline_p);
    let mut pmf = math::exp(log_pmf);
    let mut tail = 0.0;
    for k in correct..=total {
        tail += pmf;
        pmf *= (total - k) as f64 / (k + 1) as f64 * odds;
    }
    Ok(tail.min(1.0))
}

/// Share of the more frequent class; a tie goes to `Neg` at 0.5.
pub fn majority_baseline(labels: &[Label]) -> Result<(f64, Label)> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pos = labels.iter().filter(|l| l.is_pos()).count();
    let neg = labels.len() - pos;
    let (count, class) = if pos > neg {
        (pos, Label::Pos)
    } else {
        (neg, Label::Neg)
    };
    Ok((count as f64 / labels.len() as f64, class))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bar(day: u32, open: f64, high: f64, low: f64, close: f64, volume: f64) -> OhlcvBar {
        OhlcvBar {
            date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(day as u64),
            open,
            high,
            low,
            close,
            volume,
        }
    }

    fn series_from_closes(closes: &[f64]) -> Vec<OhlcvBar> {
        closes
            .iter()
            .enumerate()
            .map(|(i, &c)| bar(i as u32, c, c * 1.01, c * 0.99, c, 1000.0 + (i % 3) as f64))
            .collect()
    }

    #[test]
    fn rsi_limits() {
        let up: Vec<f64> = (0..6).map(|i| 100.0 + i as f64).collect();
        assert_eq!(rsi(&up, 5)[5], Some(100.0));
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert_eq!(rsi(&down, 5)[5], Some(0.0));
        assert_eq!(rsi(&[3.0; 6], 5)[5], Some(50.0));
        // Moves +1, -1, +1, -1: equal average gain and loss.
        let alt = [10.0, 11.0, 10.0, 11.0, 10.0];
        assert_eq!(rsi(&alt, 4)[4], Some(50.0));
        assert_eq!(rsi(&alt, 4)[3], None);
    }

    #[test]
    fn volume_zscore_values() {
        let z = volume_zscore(&[1.0, 1.0, 1.0, 1.0, 6.0], 5);
        // mean 2, squared deviations 1+1+1+1+16 = 20, sample variance 5.
        assert!((z[4].unwrap() - 4.0 / 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(z[3], None);
        assert_eq!(volume_zscore(&[7.0; 6], 5)[5], Some(0.0));
        let scaled = volume_zscore(&[3.0, 5.0, 1.0, 4.0, 6.0], 5)[4].unwrap();
        let base = volume_zscore(&[0.3, 0.5, 0.1, 0.4, 0.6], 5)[4].unwrap();
        assert!((scaled - base).abs() < 1e-12);
    }

    #[test]
    fn sign_correlation_cases() {
        let up: Vec<f64> = (0..8).map(|i| 100.0 + i as f64).collect();
        assert_eq!(sign_correlation(&up, 5)[7], Some(0.0));
        let alt: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 100.0 } else { 101.0 }).collect();
        assert!((sign_correlation(&alt, 5)[7].unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(sign_correlation(&alt, 5)[5], None);
        // Moves + + - - + + - -: each sign repeats its predecessor half the time.
        let runs = [100.0, 101.0, 102.0, 101.0, 100.0, 101.0, 102.0, 101.0, 100.0];
        let v = sign_correlation(&runs, 4)[8].unwrap();
        assert!(v.abs() < 1.0);
        // Two long runs: every pair but the switch agrees.
        let twin = [1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0];
        let same: Vec<f64> = twin.to_vec();
        assert!(sign_correlation(&same, 5)[6].unwrap() > 0.0);
    }

    #[test]
    fn gap_and_clv() {
        let bars = vec![bar(0, 99.0, 101.0, 98.0, 100.0, 1.0), bar(1, 102.0, 103.0, 101.0, 102.5, 1.0)];
        let g = overnight_gap(&bars);
        assert_eq!(g[0], None);
        assert!((g[1].unwrap() - 0.02).abs() < 1e-12);
        assert_eq!(clv(&bar(0, 1.0, 2.0, 1.0, 2.0, 0.0)), 1.0);
        assert_eq!(clv(&bar(0, 2.0, 2.0, 1.0, 1.0, 0.0)), -1.0);
        assert_eq!(clv(&bar(0, 1.5, 2.0, 1.0, 1.5, 0.0)), 0.0);
        assert_eq!(clv(&bar(0, 1.0, 1.0, 1.0, 1.0, 0.0)), 0.0);
    }

    #[test]
    fn dataset_row_accounting() {
        let closes: Vec<f64> = (0..25).map(|i| 50.0 + (i * 7 % 5) as f64).collect();
        let m = build_dataset(&series_from_closes(&closes)).unwrap();
        assert_eq!(m.n_rows(), 25 - WARM_UP - 1);
        assert_eq!(m.first_bar, WARM_UP);
        assert_eq!(m.dataset.feature_names().len(), 8);

        let rising: Vec<f64> = (0..30).map(|i| 10.0 + i as f64).collect();
        let m = build_dataset(&series_from_closes(&rising)).unwrap();
        assert!(m.dataset.labels().iter().all(|l| l.is_pos()));
        let flat = vec![10.0; 30];
        let m = build_dataset(&series_from_closes(&flat)).unwrap();
        assert!(m.dataset.labels().iter().all(|l| !l.is_pos()));

        assert!(matches!(
            build_dataset(&series_from_closes(&rising[..22])),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn bar_validation_and_sorting() {
        let bad = bar(3, 1.0, 1.0, 2.0, 1.0, 1.0);
        assert!(matches!(bad.validate(), Err(Error::InvalidBar { date, .. }) if date == bad.date));
        let a = bar(2, 1.0, 1.0, 1.0, 1.0, 1.0);
        let b = bar(1, 1.0, 1.0, 1.0, 1.0, 1.0);
        let sorted = normalize_series(vec![a, b]).unwrap();
        assert_eq!(sorted[0].date, b.date);
        assert_eq!(normalize_series(vec![a, a]), Err(Error::DuplicateDate(a.date)));
    }

    #[test]
    fn binomial_tail() {
        assert_eq!(binomial_test(0, 10, 0.3).unwrap(), 1.0);
        let all = binomial_test(20, 20, 0.5).unwrap();
        assert!((all - 0.5f64.powi(20)).abs() < 1e-18);
        assert!(binomial_test(11, 10, 0.5).is_err());
        assert!(binomial_test(1, 10, 1.0).is_err());
    }

    #[test]
    fn majority() {
        let mut v = vec![Label::Pos; 6];
        v.extend([Label::Neg; 4]);
        assert_eq!(majority_baseline(&v).unwrap(), (0.6, Label::Pos));
        assert_eq!(
            majority_baseline(&[Label::Pos, Label::Neg]).unwrap(),
            (0.5, Label::Neg)
        );
        assert_eq!(majority_baseline(&[Label::Pos]).unwrap(), (1.0, Label::Pos));
        assert!(majority_baseline(&[]).is_err());
    }
}
