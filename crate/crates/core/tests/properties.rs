//! Randomized invariants across the data, forest, indicator and backtest
//! modules.

use chrono::{Days, NaiveDate};
use proptest::prelude::*;
use stepforest_core::backtest::{
    cagr, compound, max_drawdown, positions_for, signal_to_position, EquityCurve, Position,
};
use stepforest_core::dataset::{holdout_indices, make_folds, quantile_thresholds};
use stepforest_core::finance::{build_dataset, indicator_matrix, OhlcvBar};
use stepforest_core::{FeatureSubset, Forest, ForestParams, InductionMode, Label, LabeledDataset, TreeParams};

fn one_column(values: &[f64]) -> LabeledDataset {
    let labels = values.iter().map(|&v| Label::from_bool(v > 0.0)).collect();
    LabeledDataset::from_row_major(vec!["f0".into()], values.to_vec(), labels).unwrap()
}

fn bars_from(steps: &[(f64, f64, f64)]) -> Vec<OhlcvBar> {
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let mut close = 100.0;
    steps
        .iter()
        .enumerate()
        .map(|(i, &(ret, gap, vol))| {
            let open = close * (1.0 + gap);
            close *= 1.0 + ret;
            OhlcvBar {
                date: start.checked_add_days(Days::new(i as u64)).unwrap(),
                open,
                high: open.max(close) * 1.01,
                low: open.min(close) * 0.99,
                close,
                volume: vol,
            }
        })
        .collect()
}

fn step() -> impl Strategy<Value = (f64, f64, f64)> {
    (-0.05f64..0.05, -0.01f64..0.01, 1e5f64..1e6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thresholds_increase_within_range_and_ignore_order(
        raw in prop::collection::vec(0u8..40, 4..120),
        b in 2usize..16,
        rotate in 0usize..120,
    ) {
        let values: Vec<f64> = raw.iter().map(|&v| f64::from(v) * 0.25).collect();
        let b = b.min(values.len());
        let q = quantile_thresholds(&one_column(&values), 0, b).unwrap();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(q.thresholds.len() < b);
        prop_assert!(q.thresholds.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(q.thresholds.iter().all(|&t| t > lo && t <= hi));

        let mut shuffled = values.clone();
        shuffled.rotate_left(rotate % values.len());
        shuffled.reverse();
        let q2 = quantile_thresholds(&one_column(&shuffled), 0, b).unwrap();
        prop_assert_eq!(q.thresholds, q2.thresholds);
    }

    #[test]
    fn folds_partition_rows_evenly(n in 2usize..300, k in 2usize..12, seed: u64) {
        let k = k.min(n);
        let plan = make_folds(n, k, seed).unwrap();
        let sizes = plan.fold_sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(max - min <= 1);
        for f in 0..k {
            let mut all = plan.test_indices(f);
            all.extend(plan.train_indices(f));
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn holdout_is_a_partition(n in 4usize..500, frac in 0.05f64..0.95, seed: u64, chrono_split: bool) {
        if let Ok((train, test)) = holdout_indices(n, frac, seed, chrono_split) {
            prop_assert_eq!(train.len(), (frac * n as f64 - 1e-9).ceil() as usize);
            let mut all = train.clone();
            all.extend(&test);
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            if chrono_split {
                prop_assert!(train.iter().all(|&a| test.iter().all(|&b| a < b)));
            }
        }
    }

    #[test]
    fn theta_bands_only_shrink(p in 0.0f64..=1.0, t1 in 0.0f64..0.49, t2 in 0.0f64..0.49) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let wide = signal_to_position(p, hi).unwrap();
        let narrow = signal_to_position(p, lo).unwrap();
        if wide != Position::Flat {
            prop_assert_eq!(wide, narrow);
        }
        prop_assert_ne!(signal_to_position(p, 0.0).unwrap(), Position::Flat);
    }

    #[test]
    fn equity_metrics_match_recomputation(returns in prop::collection::vec(-0.2f64..0.2, 1..300)) {
        let equity = compound(&returns).unwrap();
        let mut path = vec![1.0];
        let mut e = 1.0;
        for r in &returns {
            e *= 1.0 + r;
            path.push(e);
        }
        for (a, b) in equity.iter().zip(&path[1..]) {
            prop_assert!((a - b).abs() <= 1e-9 * b);
        }
        let mut peak = path[0];
        let mut mdd = 0.0f64;
        for &v in &path {
            peak = peak.max(v);
            mdd = mdd.max((peak - v) / peak);
        }
        prop_assert!((max_drawdown(&path).unwrap() - mdd).abs() <= 1e-9);
        let years = returns.len() as f64 / 252.0;
        let want = path[path.len() - 1].powf(1.0 / years) - 1.0;
        let got = cagr(&path, 252.0).unwrap();
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forest_probability_lies_between_its_trees(
        seed: u64,
        n in 30usize..120,
        mode_lookahead: bool,
        probe in prop::collection::vec(-0.2f64..1.2, 3),
    ) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = ((i * 37 + seed as usize % 11) % 17) as f64 / 17.0;
                let b = ((i * 53) % 13) as f64 / 13.0;
                let c = ((i * 7 + 3) % 19) as f64 / 19.0;
                vec![a, b, c]
            })
            .collect();
        let labels = rows.iter().map(|r| Label::from_bool((r[0] > 0.5) != (r[1] > 0.5))).collect();
        let ds = LabeledDataset::from_rows(vec!["a".into(), "b".into(), "c".into()], &rows, labels).unwrap();
        let params = ForestParams {
            n_trees: 7,
            tree: TreeParams {
                max_depth: 4,
                min_samples_leaf: 2,
                feature_subset: FeatureSubset::Sqrt,
                n_buckets: 8,
                mode: if mode_lookahead { InductionMode::Lookahead } else { InductionMode::Greedy },
            },
            bootstrap: true,
            seed,
        };
        let forest = Forest::fit(&ds, &params).unwrap();
        let p = forest.predict_proba(&probe).unwrap();
        let each: Vec<f64> = forest.trees.iter().map(|t| t.predict_proba(&probe)).collect();
        let lo = each.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = each.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-12 <= p && p <= hi + 1e-12);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn indicators_ignore_price_scale(steps in prop::collection::vec(step(), 30..80), scale in 0.01f64..100.0) {
        let bars = bars_from(&steps);
        let scaled: Vec<OhlcvBar> = bars
            .iter()
            .map(|b| OhlcvBar {
                open: b.open * scale,
                high: b.high * scale,
                low: b.low * scale,
                close: b.close * scale,
                ..*b
            })
            .collect();
        let a = indicator_matrix(&bars);
        let b = indicator_matrix(&scaled);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            for (x, y) in ra.iter().zip(rb) {
                prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn indicators_use_no_later_bars(
        steps in prop::collection::vec(step(), 30..80),
        noise in prop::collection::vec(step(), 80),
        cut_frac in 0.0f64..1.0,
    ) {
        let bars = bars_from(&steps);
        let cut = 21 + ((bars.len() - 22) as f64 * cut_frac) as usize;
        let mut changed = bars.clone();
        for (i, bar) in changed.iter_mut().enumerate().skip(cut + 1) {
            let (r, g, v) = noise[i];
            bar.close *= 1.0 + r;
            bar.open *= 1.0 + g;
            bar.high = bar.high.max(bar.open).max(bar.close) * 1.01;
            bar.low = bar.low.min(bar.open).min(bar.close) * 0.99;
            bar.volume = v;
        }
        let a = indicator_matrix(&bars);
        let b = indicator_matrix(&changed);
        for row in 0..=(cut - a.first_bar) {
            prop_assert_eq!(a.rows[row], b.rows[row]);
        }
        let da = build_dataset(&bars).unwrap();
        let db = build_dataset(&changed).unwrap();
        for row in 0..(cut - da.first_bar) {
            prop_assert_eq!(da.dataset.row(row), db.dataset.row(row));
            prop_assert_eq!(da.dataset.label(row), db.dataset.label(row));
        }
    }

    #[test]
    fn equity_curve_report_matches_its_returns(
        steps in prop::collection::vec(step(), 40..120),
        probs in prop::collection::vec(0.0f64..=1.0, 120),
        theta in 0.0f64..0.3,
    ) {
        let market = build_dataset(&bars_from(&steps)).unwrap();
        let rows: Vec<usize> = (0..market.n_rows()).collect();
        let positions = positions_for(&probs[..rows.len()], theta).unwrap();
        let curve = EquityCurve::from_positions(&market, &rows, &positions).unwrap();
        let report = curve.report().unwrap();
        let mut equity = vec![1.0];
        for (&r, p) in rows.iter().zip(&positions) {
            let last = equity[equity.len() - 1];
            equity.push(last * (1.0 + p.exposure() * market.forward_returns[r]));
        }
        let last = equity[equity.len() - 1];
        prop_assert!((report.final_equity - last).abs() <= 1e-9 * last);
        prop_assert!((report.cagr - cagr(&equity, 252.0).unwrap()).abs() <= 1e-9);
        prop_assert!((report.mdd - max_drawdown(&equity).unwrap()).abs() <= 1e-9);
    }
}
