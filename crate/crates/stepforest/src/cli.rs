//! The `stepforest` command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use stepforest_core::backtest::{
    self, AuditRecord, EquityCurve, PerfReport, Significance, WalkForwardResult,
};
use stepforest_core::finance;
use stepforest_core::forest::{ForestParams, PairFrequency};
use stepforest_core::seed::{self, stream};
use stepforest_core::synth::{self, Classifier, SweepSummaryRow};
use stepforest_core::tuning::{self, ParamGrid};
use stepforest_core::{Forest, InductionMode};

use crate::config::RunConfig;
use crate::error::IoError;
use crate::io::{self, ModelFile};

#[derive(Debug, Parser)]
#[command(name = "stepforest", version, about = "Greedy and lookahead decision forests")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Directory for every output file.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Accuracy-versus-rho sweep: sweep.csv and sweep_summary.json.
    Synth(SynthArgs),
    /// Fit a forest on a feature CSV: model.json, cv.csv and cv.json.
    Train(TrainArgs),
    /// Score a feature CSV with a saved model: predictions.csv.
    Predict(PredictArgs),
    /// Split-count importance of a saved model: importance.csv.
    Importance(ModelArgs),
    /// Walk-forward backtest of lookahead and greedy forests on OHLCV data.
    Backtest(BacktestArgs),
    /// Probability grid over two features of a saved model: heatmap.csv.
    Heatmap(HeatmapArgs),
    /// Write a synthetic XOR feature CSV.
    GenData(GenDataArgs),
    /// Write a synthetic OHLCV series whose return signs follow an XOR rule.
    GenMarket(GenMarketArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Signal-to-noise values (repeatable), replacing the configured list.
    #[arg(long = "rho")]
    pub rho: Vec<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Classifiers (repeatable): lrf, grf, gdt.
    #[arg(long = "classifier", value_enum)]
    pub classifiers: Vec<ClassifierArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassifierArg {
    Lrf,
    Grf,
    Gdt,
}

impl From<ClassifierArg> for Classifier {
    fn from(c: ClassifierArg) -> Self {
        match c {
            ClassifierArg::Lrf => Classifier::Lrf,
            ClassifierArg::Grf => Classifier::Grf,
            ClassifierArg::Gdt => Classifier::Gdt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Greedy,
    Lookahead,
}

impl From<ModeArg> for InductionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Greedy => InductionMode::Greedy,
            ModeArg::Lookahead => InductionMode::Lookahead,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature CSV with a label column.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Model path; defaults to model.json in the output directory.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature CSV; the label column is optional.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// CSV with date,open,high,low,close,volume.
    #[arg(long)]
    pub ohlcv: PathBuf,
    /// Also run the no-lookahead audit on every window.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// First feature, by name or index; defaults to the most frequent block pair.
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub y: Option<String>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Values of the remaining features in index order; training medians
    /// when omitted.
    #[arg(long, value_delimiter = ',')]
    pub fixed: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 0.75)]
    pub rho: f64,
    /// Output path; defaults to data.csv in the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenMarketArgs {
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub n_bars: Option<usize>,
    /// Output path; defaults to market.csv in the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .context("building the worker pool")?;
    std::fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let out = cli.out_dir.as_path();
    pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(&config, a, out),
        Command::Train(a) => cmd_train(&config, a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Importance(a) => cmd_importance(a, out),
        Command::Backtest(a) => cmd_backtest(&config, a, out),
        Command::Heatmap(a) => cmd_heatmap(&config, a, out),
        Command::GenData(a) => cmd_gen_data(&config, a, out),
        Command::GenMarket(a) => cmd_gen_market(&config, a, out),
    })
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    seed: u64,
    feature_names: &'a [String],
    cells: Vec<SweepSummaryRow>,
}

fn cmd_synth(config: &RunConfig, args: &SynthArgs, out: &Path) -> Result<()> {
    let mut plan = config.sweep_plan();
    if !args.rho.is_empty() {
        plan.rho_values = args.rho.clone();
    }
    if let Some(m) = args.repeats {
        plan.repeats = m;
    }
    if !args.classifiers.is_empty() {
        plan.classifiers = args.classifiers.iter().map(|&c| c.into()).collect();
    }
    plan.validate().context("invalid sweep")?;
    let result = synth::run_sweep(&plan)?;

    let csv = out.join("sweep.csv");
    io::write_sweep_csv(&csv, &result)?;
    io::verify_csv_rows(&csv, plan.rho_values.len() * plan.classifiers.len() * plan.repeats)?;
    let summary = result.summary();
    io::write_json(
        &out.join("sweep_summary.json"),
        &SweepSummary {
            seed: config.seed,
            feature_names: &result.feature_names,
            cells: summary.clone(),
        },
    )?;
    println!("rho\tclassifier\tmean_accuracy\tstd");
    for row in &summary {
        println!(
            "{:.2}\t{}\t{:.4}\t{:.4}",
            row.rho,
            row.classifier.name(),
            row.mean_accuracy,
            row.std_accuracy
        );
    }
    Ok(())
}

fn cmd_train(config: &RunConfig, args: &TrainArgs, out: &Path) -> Result<()> {
    let data = &config.data;
    let ds = io::load_feature_csv(&args.data, &data.label_column, &data.labels)?;
    let mode = args.mode.map_or(config.train.mode, Into::into);
    let grid: &ParamGrid = &config.train.grid;
    grid.validate(mode).context("invalid training grid")?;

    let params = if grid.n_candidates() > 1 {
        let cv = tuning::cross_validate(&ds, grid, config.train.n_folds, mode, config.seed)?;
        let csv = out.join("cv.csv");
        io::write_cv_csv(&csv, &cv)?;
        io::verify_csv_rows(&csv, cv.candidates.len() * cv.n_folds)?;
        io::write_json(&out.join("cv.json"), &cv)?;
        println!(
            "cv: {} candidates, selected #{} (mean accuracy {:.4})",
            cv.candidates.len(),
            cv.selected,
            cv.candidates[cv.selected].mean
        );
        *cv.selected_params()
    } else {
        grid.candidates(mode)[0]
    };
    let params = ForestParams {
        seed: seed::derive_seed(config.seed, &[stream::MODEL]),
        ..params
    };
    let forest = Forest::fit(&ds, &params)?;
    let train_accuracy = forest.accuracy(&ds)?;
    let model_path = args.model.clone().unwrap_or_else(|| out.join("model.json"));
    let model = ModelFile::new(forest, &data.label_column, &data.labels);
    io::save_model(&model_path, &model)?;
    if io::load_model(&model_path)? != model {
        bail!("{} does not read back identically", model_path.display());
    }
    println!(
        "{} forest: {} trees, depth {}, min leaf {}, subset {}; training accuracy {:.4}",
        mode.name(),
        params.n_trees,
        params.tree.max_depth,
        params.tree.min_samples_leaf,
        params.tree.feature_subset.name(),
        train_accuracy
    );
    println!("model written to {}", model_path.display());
    Ok(())
}

fn cmd_predict(args: &PredictArgs, out: &Path) -> Result<()> {
    let model = io::load_model(&args.model)?;
    let table = io::read_feature_table(&args.data, &model.label_column, &model.labels, false)?;
    let expected = &model.forest.feature_names;
    if &table.feature_names != expected {
        return Err(IoError::Schema(format!(
            "model expects {} features [{}], {} has {} [{}]",
            expected.len(),
            expected.join(", "),
            args.data.display(),
            table.feature_names.len(),
            table.feature_names.join(", ")
        ))
        .into());
    }
    let p_plus = (0..table.n_rows())
        .map(|i| model.forest.predict_proba(table.row(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let csv = out.join("predictions.csv");
    io::write_predictions_csv(&csv, &p_plus, &model.labels, table.labels.as_deref())?;
    io::verify_csv_rows(&csv, p_plus.len())?;
    if let Some(labels) = &table.labels {
        let correct = p_plus
            .iter()
            .zip(labels)
            .filter(|(p, l)| stepforest_core::forest::classify_probability(**p) == **l)
            .count();
        println!("accuracy {:.4} ({correct}/{})", correct as f64 / labels.len() as f64, labels.len());
    }
    println!("{} predictions written to {}", p_plus.len(), csv.display());
    Ok(())
}

fn cmd_importance(args: &ModelArgs, out: &Path) -> Result<()> {
    let model = io::load_model(&args.model)?;
    let report = model.forest.feature_importance();
    let csv = out.join("importance.csv");
    io::write_importance_csv(&csv, &report)?;
    io::verify_csv_rows(&csv, report.feature_names.len())?;
    for ((name, count), imp) in report
        .feature_names
        .iter()
        .zip(&report.split_counts)
        .zip(&report.importance)
    {
        println!("{name}\t{count}\t{imp:.4}");
    }
    Ok(())
}

#[derive(Serialize)]
struct WindowSummary {
    index: usize,
    is_start: usize,
    os_start: usize,
    os_len: usize,
    theta: f64,
    max_depth: usize,
    min_samples_leaf: usize,
    n_trees: usize,
    cv_sharpe: Option<f64>,
}

#[derive(Serialize)]
struct StrategySummary {
    report: PerfReport,
    significance: Option<Significance>,
    windows: Vec<WindowSummary>,
    audit: Option<Vec<AuditRecord>>,
}

#[derive(Serialize)]
struct BacktestReport {
    seed: u64,
    first_os_date: String,
    last_os_date: String,
    lrf: StrategySummary,
    grf: StrategySummary,
    buy_and_hold: PerfReport,
}

fn summarize(
    market: &finance::MarketDataset,
    result: &WalkForwardResult,
    audit: Option<Vec<AuditRecord>>,
) -> Result<StrategySummary> {
    Ok(StrategySummary {
        report: result.curve.report()?,
        significance: Some(backtest::significance(market, result)?),
        windows: result
            .windows
            .iter()
            .map(|w| WindowSummary {
                index: w.window.index,
                is_start: w.window.is.start,
                os_start: w.window.os.start,
                os_len: w.window.os.len(),
                theta: w.selected.theta,
                max_depth: w.selected.forest.tree.max_depth,
                min_samples_leaf: w.selected.forest.tree.min_samples_leaf,
                n_trees: w.selected.forest.n_trees,
                cv_sharpe: w.cv_sharpe,
            })
            .collect(),
        audit,
    })
}

fn write_curve(path: &Path, curve: &EquityCurve) -> Result<()> {
    io::write_equity_csv(path, curve)?;
    io::verify_csv_rows(path, curve.len())?;
    Ok(())
}

fn cmd_backtest(config: &RunConfig, args: &BacktestArgs, out: &Path) -> Result<()> {
    let bt = &config.backtest;
    let bars = io::load_ohlcv(&args.ohlcv)?;
    let market = finance::build_dataset(&bars)?;
    bt.window.windows(market.n_rows())?;
    let audit = args.audit || bt.audit;

    let run = |grid: &ParamGrid, mode: InductionMode| -> Result<StrategySummary> {
        let result = backtest::run_walkforward_on(&market, &bt.window, grid, mode, config.seed)?;
        let audit = if audit {
            let records = backtest::audit_walkforward(
                &bars,
                grid,
                &result,
                config.seed,
                seed::derive_seed(config.seed, &[stream::AUDIT]),
            )?;
            let failed = records.iter().filter(|r| !r.passed()).count();
            println!("{} audit: {failed} of {} windows failed", mode.name(), records.len());
            Some(records)
        } else {
            None
        };
        let name = match mode {
            InductionMode::Lookahead => "equity_lrf.csv",
            InductionMode::Greedy => "equity_grf.csv",
        };
        write_curve(&out.join(name), &result.curve)?;
        summarize(&market, &result, audit)
    };
    let lrf = run(&bt.lrf, InductionMode::Lookahead)?;
    let grf = run(&bt.grf, InductionMode::Greedy)?;
    let hold = backtest::buy_and_hold(&market, &bt.window)?;
    write_curve(&out.join("equity_buy_and_hold.csv"), &hold)?;
    let report = BacktestReport {
        seed: config.seed,
        first_os_date: hold.points[0].date.to_string(),
        last_os_date: hold.points[hold.len() - 1].date.to_string(),
        lrf,
        grf,
        buy_and_hold: hold.report()?,
    };
    io::write_json(&out.join("report.json"), &report)?;

    let fmt = |r: &PerfReport| {
        format!(
            "CAGR {:+.2}%  Sharpe {}  SR {}  MDD {:.2}%",
            100.0 * r.cagr,
            r.sharpe.map_or("n/a".into(), |s| format!("{s:.2}")),
            r.success_rate.map_or("n/a".into(), |s| format!("{:.1}%", 100.0 * s)),
            100.0 * r.mdd
        )
    };
    println!("LRF           {}", fmt(&report.lrf.report));
    println!("GRF           {}", fmt(&report.grf.report));
    println!("buy and hold  {}", fmt(&report.buy_and_hold));
    if audit {
        let failed = [&report.lrf, &report.grf]
            .iter()
            .flat_map(|s| s.audit.iter().flatten())
            .filter(|r| !r.passed())
            .count();
        if failed > 0 {
            bail!("no-lookahead audit failed on {failed} windows");
        }
    }
    Ok(())
}

fn resolve_feature(forest: &Forest, spec: &str) -> Result<usize> {
    if let Some(i) = forest.feature_names.iter().position(|n| n == spec) {
        return Ok(i);
    }
    match spec.parse::<usize>() {
        Ok(i) if i < forest.n_features() => Ok(i),
        _ => bail!(
            "unknown feature `{spec}`; expected an index below {} or one of: {}",
            forest.n_features(),
            forest.feature_names.join(", ")
        ),
    }
}

fn print_pairs(forest: &Forest, pairs: &[PairFrequency], top: usize) {
    println!("most frequent block pairs:");
    for p in pairs.iter().take(top) {
        println!(
            "  {} + {}\t{}\t{:.4}",
            forest.feature_names[p.features.0], forest.feature_names[p.features.1], p.count, p.frequency
        );
    }
}

fn cmd_heatmap(config: &RunConfig, args: &HeatmapArgs, out: &Path) -> Result<()> {
    let model = io::load_model(&args.model)?;
    let forest = &model.forest;
    let pairs = forest.block_pair_frequencies();
    print_pairs(forest, &pairs, config.heatmap.top_pairs);
    io::write_pairs_csv(&out.join("pairs.csv"), &forest.feature_names, &pairs)?;

    let default_pair = pairs.first().map_or((0, 1), |p| p.features);
    let x = args.x.as_deref().map_or(Ok(default_pair.0), |s| resolve_feature(forest, s))?;
    let y = args.y.as_deref().map_or(Ok(default_pair.1), |s| resolve_feature(forest, s))?;
    let resolution = args.resolution.unwrap_or(config.heatmap.resolution);
    let heatmap = backtest::heatmap_grid(forest, x, y, resolution, args.fixed.as_deref())?;
    let csv = out.join("heatmap.csv");
    io::write_heatmap_csv(&csv, &heatmap)?;
    io::verify_csv_rows(&csv, resolution * resolution)?;
    println!(
        "heatmap of {} x {} ({resolution}x{resolution}) written to {}",
        heatmap.name_x,
        heatmap.name_y,
        csv.display()
    );
    Ok(())
}

fn cmd_gen_data(config: &RunConfig, args: &GenDataArgs, out: &Path) -> Result<()> {
    let ds = synth::generate(&config.synth_config(args.rho))?;
    let path = args.out.clone().unwrap_or_else(|| out.join("data.csv"));
    io::write_feature_csv(&path, &ds, &config.data.label_column, &config.data.labels)?;
    io::verify_csv_rows(&path, ds.n_rows())?;
    println!("{} rows written to {}", ds.n_rows(), path.display());
    Ok(())
}

fn cmd_gen_market(config: &RunConfig, args: &GenMarketArgs, out: &Path) -> Result<()> {
    let mut cfg = config.market_config();
    if let Some(rho) = args.rho {
        cfg.rho = rho;
    }
    if let Some(n) = args.n_bars {
        cfg.n_bars = n;
    }
    let bars = synth::generate_xor_market(&cfg)?;
    let path = args.out.clone().unwrap_or_else(|| out.join("market.csv"));
    io::write_ohlcv(&path, &bars)?;
    io::verify_csv_rows(&path, bars.len())?;
    println!("{} bars written to {}", bars.len(), path.display());
    Ok(())
}
