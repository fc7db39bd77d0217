//! CSV and JSON readers and writers.
//!
//! Every CSV is UTF-8, comma-separated, with a mandatory header row. Floats
//! are written in Rust's shortest round-trip form, so reading a file back
//! reproduces the exact values.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use stepforest_core::backtest::{EquityCurve, Heatmap};
use stepforest_core::finance::{self, OhlcvBar};
use stepforest_core::forest::{ImportanceReport, PairFrequency};
use stepforest_core::synth::SweepResult;
use stepforest_core::tuning::CvResult;
use stepforest_core::{Forest, Label, LabeledDataset};

use crate::error::{IoError, Result};

/// Label-column tokens of the two classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelTokens {
    pub positive: String,
    pub negative: String,
}

impl Default for LabelTokens {
    fn default() -> Self {
        Self {
            positive: "1".into(),
            negative: "0".into(),
        }
    }
}

impl LabelTokens {
    pub fn token(&self, label: Label) -> &str {
        match label {
            Label::Pos => &self.positive,
            Label::Neg => &self.negative,
        }
    }
}

/// Feature columns of a CSV, with labels when the label column is present.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    /// Row-major.
    pub values: Vec<f64>,
    pub labels: Option<Vec<Label>>,
}

impl FeatureTable {
    pub fn n_rows(&self) -> usize {
        self.values.len() / self.feature_names.len().max(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.feature_names.len();
        &self.values[i * k..(i + 1) * k]
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|source| IoError::File {
        path: path.into(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(BufReader::new(file)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.into(),
        source,
    }
}

fn parse_number(path: &Path, line: u64, column: &str, cell: &str) -> Result<f64> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IoError::NonNumeric {
            path: path.into(),
            line,
            column: column.into(),
            value: cell.into(),
        }),
    }
}

/// Reads a feature CSV. Every column but `label_column` is a feature, in
/// header order. A missing label column is an error when `require_label`
/// is set and yields `labels: None` otherwise.
pub fn read_feature_table(
    path: &Path,
    label_column: &str,
    tokens: &LabelTokens,
    require_label: bool,
) -> Result<FeatureTable> {
    let mut reader = open_reader(path)?;
    let header = reader.headers().map_err(csv_err(path))?.clone();
    let label_idx = header.iter().position(|h| h == label_column);
    if label_idx.is_none() && require_label {
        return Err(IoError::MissingColumn {
            path: path.into(),
            column: label_column.into(),
        });
    }
    let feature_cols: Vec<(usize, String)> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut values = Vec::new();
    let mut raw_labels: Vec<(u64, String)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err(path))?;
        let line = record.position().map_or(0, |p| p.line());
        for (i, name) in &feature_cols {
            values.push(parse_number(path, line, name, &record[*i])?);
        }
        if let Some(li) = label_idx {
            raw_labels.push((line, record[li].trim().to_string()));
        }
    }
    if values.is_empty() && raw_labels.is_empty() {
        return Err(IoError::Empty { path: path.into() });
    }

    let labels = match label_idx {
        None => None,
        Some(_) => {
            let distinct: BTreeSet<&str> = raw_labels.iter().map(|(_, t)| t.as_str()).collect();
            if distinct.len() > 2 {
                return Err(IoError::LabelCardinality {
                    path: path.into(),
                    count: distinct.len(),
                    tokens: distinct.into_iter().collect::<Vec<_>>().join(", "),
                });
            }
            let labels = raw_labels
                .iter()
                .map(|(line, t)| {
                    if *t == tokens.positive {
                        Ok(Label::Pos)
                    } else if *t == tokens.negative {
                        Ok(Label::Neg)
                    } else {
                        Err(IoError::UnknownLabel {
                            path: path.into(),
                            line: *line,
                            token: t.clone(),
                            positive: tokens.positive.clone(),
                            negative: tokens.negative.clone(),
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Some(labels)
        }
    };
    Ok(FeatureTable {
        feature_names: feature_cols.into_iter().map(|(_, n)| n).collect(),
        values,
        labels,
    })
}

pub fn load_feature_csv(path: &Path, label_column: &str, tokens: &LabelTokens) -> Result<LabeledDataset> {
    let table = read_feature_table(path, label_column, tokens, true)?;
    let labels = table.labels.expect("label column is required");
    Ok(LabeledDataset::from_row_major(table.feature_names, table.values, labels)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| IoError::File {
            path: dir.into(),
            source,
        })?;
    }
    let file = File::create(path).map_err(|source| IoError::File {
        path: path.into(),
        source,
    })?;
    Ok(BufWriter::new(file))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn finish(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush().map_err(|source| IoError::File {
        path: path.into(),
        source,
    })
}

pub fn write_feature_csv(path: &Path, ds: &LabeledDataset, label_column: &str, tokens: &LabelTokens) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    header.push(label_column);
    w.write_record(&header).map_err(csv_err(path))?;
    for (i, row) in ds.rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        rec.push(tokens.token(ds.label(i)).to_string());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    finish(path, w)
}

const OHLCV_COLUMNS: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];

/// Reads `date,open,high,low,close,volume` (any column order), validates
/// every bar and returns the series sorted by date.
pub fn load_ohlcv(path: &Path) -> Result<Vec<OhlcvBar>> {
    let mut reader = open_reader(path)?;
    let header = reader.headers().map_err(csv_err(path))?.clone();
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(OHLCV_COLUMNS) {
        *slot = header
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| IoError::MissingColumn {
                path: path.into(),
                column: name.into(),
            })?;
    }
    let mut bars = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err(path))?;
        let line = record.position().map_or(0, |p| p.line());
        let raw_date = record[idx[0]].trim();
        let date = raw_date.parse::<NaiveDate>().map_err(|_| IoError::BadDate {
            path: path.into(),
            line,
            value: raw_date.into(),
        })?;
        let num = |k: usize| parse_number(path, line, OHLCV_COLUMNS[k], &record[idx[k]]);
        bars.push(OhlcvBar {
            date,
            open: num(1)?,
            high: num(2)?,
            low: num(3)?,
            close: num(4)?,
            volume: num(5)?,
        });
    }
    if bars.is_empty() {
        return Err(IoError::Empty { path: path.into() });
    }
    Ok(finance::normalize_series(bars)?)
}

pub fn write_ohlcv(path: &Path, bars: &[OhlcvBar]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(OHLCV_COLUMNS).map_err(csv_err(path))?;
    for b in bars {
        w.write_record([
            b.date.to_string(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.volume.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    finish(path, w)
}

pub const MODEL_FORMAT: &str = "stepforest-model/1";

/// A persisted forest plus the label convention of its training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub label_column: String,
    pub labels: LabelTokens,
    pub forest: Forest,
}

impl ModelFile {
    pub fn new(forest: Forest, label_column: &str, labels: &LabelTokens) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            label_column: label_column.into(),
            labels: labels.clone(),
            forest,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| IoError::Json {
        path: path.into(),
        source,
    })?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|source| IoError::File {
            path: path.into(),
            source,
        })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|source| IoError::File {
        path: path.into(),
        source,
    })?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| IoError::Json {
        path: path.into(),
        source,
    })
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    write_json(path, model)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let model: ModelFile = read_json(path)?;
    if model.format != MODEL_FORMAT {
        return Err(IoError::ModelFormat {
            path: path.into(),
            found: model.format,
        });
    }
    model.forest.params.validate()?;
    Ok(model)
}

/// One row per candidate and fold.
pub fn write_cv_csv(path: &Path, cv: &CvResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "candidate",
        "max_depth",
        "min_samples_leaf",
        "feature_subset",
        "n_buckets",
        "n_trees",
        "bootstrap",
        "fold",
        "accuracy",
        "selected",
    ])
    .map_err(csv_err(path))?;
    for (c, cand) in cv.candidates.iter().enumerate() {
        let p = &cand.params;
        for (fold, acc) in cand.fold_scores.iter().enumerate() {
            w.write_record([
                c.to_string(),
                p.tree.max_depth.to_string(),
                p.tree.min_samples_leaf.to_string(),
                p.tree.feature_subset.name().to_string(),
                p.tree.n_buckets.to_string(),
                p.n_trees.to_string(),
                p.bootstrap.to_string(),
                fold.to_string(),
                acc.to_string(),
                (c == cv.selected).to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    finish(path, w)
}

/// Long form: `rho, classifier, repeat, accuracy, importance_<feature>...`.
pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["rho", "classifier", "repeat", "accuracy"].map(String::from).to_vec();
    header.extend(sweep.feature_names.iter().map(|n| format!("importance_{n}")));
    w.write_record(&header).map_err(csv_err(path))?;
    for cell in &sweep.cells {
        let mut rec = vec![
            cell.rho.to_string(),
            cell.classifier.name().to_string(),
            cell.repeat.to_string(),
            cell.accuracy.to_string(),
        ];
        rec.extend(cell.importance.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    finish(path, w)
}

pub fn write_equity_csv(path: &Path, curve: &EquityCurve) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["date", "position", "daily_return", "equity"])
        .map_err(csv_err(path))?;
    for p in &curve.points {
        w.write_record([
            p.date.to_string(),
            p.position.name().to_string(),
            p.daily_return.to_string(),
            p.equity.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    finish(path, w)
}

pub fn write_heatmap_csv(path: &Path, heatmap: &Heatmap) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x", "y", "p_plus"]).map_err(csv_err(path))?;
    let r = heatmap.xs.len();
    for (iy, y) in heatmap.ys.iter().enumerate() {
        for (ix, x) in heatmap.xs.iter().enumerate() {
            w.write_record([x.to_string(), y.to_string(), heatmap.p_plus[iy * r + ix].to_string()])
                .map_err(csv_err(path))?;
        }
    }
    finish(path, w)
}

pub fn write_importance_csv(path: &Path, report: &ImportanceReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["feature", "split_count", "importance"])
        .map_err(csv_err(path))?;
    for ((name, count), imp) in report
        .feature_names
        .iter()
        .zip(&report.split_counts)
        .zip(&report.importance)
    {
        w.write_record([name.clone(), count.to_string(), imp.to_string()])
            .map_err(csv_err(path))?;
    }
    finish(path, w)
}

pub fn write_pairs_csv(path: &Path, names: &[String], pairs: &[PairFrequency]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["feature_a", "feature_b", "count", "frequency"])
        .map_err(csv_err(path))?;
    for p in pairs {
        w.write_record([
            names[p.features.0].clone(),
            names[p.features.1].clone(),
            p.count.to_string(),
            p.frequency.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    finish(path, w)
}

/// `row, p_plus, predicted`, plus `label` when labels are known.
pub fn write_predictions_csv(
    path: &Path,
    p_plus: &[f64],
    tokens: &LabelTokens,
    labels: Option<&[Label]>,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["row", "p_plus", "predicted"];
    if labels.is_some() {
        header.push("label");
    }
    w.write_record(&header).map_err(csv_err(path))?;
    for (i, &p) in p_plus.iter().enumerate() {
        let predicted = stepforest_core::forest::classify_probability(p);
        let mut rec = vec![i.to_string(), p.to_string(), tokens.token(predicted).to_string()];
        if let Some(l) = labels {
            rec.push(tokens.token(l[i]).to_string());
        }
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    finish(path, w)
}

/// Re-reads a written CSV and checks its data-row count.
pub fn verify_csv_rows(path: &Path, expected: usize) -> Result<()> {
    let mut reader = open_reader(path)?;
    let mut found = 0;
    for record in reader.records() {
        record.map_err(csv_err(path))?;
        found += 1;
    }
    if found != expected {
        return Err(IoError::Verify {
            path: path.into(),
            expected,
            found,
        });
    }
    Ok(())
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn reads_a_small_feature_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "f0,f1,y\n0.1,2,1\n0.5,3,0\n0.9,-1,1\n");
        let ds = load_feature_csv(&p, "y", &LabelTokens::default()).unwrap();
        assert_eq!((ds.n_rows(), ds.n_features()), (3, 2));
        assert_eq!(ds.labels(), &[Label::Pos, Label::Neg, Label::Pos]);
        assert_eq!(ds.row(2), &[0.9, -1.0]);
    }

    #[test]
    fn distinct_failures() {
        let dir = tempfile::tempdir().unwrap();
        let t = LabelTokens::default();
        let p = write(dir.path(), "c.csv", "f0,y\n1,a\n2,b\n3,c\n");
        let e = load_feature_csv(&p, "y", &t).unwrap_err();
        assert!(e.to_string().contains("label cardinality 3"), "{e}");

        let p = write(dir.path(), "e.csv", "f0,y\n");
        let e = load_feature_csv(&p, "y", &t).unwrap_err();
        assert!(e.to_string().contains("empty dataset"), "{e}");

        let p = write(dir.path(), "n.csv", "f0,y\n1,1\nabc,0\n");
        let e = load_feature_csv(&p, "y", &t).unwrap_err();
        assert!(matches!(e, IoError::NonNumeric { line: 3, .. }), "{e}");

        let p = write(dir.path(), "m.csv", "f0,label\n1,1\n");
        assert!(matches!(load_feature_csv(&p, "y", &t), Err(IoError::MissingColumn { .. })));

        assert!(matches!(
            load_feature_csv(&dir.path().join("nope.csv"), "y", &t),
            Err(IoError::File { .. })
        ));

        let p = write(dir.path(), "u.csv", "f0,y\n1,yes\n2,0\n");
        assert!(matches!(load_feature_csv(&p, "y", &t), Err(IoError::UnknownLabel { line: 2, .. })));
    }

    #[test]
    fn feature_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![vec![0.1 + 0.2, 1e-300], vec![-3.5, 7.0 / 3.0]];
        let ds = LabeledDataset::from_rows(vec!["a".into(), "b".into()], &rows, vec![Label::Neg, Label::Pos]).unwrap();
        let t = LabelTokens {
            positive: "up".into(),
            negative: "down".into(),
        };
        let p = dir.path().join("sub/ds.csv");
        write_feature_csv(&p, &ds, "target", &t).unwrap();
        assert_eq!(load_feature_csv(&p, "target", &t).unwrap(), ds);
    }

    #[test]
    fn ohlcv_reading() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "o.csv",
            "date,open,high,low,close,volume\n2020-01-03,10,11,9,10.5,100\n2020-01-01,10,11,9,10,100\n2020-01-02,10,12,9,11,50\n",
        );
        let bars = load_ohlcv(&p).unwrap();
        assert_eq!(bars.len(), 3);
        assert!(bars.windows(2).all(|w| w[0].date < w[1].date));

        let p = write(dir.path(), "bad.csv", "date,open,high,low,close,volume\n2020-01-05,10,9,11,10,1\n");
        let e = load_ohlcv(&p).unwrap_err();
        assert!(e.to_string().contains("2020-01-05"), "{e}");

        let out = dir.path().join("copy.csv");
        write_ohlcv(&out, &bars).unwrap();
        assert_eq!(load_ohlcv(&out).unwrap(), bars);
    }
}
