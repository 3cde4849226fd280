//! Datasets: the synthetic toy problem, the housing-derived PD1–PD3 sets, CSV
//! input/output and stratified splitting.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::losses::Label;
use crate::seed;

/// A feature vector with its ternary label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: Label,
}

/// Per-label sample counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub positive: usize,
    pub negative: usize,
    pub ambiguous: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.positive + self.negative + self.ambiguous
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    feature_dim: usize,
    samples: Vec<LabeledSample>,
}

impl Dataset {
    /// All samples must share one dimension and have finite features.
    pub fn new(name: impl Into<String>, samples: Vec<LabeledSample>) -> Result<Self> {
        let feature_dim = samples.first().map_or(0, |s| s.x.len());
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != feature_dim {
                return Err(Error::dims(format!(
                    "sample {i} has {} features, expected {feature_dim}",
                    s.x.len()
                )));
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!("sample {i} has a non-finite feature")));
            }
        }
        Ok(Dataset {
            name: name.into(),
            feature_dim,
            samples,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.y).collect()
    }

    /// Features as rows of a matrix.
    pub fn features(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.feature_dim, |i, j| self.samples[i].x[j])
    }

    pub fn counts(&self) -> ClassCounts {
        let mut counts = ClassCounts::default();
        for s in &self.samples {
            match s.y {
                Label::Positive => counts.positive += 1,
                Label::Negative => counts.negative += 1,
                Label::Ambiguous => counts.ambiguous += 1,
            }
        }
        counts
    }

    /// The positive and negative samples only.
    pub fn binary_part(&self) -> Dataset {
        self.filtered(|s| !s.y.is_ambiguous())
    }

    pub fn filtered(&self, keep: impl Fn(&LabeledSample) -> bool) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_dim: self.feature_dim,
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
        }
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_dim: self.feature_dim,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn with_samples(&self, samples: Vec<LabeledSample>) -> Result<Dataset> {
        Dataset::new(self.name.clone(), samples)
    }

    /// CSV text: a header `x1,…,xD,label`, then one row per sample with
    /// features in `{:.16e}` and the label as `-1`, `0` or `1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.feature_dim)
            .map(|j| format!("x{j}"))
            .chain(std::iter::once("label".to_string()))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for s in &self.samples {
            for v in &s.x {
                out.push_str(&format!("{v:.16e},"));
            }
            out.push_str(&format!("{}\n", s.y));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = File::create(path)?;
        file.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// Parses the format written by [`Dataset::to_csv`]; the header is optional.
    pub fn from_csv(name: impl Into<String>, text: &str) -> Result<Dataset> {
        let table = parse_table(text)?;
        if table.columns < 2 {
            return Err(Error::Parse {
                line: table.first_line,
                column: 1,
                message: "a dataset needs at least one feature column and a label column".into(),
            });
        }
        let mut samples = Vec::with_capacity(table.rows.len());
        for (row, &line) in table.rows.iter().zip(&table.lines) {
            let raw = row[table.columns - 1];
            let label = if raw.fract() == 0.0 { Label::from_value(raw as i64).ok() } else { None };
            let Some(y) = label else {
                return Err(Error::Parse {
                    line,
                    column: table.columns,
                    message: format!("label {raw} is not one of -1, 0, 1"),
                });
            };
            samples.push(LabeledSample {
                x: row[..table.columns - 1].to_vec(),
                y,
            });
        }
        Dataset::new(name, samples)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
        Dataset::from_csv(name, &read_to_string(path)?)
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    Ok(text)
}

struct Table {
    rows: Vec<Vec<f64>>,
    lines: Vec<usize>,
    columns: usize,
    first_line: usize,
}

/// Numeric CSV with an optional header, detected as a first record that
/// contains a non-numeric cell.
fn parse_table(text: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    let mut columns = 0;
    let mut first_line = 1;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                column: 0,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if rows.is_empty() && columns == 0 {
            columns = record.len();
            first_line = line;
            if parsed.iter().any(|v| v.is_err()) {
                // Header row.
                continue;
            }
        }
        if record.len() != columns {
            return Err(Error::Parse {
                line,
                column: record.len().min(columns) + 1,
                message: format!("expected {columns} columns, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(columns);
        for (j, (value, cell)) in parsed.into_iter().zip(record.iter()).enumerate() {
            match value {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(Error::Parse {
                        line,
                        column: j + 1,
                        message: format!("cell {cell:?} is not a finite number"),
                    })
                }
            }
        }
        rows.push(row);
        lines.push(line);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: first_line,
            column: 1,
            message: "no data rows".into(),
        });
    }
    Ok(Table {
        rows,
        lines,
        columns,
        first_line,
    })
}

/// Reads a regression table: numeric columns, the last one the target.
pub fn load_regression_csv(path: impl AsRef<Path>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    parse_regression_csv(&read_to_string(path.as_ref())?)
}

pub fn parse_regression_csv(text: &str) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let table = parse_table(text)?;
    if table.columns < 2 {
        return Err(Error::Parse {
            line: table.first_line,
            column: 1,
            message: "need at least one feature column and a target column".into(),
        });
    }
    let p = table.columns - 1;
    let features = DMatrix::from_fn(table.rows.len(), p, |i, j| table.rows[i][j]);
    let targets = DVector::from_iterator(table.rows.len(), table.rows.iter().map(|r| r[p]));
    Ok((features, targets))
}

/// Settings of the synthetic problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    /// Fraction of the mixed region's samples that are ambiguous.
    pub r: f64,
    pub total: usize,
    pub seed: u64,
}

impl ToyConfig {
    pub fn new(r: f64, seed: u64) -> Result<Self> {
        let config = ToyConfig { r, total: 400, seed };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::invalid(format!("ambiguity ratio r = {} must lie in [0, 1]", self.r)));
        }
        if self.total < 4 {
            return Err(Error::invalid("the toy dataset needs at least 4 samples"));
        }
        Ok(())
    }
}

/// Best achievable test accuracy on the toy problem: the separable half is
/// perfectly classifiable and the mixed region's P/N samples are a coin flip.
pub fn expected_max_accuracy(r: f64) -> f64 {
    (1.0 + 0.5 * (1.0 - r)) / (1.0 + (1.0 - r))
}

/// Toy problem on `[0, 1]²`. The lower half is separable: negatives for
/// `x₁ < 0.5`, positives for `x₁ ≥ 0.5`, a quarter of the samples each. The
/// upper half (`x₂ ≥ 0.5`) is the mixed region: a fraction `r` of its samples
/// is ambiguous, the rest are positives and negatives in equal numbers, all
/// uniform over the region.
pub fn generate_toy(config: &ToyConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = seed::rng(config.seed);
    let separable = config.total / 2;
    let negatives = separable / 2;
    let positives = separable - negatives;
    let mixed = config.total - separable;
    let ambiguous = (mixed as f64 * config.r).round() as usize;
    let mixed_pn = mixed - ambiguous;
    let mixed_neg = mixed_pn / 2;
    let mixed_pos = mixed_pn - mixed_neg;

    let mut samples = Vec::with_capacity(config.total);
    let mut region = |n: usize, x1: (f64, f64), x2: (f64, f64), y: Label, out: &mut Vec<LabeledSample>| {
        for _ in 0..n {
            out.push(LabeledSample {
                x: vec![rng.gen_range(x1.0..x1.1), rng.gen_range(x2.0..x2.1)],
                y,
            });
        }
    };
    region(negatives, (0.0, 0.5), (0.0, 0.5), Label::Negative, &mut samples);
    region(positives, (0.5, 1.0), (0.0, 0.5), Label::Positive, &mut samples);
    region(mixed_neg, (0.0, 1.0), (0.5, 1.0), Label::Negative, &mut samples);
    region(mixed_pos, (0.0, 1.0), (0.5, 1.0), Label::Positive, &mut samples);
    region(ambiguous, (0.0, 1.0), (0.5, 1.0), Label::Ambiguous, &mut samples);
    Dataset::new(format!("toy-r{}", config.r), samples)
}

/// Columns rescaled to zero mean and unit (population) standard deviation;
/// constant columns are only centred.
pub fn standardize(features: &DMatrix<f64>) -> DMatrix<f64> {
    let n = features.nrows() as f64;
    let mut out = features.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for v in col.iter_mut() {
            *v = if sd > 0.0 { (*v - mean) / sd } else { *v - mean };
        }
    }
    out
}

fn check_table(features: &DMatrix<f64>, targets: &DVector<f64>) -> Result<()> {
    if features.nrows() != targets.len() {
        return Err(Error::dims(format!(
            "{} feature rows but {} targets",
            features.nrows(),
            targets.len()
        )));
    }
    if features.nrows() == 0 {
        return Err(Error::data("empty regression table"));
    }
    Ok(())
}

fn band_label(target: f64) -> Label {
    if target > 23.0 {
        Label::Positive
    } else if target < 19.0 {
        Label::Negative
    } else {
        Label::Ambiguous
    }
}

fn random_label(rng: &mut impl Rng) -> Label {
    [Label::Positive, Label::Negative, Label::Ambiguous][rng.gen_range(0..3)]
}

fn labeled(name: &str, features: &DMatrix<f64>, labels: impl Iterator<Item = Label>) -> Result<Dataset> {
    let x = standardize(features);
    let samples = labels
        .enumerate()
        .map(|(i, y)| LabeledSample {
            x: x.row(i).iter().copied().collect(),
            y,
        })
        .collect();
    Dataset::new(name, samples)
}

/// Targets above 23 are positive, below 19 negative, the band in between
/// ambiguous. Features are standardized.
pub fn build_pd1(features: &DMatrix<f64>, targets: &DVector<f64>) -> Result<Dataset> {
    check_table(features, targets)?;
    labeled("pd1", features, targets.iter().map(|&t| band_label(t)))
}

/// As [`build_pd1`], but each sample of the middle band gets a uniformly random
/// label from {+1, 0, −1}.
pub fn build_pd2(features: &DMatrix<f64>, targets: &DVector<f64>, seed: u64) -> Result<Dataset> {
    check_table(features, targets)?;
    let mut rng = seed::rng(seed);
    let labels: Vec<Label> = targets
        .iter()
        .map(|&t| match band_label(t) {
            Label::Ambiguous => random_label(&mut rng),
            y => y,
        })
        .collect();
    labeled("pd2", features, labels.into_iter())
}

/// Number of random directions tried when searching for the PD3 hyperplane.
pub const PD3_SEARCH_BUDGET: usize = 10_000;
/// Allowed difference of mean targets between the two PD3 parts.
pub const PD3_MEAN_TOLERANCE: f64 = 1.0;
/// Target size of the separable part and the allowed deviation from it.
pub const PD3_SEPARABLE_SIZE: (usize, usize) = (170, 15);

/// The hyperplane split behind PD3.
#[derive(Debug, Clone, PartialEq)]
pub struct Pd3Partition {
    /// Normal of the hyperplane through the mean of the standardized features.
    pub direction: Vec<f64>,
    /// `true` for samples with `v·ξ ≥ 0`.
    pub mixed: Vec<bool>,
    pub mean_gap: f64,
    /// Directions drawn until one was accepted.
    pub draws: usize,
}

/// Draws seeded random unit directions until the two sides of the hyperplane
/// have mean targets within [`PD3_MEAN_TOLERANCE`] and the separable side has
/// a size within [`PD3_SEPARABLE_SIZE`] (scaled to the table size).
pub fn pd3_partition(features: &DMatrix<f64>, targets: &DVector<f64>, seed: u64) -> Result<Pd3Partition> {
    check_table(features, targets)?;
    let mut rng = seed::rng(seed);
    partition_with(&standardize(features), targets, &mut rng)
}

fn partition_with(x: &DMatrix<f64>, targets: &DVector<f64>, rng: &mut impl Rng) -> Result<Pd3Partition> {
    let n = x.nrows();
    // 170 of the canonical 506 rows.
    let scale = n as f64 / 506.0;
    let want = PD3_SEPARABLE_SIZE.0 as f64 * scale;
    let slack = (PD3_SEPARABLE_SIZE.1 as f64 * scale).max(1.0);
    for draw in 1..=PD3_SEARCH_BUDGET {
        let v = DVector::from_iterator(x.ncols(), (0..x.ncols()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let v = v.normalize();
        let proj = x * &v;
        let mixed: Vec<bool> = proj.iter().map(|&p| p >= 0.0).collect();
        let n_sep = mixed.iter().filter(|m| !**m).count();
        if (n_sep as f64 - want).abs() > slack || n_sep == 0 || n_sep == n {
            continue;
        }
        let mean = |side: bool| {
            let (sum, count) = mixed
                .iter()
                .zip(targets.iter())
                .filter(|(m, _)| **m == side)
                .fold((0.0, 0usize), |(s, c), (_, t)| (s + t, c + 1));
            sum / count as f64
        };
        let gap = (mean(true) - mean(false)).abs();
        if gap <= PD3_MEAN_TOLERANCE {
            return Ok(Pd3Partition {
                direction: v.iter().copied().collect(),
                mixed,
                mean_gap: gap,
                draws: draw,
            });
        }
    }
    Err(Error::data(format!(
        "no hyperplane met the PD3 matching tolerance within {PD3_SEARCH_BUDGET} draws"
    )))
}

/// Splits the samples with a hyperplane (see [`pd3_partition`]). The mixed side
/// gets uniformly random labels from {+1, 0, −1}; on the separable side targets
/// above 21 are positive and the rest negative.
pub fn build_pd3(features: &DMatrix<f64>, targets: &DVector<f64>, seed: u64) -> Result<Dataset> {
    check_table(features, targets)?;
    let mut rng = seed::rng(seed);
    let x = standardize(features);
    let part = partition_with(&x, targets, &mut rng)?;
    let labels: Vec<Label> = part
        .mixed
        .iter()
        .zip(targets.iter())
        .map(|(&m, &t)| {
            if m {
                random_label(&mut rng)
            } else if t > 21.0 {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    labeled("pd3", features, labels.into_iter())
}

/// Stratified random split; `train_ratio` is the training fraction.
///
/// Each label class is shuffled and divided separately, so every class keeps
/// the ratio up to rounding. A class with fewer than two samples goes entirely
/// to the training part. Both parts keep the original sample order, and the
/// test part keeps its ambiguous samples (accuracy evaluation skips them).
pub fn split(data: &Dataset, train_ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::invalid(format!("train ratio {train_ratio} must lie in (0, 1)")));
    }
    let mut rng = seed::rng(seed);
    let mut by_label: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, s) in data.samples.iter().enumerate() {
        by_label.entry(s.y).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (_, mut idx) in by_label {
        if idx.len() < 2 {
            train.extend(idx);
            continue;
        }
        idx.shuffle(&mut rng);
        let k = ((idx.len() as f64 * train_ratio).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_counts() {
        let d = generate_toy(&ToyConfig::new(0.5, 1).unwrap()).unwrap();
        assert_eq!(d.len(), 400);
        let upper = d.filtered(|s| s.x[1] >= 0.5);
        let lower = d.filtered(|s| s.x[1] < 0.5);
        assert_eq!(lower.counts(), ClassCounts { positive: 100, negative: 100, ambiguous: 0 });
        assert_eq!(upper.counts(), ClassCounts { positive: 50, negative: 50, ambiguous: 100 });
        for s in lower.samples() {
            assert_eq!(s.y == Label::Positive, s.x[0] >= 0.5);
        }
    }

    #[test]
    fn toy_extremes() {
        let d = generate_toy(&ToyConfig::new(0.0, 3).unwrap()).unwrap();
        assert_eq!(d.counts().ambiguous, 0);
        let d = generate_toy(&ToyConfig::new(1.0, 3).unwrap()).unwrap();
        assert_eq!(d.counts(), ClassCounts { positive: 100, negative: 100, ambiguous: 200 });
        assert!(ToyConfig::new(1.5, 0).is_err());
    }

    #[test]
    fn ceiling_formula() {
        assert!((expected_max_accuracy(0.5) - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(expected_max_accuracy(1.0), 1.0);
    }

    #[test]
    fn band_boundaries_are_ambiguous() {
        assert_eq!(band_label(23.0), Label::Ambiguous);
        assert_eq!(band_label(19.0), Label::Ambiguous);
        assert_eq!(band_label(23.0001), Label::Positive);
        assert_eq!(band_label(18.9999), Label::Negative);
    }

    #[test]
    fn regression_csv_errors() {
        assert!(matches!(parse_regression_csv(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_regression_csv("a,b\n"), Err(Error::Parse { .. })));
        match parse_regression_csv("a,b,c\n1,2,3\n4,x,6\n") {
            Err(Error::Parse { line, column, message }) => {
                assert_eq!((line, column), (3, 2));
                assert!(message.contains("\"x\""));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_regression_csv("1,2,3\n4,5\n"), Err(Error::Parse { line: 2, .. })));
        let (x, y) = parse_regression_csv("1,2,3\n\n4,5,6\n").unwrap();
        assert_eq!((x.nrows(), x.ncols(), y[1]), (2, 2, 6.0));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = generate_toy(&ToyConfig::new(0.3, 9).unwrap()).unwrap();
        let back = Dataset::from_csv(d.name(), &d.to_csv()).unwrap();
        assert_eq!(back, d);
        assert!(Dataset::from_csv("x", "1.0,2\n").is_err());
        assert!(Dataset::from_csv("x", "1.0,0.5\n").is_err());
    }

    #[test]
    fn split_keeps_everything() {
        let d = generate_toy(&ToyConfig::new(0.5, 2).unwrap()).unwrap();
        let (train, test) = split(&d, 1.0 / 3.0, 4).unwrap();
        assert_eq!(train.len() + test.len(), 400);
        assert!((train.len() as i64 - 133).abs() <= 2);
        assert!(split(&d, 1.0, 0).is_err());
    }
}
