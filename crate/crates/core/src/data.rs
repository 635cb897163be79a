//! Dataset ingestion, min-max scaling, stratified splitting and
//! class-balanced bag sampling.
//!
//! Labels are encoded as `u8` with `1` marking an outlier and `0` an inlier.

use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label value for an outlier.
pub const OUTLIER: u8 = 1;
/// Label value for an inlier.
pub const INLIER: u8 = 0;

/// Raw features plus binary outlier labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    pub row_ids: Vec<String>,
}

/// Features read from a CSV that may or may not carry a label column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub features: Array2<f64>,
    pub feature_names: Vec<String>,
    pub row_ids: Vec<String>,
    pub labels: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub label_column: String,
    /// Column holding row identifiers; rows are numbered from 0 when absent.
    pub id_column: Option<String>,
    pub require_labels: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: "label".to_string(),
            id_column: None,
            require_labels: true,
        }
    }
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<u8>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                actual: labels.len(),
            });
        }
        if let Some(row) = labels.iter().position(|&l| l > 1) {
            return Err(Error::InvalidLabel {
                row,
                value: labels[row].to_string(),
            });
        }
        let feature_names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        let row_ids = (0..features.nrows()).map(|i| i.to_string()).collect();
        Ok(Self {
            features,
            labels,
            feature_names,
            row_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_outliers(&self) -> usize {
        count_outliers(&self.labels)
    }

    pub fn outlier_ratio(&self) -> f64 {
        if self.labels.is_empty() {
            0.0
        } else {
            self.n_outliers() as f64 / self.labels.len() as f64
        }
    }

    /// Rows in the given order.
    pub fn select(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
        }
    }
}

impl TryFrom<FeatureTable> for LabeledDataset {
    type Error = Error;

    fn try_from(table: FeatureTable) -> Result<Self> {
        let labels = table.labels.ok_or(Error::SingleClass)?;
        Ok(LabeledDataset {
            features: table.features,
            labels,
            feature_names: table.feature_names,
            row_ids: table.row_ids,
        })
    }
}

pub fn count_outliers(labels: &[u8]) -> usize {
    labels.iter().filter(|&&l| l == OUTLIER).count()
}

/// Loads a labeled CSV, removing `label_column` from the features.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<LabeledDataset> {
    let opts = CsvOptions {
        label_column: label_column.to_string(),
        ..CsvOptions::default()
    };
    read_csv(path, &opts)?.try_into()
}

/// Reads a CSV into a feature table. The label column is optional unless
/// `opts.require_labels` is set.
pub fn read_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<FeatureTable> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv_from(file, opts)
}

pub fn read_csv_from(reader: impl std::io::Read, opts: &CsvOptions) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

    let label_idx = header.iter().position(|h| *h == opts.label_column);
    if label_idx.is_none() && opts.require_labels {
        return Err(Error::MissingLabelColumn(opts.label_column.clone()));
    }
    let id_idx = match &opts.id_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidArgument(format!("id column {name:?} not found")))?,
        ),
        None => None,
    };
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&j| Some(j) != label_idx && Some(j) != id_idx)
        .collect();
    let feature_names: Vec<String> = feature_idx.iter().map(|&j| header[j].clone()).collect();
    let mut seen = HashSet::new();
    for name in &feature_names {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateFeature(name.clone()));
        }
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut row_ids = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for &j in &feature_idx {
            let cell = &record[j];
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row,
                column: header[j].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: header[j].clone(),
                });
            }
            values.push(v);
        }
        if let Some(li) = label_idx {
            labels.push(parse_label(&record[li], row)?);
        }
        row_ids.push(match id_idx {
            Some(ii) => record[ii].to_string(),
            None => row.to_string(),
        });
    }
    let n = row_ids.len();
    let features = Array2::from_shape_vec((n, feature_idx.len()), values).expect("row-major buffer matches shape");
    Ok(FeatureTable {
        features,
        feature_names,
        row_ids,
        labels: label_idx.map(|_| labels),
    })
}

fn parse_label(cell: &str, row: usize) -> Result<u8> {
    let invalid = || Error::InvalidLabel {
        row,
        value: cell.to_string(),
    };
    match cell {
        "0" => Ok(INLIER),
        "1" => Ok(OUTLIER),
        _ => match cell.parse::<f64>() {
            Ok(0.0) => Ok(INLIER),
            Ok(1.0) => Ok(OUTLIER),
            _ => Err(invalid()),
        },
    }
}

/// Per-column minimum and maximum seen on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScaleParams {
    pub fn fit(data: ArrayView2<'_, f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::Empty);
        }
        let mut min = vec![f64::INFINITY; data.ncols()];
        let mut max = vec![f64::NEG_INFINITY; data.ncols()];
        for row in data.rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn n_columns(&self) -> usize {
        self.min.len()
    }

    /// Maps one value of column `j` into [0, 1]. Constant columns map to 0.
    #[inline]
    pub fn scale_value(&self, j: usize, v: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            ((v - self.min[j]) / range).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn apply(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.n_columns() {
            return Err(Error::DimensionMismatch {
                expected: self.n_columns(),
                actual: data.ncols(),
            });
        }
        let mut out = data.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.scale_value(j, *v);
            }
        }
        Ok(out)
    }
}

pub fn fit_minmax(train: &LabeledDataset) -> Result<ScaleParams> {
    ScaleParams::fit(train.features.view())
}

pub fn apply_minmax(data: ArrayView2<'_, f64>, params: &ScaleParams) -> Result<Array2<f64>> {
    params.apply(data)
}

/// `round(x)` with halves going up, tolerant of representation error.
pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// Number of training rows a class of size `count` contributes.
fn stratum_train_count(count: usize, train_fraction: f64) -> usize {
    round_half_up(train_fraction * count as f64).clamp(1, count - 1)
}

/// Stratified split. Each class contributes `round_half_up(fraction * size)`
/// rows to the training part (kept within `[1, size - 1]`), so both parts see
/// both classes. Rows keep their original relative order in each part.
pub fn train_test_split(
    data: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(&data.labels, train_fraction, seed)?;
    Ok((data.select(&train), data.select(&test)))
}

/// Row indices of a stratified split; see [`train_test_split`].
pub fn split_indices(labels: &[u8], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [OUTLIER, INLIER] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
                needed: 2,
            });
        }
        members.shuffle(&mut rng);
        let n_train = stratum_train_count(members.len(), train_fraction);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// One class-balanced subsample of the training rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bag {
    pub bag_id: usize,
    /// Sorted row indices, half outliers and half inliers.
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BagSpec {
    pub num_bags: usize,
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for BagSpec {
    fn default() -> Self {
        Self {
            num_bags: 50,
            outlier_fraction: 0.7,
            seed: 0,
        }
    }
}

impl BagSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_bags == 0 {
            return Err(Error::InvalidArgument("need at least one bag".into()));
        }
        if !(self.outlier_fraction > 0.0 && self.outlier_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "outlier fraction must lie in (0, 1], got {}",
                self.outlier_fraction
            )));
        }
        Ok(())
    }

    /// Outliers (and inliers) per bag for `n_outliers` labeled outliers.
    pub fn per_class(&self, n_outliers: usize) -> usize {
        let p = (self.outlier_fraction * n_outliers as f64 - 1e-9).ceil();
        (p.max(1.0) as usize).min(n_outliers)
    }
}

/// Draws `spec.num_bags` bags, each with `p = ceil(fraction * n_out)`
/// outliers and `p` inliers sampled without replacement.
pub fn sample_balanced_bags(labels: &[u8], spec: &BagSpec) -> Result<Vec<Bag>> {
    spec.validate()?;
    let outliers: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == OUTLIER).collect();
    let inliers: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == INLIER).collect();
    if outliers.is_empty() {
        return Err(Error::SingleClass);
    }
    let p = spec.per_class(outliers.len());
    if p > inliers.len() {
        return Err(Error::NotEnoughInliers {
            needed: p,
            available: inliers.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bags = (0..spec.num_bags)
        .map(|bag_id| {
            let mut indices: Vec<usize> = sample(&mut rng, outliers.len(), p)
                .into_iter()
                .map(|i| outliers[i])
                .chain(sample(&mut rng, inliers.len(), p).into_iter().map(|i| inliers[i]))
                .collect();
            indices.sort_unstable();
            Bag { bag_id, indices }
        })
        .collect();
    Ok(bags)
}
