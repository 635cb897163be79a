//! Unsupervised outlier scoring functions and the outlier representation.
//!
//! Every family is oriented so that a larger score means "more outlying".
//! Scores are computed in-sample on the training rows (neighborhoods
//! exclude the query row) and inductively for new points, whose
//! neighborhoods are drawn from the training rows only.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::{Metric, NeighborIndex, NeighborList};

/// Floor used in place of a zero density or zero mean distance when
/// neighborhoods collapse onto duplicate points.
pub const DENSITY_EPSILON: f64 = 1e-10;

/// Neighborhood sizes of the default grid, before filtering by data size.
pub const DEFAULT_K_GRID: [usize; 11] = [1, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OsfFamily {
    /// Distance to the k-th nearest neighbor.
    KnnDist,
    /// Sum of distances to the k nearest neighbors.
    KnnWeight,
    /// Inverse in-degree in the kNN graph, `1 / (1 + indegree)`.
    Odin,
    /// Local outlier factor.
    Lof,
    /// LOF with plain distances in place of reachability distances.
    SimplifiedLof,
    /// Local distance-based outlier factor.
    Ldof,
}

impl OsfFamily {
    pub const ALL: [OsfFamily; 6] = [
        OsfFamily::KnnDist,
        OsfFamily::KnnWeight,
        OsfFamily::Odin,
        OsfFamily::Lof,
        OsfFamily::SimplifiedLof,
        OsfFamily::Ldof,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OsfFamily::KnnDist => "knn_dist",
            OsfFamily::KnnWeight => "knn_weight",
            OsfFamily::Odin => "odin",
            OsfFamily::Lof => "lof",
            OsfFamily::SimplifiedLof => "simplified_lof",
            OsfFamily::Ldof => "ldof",
        }
    }

    pub fn min_k(self) -> usize {
        match self {
            OsfFamily::Ldof => 2,
            _ => 1,
        }
    }

    /// Whether the family needs strictly more than `k` rows.
    fn needs_full_neighborhood(self) -> bool {
        matches!(self, OsfFamily::Lof | OsfFamily::SimplifiedLof | OsfFamily::Ldof)
    }
}

impl fmt::Display for OsfFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OsfFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OsfFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scoring family {s:?}")))
    }
}

/// One scoring function: a family, its neighborhood size, a metric and an
/// optional subset of raw columns it sees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OsfSpec {
    pub family: OsfFamily,
    pub k: usize,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<Vec<usize>>,
}

impl OsfSpec {
    pub fn new(family: OsfFamily, k: usize) -> Self {
        Self {
            family,
            k,
            metric: Metric::Euclidean,
            subspace: None,
        }
    }

    pub fn with_subspace(mut self, columns: Vec<usize>) -> Self {
        self.subspace = Some(columns);
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidSpec {
            spec: self.to_string(),
            reason: reason.into(),
        }
    }

    /// Checks the spec against a data shape of `n` rows and `k_raw` columns.
    pub fn check(&self, n: usize, k_raw: usize) -> Result<()> {
        if self.k < self.family.min_k() {
            return Err(self.invalid(format!("k must be at least {}", self.family.min_k())));
        }
        if let Some(sub) = &self.subspace {
            if sub.is_empty() {
                return Err(self.invalid("empty subspace"));
            }
            let mut seen = vec![false; k_raw];
            for &c in sub {
                if c >= k_raw {
                    return Err(self.invalid(format!("subspace column {c} out of range")));
                }
                if std::mem::replace(&mut seen[c], true) {
                    return Err(self.invalid(format!("subspace column {c} repeated")));
                }
            }
        }
        let needed = if self.family.needs_full_neighborhood() {
            self.k
        } else {
            1
        };
        if n <= needed {
            return Err(Error::TooFewRows {
                family: self.family.name(),
                k: self.k,
                n,
                needed,
            });
        }
        Ok(())
    }

    fn restrict(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match &self.subspace {
            Some(cols) => x.select(Axis(1), cols),
            None => x.to_owned(),
        }
    }

    fn project(&self, point: &[f64]) -> Vec<f64> {
        match &self.subspace {
            Some(cols) => cols.iter().map(|&c| point[c]).collect(),
            None => point.to_vec(),
        }
    }
}

impl fmt::Display for OsfSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_k{}", self.family, self.k)?;
        if self.metric != Metric::Euclidean {
            write!(f, "_{}", self.metric.name())?;
        }
        if let Some(sub) = &self.subspace {
            let cols: Vec<String> = sub.iter().map(ToString::to_string).collect();
            write!(f, "[{}]", cols.join("."))?;
        }
        Ok(())
    }
}

/// Raw scores of one scoring function, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct OsfScores {
    pub values: Vec<f64>,
    pub spec: OsfSpec,
}

/// A scoring function fitted on training rows: the reference index plus
/// the per-row quantities needed to score new points.
#[derive(Debug, Clone)]
pub struct FittedOsf {
    spec: OsfSpec,
    index: Arc<NeighborIndex>,
    /// Distance from each training row to its k-th neighbor.
    kdist: Vec<f64>,
    /// Local reachability density (LOF) or plain kNN density (simplified LOF).
    density: Vec<f64>,
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    values.sum::<f64>() / n as f64
}

fn density_from_sum(k_eff: usize, sum: f64) -> f64 {
    if sum > 0.0 {
        k_eff as f64 / sum
    } else {
        1.0 / DENSITY_EPSILON
    }
}

fn mean_pairwise(index: &NeighborIndex, rows: &[usize]) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            sum += index.distance(rows[a], rows[b]);
            pairs += 1;
        }
    }
    sum / pairs as f64
}

impl FittedOsf {
    /// Fits on `x` (all raw columns; the spec's subspace is applied here)
    /// and returns the in-sample scores alongside.
    pub fn fit(x: ArrayView2<'_, f64>, spec: &OsfSpec) -> Result<(Self, OsfScores)> {
        spec.check(x.nrows(), x.ncols())?;
        let index = Arc::new(NeighborIndex::build(spec.restrict(x), spec.metric)?);
        let table = index.member_table(spec.k);
        Ok(Self::from_table(spec.clone(), index, &table))
    }

    /// `table` holds at least `min(spec.k, n - 1)` neighbors per row.
    fn from_table(spec: OsfSpec, index: Arc<NeighborIndex>, table: &[NeighborList]) -> (Self, OsfScores) {
        let n = index.n_rows();
        let k = spec.k;
        let hood = |i: usize| table[i].truncated(k);
        let kdist: Vec<f64> = (0..n).map(|i| *hood(i).1.last().unwrap_or(&0.0)).collect();
        let mut density = Vec::new();

        let values: Vec<f64> = match spec.family {
            OsfFamily::KnnDist => kdist.clone(),
            OsfFamily::KnnWeight => (0..n).map(|i| hood(i).1.iter().sum()).collect(),
            OsfFamily::Odin => {
                let mut indeg = vec![0usize; n];
                for i in 0..n {
                    for &j in hood(i).0 {
                        indeg[j] += 1;
                    }
                }
                indeg.into_iter().map(|d| 1.0 / (1.0 + d as f64)).collect()
            }
            OsfFamily::Lof => {
                density = (0..n)
                    .map(|i| {
                        let (idx, dist) = hood(i);
                        let reach: f64 = idx.iter().zip(dist).map(|(&o, &d)| kdist[o].max(d)).sum();
                        density_from_sum(idx.len(), reach)
                    })
                    .collect();
                (0..n)
                    .map(|i| mean(hood(i).0.iter().map(|&o| density[o])) / density[i])
                    .collect()
            }
            OsfFamily::SimplifiedLof => {
                density = (0..n)
                    .map(|i| {
                        let (idx, dist) = hood(i);
                        density_from_sum(idx.len(), dist.iter().sum())
                    })
                    .collect();
                (0..n)
                    .map(|i| mean(hood(i).0.iter().map(|&o| density[o])) / density[i])
                    .collect()
            }
            OsfFamily::Ldof => (0..n)
                .map(|i| {
                    let (idx, dist) = hood(i);
                    ldof_ratio(mean(dist.iter().copied()), mean_pairwise(&index, idx))
                })
                .collect(),
        };

        let fitted = FittedOsf {
            spec: spec.clone(),
            index,
            kdist,
            density,
        };
        (fitted, OsfScores { values, spec })
    }

    pub fn spec(&self) -> &OsfSpec {
        &self.spec
    }

    /// Scores a point given in the full raw column space, using the
    /// training rows as its neighborhood pool.
    pub fn score_point(&self, point: &[f64]) -> Result<f64> {
        let p = self.spec.project(point);
        let k = self.spec.k;
        let nl = self.index.knn_of_external(&p, k)?;
        let (idx, dist) = (&nl.indices, &nl.distances);
        let score = match self.spec.family {
            OsfFamily::KnnDist => *dist.last().expect("index is nonempty"),
            OsfFamily::KnnWeight => dist.iter().sum(),
            OsfFamily::Odin => {
                let indeg = (0..self.index.n_rows())
                    .filter(|&t| self.kdist[t] > self.index.distance_to(&p, t))
                    .count();
                1.0 / (1.0 + indeg as f64)
            }
            OsfFamily::Lof => {
                let reach: f64 = idx.iter().zip(dist).map(|(&o, &d)| self.kdist[o].max(d)).sum();
                let own = density_from_sum(idx.len(), reach);
                mean(idx.iter().map(|&o| self.density[o])) / own
            }
            OsfFamily::SimplifiedLof => {
                let own = density_from_sum(idx.len(), dist.iter().sum());
                mean(idx.iter().map(|&o| self.density[o])) / own
            }
            OsfFamily::Ldof => {
                if idx.len() < 2 {
                    return Err(Error::InvalidSpec {
                        spec: self.spec.to_string(),
                        reason: "needs at least two reference rows".into(),
                    });
                }
                ldof_ratio(mean(dist.iter().copied()), mean_pairwise(&self.index, idx))
            }
        };
        Ok(score)
    }
}

fn ldof_ratio(to_neighbors: f64, among_neighbors: f64) -> f64 {
    let denom = if among_neighbors > 0.0 {
        among_neighbors
    } else {
        DENSITY_EPSILON
    };
    to_neighbors / denom
}

fn score_with(index: &NeighborIndex, spec: &OsfSpec, family: OsfFamily) -> Result<OsfScores> {
    if spec.family != family {
        return Err(Error::InvalidSpec {
            spec: spec.to_string(),
            reason: format!("expected family {family}"),
        });
    }
    // the index already holds the columns this spec should see
    let spec = OsfSpec {
        subspace: None,
        ..spec.clone()
    };
    spec.check(index.n_rows(), index.dim())?;
    let index = Arc::new(index.clone());
    let table = index.member_table(spec.k);
    Ok(FittedOsf::from_table(spec, index, &table).1)
}

/// Distance from each row to its k-th nearest other row.
pub fn score_knn_dist(index: &NeighborIndex, spec: &OsfSpec) -> Result<OsfScores> {
    score_with(index, spec, OsfFamily::KnnDist)
}

/// Sum of distances from each row to its k nearest other rows.
pub fn score_knn_weight(index: &NeighborIndex, spec: &OsfSpec) -> Result<OsfScores> {
    score_with(index, spec, OsfFamily::KnnWeight)
}

pub fn score_odin(index: &NeighborIndex, spec: &OsfSpec) -> Result<OsfScores> {
    score_with(index, spec, OsfFamily::Odin)
}

pub fn score_lof(index: &NeighborIndex, spec: &OsfSpec) -> Result<OsfScores> {
    score_with(index, spec, OsfFamily::Lof)
}

pub fn score_simplified_lof(index: &NeighborIndex, spec: &OsfSpec) -> Result<OsfScores> {
    score_with(index, spec, OsfFamily::SimplifiedLof)
}

pub fn score_ldof(index: &NeighborIndex, spec: &OsfSpec) -> Result<OsfScores> {
    score_with(index, spec, OsfFamily::Ldof)
}

/// Scores every row of `x` with `spec`, restricting to its subspace first.
pub fn compute_osf(x: ArrayView2<'_, f64>, spec: &OsfSpec) -> Result<OsfScores> {
    FittedOsf::fit(x, spec).map(|(_, scores)| scores)
}

/// Every family crossed with the neighborhood sizes that fit `n_train`
/// rows: `k <= n_train - 2`, and `k >= 2` for LDOF.
pub fn default_osf_grid(n_train: usize) -> Vec<OsfSpec> {
    let ks = valid_k_grid(n_train);
    OsfFamily::ALL
        .into_iter()
        .flat_map(|family| {
            ks.iter()
                .filter(move |&&k| k >= family.min_k())
                .map(move |&k| OsfSpec::new(family, k))
        })
        .collect()
}

fn valid_k_grid(n_train: usize) -> Vec<usize> {
    DEFAULT_K_GRID.into_iter().filter(|&k| k + 2 <= n_train).collect()
}

/// Random column subsets for feature bagging. Sizes are uniform on
/// `[ceil(k_raw / 2), k_raw - 1]`; columns within a subset are sorted.
pub fn sample_subspaces(k_raw: usize, count: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k_raw < 2 {
        return Err(Error::InvalidArgument(format!(
            "feature bagging needs at least 2 columns, got {k_raw}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = k_raw.div_ceil(2);
    let hi = k_raw - 1;
    Ok((0..count)
        .map(|_| {
            let size = rng.random_range(lo..=hi);
            let mut cols = sample(&mut rng, k_raw, size).into_vec();
            cols.sort_unstable();
            cols
        })
        .collect())
}

/// Feature-bagging grid: `count` subspaces, alternating kNN distance and LOF,
/// with neighborhood sizes cycling through the valid default grid.
pub fn subspace_osf_grid(n_train: usize, k_raw: usize, count: usize, seed: u64) -> Result<Vec<OsfSpec>> {
    let ks = valid_k_grid(n_train);
    if ks.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{n_train} training rows are too few for any neighborhood size"
        )));
    }
    Ok(sample_subspaces(k_raw, count, seed)?
        .into_iter()
        .enumerate()
        .map(|(i, cols)| {
            let family = if i % 2 == 0 { OsfFamily::KnnDist } else { OsfFamily::Lof };
            OsfSpec::new(family, ks[(i / 2) % ks.len()]).with_subspace(cols)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Raw,
    Osf,
}

/// Metadata for one column of the outlier representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<OsfSpec>,
    /// Prediction-time cost; raw columns cost 1, scoring columns are unset
    /// until costs are assigned.
    #[serde(default)]
    pub cost: Option<f64>,
    /// Training-row range of the raw scores, used to rescale into [0, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_range: Option<(f64, f64)>,
}

impl ColumnMeta {
    pub fn raw(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Raw,
            spec: None,
            cost: Some(1.0),
            score_range: None,
        }
    }

    pub fn is_osf(&self) -> bool {
        self.kind == ColumnKind::Osf
    }

    fn rescale(&self, v: f64) -> f64 {
        match self.score_range {
            Some((lo, hi)) if hi > lo => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            Some(_) => 0.0,
            None => v,
        }
    }
}

/// Raw features followed by one column per scoring function.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierRepresentation {
    pub matrix: Array2<f64>,
    pub columns: Vec<ColumnMeta>,
}

impl OutlierRepresentation {
    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn raw_columns(&self) -> Vec<usize> {
        raw_column_indices(&self.columns)
    }

    pub fn osf_columns(&self) -> Vec<usize> {
        osf_column_indices(&self.columns)
    }

    pub fn n_raw(&self) -> usize {
        self.raw_columns().len()
    }

    pub fn n_osf(&self) -> usize {
        self.osf_columns().len()
    }

    /// Same columns, a subset of rows.
    pub fn select_rows(&self, rows: &[usize]) -> OutlierRepresentation {
        OutlierRepresentation {
            matrix: self.matrix.select(Axis(0), rows),
            columns: self.columns.clone(),
        }
    }
}

pub fn raw_column_indices(columns: &[ColumnMeta]) -> Vec<usize> {
    (0..columns.len()).filter(|&j| !columns[j].is_osf()).collect()
}

pub fn osf_column_indices(columns: &[ColumnMeta]) -> Vec<usize> {
    (0..columns.len()).filter(|&j| columns[j].is_osf()).collect()
}

type GroupKey = (Metric, Option<Vec<usize>>);

/// Fits every spec on `x`, sharing one neighbor index and neighbor table
/// per distinct (metric, subspace) pair.
fn fit_all(x: ArrayView2<'_, f64>, specs: &[OsfSpec]) -> Result<Vec<(FittedOsf, OsfScores)>> {
    let wrap = |spec: &OsfSpec, e: Error| Error::Osf {
        spec: spec.to_string(),
        source: Box::new(e),
    };
    for spec in specs {
        spec.check(x.nrows(), x.ncols()).map_err(|e| wrap(spec, e))?;
    }
    let mut groups: HashMap<GroupKey, usize> = HashMap::new();
    let mut order: Vec<GroupKey> = Vec::new();
    for spec in specs {
        let key = (spec.metric, spec.subspace.clone());
        let max_k = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            0
        });
        *max_k = (*max_k).max(spec.k);
    }
    let tables: HashMap<GroupKey, (Arc<NeighborIndex>, Vec<NeighborList>)> = order
        .into_iter()
        .map(|key| {
            let proto = OsfSpec {
                family: OsfFamily::KnnDist,
                k: 1,
                metric: key.0,
                subspace: key.1.clone(),
            };
            let index = Arc::new(NeighborIndex::build(proto.restrict(x), key.0)?);
            let table = index.member_table(groups[&key]);
            Ok((key, (index, table)))
        })
        .collect::<Result<_>>()?;
    Ok(specs
        .par_iter()
        .map(|spec| {
            let (index, table) = &tables[&(spec.metric, spec.subspace.clone())];
            FittedOsf::from_table(spec.clone(), Arc::clone(index), table)
        })
        .collect())
}

/// Builds `[X, phi_1(X), ..., phi_m(X)]` with every scoring column
/// min-max rescaled over the rows of `x_scaled`.
pub fn build_representation(
    x_scaled: ArrayView2<'_, f64>,
    feature_names: &[String],
    specs: &[OsfSpec],
) -> Result<OutlierRepresentation> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("no scoring functions given".into()));
    }
    if feature_names.len() != x_scaled.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x_scaled.ncols(),
            actual: feature_names.len(),
        });
    }
    let fitted = fit_all(x_scaled, specs)?;
    let (n, k_raw) = x_scaled.dim();
    let mut matrix = Array2::zeros((n, k_raw + specs.len()));
    matrix.slice_mut(ndarray::s![.., ..k_raw]).assign(&x_scaled);
    let mut columns: Vec<ColumnMeta> = feature_names.iter().map(ColumnMeta::raw).collect();
    for (m, (_, scores)) in fitted.into_iter().enumerate() {
        let lo = scores.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scores.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let meta = ColumnMeta {
            name: scores.spec.to_string(),
            kind: ColumnKind::Osf,
            spec: Some(scores.spec),
            cost: None,
            score_range: Some((lo, hi)),
        };
        for (i, &v) in scores.values.iter().enumerate() {
            matrix[[i, k_raw + m]] = meta.rescale(v);
        }
        columns.push(meta);
    }
    Ok(OutlierRepresentation { matrix, columns })
}

/// New points mapped into a representation fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalScores {
    pub matrix: Array2<f64>,
    /// How many scoring columns were actually evaluated.
    pub osf_evaluated: usize,
}

/// Maps new points into the representation described by `columns`, whose
/// scoring columns were fitted on `x_train_scaled`.
pub fn score_external(
    columns: &[ColumnMeta],
    x_train_scaled: ArrayView2<'_, f64>,
    x_new_scaled: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    score_external_subset(columns, x_train_scaled, x_new_scaled, None).map(|s| s.matrix)
}

/// Like [`score_external`], but only evaluates the columns in `wanted`
/// (all columns when `None`). Columns left out are filled with zeros.
pub fn score_external_subset(
    columns: &[ColumnMeta],
    x_train_scaled: ArrayView2<'_, f64>,
    x_new_scaled: ArrayView2<'_, f64>,
    wanted: Option<&[usize]>,
) -> Result<ExternalScores> {
    let raw = raw_column_indices(columns);
    if x_train_scaled.ncols() != raw.len() {
        return Err(Error::DimensionMismatch {
            expected: raw.len(),
            actual: x_train_scaled.ncols(),
        });
    }
    if x_new_scaled.ncols() != raw.len() {
        return Err(Error::DimensionMismatch {
            expected: raw.len(),
            actual: x_new_scaled.ncols(),
        });
    }
    let mut use_col = vec![wanted.is_none(); columns.len()];
    if let Some(w) = wanted {
        for &j in w {
            if j >= columns.len() {
                return Err(Error::InvalidArgument(format!("column {j} out of range")));
            }
            use_col[j] = true;
        }
    }
    let n_new = x_new_scaled.nrows();
    let mut matrix = Array2::zeros((n_new, columns.len()));
    for (raw_pos, &j) in raw.iter().enumerate() {
        if use_col[j] {
            matrix.column_mut(j).assign(&x_new_scaled.column(raw_pos));
        }
    }
    let osf: Vec<usize> = osf_column_indices(columns)
        .into_iter()
        .filter(|&j| use_col[j])
        .collect();
    if n_new == 0 {
        return Ok(ExternalScores {
            matrix,
            osf_evaluated: 0,
        });
    }
    let specs: Vec<OsfSpec> = osf
        .iter()
        .map(|&j| {
            columns[j].spec.clone().ok_or_else(|| Error::InvalidSpec {
                spec: columns[j].name.clone(),
                reason: "scoring column carries no spec".into(),
            })
        })
        .collect::<Result<_>>()?;
    let fitted = fit_all(x_train_scaled, &specs)?;
    let points: Vec<Vec<f64>> = x_new_scaled.rows().into_iter().map(|r| r.to_vec()).collect();
    let scored: Vec<Vec<f64>> = fitted
        .par_iter()
        .zip(&osf)
        .map(|((model, _), &j)| {
            points
                .iter()
                .map(|p| model.score_point(p).map(|v| columns[j].rescale(v)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    for (values, &j) in scored.iter().zip(&osf) {
        for (i, &v) in values.iter().enumerate() {
            matrix[[i, j]] = v;
        }
    }
    Ok(ExternalScores {
        matrix,
        osf_evaluated: osf.len(),
    })
}
