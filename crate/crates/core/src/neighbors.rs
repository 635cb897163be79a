//! Exact k-nearest-neighbor queries by brute force.
//!
//! Ties on distance are always broken by the lower reference row index so
//! every score built on top of these lists is reproducible.

use std::cmp::Ordering;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
}

impl Metric {
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
        }
    }
}

/// Neighbors of one query, nearest first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborList {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl NeighborList {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The first `k` entries (or all of them when fewer exist).
    pub fn truncated(&self, k: usize) -> (&[usize], &[f64]) {
        let k = k.min(self.len());
        (&self.indices[..k], &self.distances[..k])
    }
}

/// Reference rows plus a metric. Queries scan every row.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    reference: Array2<f64>,
    metric: Metric,
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn k_smallest(mut candidates: Vec<(f64, usize)>, k: usize) -> NeighborList {
    let k = k.min(candidates.len());
    if k == 0 {
        return NeighborList::default();
    }
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, by_distance_then_index);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(by_distance_then_index);
    let (distances, indices) = candidates.into_iter().unzip();
    NeighborList { indices, distances }
}

impl NeighborIndex {
    pub fn build(reference: Array2<f64>, metric: Metric) -> Result<Self> {
        if reference.nrows() == 0 {
            return Err(Error::Empty);
        }
        let reference = reference.as_standard_layout().into_owned();
        Ok(Self { reference, metric })
    }

    pub fn n_rows(&self) -> usize {
        self.reference.nrows()
    }

    pub fn dim(&self) -> usize {
        self.reference.ncols()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn reference(&self) -> &Array2<f64> {
        &self.reference
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.reference
            .row(i)
            .to_slice()
            .expect("reference stored in standard layout")
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.metric.distance(self.row(i), self.row(j))
    }

    pub fn distance_to(&self, point: &[f64], j: usize) -> f64 {
        self.metric.distance(point, self.row(j))
    }

    /// The `k` nearest other rows of reference row `row`.
    pub fn knn_of_member(&self, row: usize, k: usize) -> Result<NeighborList> {
        let n = self.n_rows();
        if row >= n {
            return Err(Error::RowOutOfRange { row, n });
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        Ok(self.member_neighbors(row, k))
    }

    fn member_neighbors(&self, row: usize, k: usize) -> NeighborList {
        let q = self.row(row);
        let candidates = (0..self.n_rows())
            .filter(|&j| j != row)
            .map(|j| (self.metric.distance(q, self.row(j)), j))
            .collect();
        k_smallest(candidates, k)
    }

    /// The `k` nearest reference rows of an outside point.
    pub fn knn_of_external(&self, point: &[f64], k: usize) -> Result<NeighborList> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: point.len(),
            });
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let candidates = (0..self.n_rows())
            .map(|j| (self.metric.distance(point, self.row(j)), j))
            .collect();
        Ok(k_smallest(candidates, k))
    }

    /// Self-excluded neighbor lists of length `min(k, n - 1)` for every row.
    pub fn member_table(&self, k: usize) -> Vec<NeighborList> {
        (0..self.n_rows())
            .into_par_iter()
            .map(|i| self.member_neighbors(i, k))
            .collect()
    }
}
