//! Slow, obviously-correct reference implementations used as test oracles.
//! Nothing here calls into the library except for types.

#![allow(dead_code, clippy::needless_range_loop)]

use std::path::PathBuf;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-10;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ionosphere_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ionosphere.csv")
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn rows(x: &Array2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Points on a small integer grid, so duplicates and distance ties occur.
pub fn grid_matrix(rng: &mut impl Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| f64::from(rng.random_range(0..4)))
}

pub fn uniform_matrix(rng: &mut impl Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random::<f64>())
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Sorted (distance, index) pairs from `q` to every row except `skip`.
fn sorted_neighbors(pts: &[Vec<f64>], q: &[f64], skip: Option<usize>) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = (0..pts.len())
        .filter(|&j| Some(j) != skip)
        .map(|j| (euclid(q, &pts[j]), j))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all
}

fn knn(pts: &[Vec<f64>], i: usize, k: usize) -> Vec<(f64, usize)> {
    let mut v = sorted_neighbors(pts, &pts[i], Some(i));
    v.truncate(k);
    v
}

fn knn_ext(pts: &[Vec<f64>], q: &[f64], k: usize) -> Vec<(f64, usize)> {
    let mut v = sorted_neighbors(pts, q, None);
    v.truncate(k);
    v
}

fn kdist(pts: &[Vec<f64>], i: usize, k: usize) -> f64 {
    knn(pts, i, k).last().unwrap().0
}

fn lrd(pts: &[Vec<f64>], i: usize, k: usize) -> f64 {
    let nb = knn(pts, i, k);
    let s: f64 = nb.iter().map(|&(d, j)| d.max(kdist(pts, j, k))).sum();
    if s == 0.0 {
        1.0 / EPS
    } else {
        nb.len() as f64 / s
    }
}

fn simple_density(nb: &[(f64, usize)]) -> f64 {
    let s: f64 = nb.iter().map(|p| p.0).sum();
    if s == 0.0 {
        1.0 / EPS
    } else {
        nb.len() as f64 / s
    }
}

fn ldof_of(pts: &[Vec<f64>], nb: &[(f64, usize)]) -> f64 {
    let num = nb.iter().map(|p| p.0).sum::<f64>() / nb.len() as f64;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..nb.len() {
        for b in a + 1..nb.len() {
            total += euclid(&pts[nb[a].1], &pts[nb[b].1]);
            pairs += 1;
        }
    }
    let den = total / pairs as f64;
    num / if den == 0.0 { EPS } else { den }
}

/// In-sample score of every row for `family`, computed from scratch.
pub fn naive_osf(family: &str, x: &Array2<f64>, k: usize) -> Vec<f64> {
    let pts = rows(x);
    let n = pts.len();
    match family {
        "knn_dist" => (0..n).map(|i| kdist(&pts, i, k)).collect(),
        "knn_weight" => (0..n).map(|i| knn(&pts, i, k).iter().map(|p| p.0).sum()).collect(),
        "odin" => {
            let mut indeg = vec![0usize; n];
            for i in 0..n {
                for (_, j) in knn(&pts, i, k) {
                    indeg[j] += 1;
                }
            }
            indeg.iter().map(|&c| 1.0 / (1.0 + c as f64)).collect()
        }
        "lof" => (0..n)
            .map(|i| {
                let nb = knn(&pts, i, k);
                let mean = nb.iter().map(|&(_, j)| lrd(&pts, j, k)).sum::<f64>() / nb.len() as f64;
                mean / lrd(&pts, i, k)
            })
            .collect(),
        "simplified_lof" => (0..n)
            .map(|i| {
                let nb = knn(&pts, i, k);
                let mean = nb.iter().map(|&(_, j)| simple_density(&knn(&pts, j, k))).sum::<f64>() / nb.len() as f64;
                mean / simple_density(&nb)
            })
            .collect(),
        "ldof" => (0..n).map(|i| ldof_of(&pts, &knn(&pts, i, k))).collect(),
        other => panic!("unknown family {other}"),
    }
}

/// Score of an outside point against reference rows `x`, before rescaling.
pub fn naive_osf_external(family: &str, x: &Array2<f64>, k: usize, q: &[f64]) -> f64 {
    let pts = rows(x);
    let nb = knn_ext(&pts, q, k);
    match family {
        "knn_dist" => nb.last().unwrap().0,
        "knn_weight" => nb.iter().map(|p| p.0).sum(),
        "odin" => {
            let c = (0..pts.len())
                .filter(|&t| kdist(&pts, t, k) > euclid(q, &pts[t]))
                .count();
            1.0 / (1.0 + c as f64)
        }
        "lof" => {
            let s: f64 = nb.iter().map(|&(d, j)| d.max(kdist(&pts, j, k))).sum();
            let own = if s == 0.0 { 1.0 / EPS } else { nb.len() as f64 / s };
            nb.iter().map(|&(_, j)| lrd(&pts, j, k)).sum::<f64>() / nb.len() as f64 / own
        }
        "simplified_lof" => {
            let mean = nb.iter().map(|&(_, j)| simple_density(&knn(&pts, j, k))).sum::<f64>() / nb.len() as f64;
            mean / simple_density(&nb)
        }
        "ldof" => ldof_of(&pts, &nb),
        other => panic!("unknown family {other}"),
    }
}

/// AUC as the fraction of (outlier, inlier) pairs ranked correctly, ties
/// counting one half.
pub fn pair_count_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut good = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                good += 1.0;
            } else if si == sj {
                good += 0.5;
            }
        }
    }
    good / pairs
}

/// Negative log-likelihood written directly from its definition.
pub fn naive_nll(beta: &[f64], b0: f64, x: &Array2<f64>, y: &[u8]) -> f64 {
    x.rows()
        .into_iter()
        .zip(y)
        .map(|(row, &yi)| {
            let z: f64 = row.iter().zip(beta).map(|(a, w)| a * w).sum::<f64>() + b0;
            let p = 1.0 / (1.0 + (-z).exp());
            if yi == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum()
}

/// Gaussian columns with labels `1{3 x_a - 3 x_b > 0}`.
pub fn two_sparse_problem(seed: u64, n: usize, d: usize, a: usize, b: usize) -> (Array2<f64>, Vec<u8>) {
    let mut r = rng(seed);
    let x = Array2::from_shape_fn((n, d), |_| gaussian(&mut r));
    let y = x
        .rows()
        .into_iter()
        .map(|row| u8::from(3.0 * row[a] - 3.0 * row[b] > 0.0))
        .collect();
    (x, y)
}

/// Logistic regression by damped Newton iterations with an intercept,
/// written independently of the library optimizer. Only meant for
/// non-separable data where the optimum is finite.
pub fn newton_logistic(x: &Array2<f64>, y: &[u8], iters: usize) -> (Vec<f64>, f64) {
    let (n, d) = x.dim();
    let p = d + 1;
    let mut w = vec![0.0; p];
    let design = |i: usize, j: usize| if j == d { 1.0 } else { x[[i, j]] };
    for _ in 0..iters {
        let mut g = vec![0.0; p];
        let mut h = vec![vec![0.0; p]; p];
        for i in 0..n {
            let z: f64 = (0..p).map(|j| design(i, j) * w[j]).sum();
            let mu = 1.0 / (1.0 + (-z).exp());
            let r = mu - f64::from(y[i]);
            let s = mu * (1.0 - mu);
            for a in 0..p {
                g[a] += r * design(i, a);
                for c in 0..p {
                    h[a][c] += s * design(i, a) * design(i, c);
                }
            }
        }
        let step = solve(h, g);
        for j in 0..p {
            w[j] -= step[j];
        }
        if step.iter().all(|s| s.abs() < 1e-13) {
            break;
        }
    }
    let b0 = w.pop().unwrap();
    (w, b0)
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut out = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * out[c]).sum();
        out[r] = (b[r] - s) / a[r][r];
    }
    out
}
