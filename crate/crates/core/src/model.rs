//! Logistic regression and the bagged ensemble built from it.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{count_outliers, sample_balanced_bags, Bag, BagSpec};
use crate::error::{Error, Result};
use crate::osf::{ColumnMeta, OutlierRepresentation};

/// Largest magnitude any coefficient (or the intercept) may take. Keeps
/// fits on separable bags finite.
pub const COEFFICIENT_CAP: f64 = 50.0;

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Barzilai-Borwein trial step, halved until the Armijo condition holds.
    #[default]
    FixedWithBacktracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_rule: StepRule,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            step_rule: StepRule::FixedWithBacktracking,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        // written so that a NaN tolerance is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if self.max_iterations == 0 || !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "fit options need positive iterations and tolerance".into(),
            ));
        }
        Ok(())
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Coefficients over all `d` representation columns plus an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub beta: Vec<f64>,
    pub intercept: f64,
    /// Columns allowed to carry a nonzero coefficient, when restricted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_set: Option<Vec<usize>>,
}

impl LogisticModel {
    pub fn zeros(d: usize) -> Self {
        Self {
            beta: vec![0.0; d],
            intercept: 0.0,
            active_set: None,
        }
    }

    pub fn d(&self) -> usize {
        self.beta.len()
    }

    #[inline]
    pub fn decision(&self, row: ArrayView1<'_, f64>) -> f64 {
        let dot: f64 = match &self.active_set {
            Some(active) => active.iter().map(|&j| self.beta[j] * row[j]).sum(),
            None => self.beta.iter().zip(row).map(|(b, x)| b * x).sum(),
        };
        dot + self.intercept
    }

    pub fn predict_proba(&self, phi: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        check_columns(phi.ncols(), self.d())?;
        Ok(phi.rows().into_iter().map(|r| sigmoid(self.decision(r))).collect())
    }
}

fn check_columns(actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

fn check_shapes(beta: &[f64], phi: &ArrayView2<'_, f64>, y: &[u8]) -> Result<()> {
    check_columns(phi.ncols(), beta.len())?;
    if phi.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.nrows(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// Negative log-likelihood of the labels under `(beta, intercept)`.
pub fn nll(beta: &[f64], intercept: f64, phi: ArrayView2<'_, f64>, y: &[u8]) -> Result<f64> {
    check_shapes(beta, &phi, y)?;
    Ok(objective(beta, intercept, phi, y))
}

fn objective(beta: &[f64], intercept: f64, phi: ArrayView2<'_, f64>, y: &[u8]) -> f64 {
    phi.rows()
        .into_iter()
        .zip(y)
        .map(|(row, &label)| {
            let eta = row.dot(&ArrayView1::from(beta)) + intercept;
            if label == 1 {
                softplus(-eta)
            } else {
                softplus(eta)
            }
        })
        .sum()
}

/// Gradient of [`nll`] with respect to `beta` and the intercept.
pub fn nll_gradient(beta: &[f64], intercept: f64, phi: ArrayView2<'_, f64>, y: &[u8]) -> Result<(Vec<f64>, f64)> {
    check_shapes(beta, &phi, y)?;
    let mut grad = vec![0.0; beta.len()];
    let g0 = gradient_into(beta, intercept, phi, y, &mut grad);
    Ok((grad, g0))
}

fn gradient_into(beta: &[f64], intercept: f64, phi: ArrayView2<'_, f64>, y: &[u8], grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let beta = ArrayView1::from(beta);
    let mut g0 = 0.0;
    for (row, &label) in phi.rows().into_iter().zip(y) {
        let r = sigmoid(row.dot(&beta) + intercept) - f64::from(label);
        g0 += r;
        for (g, x) in grad.iter_mut().zip(row) {
            *g += r * x;
        }
    }
    g0
}

/// Diagnostics from one logistic fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial point.
    pub objective_history: Vec<f64>,
}

/// Fits on the columns in `column_subset` (all columns when `None`); every
/// other coefficient stays zero.
pub fn fit_logistic(
    phi: ArrayView2<'_, f64>,
    y: &[u8],
    opts: &FitOptions,
    column_subset: Option<&[usize]>,
) -> Result<LogisticModel> {
    fit_logistic_with_report(phi, y, opts, column_subset, None).map(|(m, _)| m)
}

/// [`fit_logistic`] with an optional warm start and the optimizer trace.
pub fn fit_logistic_with_report(
    phi: ArrayView2<'_, f64>,
    y: &[u8],
    opts: &FitOptions,
    column_subset: Option<&[usize]>,
    warm_start: Option<&LogisticModel>,
) -> Result<(LogisticModel, FitReport)> {
    opts.validate()?;
    if phi.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.nrows(),
            actual: y.len(),
        });
    }
    let n_out = count_outliers(y);
    if n_out == 0 || n_out == y.len() {
        return Err(Error::SingleClass);
    }
    let d = phi.ncols();
    let columns: Vec<usize> = match column_subset {
        Some(cols) => {
            if let Some(&bad) = cols.iter().find(|&&j| j >= d) {
                return Err(Error::InvalidArgument(format!("column {bad} out of range for {d}")));
            }
            cols.to_vec()
        }
        None => (0..d).collect(),
    };
    let z = phi.select(Axis(1), &columns);
    let (w0, b0) = match warm_start {
        Some(m) if m.d() == d => (columns.iter().map(|&j| m.beta[j]).collect(), m.intercept),
        _ => (vec![0.0; columns.len()], 0.0),
    };
    let (w, b, report) = descend(z.view(), y, opts, w0, b0);
    let mut beta = vec![0.0; d];
    for (&j, &v) in columns.iter().zip(&w) {
        beta[j] = v;
    }
    let model = LogisticModel {
        beta,
        intercept: b,
        active_set: column_subset.map(|_| columns),
    };
    Ok((model, report))
}

fn clip(v: f64) -> f64 {
    v.clamp(-COEFFICIENT_CAP, COEFFICIENT_CAP)
}

/// Largest gradient component that the box constraint does not block.
fn projected_grad_norm(w: &[f64], b: f64, gw: &[f64], gb: f64) -> f64 {
    let blocked = |x: f64, g: f64| (x >= COEFFICIENT_CAP && g < 0.0) || (x <= -COEFFICIENT_CAP && g > 0.0);
    w.iter()
        .zip(gw)
        .chain(std::iter::once((&b, &gb)))
        .filter(|(x, g)| !blocked(**x, **g))
        .map(|(_, g)| g.abs())
        .fold(0.0, f64::max)
}

/// Projected gradient descent on the box `[-cap, cap]` with Barzilai-Borwein
/// trial steps and Armijo backtracking. Every accepted step lowers the
/// objective.
fn descend(
    z: ArrayView2<'_, f64>,
    y: &[u8],
    opts: &FitOptions,
    mut w: Vec<f64>,
    mut b: f64,
) -> (Vec<f64>, f64, FitReport) {
    let p = w.len();
    let mut gw = vec![0.0; p];
    let mut f = objective(&w, b, z, y);
    let mut gb = gradient_into(&w, b, z, y, &mut gw);
    let mut history = vec![f];

    // 1/L with L bounding the Hessian of the objective.
    let lipschitz = 0.25 * z.iter().map(|v| v * v).sum::<f64>() + 0.25 * y.len() as f64;
    let mut step = 1.0 / lipschitz.max(f64::MIN_POSITIVE);

    let mut new_w = vec![0.0; p];
    let mut new_gw = vec![0.0; p];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        if projected_grad_norm(&w, b, &gw, gb) < opts.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for j in 0..p {
                new_w[j] = clip(w[j] - t * gw[j]);
            }
            let new_b = clip(b - t * gb);
            let decrease: f64 = (0..p).map(|j| gw[j] * (new_w[j] - w[j])).sum::<f64>() + gb * (new_b - b);
            let new_f = objective(&new_w, new_b, z, y);
            if new_f <= f + ARMIJO_C * decrease && new_f <= f {
                accepted = Some((new_b, new_f));
                break;
            }
            t *= 0.5;
        }
        let Some((new_b, new_f)) = accepted else {
            break;
        };
        let new_gb = gradient_into(&new_w, new_b, z, y, &mut new_gw);
        // Barzilai-Borwein step for the next trial
        let mut ss = (new_b - b) * (new_b - b);
        let mut sy = (new_b - b) * (new_gb - gb);
        for j in 0..p {
            let s = new_w[j] - w[j];
            ss += s * s;
            sy += s * (new_gw[j] - gw[j]);
        }
        if ss == 0.0 {
            // every free coordinate is pinned at the cap
            std::mem::swap(&mut w, &mut new_w);
            b = new_b;
            history.push(new_f);
            converged = true;
            break;
        }
        step = if sy > 0.0 {
            (ss / sy).clamp(1e-12, 1e12)
        } else {
            t * 2.0
        };
        std::mem::swap(&mut w, &mut new_w);
        std::mem::swap(&mut gw, &mut new_gw);
        b = new_b;
        gb = new_gb;
        f = new_f;
        history.push(f);
    }
    if !converged && projected_grad_norm(&w, b, &gw, gb) < opts.gradient_tolerance {
        converged = true;
    }
    let report = FitReport {
        iterations,
        converged,
        objective_history: history,
    };
    (w, b, report)
}

/// `B` logistic models, one per class-balanced bag, whose probabilities are
/// averaged at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggedEnsemble {
    pub models: Vec<LogisticModel>,
    pub bags: Vec<Bag>,
    /// Budget-feasible columns shared by every model, when budgeted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable_set: Option<Vec<usize>>,
    pub columns: Vec<ColumnMeta>,
}

impl BaggedEnsemble {
    pub fn d(&self) -> usize {
        self.columns.len()
    }

    /// Columns any model can read: the stable set when budgeted, otherwise
    /// the union of the models' active sets (all columns if unrestricted).
    pub fn used_columns(&self) -> Vec<usize> {
        if let Some(s) = &self.stable_set {
            return s.clone();
        }
        let mut used = vec![false; self.d()];
        for m in &self.models {
            match &m.active_set {
                Some(a) => a.iter().for_each(|&j| used[j] = true),
                None => return (0..self.d()).collect(),
            }
        }
        (0..self.d()).filter(|&j| used[j]).collect()
    }

    pub fn predict_proba(&self, phi_new: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        predict_proba(self, phi_new)
    }
}

/// Mean over bags of each model's predicted outlier probability.
pub fn predict_proba(ensemble: &BaggedEnsemble, phi_new: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    check_columns(phi_new.ncols(), ensemble.d())?;
    if ensemble.models.is_empty() {
        return Err(Error::Model("ensemble has no models".into()));
    }
    let b = ensemble.models.len() as f64;
    Ok(phi_new
        .rows()
        .into_iter()
        .map(|row| ensemble.models.iter().map(|m| sigmoid(m.decision(row))).sum::<f64>() / b)
        .collect())
}

/// 1 where the probability is strictly above `threshold`.
pub fn classify(probs: &[f64], threshold: f64) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p > threshold)).collect()
}

/// Fits one model per bag on `column_subset` (every column when `None`).
pub(crate) fn fit_bags(
    phi: ArrayView2<'_, f64>,
    labels: &[u8],
    bags: &[Bag],
    opts: &FitOptions,
    column_subset: Option<&[usize]>,
) -> Result<Vec<LogisticModel>> {
    bags.par_iter()
        .map(|bag| {
            let (x, y) = bag_rows(phi, labels, bag);
            fit_logistic(x.view(), &y, opts, column_subset)
        })
        .collect()
}

pub(crate) fn bag_rows(phi: ArrayView2<'_, f64>, labels: &[u8], bag: &Bag) -> (Array2<f64>, Vec<u8>) {
    (
        phi.select(Axis(0), &bag.indices),
        bag.indices.iter().map(|&i| labels[i]).collect(),
    )
}

pub(crate) fn check_labels(rep: &OutlierRepresentation, labels: &[u8]) -> Result<()> {
    if rep.n_rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rep.n_rows(),
            actual: labels.len(),
        });
    }
    Ok(())
}

/// Trains the bagged ensemble on the representation. Restricting
/// `column_subset` to the raw columns gives the raw-feature ensemble.
pub fn train_bore(
    rep: &OutlierRepresentation,
    labels: &[u8],
    bag_spec: &BagSpec,
    opts: &FitOptions,
    column_subset: Option<&[usize]>,
) -> Result<BaggedEnsemble> {
    check_labels(rep, labels)?;
    let bags = sample_balanced_bags(labels, bag_spec)?;
    let models = fit_bags(rep.matrix.view(), labels, &bags, opts, column_subset)?;
    Ok(BaggedEnsemble {
        models,
        bags,
        stable_set: None,
        columns: rep.columns.clone(),
    })
}
