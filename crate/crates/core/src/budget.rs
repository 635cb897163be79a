//! Cost-aware sparse selection: orthogonal matching pursuit for logistic
//! regression, its cost-weighted variant, and stability selection of a
//! budget-feasible column set across bags.

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{count_outliers, sample_balanced_bags, BagSpec};
use crate::error::{Error, Result};
use crate::eval::{metric_report, MetricReport};
use crate::model::{
    bag_rows, check_labels, fit_bags, fit_logistic_with_report, sigmoid, train_bore, BaggedEnsemble, FitOptions,
    LogisticModel,
};
use crate::osf::{ColumnMeta, OutlierRepresentation};

/// Prediction-time costs of scoring columns are drawn from this pool.
pub const DEFAULT_COST_POOL: [f64; 8] = [10.0, 20.0, 50.0, 100.0, 200.0, 300.0, 1000.0, 2000.0];

/// Random feasible subsets averaged per budget by the random strategy.
pub const DEFAULT_RANDOM_DRAWS: usize = 20;

/// Per-column prediction cost and the budget their selected sum must fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostVector {
    pub costs: Vec<f64>,
    pub budget: f64,
}

impl CostVector {
    /// Costs with a budget equal to their total (no constraint).
    pub fn unconstrained(costs: Vec<f64>) -> Self {
        let budget = costs.iter().sum();
        Self { costs, budget }
    }

    pub fn with_budget(&self, budget: f64) -> Self {
        Self {
            costs: self.costs.clone(),
            budget,
        }
    }

    pub fn total(&self) -> f64 {
        self.costs.iter().sum()
    }

    pub fn cost_of(&self, columns: &[usize]) -> f64 {
        columns.iter().map(|&j| self.costs[j]).sum()
    }

    pub fn from_columns(columns: &[ColumnMeta]) -> Result<Self> {
        let costs = columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                c.cost
                    .ok_or_else(|| Error::InvalidArgument(format!("column {j} ({}) has no cost assigned", c.name)))
            })
            .collect::<Result<_>>()?;
        Ok(Self::unconstrained(costs))
    }
}

/// Raw columns cost 1; each scoring column draws a cost uniformly with
/// replacement from `pool`.
pub fn assign_costs(columns: &[ColumnMeta], pool: &[f64], seed: u64) -> Result<CostVector> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("cost pool is empty".into()));
    }
    if let Some(&bad) = pool.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(Error::InvalidArgument(format!("cost pool entry {bad} is not positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs = columns
        .iter()
        .map(|c| {
            if c.is_osf() {
                pool[rng.random_range(0..pool.len())]
            } else {
                1.0
            }
        })
        .collect();
    Ok(CostVector::unconstrained(costs))
}

/// Writes costs into column metadata.
pub fn apply_costs(columns: &mut [ColumnMeta], costs: &CostVector) {
    for (c, &v) in columns.iter_mut().zip(&costs.costs) {
        c.cost = Some(v);
    }
}

enum Stop<'a> {
    Count(usize),
    Budget(&'a CostVector),
}

/// Greedy pursuit shared by the plain and cost-weighted variants. The
/// criterion for column `j` is `|phi_j . r| / (weight_j * phi_j . phi_j)`.
fn pursue(
    phi: ArrayView2<'_, f64>,
    y: &[u8],
    weights: Option<&[f64]>,
    stop: Stop<'_>,
    opts: &FitOptions,
) -> Result<(LogisticModel, Vec<usize>)> {
    let (n, d) = phi.dim();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
        });
    }
    let n_out = count_outliers(y);
    if n_out == 0 || n_out == n {
        return Err(Error::SingleClass);
    }
    let sq_norms: Vec<f64> = phi.axis_iter(Axis(1)).map(|c| c.dot(&c)).collect();
    let selectable: Vec<bool> = sq_norms.iter().map(|&s| s > 0.0).collect();
    let n_selectable = selectable.iter().filter(|&&s| s).count();
    if n_selectable < d {
        log::debug!("{} zero columns are not selectable", d - n_selectable);
    }
    if let Stop::Count(gamma) = stop {
        if gamma > n_selectable {
            return Err(Error::GammaTooLarge {
                gamma,
                available: n_selectable,
            });
        }
    }
    if let Stop::Budget(costs) = stop {
        if costs.costs.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: costs.costs.len(),
            });
        }
        for j in (0..d).filter(|&j| selectable[j]) {
            let c = costs.costs[j];
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidCost { column: j, cost: c });
            }
        }
    }

    let mut model = LogisticModel {
        active_set: Some(Vec::new()),
        ..LogisticModel::zeros(d)
    };
    let mut active: Vec<usize> = Vec::new();
    let mut in_active = vec![false; d];
    let mut residual: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let mut spent = 0.0;
    loop {
        if let Stop::Count(gamma) = stop {
            if active.len() == gamma {
                break;
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..d {
            if in_active[j] || !selectable[j] {
                continue;
            }
            let corr: f64 = phi.column(j).iter().zip(&residual).map(|(x, r)| x * r).sum();
            let w = weights.map_or(1.0, |w| w[j]);
            let score = corr.abs() / (w * sq_norms[j]);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else { break };
        if let Stop::Budget(costs) = stop {
            let c = costs.costs[j];
            if spent + c > costs.budget {
                break;
            }
            spent += c;
        }
        active.push(j);
        in_active[j] = true;
        let (refit, _) = fit_logistic_with_report(phi, y, opts, Some(&active), Some(&model))?;
        model = refit;
        for (i, row) in phi.rows().into_iter().enumerate() {
            residual[i] = f64::from(y[i]) - sigmoid(model.decision(row));
        }
    }
    Ok((model, active))
}

/// Orthogonal matching pursuit with a logistic refit after every pick.
/// Returns the final model and the columns in selection order.
pub fn omp_fit(
    phi: ArrayView2<'_, f64>,
    y: &[u8],
    gamma: usize,
    opts: &FitOptions,
) -> Result<(LogisticModel, Vec<usize>)> {
    pursue(phi, y, None, Stop::Count(gamma), opts)
}

/// Cost-weighted pursuit that stops once the next pick would push the
/// total cost of the active set past `costs.budget`.
pub fn budgeted_omp_fit(
    phi: ArrayView2<'_, f64>,
    y: &[u8],
    costs: &CostVector,
    opts: &FitOptions,
) -> Result<(LogisticModel, Vec<usize>)> {
    pursue(phi, y, Some(&costs.costs), Stop::Budget(costs), opts)
}

/// Plain (unweighted) pursuit truncated at the same budget rule.
pub fn omp_fit_within_budget(
    phi: ArrayView2<'_, f64>,
    y: &[u8],
    costs: &CostVector,
    opts: &FitOptions,
) -> Result<(LogisticModel, Vec<usize>)> {
    pursue(phi, y, None, Stop::Budget(costs), opts)
}

/// Fraction of bags whose active set contains each column.
pub fn selection_frequencies(per_bag_active: &[Vec<usize>], d: usize) -> Vec<f64> {
    let mut counts = vec![0usize; d];
    for active in per_bag_active {
        for &j in active {
            counts[j] += 1;
        }
    }
    let b = per_bag_active.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / b).collect()
}

/// Columns ordered by descending frequency, then ascending cost, then index.
pub fn frequency_order(frequencies: &[f64], costs: &CostVector) -> Vec<usize> {
    let mut order: Vec<usize> = (0..frequencies.len()).collect();
    order.sort_by(|&a, &b| {
        frequencies[b]
            .total_cmp(&frequencies[a])
            .then(costs.costs[a].total_cmp(&costs.costs[b]))
            .then(a.cmp(&b))
    });
    order
}

/// Walks columns in [`frequency_order`] and keeps each one that still fits
/// the remaining budget. Never-selected columns are never kept.
pub fn stable_set(frequencies: &[f64], costs: &CostVector) -> Vec<usize> {
    let mut spent = 0.0;
    let mut kept = Vec::new();
    for j in frequency_order(frequencies, costs) {
        if frequencies[j] <= 0.0 {
            break;
        }
        let c = costs.costs[j];
        if spent + c <= costs.budget {
            spent += c;
            kept.push(j);
        }
    }
    kept
}

/// Per-bag selections and the stable set derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub per_bag_active: Vec<Vec<usize>>,
    pub frequencies: Vec<f64>,
    pub stable_set: Vec<usize>,
    pub selection_order: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Cost-weighted pursuit criterion.
    Budgeted,
    /// Unweighted pursuit criterion, truncated at the budget.
    PlainOmp,
}

fn train_with_stability(
    rep: &OutlierRepresentation,
    labels: &[u8],
    bag_spec: &BagSpec,
    costs: &CostVector,
    opts: &FitOptions,
    rule: SelectionRule,
) -> Result<(BaggedEnsemble, SelectionTrace)> {
    check_labels(rep, labels)?;
    if costs.costs.len() != rep.d() {
        return Err(Error::DimensionMismatch {
            expected: rep.d(),
            actual: costs.costs.len(),
        });
    }
    let phi = rep.matrix.view();
    let bags = sample_balanced_bags(labels, bag_spec)?;
    let per_bag_active: Vec<Vec<usize>> = bags
        .par_iter()
        .map(|bag| {
            let (x, y) = bag_rows(phi, labels, bag);
            let fit = match rule {
                SelectionRule::Budgeted => budgeted_omp_fit(x.view(), &y, costs, opts),
                SelectionRule::PlainOmp => omp_fit_within_budget(x.view(), &y, costs, opts),
            };
            fit.map(|(_, active)| active)
        })
        .collect::<Result<_>>()?;
    let frequencies = selection_frequencies(&per_bag_active, rep.d());
    let selection_order = frequency_order(&frequencies, costs);
    let stable = stable_set(&frequencies, costs);
    let mut subset = stable.clone();
    subset.sort_unstable();
    if subset.is_empty() {
        log::warn!("budget {} admits no columns; models are intercept-only", costs.budget);
    }
    let models = fit_bags(phi, labels, &bags, opts, Some(&subset))?;
    let ensemble = BaggedEnsemble {
        models,
        bags,
        stable_set: Some(subset),
        columns: rep.columns.clone(),
    };
    let trace = SelectionTrace {
        per_bag_active,
        frequencies,
        stable_set: stable,
        selection_order,
    };
    Ok((ensemble, trace))
}

/// Budgeted pursuit in every bag, stability selection of the columns that
/// fit `costs.budget`, then one plain logistic refit per bag on that set.
pub fn train_bore_budget(
    rep: &OutlierRepresentation,
    labels: &[u8],
    bag_spec: &BagSpec,
    costs: &CostVector,
    opts: &FitOptions,
) -> Result<(BaggedEnsemble, SelectionTrace)> {
    train_with_stability(rep, labels, bag_spec, costs, opts, SelectionRule::Budgeted)
}

/// Shuffles all columns and keeps each one that still fits the budget.
pub fn random_feasible_subset(costs: &CostVector, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..costs.costs.len()).collect();
    order.shuffle(rng);
    let mut spent = 0.0;
    let mut kept: Vec<usize> = order
        .into_iter()
        .filter(|&j| {
            let fits = spent + costs.costs[j] <= costs.budget;
            if fits {
                spent += costs.costs[j];
            }
            fits
        })
        .collect();
    kept.sort_unstable();
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Budgeted,
    PlainOmp,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Budgeted, Strategy::PlainOmp, Strategy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Budgeted => "budgeted",
            Strategy::PlainOmp => "plain_omp",
            Strategy::Random => "random",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub random_draws: usize,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            random_draws: DEFAULT_RANDOM_DRAWS,
            seed: 0,
        }
    }
}

/// Test metrics of one strategy at one budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget: f64,
    pub strategy: Strategy,
    pub metrics: MetricReport,
}

fn average_reports(reports: &[MetricReport]) -> MetricReport {
    let m = reports.len() as f64;
    MetricReport {
        auc: reports.iter().map(|r| r.auc).sum::<f64>() / m,
        auc_01: reports.iter().map(|r| r.auc_01).sum::<f64>() / m,
        precision_at_no: reports.iter().map(|r| r.precision_at_no).sum::<f64>() / m,
        n_o: reports[0].n_o,
    }
}

/// Evaluates every strategy at every budget on held-out rows. Rows come
/// out budget-major, strategies in the order given.
#[allow(clippy::too_many_arguments)]
pub fn budget_sweep(
    rep_train: &OutlierRepresentation,
    labels_train: &[u8],
    rep_test: &OutlierRepresentation,
    labels_test: &[u8],
    costs: &CostVector,
    budgets: &[f64],
    bag_spec: &BagSpec,
    strategies: &[Strategy],
    opts: &FitOptions,
    sweep: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    if budgets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("budgets must be sorted ascending".into()));
    }
    if rep_test.d() != rep_train.d() {
        return Err(Error::DimensionMismatch {
            expected: rep_train.d(),
            actual: rep_test.d(),
        });
    }
    let test_view = rep_test.matrix.view();
    let mut rows = Vec::with_capacity(budgets.len() * strategies.len());
    for &budget in budgets {
        let budgeted = costs.with_budget(budget);
        for &strategy in strategies {
            let metrics = match strategy {
                Strategy::Budgeted | Strategy::PlainOmp => {
                    let rule = if strategy == Strategy::Budgeted {
                        SelectionRule::Budgeted
                    } else {
                        SelectionRule::PlainOmp
                    };
                    let (ens, _) = train_with_stability(rep_train, labels_train, bag_spec, &budgeted, opts, rule)?;
                    metric_report(&ens.predict_proba(test_view)?, labels_test)?
                }
                Strategy::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(sweep.seed ^ budget.to_bits());
                    let subsets: Vec<Vec<usize>> = (0..sweep.random_draws.max(1))
                        .map(|_| random_feasible_subset(&budgeted, &mut rng))
                        .collect();
                    let reports = subsets
                        .iter()
                        .map(|subset| {
                            let ens = train_bore(rep_train, labels_train, bag_spec, opts, Some(subset))?;
                            metric_report(&ens.predict_proba(test_view)?, labels_test)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    average_reports(&reports)
                }
            };
            rows.push(SweepRow {
                budget,
                strategy,
                metrics,
            });
        }
    }
    Ok(rows)
}
