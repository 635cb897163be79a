//! Ranking metrics and the unsupervised baselines.

use serde::{Deserialize, Serialize};

use crate::data::{count_outliers, OUTLIER};
use crate::error::{Error, Result};
use crate::osf::OutlierRepresentation;

/// False-positive-rate cut used for the partial AUC in reports.
pub const PARTIAL_AUC_FPR: f64 = 0.1;

/// ROC points from `(0, 0)` to `(1, 1)`. Each group of tied scores
/// contributes a single (possibly diagonal) segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub auc_01: f64,
    pub precision_at_no: f64,
    pub n_o: usize,
}

/// Cumulative (false positive, true positive) counts after each tie group,
/// starting at (0, 0).
struct CountCurve {
    steps: Vec<(usize, usize)>,
    positives: usize,
    negatives: usize,
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("scores contain NaN".into()));
    }
    Ok(())
}

/// Indices by descending score, ties in ascending index order.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn count_curve(scores: &[f64], labels: &[u8]) -> Result<CountCurve> {
    check_inputs(scores, labels)?;
    let positives = count_outliers(labels);
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let order = ranking(scores);
    let mut steps = vec![(0, 0)];
    let (mut fp, mut tp) = (0, 0);
    for (pos, &i) in order.iter().enumerate() {
        if labels[i] == OUTLIER {
            tp += 1;
        } else {
            fp += 1;
        }
        let group_ends = order.get(pos + 1).is_none_or(|&next| scores[next] != scores[i]);
        if group_ends {
            steps.push((fp, tp));
        }
    }
    Ok(CountCurve {
        steps,
        positives,
        negatives,
    })
}

impl CountCurve {
    /// Trapezoidal area over false-positive counts in `[0, cut]`, in units of
    /// count pairs.
    fn area_until(&self, cut: f64) -> f64 {
        let mut area = 0.0;
        for w in self.steps.windows(2) {
            let (fp1, tp1) = (w[0].0 as f64, w[0].1 as f64);
            let (fp2, tp2) = (w[1].0 as f64, w[1].1 as f64);
            if fp2 <= cut {
                area += (fp2 - fp1) * (tp1 + tp2) / 2.0;
            } else {
                if fp1 < cut {
                    let x = cut - fp1;
                    let tp_cut = tp1 + (tp2 - tp1) * x / (fp2 - fp1);
                    area += x * (tp1 + tp_cut) / 2.0;
                }
                break;
            }
        }
        area
    }
}

pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    let curve = count_curve(scores, labels)?;
    let (p, n) = (curve.positives as f64, curve.negatives as f64);
    Ok(RocCurve {
        points: curve
            .steps
            .iter()
            .map(|&(fp, tp)| (fp as f64 / n, tp as f64 / p))
            .collect(),
    })
}

/// Area under the ROC curve; ties count one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    partial_auc(scores, labels, 1.0)
}

/// Area under the ROC curve for false positive rates in `[0, fpr_max]`,
/// divided by `fpr_max` so a perfect ranking scores 1.
pub fn partial_auc(scores: &[f64], labels: &[u8], fpr_max: f64) -> Result<f64> {
    if !(fpr_max > 0.0 && fpr_max <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fpr_max must lie in (0, 1], got {fpr_max}"
        )));
    }
    let curve = count_curve(scores, labels)?;
    let (p, n) = (curve.positives as f64, curve.negatives as f64);
    let cut = if fpr_max == 1.0 { n } else { fpr_max * n };
    Ok(curve.area_until(cut) / (p * n) / fpr_max)
}

/// Share of outliers among the `n` highest scores (ties: lower index first).
pub fn precision_at_n(scores: &[f64], labels: &[u8], n: usize) -> Result<f64> {
    check_inputs(scores, labels)?;
    if n == 0 || n > scores.len() {
        return Err(Error::InvalidArgument(format!("n = {n} outside 1..={}", scores.len())));
    }
    let hits = ranking(scores)[..n].iter().filter(|&&i| labels[i] == OUTLIER).count();
    Ok(hits as f64 / n as f64)
}

/// AUC, AUC up to 10% false positives, and precision at the number of true
/// outliers.
pub fn metric_report(scores: &[f64], labels: &[u8]) -> Result<MetricReport> {
    let n_o = count_outliers(labels);
    Ok(MetricReport {
        auc: auc(scores, labels)?,
        auc_01: partial_auc(scores, labels, PARTIAL_AUC_FPR)?,
        precision_at_no: precision_at_n(scores, labels, n_o)?,
        n_o,
    })
}

/// Row-wise mean of the (already min-max scaled) scoring columns.
pub fn baseline_mean_osf(rep: &OutlierRepresentation) -> Result<Vec<f64>> {
    let osf = rep.osf_columns();
    if osf.is_empty() {
        return Err(Error::InvalidArgument("representation has no scoring columns".into()));
    }
    let m = osf.len() as f64;
    Ok(rep
        .matrix
        .rows()
        .into_iter()
        .map(|row| osf.iter().map(|&j| row[j]).sum::<f64>() / m)
        .collect())
}

/// The scoring column with the highest AUC on `labels_test`. This peeks at
/// test labels, so it is a hindsight reference, not a usable detector.
pub fn baseline_best_osf(rep_test: &OutlierRepresentation, labels_test: &[u8]) -> Result<(usize, MetricReport)> {
    let osf = rep_test.osf_columns();
    if osf.is_empty() {
        return Err(Error::InvalidArgument("representation has no scoring columns".into()));
    }
    let mut best: Option<(usize, MetricReport)> = None;
    for j in osf {
        let scores = rep_test.matrix.column(j).to_vec();
        let report = metric_report(&scores, labels_test)?;
        if best.as_ref().is_none_or(|(_, b)| report.auc > b.auc) {
            best = Some((j, report));
        }
    }
    Ok(best.expect("at least one scoring column"))
}
