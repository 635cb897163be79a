use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use bore_core::budget::{assign_costs, budget_sweep, SweepOptions, SweepRow};
use bore_core::data::{read_csv, split_indices, CsvOptions, FeatureTable, LabeledDataset};
use bore_core::eval::{metric_report, roc_curve};
use bore_core::model::classify;
use bore_core::osf::OutlierRepresentation;
use bore_core::pipeline::{featurize, train_model};
use bore_core::{ModelFile, Strategy};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{csv_bytes, num, write_atomic};
use crate::{Cli, Command, UsageError};

const DEFAULT_BUDGET_FRACTIONS: [f64; 5] = [0.05, 0.1, 0.25, 0.5, 1.0];

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = RunConfig::resolve(&cli.common)?;
    match cli.command {
        Command::Featurize => cmd_featurize(&cfg),
        Command::Train { budget } => cmd_train(&cfg, budget),
        Command::Predict { model, threshold } => cmd_predict(&cfg, &model, threshold),
        Command::Evaluate { model, holdout } => cmd_evaluate(&cfg, &model, holdout),
        Command::BudgetSweep {
            budgets,
            budget_fractions,
            replicates,
            strategies,
            random_draws,
        } => {
            if let Some(b) = budgets {
                cfg.budgets = b;
                cfg.budget_fractions.clear();
            }
            if let Some(f) = budget_fractions {
                cfg.budget_fractions = f;
                cfg.budgets.clear();
            }
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            if let Some(names) = strategies {
                cfg.strategies = names
                    .iter()
                    .map(|s| s.parse::<Strategy>().map_err(|e| UsageError(e.to_string())))
                    .collect::<Result<_, _>>()?;
            }
            if let Some(r) = random_draws {
                cfg.random_draws = r;
            }
            cmd_budget_sweep(&cfg)
        }
    }
}

fn csv_options(cfg: &RunConfig, require_labels: bool) -> CsvOptions {
    CsvOptions {
        label_column: cfg.label_col.clone(),
        id_column: cfg.id_col.clone(),
        require_labels,
    }
}

fn load_labeled(cfg: &RunConfig) -> anyhow::Result<LabeledDataset> {
    let table = read_csv(cfg.data_path()?, &csv_options(cfg, true))?;
    Ok(LabeledDataset::try_from(table)?)
}

fn load_model(path: &Path) -> anyhow::Result<ModelFile> {
    let text =
        std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read model {}: {e}", path.display())))?;
    ModelFile::from_json(&text).map_err(|e| UsageError(format!("invalid model {}: {e}", path.display())).into())
}

fn representation_csv(rep: &OutlierRepresentation, ds: &LabeledDataset) -> anyhow::Result<Vec<u8>> {
    let mut header = vec!["row_id", "label"];
    header.extend(rep.columns.iter().map(|c| c.name.as_str()));
    let rows = rep.matrix.rows().into_iter().enumerate().map(|(i, row)| {
        let mut rec = vec![ds.row_ids[i].clone(), ds.labels[i].to_string()];
        rec.extend(row.iter().map(|&v| num(v)));
        rec
    });
    csv_bytes(&header, rows)
}

fn cmd_featurize(cfg: &RunConfig) -> anyhow::Result<()> {
    let data = load_labeled(cfg)?;
    let f = featurize(&data, &cfg.pipeline)?;
    cfg.ensure_out_dir()?;
    write_atomic(
        &cfg.out.join("representation_train.csv"),
        &representation_csv(f.rep_train(), &f.train)?,
    )?;
    write_atomic(
        &cfg.out.join("representation_test.csv"),
        &representation_csv(&f.rep_test, &f.test)?,
    )?;
    let columns = serde_json::to_vec_pretty(&f.rep_train().columns)?;
    write_atomic(&cfg.out.join("columns.json"), &columns)?;

    let rep = f.rep_train();
    let mut per_family: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &rep.columns {
        if let Some(spec) = &c.spec {
            *per_family.entry(spec.family.name()).or_default() += 1;
        }
    }
    println!(
        "train rows {}, test rows {}, d = {}, m = {}",
        f.train.n_rows(),
        f.test.n_rows(),
        rep.d(),
        rep.n_osf()
    );
    for (family, count) in per_family {
        println!("  {family}: {count}");
    }
    Ok(())
}

fn cmd_train(cfg: &RunConfig, budget: Option<f64>) -> anyhow::Result<()> {
    if let Some(c) = budget {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(UsageError(format!("budget must be a nonnegative number, got {c}")).into());
        }
    }
    let data = load_labeled(cfg)?;
    let (tr, _) = split_indices(&data.labels, cfg.pipeline.train_fraction, cfg.pipeline.seed)?;
    let train = data.select(&tr);
    let (model, trace) = train_model(&train, &cfg.pipeline, budget)?;
    cfg.ensure_out_dir()?;
    let path = cfg.out.join("model.json");
    write_atomic(&path, model.to_json()?.as_bytes())?;

    println!(
        "trained {} bags on {} rows, d = {}",
        model.ensemble.models.len(),
        train.n_rows(),
        model.ensemble.d()
    );
    if let Some(trace) = trace {
        let cost: f64 = trace
            .stable_set
            .iter()
            .map(|&j| model.ensemble.columns[j].cost.unwrap_or(0.0))
            .fold(0.0, |a, b| a + b);
        println!("stable set: {} columns, cost {cost}", trace.stable_set.len());
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_predict(cfg: &RunConfig, model_path: &Path, threshold: f64) -> anyhow::Result<()> {
    let model = load_model(model_path)?;
    let table: FeatureTable = read_csv(cfg.data_path()?, &csv_options(cfg, false))?;
    cfg.ensure_out_dir()?;
    let path = cfg.out.join("predictions.csv");
    let header = ["row_id", "probability", "label"];
    if table.features.nrows() == 0 {
        write_atomic(&path, &csv_bytes(&header, Vec::<Vec<String>>::new())?)?;
        println!("no rows to score; wrote {}", path.display());
        return Ok(());
    }
    let raw = model.align(table.features.view(), &table.feature_names)?;
    let pred = model.predict(raw.view())?;
    let labels = classify(&pred.probabilities, threshold);
    let rows = table
        .row_ids
        .iter()
        .zip(&pred.probabilities)
        .zip(&labels)
        .map(|((id, &p), &l)| vec![id.clone(), num(p), l.to_string()]);
    write_atomic(&path, &csv_bytes(&header, rows)?)?;
    println!(
        "scored {} rows with {} scoring columns; wrote {}",
        pred.probabilities.len(),
        pred.osf_evaluated,
        path.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct MetricsFile {
    auc: f64,
    auc_01: f64,
    precision_at_no: f64,
    n_o: usize,
    n_rows: usize,
}

fn cmd_evaluate(cfg: &RunConfig, model_path: &Path, holdout: bool) -> anyhow::Result<()> {
    let model = load_model(model_path)?;
    let mut data = load_labeled(cfg)?;
    if holdout {
        let (_, te) = split_indices(&data.labels, model.train_fraction, model.seeds.split)?;
        data = data.select(&te);
    }
    let raw = model.align(data.features.view(), &data.feature_names)?;
    let probs = model.predict(raw.view())?.probabilities;
    let report = metric_report(&probs, &data.labels)?;
    let roc = roc_curve(&probs, &data.labels)?;

    cfg.ensure_out_dir()?;
    let metrics = MetricsFile {
        auc: report.auc,
        auc_01: report.auc_01,
        precision_at_no: report.precision_at_no,
        n_o: report.n_o,
        n_rows: data.n_rows(),
    };
    write_atomic(&cfg.out.join("metrics.json"), &serde_json::to_vec_pretty(&metrics)?)?;
    let rows = roc.points.iter().map(|&(fpr, tpr)| [num(fpr), num(tpr)]);
    write_atomic(&cfg.out.join("roc.csv"), &csv_bytes(&["fpr", "tpr"], rows)?)?;
    println!(
        "auc {:.4}, auc@0.1 {:.4}, precision@{} {:.4} on {} rows",
        report.auc,
        report.auc_01,
        report.n_o,
        report.precision_at_no,
        data.n_rows()
    );
    Ok(())
}

fn sweep_budgets(cfg: &RunConfig, total: f64) -> anyhow::Result<Vec<f64>> {
    let mut budgets = if !cfg.budgets.is_empty() {
        cfg.budgets.clone()
    } else {
        let fractions = if cfg.budget_fractions.is_empty() {
            DEFAULT_BUDGET_FRACTIONS.to_vec()
        } else {
            cfg.budget_fractions.clone()
        };
        fractions.iter().map(|f| f * total).collect()
    };
    if budgets.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(UsageError("budgets must be nonnegative numbers".into()).into());
    }
    budgets.sort_by(f64::total_cmp);
    Ok(budgets)
}

fn cmd_budget_sweep(cfg: &RunConfig) -> anyhow::Result<()> {
    if cfg.replicates == 0 {
        return Err(UsageError("replicates must be at least 1".into()).into());
    }
    if cfg.strategies.is_empty() {
        return Err(UsageError("no strategies selected".into()).into());
    }
    let data = load_labeled(cfg)?;
    let f = featurize(&data, &cfg.pipeline)?;
    let p = &cfg.pipeline;

    let mut runs: Vec<Vec<SweepRow>> = Vec::with_capacity(cfg.replicates);
    for r in 0..cfg.replicates as u64 {
        let costs = assign_costs(&f.rep_train().columns, &p.cost_pool, p.cost_seed().wrapping_add(r))?;
        let budgets = sweep_budgets(cfg, costs.total())?;
        let sweep = SweepOptions {
            random_draws: cfg.random_draws,
            seed: p.seed.wrapping_add(r),
        };
        let rows = budget_sweep(
            f.rep_train(),
            &f.train.labels,
            &f.rep_test,
            &f.test.labels,
            &costs,
            &budgets,
            &p.bags,
            &cfg.strategies,
            &p.fit,
            &sweep,
        )
        .with_context(|| format!("cost replicate {r}"))?;
        log::info!("cost replicate {} of {} done", r + 1, cfg.replicates);
        runs.push(rows);
    }

    let reps = runs.len() as f64;
    let mean = |pick: &dyn Fn(&SweepRow) -> f64, i: usize| runs.iter().map(|rows| pick(&rows[i])).sum::<f64>() / reps;
    let header = [
        "budget",
        "strategy",
        "auc",
        "auc_01",
        "precision_at_no",
        "replicate_count",
    ];
    let records: Vec<Vec<String>> = (0..runs[0].len())
        .map(|i| {
            vec![
                num(mean(&|r| r.budget, i)),
                runs[0][i].strategy.name().to_string(),
                num(mean(&|r| r.metrics.auc, i)),
                num(mean(&|r| r.metrics.auc_01, i)),
                num(mean(&|r| r.metrics.precision_at_no, i)),
                runs.len().to_string(),
            ]
        })
        .collect();
    cfg.ensure_out_dir()?;
    let path = cfg.out.join("sweep.csv");
    write_atomic(&path, &csv_bytes(&header, &records)?)?;
    println!(
        "{} rows over {} cost replicates; wrote {}",
        records.len(),
        runs.len(),
        path.display()
    );
    Ok(())
}
