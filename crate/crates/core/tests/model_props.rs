mod common;

use bore_core::data::sample_balanced_bags;
use bore_core::model::{fit_logistic, fit_logistic_with_report, nll, nll_gradient, train_bore};
use bore_core::osf::{ColumnMeta, OutlierRepresentation};
use bore_core::{BagSpec, BaggedEnsemble, FitOptions, LogisticModel};
use common::{gaussian, naive_nll, newton_logistic, rng, uniform_matrix};
use ndarray::{Array2, Axis};
use rand::Rng;

fn random_problem(seed: u64, n: usize, d: usize) -> (Array2<f64>, Vec<u8>, Vec<f64>, f64) {
    let mut r = rng(seed);
    let x = uniform_matrix(&mut r, n, d);
    let y: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0 || r.random_bool(0.2))).collect();
    let beta: Vec<f64> = (0..d).map(|_| gaussian(&mut r)).collect();
    let b0 = gaussian(&mut r);
    (x, y, beta, b0)
}

#[test]
fn gradient_matches_central_differences() {
    for seed in 0..20 {
        let (x, y, beta, b0) = random_problem(seed, 30, 5);
        let (g, g0) = nll_gradient(&beta, b0, x.view(), &y).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for j in 0..beta.len() {
            let mut up = beta.clone();
            let mut dn = beta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (naive_nll(&up, b0, &x, &y) - naive_nll(&dn, b0, &x, &y)) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs());
        }
        let fd0 = (naive_nll(&beta, b0 + h, &x, &y) - naive_nll(&beta, b0 - h, &x, &y)) / (2.0 * h);
        worst = worst.max((fd0 - g0).abs());
        assert!(worst < 1e-5, "seed {seed}: {worst}");
    }
}

#[test]
fn nll_agrees_with_definition() {
    for seed in 0..5 {
        let (x, y, beta, b0) = random_problem(seed, 25, 4);
        let a = nll(&beta, b0, x.view(), &y).unwrap();
        let b = naive_nll(&beta, b0, &x, &y);
        assert!((a - b).abs() < 1e-10 * b.max(1.0));
    }
}

#[test]
fn objective_never_increases() {
    for seed in 0..10 {
        let (x, y, _, _) = random_problem(seed, 60, 6);
        let (_, report) = fit_logistic_with_report(x.view(), &y, &FitOptions::default(), None, None).unwrap();
        assert!(report.objective_history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn fit_reaches_newton_optimum() {
    for seed in 0..5 {
        let (x, y, _, _) = random_problem(seed, 80, 3);
        let opts = FitOptions {
            max_iterations: 5000,
            gradient_tolerance: 1e-9,
            ..FitOptions::default()
        };
        let m = fit_logistic(x.view(), &y, &opts, None).unwrap();
        let (w, b0) = newton_logistic(&x, &y, 100);
        for (a, b) in m.beta.iter().zip(&w) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!((m.intercept - b0).abs() < 1e-6);
    }
}

#[test]
fn separable_fit_respects_cap() {
    let x = ndarray::array![[-1.0], [1.0]];
    let m = fit_logistic(x.view(), &[0, 1], &FitOptions::default(), None).unwrap();
    assert!(m.beta[0] > 0.0 && m.beta[0] <= 50.0 && m.intercept.abs() <= 50.0);
    let p = m.predict_proba(x.view()).unwrap();
    assert!(p[0] < 0.5 && p[1] > 0.5);
}

#[test]
fn probability_increases_with_positive_coefficient() {
    let m = LogisticModel {
        beta: vec![0.7, -0.2],
        intercept: 0.1,
        active_set: None,
    };
    let base = ndarray::array![[0.3, 0.4]];
    let mut bumped = base.clone();
    bumped[[0, 0]] += 0.01;
    let a = m.predict_proba(base.view()).unwrap()[0];
    let b = m.predict_proba(bumped.view()).unwrap()[0];
    assert!(b > a);
}

/// Noisy two-class data that no bag can separate.
fn overlapping_representation(seed: u64) -> (OutlierRepresentation, Vec<u8>) {
    let mut r = rng(seed);
    let n = 150;
    let mut x = Array2::zeros((n, 3));
    let mut y = vec![0u8; n];
    for i in 0..n {
        y[i] = u8::from(i % 4 == 0);
        let shift = if y[i] == 1 { 0.8 } else { 0.0 };
        for j in 0..3 {
            x[[i, j]] = gaussian(&mut r) + if j == 0 { shift } else { 0.0 };
        }
    }
    let columns = (0..3).map(|j| ColumnMeta::raw(format!("x{j}"))).collect();
    (OutlierRepresentation { matrix: x, columns }, y)
}

#[test]
fn raw_ensemble_matches_independent_pipeline() {
    let (rep, y) = overlapping_representation(21);
    let spec = BagSpec {
        num_bags: 8,
        outlier_fraction: 0.7,
        seed: 5,
    };
    let opts = FitOptions {
        max_iterations: 20_000,
        gradient_tolerance: 1e-10,
        ..FitOptions::default()
    };
    let raw: Vec<usize> = rep.raw_columns();
    let ens = train_bore(&rep, &y, &spec, &opts, Some(&raw)).unwrap();
    let got = ens.predict_proba(rep.matrix.view()).unwrap();

    // independent path: same bags, Newton fits, plain averaging
    let bags = sample_balanced_bags(&y, &spec).unwrap();
    let mut want = vec![0.0; y.len()];
    for bag in &bags {
        let xb = rep.matrix.select(Axis(0), &bag.indices);
        let yb: Vec<u8> = bag.indices.iter().map(|&i| y[i]).collect();
        let (w, b0) = newton_logistic(&xb, &yb, 100);
        for (i, row) in rep.matrix.rows().into_iter().enumerate() {
            let z: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b0;
            want[i] += 1.0 / (1.0 + (-z).exp()) / bags.len() as f64;
        }
    }
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }
}

#[test]
fn bag_order_does_not_change_predictions() {
    let (rep, y) = overlapping_representation(22);
    let spec = BagSpec {
        num_bags: 7,
        ..BagSpec::default()
    };
    let ens = train_bore(&rep, &y, &spec, &FitOptions::default(), None).unwrap();
    let p = ens.predict_proba(rep.matrix.view()).unwrap();
    let mut shuffled = BaggedEnsemble {
        models: ens.models.clone(),
        bags: ens.bags.clone(),
        ..ens.clone()
    };
    shuffled.models.reverse();
    shuffled.bags.reverse();
    let q = shuffled.predict_proba(rep.matrix.view()).unwrap();
    for (a, b) in p.iter().zip(&q) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn bags_are_balanced_and_without_replacement() {
    let (_, y) = overlapping_representation(23);
    let bags = sample_balanced_bags(&y, &BagSpec::default()).unwrap();
    assert_eq!(bags.len(), 50);
    let n_out = y.iter().filter(|&&l| l == 1).count();
    let p = (0.7 * n_out as f64 - 1e-9).ceil() as usize;
    for bag in &bags {
        let outliers = bag.indices.iter().filter(|&&i| y[i] == 1).count();
        assert_eq!(outliers, p);
        assert_eq!(bag.indices.len(), 2 * p);
        assert!(bag.indices.windows(2).all(|w| w[0] < w[1]));
    }
}
