mod support;

use rand::seq::SliceRandom;
use rand::Rng;
use shm_locate_core::features::{
    apply_normalization, fit_normalization, fitness_knn, ga_select, pca_fit, pca_project, FeatureDataset, GaConfig, Split,
};
use shm_locate_core::{Error, Matrix, Sequential};
use support::*;

fn recovered(p: &PlantedProblem, seed: u64) -> (usize, Vec<usize>, f64) {
    let cfg = GaConfig { seed, ..GaConfig::default() };
    let out = ga_select(&p.x_train, &p.y_train, &p.x_val, &p.y_val, &cfg, &Sequential).unwrap();
    let hits = out.indices.iter().filter(|i| p.planted.contains(i)).count();
    (hits, out.indices, out.fitness)
}

#[test]
fn ga_recovers_planted_columns() {
    let mut hits = Vec::new();
    for seed in 0..5 {
        let p = standard_planted(seed);
        let (h, indices, fitness) = recovered(&p, seed);
        let planted_fitness = fitness_knn(&p.x_train, &p.y_train, &p.x_val, &p.y_val, &p.planted).unwrap();
        assert!(fitness >= planted_fitness, "seed {seed}: {indices:?} vs {:?}", p.planted);
        hits.push(h);
    }
    hits.sort_unstable();
    assert!(hits[2] >= 8, "hits per seed {hits:?}");
}

#[test]
fn ga_beats_the_median_random_subset_and_never_regresses() {
    let p = planted_problem(7, 60, 9, 20, 1.5);
    let cfg = GaConfig { seed: 3, ..GaConfig::default() };
    let out = ga_select(&p.x_train, &p.y_train, &p.x_val, &p.y_val, &cfg, &Sequential).unwrap();
    let mut r = rng(8);
    let mut random: Vec<f64> = (0..20)
        .map(|_| {
            let mut cols: Vec<usize> = (0..60).collect();
            cols.shuffle(&mut r);
            fitness_knn(&p.x_train, &p.y_train, &p.x_val, &p.y_val, &cols[..9]).unwrap()
        })
        .collect();
    random.sort_by(f64::total_cmp);
    assert!(out.fitness >= random[10]);
    assert!(out.best_per_generation.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(out.best_per_generation.len(), cfg.generations + 1);
    assert_eq!(*out.best_per_generation.last().unwrap(), out.fitness);
    assert!(out.indices.windows(2).all(|w| w[0] < w[1]));

    let again = ga_select(&p.x_train, &p.y_train, &p.x_val, &p.y_val, &cfg, &Sequential).unwrap();
    assert_eq!(out, again);
}

#[test]
fn ga_with_subset_equal_to_width_returns_every_column() {
    let p = planted_problem(9, 6, 3, 5, 2.0);
    let cfg = GaConfig { subset_size: 6, ..GaConfig::default() };
    let out = ga_select(&p.x_train, &p.y_train, &p.x_val, &p.y_val, &cfg, &Sequential).unwrap();
    assert_eq!(out.indices, (0..6).collect::<Vec<_>>());
}

#[test]
fn ga_ties_resolve_to_the_smallest_subset() {
    // identical columns: every subset scores the same
    let x = Matrix::from_rows((0..18).map(|i| vec![(i % 9) as f64; 8])).unwrap();
    let y: Vec<u8> = (0..18).map(|i| (i % 9) as u8 + 1).collect();
    let cfg = GaConfig { subset_size: 3, ..GaConfig::default() };
    let out = ga_select(&x, &y, &x, &y, &cfg, &Sequential).unwrap();
    assert_eq!(out.indices, vec![0, 1, 2]);
}

#[test]
fn knn_fitness_reference_cases() {
    let p = planted_problem(11, 20, 4, 40, 2.0);
    let all: Vec<usize> = (0..20).collect();
    assert_eq!(fitness_knn(&p.x_train, &p.y_train, &p.x_train, &p.y_train, &all).unwrap(), 1.0);

    // shuffled labels: chance level for 9 balanced classes
    let mut r = rng(12);
    let big = planted_problem(13, 20, 4, 120, 2.0);
    let mut yb = big.y_val.clone();
    yb.shuffle(&mut r);
    let acc = fitness_knn(&big.x_train, &big.y_train, &big.x_val, &yb, &big.planted).unwrap();
    assert!((acc - 1.0 / 9.0).abs() < 0.06, "{acc}");

    // one perfectly separating column
    let x = Matrix::from_rows((0..27).map(|i| vec![r.random_range(0.0..1.0), (i / 3) as f64 * 10.0])).unwrap();
    let y: Vec<u8> = (0..27).map(|i| (i / 3) as u8 + 1).collect();
    assert_eq!(fitness_knn(&x, &y, &x, &y, &[1]).unwrap(), 1.0);
    assert!(fitness_knn(&x, &y, &x, &y, &[]).is_err());
}

#[test]
fn knn_distance_ties_go_to_the_lower_row() {
    let x_train = Matrix::from_rows([[1.0], [-1.0]]).unwrap();
    let x_val = Matrix::from_rows([[0.0]]).unwrap();
    assert_eq!(fitness_knn(&x_train, &[4, 7], &x_val, &[4], &[0]).unwrap(), 1.0);
    assert_eq!(fitness_knn(&x_train, &[4, 7], &x_val, &[7], &[0]).unwrap(), 0.0);
}

#[test]
fn normalization_reference_values_and_inverse() {
    let train = Matrix::from_rows([[0.0], [10.0]]).unwrap();
    let norm = fit_normalization(&train).unwrap();
    let out = apply_normalization(&Matrix::from_rows([[5.0], [0.0], [10.0], [12.0]]).unwrap(), &norm).unwrap();
    assert_eq!(out.as_slice(), &[0.0, -1.0, 1.0, 1.4]);

    let mut r = rng(14);
    let x = normal_matrix(&mut r, 50, 7, 30.0);
    let norm = fit_normalization(&x).unwrap();
    let back = norm.invert(&apply_normalization(&x, &norm).unwrap()).unwrap();
    for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    let constant = Matrix::from_rows([[1.0, 2.0], [3.0, 2.0]]).unwrap();
    assert!(matches!(fit_normalization(&constant), Err(Error::DegenerateFeature { column: 1 })));
}

#[test]
fn dataset_normalization_is_fitted_on_training_rows_only() {
    let x = Matrix::from_rows([[0.0], [10.0], [20.0], [-5.0]]).unwrap();
    let split = vec![Split::Train, Split::Train, Split::Validation, Split::Test];
    let ds = FeatureDataset::new(x, vec![1, 2, 1, 2], split).unwrap().normalized().unwrap();
    assert_eq!(ds.x.as_slice(), &[-1.0, 1.0, 3.0, -2.0]);
}

#[test]
fn pca_matches_an_independent_eigensolver() {
    let mut r = rng(15);
    let mut x = normal_matrix(&mut r, 100, 6, 1.0);
    // give the columns distinct, correlated scales
    for i in 0..100 {
        let row = x.row_mut(i);
        row[1] += 0.8 * row[0];
        row[3] *= 3.0;
        row[5] = 0.5 * row[5] - row[2];
    }
    let model = pca_fit(&x, 6).unwrap();
    let eig = jacobi_eigenvalues(&sample_covariance(&x));
    for (a, b) in model.explained_variance.iter().zip(&eig) {
        assert!(rel_err(*a, *b) < 1e-8, "{a} vs {b}");
    }
    assert!(rel_err(model.total_variance, eig.iter().sum()) < 1e-10);
}

#[test]
fn pca_components_are_orthonormal_and_reconstruct() {
    let mut r = rng(16);
    let x = normal_matrix(&mut r, 40, 5, 2.0);
    let model = pca_fit(&x, 5).unwrap();
    let c = &model.components;
    for i in 0..5 {
        for j in 0..5 {
            let dot: f64 = c.row(i).iter().zip(c.row(j)).map(|(a, b)| a * b).sum();
            assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
        let pivot = c.row(i).iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        assert!(pivot > 0.0);
    }
    let back = model.reconstruct(&pca_project(&model, &x).unwrap()).unwrap();
    for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
        assert!((a - b).abs() < 1e-8);
    }
    let mean_row = Matrix::from_vec(1, 5, model.mean.clone()).unwrap();
    assert!(pca_project(&model, &mean_row).unwrap().as_slice().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn pca_on_a_line_captures_all_variance() {
    let x = Matrix::from_rows((0..20).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0])).unwrap();
    let model = pca_fit(&x, 1).unwrap();
    assert!((model.explained_variance[0] - model.total_variance).abs() < 1e-10 * model.total_variance);
    assert!(pca_fit(&x, 3).is_err());
    assert!(pca_fit(&x, 0).is_err());
}
