mod support;

use rand::Rng;
use shm_locate_core::novelty::{fit_baseline, msd, relative_ridge, BaselineModel};
use shm_locate_core::signals::SpectralWindow;
use shm_locate_core::Matrix;
use support::*;

fn window(dim: usize) -> SpectralWindow {
    SpectralWindow { pair_index: 0, line_lo: 0, line_hi: dim }
}

/// Correlated Gaussian samples: rows of `z · L` with a random mixing matrix.
fn correlated(r: &mut shm_locate_core::rng::StreamRng, n: usize, dim: usize) -> Matrix {
    let z = normal_matrix(r, n, dim, 1.0);
    let mut mix = normal_matrix(r, dim, dim, 0.4);
    for i in 0..dim {
        mix[(i, i)] += 1.5;
    }
    let mut x = z.matmul(&mix).unwrap();
    let shift = normal_vec(r, dim, 3.0);
    for i in 0..n {
        for (v, s) in x.row_mut(i).iter_mut().zip(&shift) {
            *v += s;
        }
    }
    x
}

#[test]
fn msd_matches_a_solve_on_fifty_baselines() {
    let mut r = rng(10);
    for trial in 0..50 {
        let dim = 2 + trial % 7;
        let n = r.random_range(3 * dim..12 * dim);
        let x = correlated(&mut r, n, dim);
        let b = fit_baseline(&x, window(dim), relative_ridge(&x, 1e-8)).unwrap();
        for _ in 0..5 {
            let probe = normal_vec(&mut r, dim, 4.0);
            let want = msd_by_solve(b.mean(), b.covariance(), &probe);
            let got = msd(&b, &probe).unwrap();
            assert!(rel_err(got, want) < 1e-8, "trial {trial}: {got} vs {want}");
        }
        assert_eq!(msd(&b, b.mean()).unwrap(), 0.0);
    }
}

#[test]
fn moments_match_an_explicit_loop() {
    let mut r = rng(11);
    let x = correlated(&mut r, 40, 5);
    let b = fit_baseline(&x, window(5), 0.0).unwrap();
    let want = sample_covariance(&x);
    for i in 0..5 {
        for j in 0..5 {
            assert!((b.covariance()[(i, j)] - want[(i, j)]).abs() < 1e-12 * want[(i, i)].abs().max(1.0));
        }
    }
}

#[test]
fn stored_inverse_agrees_with_cofactor_inverse() {
    let mut r = rng(12);
    for _ in 0..10 {
        let x = correlated(&mut r, 30, 4);
        let b = fit_baseline(&x, window(4), relative_ridge(&x, 1e-8)).unwrap();
        let adj = adjugate_inverse_4x4(b.covariance());
        for i in 0..4 {
            for j in 0..4 {
                assert!(rel_err(b.inv_covariance()[(i, j)], adj[(i, j)]) < 1e-9 || (b.inv_covariance()[(i, j)] - adj[(i, j)]).abs() < 1e-12);
            }
        }
        assert!(b.inverse_residual() < 1e-10);
    }
}

#[test]
fn msd_is_affine_invariant() {
    let mut r = rng(13);
    for _ in 0..20 {
        let dim = r.random_range(2..7);
        let x = correlated(&mut r, 20 * dim, dim);
        let mut a = normal_matrix(&mut r, dim, dim, 0.5);
        for i in 0..dim {
            a[(i, i)] += 2.0;
        }
        let shift = normal_vec(&mut r, dim, 10.0);
        let transform = |m: &Matrix| {
            let mut y = m.matmul(&a.transpose()).unwrap();
            for i in 0..y.rows() {
                for (v, s) in y.row_mut(i).iter_mut().zip(&shift) {
                    *v += s;
                }
            }
            y
        };
        let b0 = fit_baseline(&x, window(dim), 0.0).unwrap();
        let b1 = fit_baseline(&transform(&x), window(dim), 0.0).unwrap();
        let probe = Matrix::from_vec(1, dim, normal_vec(&mut r, dim, 3.0)).unwrap();
        let d0 = msd(&b0, probe.row(0)).unwrap();
        let d1 = msd(&b1, transform(&probe).row(0)).unwrap();
        assert!(rel_err(d0, d1) < 1e-6, "{d0} vs {d1}");
    }
}

#[test]
fn msd_grows_along_any_ray() {
    let mut r = rng(14);
    let x = correlated(&mut r, 100, 6);
    let b = fit_baseline(&x, window(6), relative_ridge(&x, 1e-8)).unwrap();
    for _ in 0..10 {
        let d = normal_vec(&mut r, 6, 1.0);
        let mut last = 0.0;
        for step in 1..=30 {
            let t = 0.1 * step as f64;
            let p: Vec<f64> = b.mean().iter().zip(&d).map(|(m, v)| m + t * v).collect();
            let v = msd(&b, &p).unwrap();
            assert!(v > last);
            last = v;
        }
    }
}

#[test]
fn mean_msd_over_fitting_samples_is_near_the_dimension() {
    let mut r = rng(15);
    for dim in [4, 8, 16] {
        let x = correlated(&mut r, 400, dim);
        let b = fit_baseline(&x, window(dim), relative_ridge(&x, 1e-8)).unwrap();
        let mean: f64 = x.row_iter().map(|row| msd(&b, row).unwrap()).sum::<f64>() / 400.0;
        assert!((mean / dim as f64 - 1.0).abs() < 0.2, "dim {dim}: mean {mean}");
    }
}

#[test]
fn json_round_trip_rebuilds_the_inverse() {
    let mut r = rng(16);
    let x = correlated(&mut r, 50, 5);
    let b = fit_baseline(&x, window(5), relative_ridge(&x, 1e-8)).unwrap();
    let json = serde_json::to_string(&b).unwrap();
    let back: BaselineModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back.covariance(), b.covariance());
    assert!(back.inverse_residual() < 1e-10);
}

#[test]
fn too_few_samples_or_singular_data_are_errors() {
    let mut r = rng(17);
    let x = correlated(&mut r, 4, 4);
    assert!(fit_baseline(&x, window(4), 0.0).is_err());
    let flat = Matrix::from_rows((0..10).map(|i| vec![i as f64, 2.0 * i as f64])).unwrap();
    assert!(fit_baseline(&flat, window(2), 0.0).is_err());
}
