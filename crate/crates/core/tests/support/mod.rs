//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the crate's numerical kernels: each oracle is a
//! deliberately naive second implementation.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use shm_locate_core::features::Split;
use shm_locate_core::mlp::{Activation, MlpModel, MlpParts};
use shm_locate_core::rng::{standard_normal, stream, StreamRng};
use shm_locate_core::synthdata::{ChainModel, PanelDamage, RayleighDamping, DAMAGE_CLASSES};
use shm_locate_core::Matrix;

pub fn rng(seed: u64) -> StreamRng {
    stream(seed, 0xACCE)
}

pub fn normal_vec(rng: &mut StreamRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * standard_normal(rng)).collect()
}

pub fn normal_matrix(rng: &mut StreamRng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, normal_vec(rng, rows * cols, scale)).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

// ---------------------------------------------------------------- FRF

/// Dense complex Gaussian elimination with partial pivoting.
pub fn complex_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].norm().partial_cmp(&a[j][col].norm()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let sub = f * a[col][k];
                a[row][k] -= sub;
            }
            let sub = f * b[col];
            b[row] -= sub;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Full dynamic stiffness matrix of a grounded chain assembled entry by entry.
pub fn dynamic_stiffness(masses: &[f64], springs: &[f64], alpha: f64, beta: f64, w: f64) -> Vec<Vec<Complex64>> {
    let n = masses.len();
    let mut k = vec![vec![0.0; n]; n];
    for (s, &ks) in springs.iter().enumerate() {
        // spring s joins DOF s-1 and DOF s; out-of-range ends are ground
        let left = s.checked_sub(1);
        let right = (s < n).then_some(s);
        if let Some(l) = left {
            k[l][l] += ks;
        }
        if let Some(r) = right {
            k[r][r] += ks;
        }
        if let (Some(l), Some(r)) = (left, right) {
            k[l][r] -= ks;
            k[r][l] -= ks;
        }
    }
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let m = if i == j { masses[i] } else { 0.0 };
                    let c = alpha * m + beta * k[i][j];
                    Complex64::new(k[i][j] - w * w * m, w * c)
                })
                .collect()
        })
        .collect()
}

/// Receptances of every DOF to a unit force at `excitation`, one row per DOF.
pub fn naive_frf(masses: &[f64], springs: &[f64], damping: RayleighDamping, freqs: &[f64], excitation: usize) -> Vec<Vec<Complex64>> {
    let n = masses.len();
    let mut out = vec![Vec::new(); n];
    for &f in freqs {
        let w = 2.0 * std::f64::consts::PI * f;
        let a = dynamic_stiffness(masses, springs, damping.alpha, damping.beta, w);
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        rhs[excitation] = Complex64::new(1.0, 0.0);
        for (dof, u) in complex_solve(a, rhs).into_iter().enumerate() {
            out[dof].push(u);
        }
    }
    out
}

/// Valid chain model of `n` DOFs; class `c` weakens spring `1 + (c − 1) mod n`.
pub fn small_chain(masses: Vec<f64>, springs: Vec<f64>, damping: RayleighDamping) -> ChainModel {
    let n = masses.len();
    let panels = DAMAGE_CLASSES
        .iter()
        .map(|&c| PanelDamage {
            class_id: c,
            springs: vec![1 + (usize::from(c) - 1) % n],
            reduction: if c == 3 || c == 6 { 0.02 } else { 0.1 },
        })
        .collect();
    ChainModel::new(masses, springs, damping, panels).unwrap()
}

// ---------------------------------------------------------------- linear algebra

/// Real Gaussian elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.row_iter().map(<[f64]>::to_vec).collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}

/// `(x − mean)ᵀ · solve(S, x − mean)` without touching a stored inverse.
pub fn msd_by_solve(mean: &[f64], cov: &Matrix, x: &[f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let y = solve(cov, &diff);
    diff.iter().zip(&y).map(|(a, b)| a * b).sum()
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn minor4(a: &Matrix, skip_r: usize, skip_c: usize) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    let mut r = 0;
    for i in (0..4).filter(|&i| i != skip_r) {
        let mut c = 0;
        for j in (0..4).filter(|&j| j != skip_c) {
            m[r][c] = a[(i, j)];
            c += 1;
        }
        r += 1;
    }
    m
}

/// 4×4 inverse by cofactor expansion: adj(A) / det(A).
pub fn adjugate_inverse_4x4(a: &Matrix) -> Matrix {
    assert_eq!((a.rows(), a.cols()), (4, 4));
    let mut cof = Matrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            cof[(i, j)] = sign * det3(minor4(a, i, j));
        }
    }
    let det: f64 = (0..4).map(|j| a[(0, j)] * cof[(0, j)]).sum();
    let mut inv = Matrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            inv[(i, j)] = cof[(j, i)] / det;
        }
    }
    inv
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = a.row_iter().map(<[f64]>::to_vec).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum();
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// Unbiased sample covariance computed with explicit loops.
pub fn sample_covariance(x: &Matrix) -> Matrix {
    let (n, d) = (x.rows(), x.cols());
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64).collect();
    let mut c = Matrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            c[(a, b)] = (0..n).map(|i| (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b])).sum::<f64>() / (n - 1) as f64;
        }
    }
    c
}

// ---------------------------------------------------------------- MLP

/// Scalar-loop forward pass: softmax(W2·act(W1·x + b1) + b2).
pub fn forward_loops(m: &MlpModel, x: &[f64]) -> Vec<f64> {
    let (d, h, c) = (m.input_dim(), m.hidden_dim(), m.output_dim());
    let mut hidden = vec![0.0; h];
    for j in 0..h {
        let mut z = m.b1()[j];
        for i in 0..d {
            z += m.w1()[(j, i)] * x[i];
        }
        hidden[j] = match m.hidden_activation() {
            Activation::Tanh => z.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        };
    }
    let mut logits = vec![0.0; c];
    for k in 0..c {
        let mut z = m.b2()[k];
        for j in 0..h {
            z += m.w2()[(k, j)] * hidden[j];
        }
        logits[k] = z;
    }
    let top = logits.iter().cloned().fold(f64::MIN, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - top).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Per-class binary cross-entropy summed over classes and averaged over rows.
pub fn loss_loops(m: &MlpModel, x: &Matrix, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &label) in x.row_iter().zip(labels) {
        let p = forward_loops(m, row);
        for (k, &pk) in p.iter().enumerate() {
            let pk = pk.clamp(1e-12, 1.0 - 1e-12);
            total += if k == label { pk.ln() } else { (1.0 - pk).ln() };
        }
    }
    -total / labels.len() as f64
}

/// Flat parameter vector in the order W1, b1, W2, b2.
pub fn flat_params(m: &MlpModel) -> Vec<f64> {
    let p = MlpParts::from(m.clone());
    [p.w1, p.b1, p.w2, p.b2].concat()
}

pub fn with_params(m: &MlpModel, theta: &[f64]) -> MlpModel {
    let mut p = MlpParts::from(m.clone());
    let (a, b, c) = (p.w1.len(), p.b1.len(), p.w2.len());
    p.w1.copy_from_slice(&theta[..a]);
    p.b1.copy_from_slice(&theta[a..a + b]);
    p.w2.copy_from_slice(&theta[a + b..a + b + c]);
    p.b2.copy_from_slice(&theta[a + b + c..]);
    MlpModel::try_from(p).unwrap()
}

/// Central finite-difference gradient of [`loss_loops`] in flat parameter order.
pub fn fd_gradient(m: &MlpModel, x: &Matrix, labels: &[usize], step: f64) -> Vec<f64> {
    let theta = flat_params(m);
    (0..theta.len())
        .map(|i| {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[i] += step;
            down[i] -= step;
            (loss_loops(&with_params(m, &up), x, labels) - loss_loops(&with_params(m, &down), x, labels)) / (2.0 * step)
        })
        .collect()
}

// ---------------------------------------------------------------- GA fixtures

/// Planted feature-selection problem: `d` columns of which `planted.len()`
/// carry class-dependent means and the rest are pure noise.
pub struct PlantedProblem {
    pub x_train: Matrix,
    pub y_train: Vec<u8>,
    pub x_val: Matrix,
    pub y_val: Vec<u8>,
    pub planted: Vec<usize>,
}

/// Nine balanced classes; each informative column places the classes at
/// random levels, so every planted column adds separation the others lack.
pub fn planted_problem(seed: u64, d: usize, n_planted: usize, n_per_class: usize, spread: f64) -> PlantedProblem {
    let mut r = rng(seed);
    let mut cols: Vec<usize> = (0..d).collect();
    for i in 0..n_planted {
        let j = r.random_range(i..d);
        cols.swap(i, j);
    }
    let mut planted = cols[..n_planted].to_vec();
    planted.sort_unstable();
    // each column spreads the classes over evenly spaced levels in its own order
    let codes: Vec<Vec<f64>> = (0..n_planted)
        .map(|_| {
            let mut levels: Vec<f64> = (0..9).map(|c| c as f64 / 4.0 - 1.0).collect();
            for i in (1..9).rev() {
                levels.swap(i, r.random_range(0..=i));
            }
            levels
        })
        .collect();
    let mut draw = |n: usize| {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for c in 0..9 {
            for _ in 0..n {
                let mut row = normal_vec(&mut r, d, 1.0);
                for (k, &col) in planted.iter().enumerate() {
                    row[col] += spread * codes[k][c];
                }
                rows.push(row);
                y.push(c as u8 + 1);
            }
        }
        (Matrix::from_rows(rows).unwrap(), y)
    };
    let (x_train, y_train) = draw(n_per_class);
    let (x_val, y_val) = draw(n_per_class);
    PlantedProblem { x_train, y_train, x_val, y_val, planted }
}

pub fn splits_for(n: usize, split: Split) -> Vec<Split> {
    vec![split; n]
}

// ---------------------------------------------------------------- published tables

/// Nine-class confusion matrix, classes 1..=9.
pub const TABLE_1: [[u64; 9]; 9] = [
    [65, 0, 0, 0, 0, 0, 0, 0, 1],
    [0, 65, 0, 1, 0, 0, 0, 0, 0],
    [1, 0, 62, 0, 0, 1, 0, 1, 1],
    [0, 0, 0, 66, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 66, 0, 0, 0, 0],
    [0, 3, 0, 0, 0, 62, 0, 1, 0],
    [0, 0, 0, 0, 0, 0, 66, 0, 0],
    [1, 0, 0, 0, 0, 0, 0, 65, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 66],
];

/// Large-panel sub-problem, classes 1, 2, 4, 5, 7, 8, 9.
pub const TABLE_2: [[u64; 7]; 7] = [
    [65, 1, 0, 0, 0, 0, 0],
    [0, 63, 1, 0, 0, 0, 2],
    [1, 0, 65, 0, 0, 0, 0],
    [0, 0, 0, 66, 0, 0, 0],
    [0, 0, 0, 0, 66, 0, 0],
    [1, 0, 0, 0, 0, 65, 0],
    [1, 0, 0, 0, 0, 0, 65],
];

/// Small-panel sub-problem, classes 3 and 6.
pub const TABLE_3: [[u64; 2]; 2] = [[66, 0], [0, 66]];
/// Small panels with the transferred first layer.
pub const TABLE_4: [[u64; 2]; 2] = [[65, 1], [2, 64]];
/// Small panels, no hidden layer.
pub const TABLE_5: [[u64; 2]; 2] = [[65, 1], [3, 63]];

pub fn rows<const N: usize>(t: &[[u64; N]; N]) -> Vec<Vec<u64>> {
    t.iter().map(|r| r.to_vec()).collect()
}

// ---------------------------------------------------------------- gradient check

pub const GRAD_SHAPES: [(usize, usize, usize); 3] = [(2, 3, 2), (9, 10, 9), (9, 9, 7)];

/// Entrywise |a − b| / max(|a|, |b|, floor); the floor keeps near-zero
/// gradients from turning finite-difference round-off into a huge ratio.
pub fn gradient_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Largest relative gradient error over `draws` random (shape, batch) draws.
/// Every shape in [`GRAD_SHAPES`] is visited; batch sizes vary from 1 to 12.
pub fn gradient_check(seed: u64, draws: usize) -> f64 {
    use shm_locate_core::mlp::{grad, init_with_activation, Batch};
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for t in 0..draws {
        let (d, h, c) = GRAD_SHAPES[t % GRAD_SHAPES.len()];
        let act = if t % 5 == 4 { Activation::Logistic } else { Activation::Tanh };
        let model = init_with_activation(d, h, c, act, 0.5, &mut r).unwrap();
        let n = r.random_range(1..=12);
        let x = normal_matrix(&mut r, n, d, 1.0);
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let g = grad(&model, Batch::new(&x, &labels).unwrap()).unwrap();
        let analytic = [
            g.w1.unwrap().as_slice().to_vec(),
            g.b1.unwrap(),
            g.w2.as_slice().to_vec(),
            g.b2,
        ]
        .concat();
        let numeric = fd_gradient(&model, &x, &labels, 1e-5);
        worst = worst.max(gradient_rel_error(&analytic, &numeric, 1e-3));
    }
    worst
}

/// Fixture used for the planted-recovery checks: 60 columns, 9 informative.
pub fn standard_planted(seed: u64) -> PlantedProblem {
    planted_problem(100 + seed, 60, 9, 50, 1.5)
}
