//! Mahalanobis squared-distance novelty indices over spectral windows.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::signals::{window_slice, SpectralWindow, TransmissibilityRecord};

/// Normal-condition statistics of one spectral window.
///
/// `covariance` already includes the ridge term; `inv_covariance` is its inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BaselineParts", into = "BaselineParts")]
pub struct BaselineModel {
    window: SpectralWindow,
    mean: Vec<f64>,
    covariance: Matrix,
    inv_covariance: Matrix,
    regularization: f64,
    n_samples: usize,
}

/// Serialized form; the inverse is rebuilt and checked on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineParts {
    pub window: SpectralWindow,
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    pub regularization: f64,
    pub n_samples: usize,
}

impl From<BaselineModel> for BaselineParts {
    fn from(b: BaselineModel) -> Self {
        BaselineParts {
            window: b.window,
            mean: b.mean,
            covariance: b.covariance,
            regularization: b.regularization,
            n_samples: b.n_samples,
        }
    }
}

impl TryFrom<BaselineParts> for BaselineModel {
    type Error = Error;

    fn try_from(p: BaselineParts) -> Result<Self> {
        let dim = p.window.len();
        if p.mean.len() != dim {
            return Err(Error::dimension("baseline mean", dim, p.mean.len()));
        }
        if p.covariance.rows() != dim || p.covariance.cols() != dim {
            return Err(Error::dimension("baseline covariance", dim, p.covariance.rows()));
        }
        let inv_covariance = spd_inverse(&p.covariance)?;
        let b = BaselineModel {
            window: p.window,
            mean: p.mean,
            covariance: p.covariance,
            inv_covariance,
            regularization: p.regularization,
            n_samples: p.n_samples,
        };
        let residual = b.inverse_residual();
        if !(residual <= 1e-8) {
            return Err(Error::precondition(format!(
                "stored covariance inverts with residual {residual:e}"
            )));
        }
        Ok(b)
    }
}

impl BaselineModel {
    pub fn window(&self) -> &SpectralWindow {
        &self.window
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn inv_covariance(&self) -> &Matrix {
        &self.inv_covariance
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// max |S⁻¹·S − I| over all entries.
    pub fn inverse_residual(&self) -> f64 {
        let prod = self
            .inv_covariance
            .matmul(&self.covariance)
            .expect("square matrices of equal size");
        let n = prod.rows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Column means and unbiased covariance of `samples` (rows are observations).
pub fn sample_moments(samples: &Matrix) -> (Vec<f64>, Matrix) {
    let n = samples.rows();
    let d = samples.cols();
    let mut mean = alloc::vec![0.0; d];
    for row in samples.row_iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = Matrix::zeros(d, d);
    let mut centered = alloc::vec![0.0; d];
    for row in samples.row_iter() {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = v - m;
        }
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    let denom = (n as f64 - 1.0).max(1.0);
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mean, cov)
}

/// Ridge of `scale × trace(S)/dim` for the unregularized sample covariance of `samples`.
pub fn relative_ridge(samples: &Matrix, scale: f64) -> f64 {
    let (_, cov) = sample_moments(samples);
    let d = cov.rows().max(1);
    let trace: f64 = (0..cov.rows()).map(|i| cov[(i, i)]).sum();
    scale * trace / d as f64
}

fn spd_inverse(s: &Matrix) -> Result<Matrix> {
    let n = s.rows();
    let m = DMatrix::from_row_slice(n, n, s.as_slice());
    let chol = nalgebra::Cholesky::new(m).ok_or(Error::SingularBaseline)?;
    // reject numerically semidefinite factors that nalgebra lets through
    let max_diag = (0..n).map(|i| s[(i, i)]).fold(0.0, f64::max);
    let min_pivot = chol.l_dirty().diagonal().iter().map(|l| l * l).fold(f64::MAX, f64::min);
    if !(min_pivot > 1e-14 * max_diag) {
        return Err(Error::SingularBaseline);
    }
    let inv = chol.inverse();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // symmetrize to kill rounding asymmetry in the inverse
            out[(i, j)] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
        }
    }
    Ok(out)
}

/// Fits the normal-condition mean and regularized covariance of one window.
pub fn fit_baseline(normal_windows: &Matrix, window: SpectralWindow, ridge: f64) -> Result<BaselineModel> {
    let dim = window.len();
    if normal_windows.cols() != dim {
        return Err(Error::dimension("baseline sample width", dim, normal_windows.cols()));
    }
    let n = normal_windows.rows();
    if n < dim + 1 {
        return Err(Error::precondition(format!(
            "{n} baseline samples for a {dim}-line window; need at least {}",
            dim + 1
        )));
    }
    if !(ridge >= 0.0) {
        return Err(Error::precondition(format!("ridge {ridge} < 0")));
    }
    let (mean, mut covariance) = sample_moments(normal_windows);
    for i in 0..dim {
        covariance[(i, i)] += ridge;
    }
    let inv_covariance = spd_inverse(&covariance)?;
    Ok(BaselineModel {
        window,
        mean,
        covariance,
        inv_covariance,
        regularization: ridge,
        n_samples: n,
    })
}

/// Mahalanobis squared distance `(x − x̄)ᵀ S⁻¹ (x − x̄)`, clamped at zero.
pub fn msd(baseline: &BaselineModel, x: &[f64]) -> Result<f64> {
    let dim = baseline.mean.len();
    if x.len() != dim {
        return Err(Error::dimension("novelty input", dim, x.len()));
    }
    let diff: Vec<f64> = x.iter().zip(&baseline.mean).map(|(a, b)| a - b).collect();
    let inv = &baseline.inv_covariance;
    let mut d2 = 0.0;
    for i in 0..dim {
        let row = inv.row(i);
        let mut acc = 0.0;
        for j in 0..dim {
            acc += row[j] * diff[j];
        }
        d2 += diff[i] * acc;
    }
    Ok(d2.max(0.0))
}

/// One novelty index per baseline, each scored on its own window of `record`.
pub fn novelty_features(baselines: &[BaselineModel], record: &TransmissibilityRecord) -> Result<Vec<f64>> {
    baselines
        .iter()
        .map(|b| msd(b, &window_slice(record, &b.window)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn window(len: usize) -> SpectralWindow {
        SpectralWindow {
            pair_index: 0,
            line_lo: 0,
            line_hi: len,
        }
    }

    #[test]
    fn two_sample_moments() {
        let s = Matrix::from_rows([[0.0], [2.0]]).unwrap();
        let b = fit_baseline(&s, window(1), 0.25).unwrap();
        assert_eq!(b.mean(), &[1.0]);
        assert_eq!(b.covariance()[(0, 0)], 2.25);
        assert_eq!(b.n_samples(), 2);
    }

    #[test]
    fn identical_samples_without_ridge_are_singular() {
        let s = Matrix::from_rows([[1.0, 2.0], [1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert_eq!(fit_baseline(&s, window(2), 0.0).unwrap_err(), Error::SingularBaseline);
        assert!(fit_baseline(&s, window(2), 1e-3).is_ok());
    }

    #[test]
    fn too_few_samples() {
        let s = Matrix::from_rows([[1.0, 2.0], [3.0, 1.0]]).unwrap();
        assert!(matches!(fit_baseline(&s, window(2), 0.0), Err(Error::Precondition { .. })));
    }

    #[test]
    fn msd_at_mean_and_unit_offset() {
        let parts = BaselineParts {
            window: window(3),
            mean: vec![1.0, -2.0, 0.5],
            covariance: Matrix::identity(3),
            regularization: 0.0,
            n_samples: 10,
        };
        let b = BaselineModel::try_from(parts).unwrap();
        assert_eq!(msd(&b, &[1.0, -2.0, 0.5]).unwrap(), 0.0);
        assert_eq!(msd(&b, &[2.0, -2.0, 0.5]).unwrap(), 1.0);
        assert!(matches!(msd(&b, &[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn features_for_empty_and_mean_records() {
        let mags = Matrix::from_rows([[1.0, 2.0, 3.0, 4.0]]).unwrap();
        let rec = TransmissibilityRecord::new(mags, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(novelty_features(&[], &rec).unwrap().is_empty());

        let w = SpectralWindow {
            pair_index: 0,
            line_lo: 1,
            line_hi: 3,
        };
        let b = BaselineModel::try_from(BaselineParts {
            window: w,
            mean: vec![2.0, 3.0],
            covariance: Matrix::from_rows([[2.0, 0.5], [0.5, 1.0]]).unwrap(),
            regularization: 0.0,
            n_samples: 5,
        })
        .unwrap();
        assert_eq!(novelty_features(&[b], &rec).unwrap(), vec![0.0]);
    }

    #[test]
    fn load_rejects_indefinite_covariance() {
        let parts = BaselineParts {
            window: window(2),
            mean: vec![0.0, 0.0],
            covariance: Matrix::from_rows([[1.0, 2.0], [2.0, 1.0]]).unwrap(),
            regularization: 0.0,
            n_samples: 5,
        };
        assert!(BaselineModel::try_from(parts).is_err());
    }
}
