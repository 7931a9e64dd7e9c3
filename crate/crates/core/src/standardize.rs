//! Sample moments and scaled residuals.
//!
//! The covariance estimator divides by `n`, not `n - 1`. Every statistic in
//! this crate is built on residuals whitened with that matrix, so the
//! residuals satisfy `sum_j Y_j = 0` and `(1/n) sum_j Y_j Y_j^T = I` exactly
//! (up to roundoff).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Eigenvalues below this fraction of the largest one mark the covariance as singular.
pub const SINGULAR_RATIO: f64 = 1e-12;

/// Raw sample: `n` observations of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl DataMatrix {
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if data.len() != n * d {
            return Err(invalid(format!(
                "buffer of length {} does not hold {n} rows of dimension {d}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite entry at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(invalid(format!(
                "row {bad} has {} entries, expected {d}",
                rows[bad].len()
            )));
        }
        Self::new(rows.concat(), rows.len(), d)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.d..(j + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Applies `x -> A x + b` to every row.
    pub fn affine_map(&self, a: &DMatrix<f64>, b: &[f64]) -> Result<Self> {
        if a.nrows() != self.d || a.ncols() != self.d || b.len() != self.d {
            return Err(invalid("affine map does not match the data dimension"));
        }
        let mut out = Vec::with_capacity(self.data.len());
        for row in self.rows() {
            for p in 0..self.d {
                let mut v = b[p];
                for q in 0..self.d {
                    v += a[(p, q)] * row[q];
                }
                out.push(v);
            }
        }
        Self::new(out, self.n, self.d)
    }
}

/// Scaled residuals `Y_j = S_n^{-1/2} (X_j - mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedSample {
    residuals: Vec<f64>,
    n: usize,
    d: usize,
}

impl StandardizedSample {
    /// Wraps vectors that are already standardized. The moment invariants
    /// are not checked; use [`scaled_residuals`] for raw data.
    pub fn from_residuals(data: DataMatrix) -> Self {
        Self {
            n: data.n,
            d: data.d,
            residuals: data.data,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.residuals[j * self.d..(j + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.residuals.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.residuals
    }

    /// Squared Euclidean norms `||Y_j||^2`.
    pub fn squared_norms(&self) -> Vec<f64> {
        self.rows().map(|y| dot(y, y)).collect()
    }

    /// Largest deviation from `sum_j Y_j = 0` and `(1/n) sum Y Y^T = I`.
    pub fn moment_residuals(&self) -> (f64, f64) {
        let d = self.d;
        let mut sums = vec![0.0; d];
        let mut second = vec![0.0; d * d];
        for y in self.rows() {
            for p in 0..d {
                sums[p] += y[p];
                for q in 0..d {
                    second[p * d + q] += y[p] * y[q];
                }
            }
        }
        let mean_dev = sums.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut cov_dev = 0.0f64;
        for p in 0..d {
            for q in 0..d {
                let target = if p == q { 1.0 } else { 0.0 };
                cov_dev = cov_dev.max((second[p * d + q] / self.n as f64 - target).abs());
            }
        }
        (mean_dev, cov_dev)
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn sample_mean(x: &DataMatrix) -> Result<Vec<f64>> {
    if x.n == 0 {
        return Err(invalid("sample mean of an empty sample"));
    }
    let mut mean = vec![0.0; x.d];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let inv = 1.0 / x.n as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    Ok(mean)
}

/// Sample covariance with divisor `n`.
pub fn sample_cov(x: &DataMatrix) -> Result<DMatrix<f64>> {
    if x.n < 2 {
        return Err(invalid(format!("sample covariance needs n >= 2, got {}", x.n)));
    }
    let mean = sample_mean(x)?;
    let d = x.d;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in x.rows() {
        for p in 0..d {
            centered[p] = row[p] - mean[p];
        }
        for p in 0..d {
            for q in p..d {
                cov[(p, q)] += centered[p] * centered[q];
            }
        }
    }
    let inv = 1.0 / x.n as f64;
    for p in 0..d {
        for q in p..d {
            let v = cov[(p, q)] * inv;
            cov[(p, q)] = v;
            cov[(q, p)] = v;
        }
    }
    Ok(cov)
}

/// Symmetric positive definite `M` with `M M = S^{-1}`, via `S = Q L Q^T`.
pub fn sym_inv_sqrt(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, _) = inv_sqrt_with_condition(s)?;
    Ok(m)
}

fn inv_sqrt_with_condition(s: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if !s.is_square() || s.nrows() == 0 {
        return Err(invalid("expected a non-empty square matrix"));
    }
    let asym = (s - s.transpose()).amax();
    if asym > 1e-12 * s.amax().max(1.0) {
        return Err(invalid("matrix is not symmetric"));
    }
    let eig = SymmetricEigen::new(s.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if max.is_nan() || max <= 0.0 || min <= SINGULAR_RATIO * max {
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        return Err(Error::SingularCovariance { ratio });
    }
    let scale = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
    let q = &eig.eigenvectors;
    let mut m = q * DMatrix::from_diagonal(&scale) * q.transpose();
    // exact symmetry
    let mt = m.transpose();
    m = (m + mt) * 0.5;
    Ok((m, max / min))
}

/// Scaled residuals of a raw sample.
pub fn scaled_residuals(x: &DataMatrix) -> Result<StandardizedSample> {
    if x.n < x.d + 1 {
        return Err(invalid(format!(
            "standardization needs n >= d + 1 observations (n = {}, d = {})",
            x.n, x.d
        )));
    }
    let mean = sample_mean(x)?;
    let cov = sample_cov(x)?;
    let (root, condition) = inv_sqrt_with_condition(&cov)?;
    let d = x.d;
    let mut residuals = Vec::with_capacity(x.n * d);
    let mut centered = vec![0.0; d];
    for row in x.rows() {
        for p in 0..d {
            centered[p] = row[p] - mean[p];
        }
        for p in 0..d {
            let mut v = 0.0;
            for q in 0..d {
                v += root[(p, q)] * centered[q];
            }
            residuals.push(v);
        }
    }
    let out = StandardizedSample { residuals, n: x.n, d };
    #[cfg(debug_assertions)]
    {
        // Roundoff in the whitening grows with the condition number.
        let slack = (condition / 1e3).max(1.0);
        let (mean_dev, cov_dev) = out.moment_residuals();
        debug_assert!(
            mean_dev <= 1e-10 * x.n as f64 * slack && cov_dev <= 1e-10 * slack,
            "scaled residual invariants violated: {mean_dev:e}, {cov_dev:e}"
        );
    }
    let _ = condition;
    Ok(out)
}
