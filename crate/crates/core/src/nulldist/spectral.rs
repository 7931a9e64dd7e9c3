use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{LineRule, QuadratureSpec};
use crate::standardize::dot;
use crate::statistic::WeightParam;

/// Mean of the limit null law of `T_{n,a}`.
pub fn mean_limit(a: WeightParam, d: usize) -> f64 {
    let a = a.get();
    let df = d as f64;
    let poly = 16.0 * a.powi(3) + (8.0 * df + 48.0) * a * a + (12.0 * df + 40.0) * a + df * df + 10.0 * df + 16.0;
    (PI / a).powf(0.5 * df) * df - (PI / (a + 1.0)).powf(0.5 * df) * poly * df / (16.0 * (a + 1.0).powi(3))
}

#[inline]
fn psi(t2: f64) -> f64 {
    (-0.5 * t2).exp()
}

/// Covariance kernel `K(s, t)` of the limiting Gaussian process.
pub fn kernel_k(s: &[f64], t: &[f64]) -> DMatrix<f64> {
    assert_eq!(s.len(), t.len(), "kernel arguments differ in dimension");
    let d = s.len();
    let mut k = DMatrix::zeros(d, d);
    kernel_into(s, t, k.as_mut_slice());
    k
}

/// Writes `K(s, t)` column-major into `out` (length `d*d`).
fn kernel_into(s: &[f64], t: &[f64], out: &mut [f64]) {
    let d = s.len();
    let diff2: f64 = s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
    let p_diff = psi(diff2);
    let p_prod = psi(dot(s, s)) * psi(dot(t, t));
    let st = dot(s, t);
    for j in 0..d {
        for i in 0..d {
            let delta = if i == j { 1.0 } else { 0.0 };
            let first = (delta - (s[i] - t[i]) * (s[j] - t[j])) * p_diff;
            let ss = s[i] * s[j];
            let tt = t[i] * t[j];
            let ts = t[i] * s[j];
            let stm = s[i] * t[j];
            let second = ss + tt - ts - stm - delta + st * (ss + tt - stm - delta) - 0.5 * st * st * stm;
            out[i + j * d] = first + second * p_prod;
        }
    }
}

/// `tr K(t, t)`, the pointwise variance of the limit process.
pub fn trace_kernel(t: &[f64]) -> f64 {
    let d = t.len() as f64;
    let r2 = dot(t, t);
    d - (d + d * r2 - r2 * r2 + 0.5 * r2.powi(3)) * (-r2).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    pub kappa: [f64; 4],
    pub beta1: f64,
    pub beta2: f64,
    pub a: f64,
}

impl CumulantSet {
    pub fn mean(&self) -> f64 {
        self.kappa[0]
    }

    pub fn variance(&self) -> f64 {
        self.kappa[1]
    }
}

/// Default grid for the univariate cumulants: 256 nodes on `[-R, R]`,
/// `R = sqrt(35 / a)`.
pub fn cumulant_grid(a: WeightParam) -> QuadratureSpec {
    QuadratureSpec::new(256, (35.0 / a.get()).sqrt()).expect("valid defaults")
}

/// Symmetrized, weighted kernel matrix on a tensor grid. Index layout is
/// `point * d + component`.
fn weighted_kernel_matrix(a: f64, d: usize, rule: &LineRule) -> DMatrix<f64> {
    let m = rule.len();
    let npts = m.pow(d as u32);
    let mut points = Vec::with_capacity(npts * d);
    let mut sqrt_w = Vec::with_capacity(npts);
    let mut idx = vec![0usize; d];
    for _ in 0..npts {
        let mut w = 1.0;
        let mut r2 = 0.0;
        for &k in &idx {
            let x = rule.nodes[k];
            points.push(x);
            w *= rule.weights[k];
            r2 += x * x;
        }
        sqrt_w.push((w * (-a * r2).exp()).sqrt());
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
    let dim = npts * d;
    let mut mat = DMatrix::zeros(dim, dim);
    let mut block = vec![0.0; d * d];
    for p in 0..npts {
        let s = &points[p * d..(p + 1) * d];
        for q in p..npts {
            let t = &points[q * d..(q + 1) * d];
            kernel_into(s, t, &mut block);
            let w = sqrt_w[p] * sqrt_w[q];
            for j in 0..d {
                for i in 0..d {
                    let v = w * block[i + j * d];
                    mat[(p * d + i, q * d + j)] = v;
                    mat[(q * d + j, p * d + i)] = v;
                }
            }
        }
    }
    mat
}

/// First four cumulants of the limit null law for `d = 1`, from traces of
/// powers of the discretized covariance operator.
pub fn cumulants_numeric(a: WeightParam, grid: &QuadratureSpec) -> Result<CumulantSet> {
    let mat = weighted_kernel_matrix(a.get(), 1, &grid.line_rule());
    let m2 = &mat * &mat;
    let m3 = &m2 * &mat;
    let traces = [
        mat.trace(),
        m2.trace(),
        m3.trace(),
        m2.component_mul(&m2.transpose()).sum(),
    ];
    // kappa_m = 2^{m-1} (m-1)! tr(A^m)
    let factors = [1.0, 2.0, 8.0, 48.0];
    let kappa = [0, 1, 2, 3].map(|m| factors[m] * traces[m]);

    let exact = mean_limit(a, 1);
    let rel = (kappa[0] - exact).abs() / exact.abs();
    if rel > 1e-6 {
        return Err(Error::Accuracy(format!(
            "first cumulant {} differs from closed form {exact} (relative {rel:.2e}); refine the grid",
            kappa[0]
        )));
    }
    Ok(CumulantSet {
        kappa,
        beta1: kappa[2] / kappa[1].powf(1.5),
        beta2: 3.0 + kappa[3] / (kappa[1] * kappa[1]),
        a: a.get(),
    })
}

/// Default Nyström grid. For `d = 1`: 64 nodes on `R = sqrt(35 / a)`. For
/// `d = 2` the matrix has `2 m^2` rows, so the box shrinks to
/// `R = sqrt(15 / a)` to keep the `exp(-|t|^2)` structure of `K` resolved
/// with 24 nodes per axis.
pub fn nystrom_grid(a: WeightParam, d: usize) -> QuadratureSpec {
    let (nodes, c) = if d == 1 { (64, 35.0) } else { (24, 15.0) };
    QuadratureSpec::new(nodes, (c / a.get()).sqrt()).expect("valid defaults")
}

pub(crate) fn nystrom_raw(a: WeightParam, d: usize, grid: &QuadratureSpec) -> Result<Vec<f64>> {
    if !(1..=2).contains(&d) {
        return Err(Error::UnsupportedDimension { d, max: 2 });
    }
    let mat = weighted_kernel_matrix(a.get(), d, &grid.line_rule());
    let mut ev: Vec<f64> = mat.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    Ok(ev)
}

/// Eigenvalues of the covariance operator by Nyström discretization,
/// clamped at zero and sorted in decreasing order.
pub fn nystrom_eigenvalues(a: WeightParam, d: usize, grid: &QuadratureSpec) -> Result<Vec<f64>> {
    Ok(nystrom_raw(a, d, grid)?.into_iter().map(|l| l.max(0.0)).collect())
}
