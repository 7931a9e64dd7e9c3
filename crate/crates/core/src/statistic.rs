//! The weighted L² statistic `T_{n,a}` and the quantities tied to it:
//! its closed form, a quadrature evaluation of the defining integral, the
//! table scaling and the limit statistics as `a -> infinity` and `a -> 0`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{compensated_sum, tensor_integrate, CompensatedSum, QuadratureSpec};
use crate::standardize::{dist_sq, dot, StandardizedSample};

/// Row count above which pair sums are split across the rayon pool.
const PARALLEL_PAIR_ROWS: usize = 256;

/// Negative values of squared-norm statistics above this are roundoff.
pub(crate) const ROUNDOFF_CLAMP: f64 = -1e-9;

/// Positive weight parameter `a` of `w_a(t) = exp(-a |t|^2)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct WeightParam(f64);

impl WeightParam {
    pub fn new(a: f64) -> Result<Self> {
        if a > 0.0 && a.is_finite() {
            Ok(Self(a))
        } else {
            Err(invalid(format!(
                "weight parameter must be positive and finite, got {a}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for WeightParam {
    type Error = Error;
    fn try_from(a: f64) -> Result<Self> {
        Self::new(a)
    }
}

impl From<WeightParam> for f64 {
    fn from(a: WeightParam) -> f64 {
        a.0
    }
}

/// Weight parameter as it appears in reports: finite, or the `a = infinity`
/// skewness statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightLabel {
    Finite(f64),
    Infinity,
}

/// A computed statistic with enough metadata to interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub label: String,
    pub statistic: f64,
    pub a: WeightLabel,
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_value: Option<f64>,
}

/// `sum_{i,j} f(Y_i, Y_j)` for a symmetric `f`: the diagonal once, the
/// strict upper triangle doubled. Row partials are combined in index order
/// so the result does not depend on the number of worker threads.
pub(crate) fn symmetric_pair_sum<F>(y: &StandardizedSample, f: F) -> f64
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    let n = y.n();
    let row = |i: usize| {
        let yi = y.row(i);
        let mut acc = CompensatedSum::new();
        acc.add(f(yi, yi));
        for j in (i + 1)..n {
            acc.add(2.0 * f(yi, y.row(j)));
        }
        acc.value()
    };
    if n >= PARALLEL_PAIR_ROWS {
        let partials: Vec<f64> = (0..n).into_par_iter().map(row).collect();
        compensated_sum(partials)
    } else {
        compensated_sum((0..n).map(row))
    }
}

pub(crate) fn clamp_roundoff(value: f64) -> f64 {
    debug_assert!(
        value >= ROUNDOFF_CLAMP * value.abs().max(1.0) * 1e3 || value.is_nan(),
        "squared-norm statistic strongly negative: {value}"
    );
    value.max(0.0)
}

/// Closed form of `T_{n,a}`.
pub fn t_stat(y: &StandardizedSample, a: WeightParam) -> f64 {
    let a = a.get();
    let n = y.n() as f64;
    let d = y.d() as f64;
    let half_d = 0.5 * d;

    let constant = n * (PI / (a + 1.0)).powf(half_d) * d / (2.0 * (a + 1.0));

    let c2 = 2.0 * (2.0 * PI / (2.0 * a + 1.0)).powf(half_d) / (2.0 * a + 1.0);
    let single = compensated_sum(y.rows().map(|yj| {
        let r2 = dot(yj, yj);
        r2 * (-r2 / (4.0 * a + 2.0)).exp()
    }));

    let inv_4a = 1.0 / (4.0 * a);
    let pairs = symmetric_pair_sum(y, |yi, yj| dot(yi, yj) * (-dist_sq(yi, yj) * inv_4a).exp());
    let c3 = (PI / a).powf(half_d) / n;

    clamp_roundoff(constant - c2 * single + c3 * pairs)
}

/// `T_{n,a}` by tensor Gauss–Legendre quadrature of
/// `n |grad psi_n(t) + t psi(t)|^2 w_a(t)` over `[-R, R]^d`. Test oracle
/// for the closed form; limited to `d <= 3`.
pub fn t_stat_quadrature(y: &StandardizedSample, a: WeightParam, grid: &QuadratureSpec) -> Result<f64> {
    let d = y.d();
    if d > 3 {
        return Err(Error::UnsupportedDimension { d, max: 3 });
    }
    let a = a.get();
    let n = y.n() as f64;
    let rule = grid.line_rule();
    let mut re = vec![0.0; d];
    let mut im = vec![0.0; d];
    let value = tensor_integrate(&rule, d, |t| {
        let t2 = dot(t, t);
        let psi = (-0.5 * t2).exp();
        for k in 0..d {
            re[k] = t[k] * psi;
            im[k] = 0.0;
        }
        // grad psi_n(t) = (1/n) sum_j i Y_j exp(i t'Y_j)
        for yj in y.rows() {
            let (s, c) = dot(t, yj).sin_cos();
            for k in 0..d {
                re[k] -= yj[k] * s / n;
                im[k] += yj[k] * c / n;
            }
        }
        let norm2: f64 = re.iter().chain(im.iter()).map(|v| v * v).sum();
        n * norm2 * (-a * t2).exp()
    });
    Ok(value)
}

/// `16 a^{d/2+2} pi^{-d/2} T`, the scale used for tabulated critical values.
pub fn scaled_stat(t: f64, a: WeightParam, d: usize) -> f64 {
    let a = a.get();
    let half_d = 0.5 * d as f64;
    16.0 * a.powf(half_d + 2.0) * PI.powf(-half_d) * t
}

/// Mardia skewness `b_{1,d}` and Móri–Rohatgi–Székely skewness, both
/// normalized by `n^2`.
pub fn skewness_measures(y: &StandardizedSample) -> (f64, f64) {
    let n2 = (y.n() * y.n()) as f64;
    let mardia = symmetric_pair_sum(y, |yi, yj| dot(yi, yj).powi(3)) / n2;
    // sum_{i,j} Y_i'Y_j |Y_i|^2 |Y_j|^2 = |sum_i |Y_i|^2 Y_i|^2
    let mut v = vec![CompensatedSum::new(); y.d()];
    for yi in y.rows() {
        let r2 = dot(yi, yi);
        for (acc, c) in v.iter_mut().zip(yi) {
            acc.add(r2 * c);
        }
    }
    let mrs = v.iter().map(|s| s.value() * s.value()).sum::<f64>() / n2;
    (clamp_roundoff(mardia), clamp_roundoff(mrs))
}

/// Mardia kurtosis `b_{2,d} = n^{-1} sum_j |Y_j|^4`.
pub fn kurtosis_mardia(y: &StandardizedSample) -> f64 {
    compensated_sum(y.rows().map(|yj| dot(yj, yj).powi(2))) / y.n() as f64
}

/// Limit of `a^{d/2+2} 16 T_{n,a} / (n pi^{d/2})` as `a -> infinity`.
pub fn limit_stat_inf(y: &StandardizedSample) -> f64 {
    let (mardia, mrs) = skewness_measures(y);
    mrs + 2.0 * mardia
}

/// The `a = infinity` member of the family on the critical-value scale:
/// `n (b~_{1,d} + 2 b_{1,d})`.
pub fn t_inf_stat(y: &StandardizedSample) -> f64 {
    y.n() as f64 * limit_stat_inf(y)
}

/// Limit of `((a/pi)^{d/2} T_{n,a} - d) / (n a^{d/2})` as `a -> 0`.
pub fn limit_stat_zero(y: &StandardizedSample) -> f64 {
    let d = y.d() as f64;
    let mean = compensated_sum(y.rows().map(|yj| {
        let r2 = dot(yj, yj);
        r2 * (-0.5 * r2).exp()
    })) / y.n() as f64;
    0.5 * d - 2f64.powf(0.5 * d + 1.0) * mean
}

/// Evaluates `T_{n,a}` and packages it with its metadata.
pub fn t_outcome(y: &StandardizedSample, a: WeightParam) -> TestOutcome {
    TestOutcome {
        label: format!("T_{}", a.get()),
        statistic: t_stat(y, a),
        a: WeightLabel::Finite(a.get()),
        n: y.n(),
        d: y.d(),
        p_value: None,
        critical_value: None,
    }
}
