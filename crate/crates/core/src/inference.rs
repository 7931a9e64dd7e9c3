//! Inference under fixed alternatives: the variance estimator of
//! `sqrt(n) (T_{n,a}/n - Delta_a)`, confidence intervals for `Delta_a`, and
//! `Delta_a` itself for alternatives with closed-form characteristic
//! functions.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nulldist::SimulationConfig;
use crate::numeric::{compensated_sum, standard_normal_quantile, tensor_integrate, LineRule};
use crate::samplers::{AlternativeSpec, Family, Marginal, RngStream, Sampler};
use crate::standardize::{dist_sq, dot, scaled_residuals, DataMatrix, StandardizedSample};
use crate::statistic::{t_stat, WeightParam};

/// Largest sample accepted by [`sigma_hat_naive`].
pub const NAIVE_MAX_N: usize = 12;

/// Closed-form Gaussian-weighted integrals used by the variance estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct HelperIntegrals {
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub i1: f64,
    pub i2: Vec<f64>,
}

/// `int t psi(t) CS+(t,x) w_a(t) dt`
pub fn l1_integral(a: f64, x: &[f64]) -> Vec<f64> {
    let d = x.len() as f64;
    let b = 2.0 * a + 1.0;
    let c = (2.0 * PI).powf(0.5 * d) / b.powf(0.5 * d + 1.0) * (-dot(x, x) / (4.0 * a + 2.0)).exp();
    x.iter().map(|v| c * v).collect()
}

/// `int t t'x psi(t) CS-(t,x) w_a(t) dt`
pub fn l2_integral(a: f64, x: &[f64]) -> Vec<f64> {
    let d = x.len() as f64;
    let b = 2.0 * a + 1.0;
    let r2 = dot(x, x);
    let c = (2.0 * PI).powf(0.5 * d) / b.powf(0.5 * d + 2.0) * (-r2 / (4.0 * a + 2.0)).exp();
    x.iter().map(|v| c * (b - r2) * v).collect()
}

/// `int CS+(t,x) CS+(t,y) w_a(t) dt`
pub fn i1_integral(a: f64, x: &[f64], y: &[f64]) -> f64 {
    (PI / a).powf(0.5 * x.len() as f64) * (-dist_sq(x, y) / (4.0 * a)).exp()
}

/// `int t CS+(t,x) CS-(t,y) w_a(t) dt`
pub fn i2_integral(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    let c = i1_integral(a, x, y) / (2.0 * a);
    x.iter().zip(y).map(|(p, q)| c * (p - q)).collect()
}

pub fn helper_integrals(a: WeightParam, x: &[f64], y: &[f64]) -> HelperIntegrals {
    let a = a.get();
    HelperIntegrals {
        l1: l1_integral(a, x),
        l2: l2_integral(a, x),
        i1: i1_integral(a, x, y),
        i2: i2_integral(a, x, y),
    }
}

/// Variance estimate with its block decomposition. `blocks` holds
/// `sigma^{p,q}` for `p <= q` in row order `(1,1), (1,2), .., (1,5), (2,2), ..`;
/// `value` counts each off-diagonal block twice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaHatResult {
    pub value: f64,
    pub blocks: [f64; 15],
}

impl SigmaHatResult {
    fn from_blocks(blocks: [f64; 15]) -> Self {
        let mut acc = crate::numeric::CompensatedSum::new();
        let mut idx = 0;
        for p in 0..5 {
            for q in p..5 {
                acc.add(if p == q { blocks[idx] } else { 2.0 * blocks[idx] });
                idx += 1;
            }
        }
        Self {
            value: acc.value().max(0.0),
            blocks,
        }
    }

    /// `sigma^{p,q}` with 1-based indices in either order.
    pub fn block(&self, p: usize, q: usize) -> f64 {
        assert!((1..=5).contains(&p) && (1..=5).contains(&q));
        let (p, q) = if p <= q { (p - 1, q - 1) } else { (q - 1, p - 1) };
        let offset: usize = (0..p).map(|r| 5 - r).sum();
        self.blocks[offset + (q - p)]
    }
}

fn outer_acc(m: &mut DMatrix<f64>, c: f64, u: &[f64], v: &[f64]) {
    let d = u.len();
    for col in 0..d {
        for row in 0..d {
            m[(row, col)] += c * u[row] * v[col];
        }
    }
}

/// `<Y Y' + s I, B>` for a row `y`.
fn frobenius_with_rank_one(y: &[f64], shift: f64, b: &DMatrix<f64>) -> f64 {
    let d = y.len();
    let mut acc = 0.0;
    for col in 0..d {
        for row in 0..d {
            acc += y[row] * y[col] * b[(row, col)];
        }
        acc += shift * b[(col, col)];
    }
    acc
}

/// Per-observation contributions `a_m[j]`, signs and factors included,
/// so that `sigma^{p,q} = (4/n) sum_j a_p[j] a_q[j]`.
fn contributions(y: &StandardizedSample, a: f64) -> [Vec<f64>; 5] {
    let n = y.n();
    let d = y.d();
    let nf = n as f64;
    let rows: Vec<&[f64]> = y.rows().collect();

    let l1: Vec<Vec<f64>> = rows.iter().map(|r| l1_integral(a, r)).collect();
    let l2: Vec<Vec<f64>> = rows.iter().map(|r| l2_integral(a, r)).collect();

    // Row-wise pieces of the O(n^2) sums, each row computed independently.
    struct RowPart {
        a1: f64,
        v2: Vec<f64>,
        v3: Vec<f64>,
        b4: DMatrix<f64>,
        b5: DMatrix<f64>,
    }
    let part = |i: usize| {
        let yi = rows[i];
        let mut p = RowPart {
            a1: 0.0,
            v2: vec![0.0; d],
            v3: vec![0.0; d],
            b4: DMatrix::zeros(d, d),
            b5: DMatrix::zeros(d, d),
        };
        let mut a1 = crate::numeric::CompensatedSum::new();
        for yk in rows.iter() {
            let i1 = i1_integral(a, yi, yk);
            let g = dot(yi, yk);
            a1.add(g * i1);
            for (v, y) in p.v2.iter_mut().zip(yi) {
                *v += y * i1;
            }
            let i2 = i2_integral(a, yi, yk);
            for (v, t) in p.v3.iter_mut().zip(&i2) {
                *v += g * t;
            }
            outer_acc(&mut p.b4, i1, yk, yi);
            outer_acc(&mut p.b5, g, yk, &i2);
        }
        p.a1 = a1.value();
        p
    };
    let parts: Vec<RowPart> = if n >= 128 {
        (0..n).into_par_iter().map(part).collect()
    } else {
        (0..n).map(part).collect()
    };

    let n2 = nf * nf;
    let mut v2 = vec![0.0; d];
    let mut v3 = vec![0.0; d];
    let mut b4 = DMatrix::zeros(d, d);
    let mut b5 = DMatrix::zeros(d, d);
    for p in &parts {
        for c in 0..d {
            v2[c] += p.v2[c] / n2;
            v3[c] += p.v3[c] / n2;
        }
        b4 += &p.b4 / n2;
        b5 += &p.b5 / n2;
    }
    for k in 0..n {
        for c in 0..d {
            v2[c] -= l1[k][c] / nf;
            v3[c] -= l2[k][c] / nf;
        }
        outer_acc(&mut b4, -1.0 / nf, rows[k], &l1[k]);
        outer_acc(&mut b5, -1.0 / nf, rows[k], &l2[k]);
    }

    let mut out: [Vec<f64>; 5] = Default::default();
    for o in out.iter_mut() {
        o.reserve(n);
    }
    for (j, yj) in rows.iter().enumerate() {
        out[0].push(parts[j].a1 / nf - dot(&l1[j], yj));
        out[1].push(-dot(yj, &v2));
        out[2].push(-dot(yj, &v3));
        out[3].push(-0.5 * frobenius_with_rank_one(yj, 1.0, &b4));
        out[4].push(-0.5 * frobenius_with_rank_one(yj, -1.0, &b5));
    }
    out
}

/// Integral-free variance estimator in `O(n^2)` time.
pub fn sigma_hat(y: &StandardizedSample, a: WeightParam) -> SigmaHatResult {
    let parts = contributions(y, a.get());
    let scale = 4.0 / y.n() as f64;
    let mut blocks = [0.0; 15];
    let mut idx = 0;
    for p in 0..5 {
        for q in p..5 {
            blocks[idx] = scale * compensated_sum(parts[p].iter().zip(&parts[q]).map(|(u, v)| u * v));
            idx += 1;
        }
    }
    SigmaHatResult::from_blocks(blocks)
}

/// Literal evaluation of the multi-index block sums, up to `O(n^5)`.
/// Reference implementation for [`sigma_hat`].
pub fn sigma_hat_naive(y: &StandardizedSample, a: WeightParam) -> Result<SigmaHatResult> {
    let n = y.n();
    if n > NAIVE_MAX_N {
        return Err(Error::TooLargeForNaive { n, max: NAIVE_MAX_N });
    }
    let a = a.get();
    let d = y.d();
    let yv: Vec<&[f64]> = y.rows().collect();
    let matvec = |yj: &[f64], shift: f64, v: &[f64]| -> Vec<f64> {
        // (Y_j Y_j' + shift I) v
        let s = dot(yj, v);
        (0..d).map(|c| yj[c] * s + shift * v[c]).collect::<Vec<f64>>()
    };

    let mut p1 = vec![0.0; n * n];
    let mut p2 = vec![0.0; n * n * n];
    let mut p3 = vec![0.0; n * n * n];
    let mut p4 = vec![0.0; n * n * n];
    let mut p5 = vec![0.0; n * n * n];
    let at = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    for i in 0..n {
        for j in 0..n {
            p1[i * n + j] = dot(yv[i], yv[j]) * i1_integral(a, yv[i], yv[j]) - dot(&l1_integral(a, yv[j]), yv[j]);
            for k in 0..n {
                let (yi, yj, yk) = (yv[i], yv[j], yv[k]);
                let i1 = i1_integral(a, yi, yk);
                let i2 = i2_integral(a, yi, yk);
                let l1k = l1_integral(a, yk);
                let l2k = l2_integral(a, yk);
                p2[at(i, j, k)] = dot(yi, yj) * i1 - dot(&l1k, yj);
                p3[at(i, j, k)] = dot(yi, yk) * dot(yj, &i2) - dot(yj, &l2k);
                p4[at(i, j, k)] = dot(yi, &matvec(yj, 1.0, yk)) * i1 - dot(yk, &matvec(yj, 1.0, &l1k));
                p5[at(i, j, k)] = dot(yi, yk) * dot(yk, &matvec(yj, -1.0, &i2)) - dot(yk, &matvec(yj, -1.0, &l2k));
            }
        }
    }

    let nf = n as f64;
    let triples = [&p2, &p3, &p4, &p5];
    let mut blocks = [0.0; 15];

    // sigma^{1,1} = 4/n^3 sum_{i,j,k} P1^{ij} P1^{kj}
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                s += p1[i * n + j] * p1[k * n + j];
            }
        }
    }
    blocks[0] = 4.0 * s / nf.powi(3);

    // sigma^{1,q} = c/n^4 sum_{i,j,k,l} P1^{ij} Pq^{l,j,k}
    let first_row = [-4.0, -4.0, -2.0, -2.0];
    for (q, pq) in triples.iter().enumerate() {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s += p1[i * n + j] * pq[at(l, j, k)];
                    }
                }
            }
        }
        blocks[1 + q] = first_row[q] * s / nf.powi(4);
    }

    // sigma^{p,q} = c/n^5 sum_{i,j,k,l,m} Pp^{i,j,k} Pq^{m,j,l}, 2 <= p <= q
    let coef = |p: usize, q: usize| -> f64 {
        // p, q are 0-based into `triples` (block indices 2..5)
        match (p, q) {
            (0..=1, 0..=1) => 4.0,
            (0..=1, _) => 2.0,
            _ => 1.0,
        }
    };
    let mut idx = 5;
    for p in 0..4 {
        for q in p..4 {
            let (pp, pq) = (triples[p], triples[q]);
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let left = pp[at(i, j, k)];
                        for l in 0..n {
                            for m in 0..n {
                                s += left * pq[at(m, j, l)];
                            }
                        }
                    }
                }
            }
            blocks[idx] = coef(p, q) * s / nf.powi(5);
            idx += 1;
        }
    }
    Ok(SigmaHatResult::from_blocks(blocks))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub center: f64,
    pub halfwidth: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Interval from standardized residuals; see [`confidence_interval`].
pub fn confidence_interval_standardized(
    y: &StandardizedSample,
    a: WeightParam,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = y.n() as f64;
    let z = standard_normal_quantile(1.0 - 0.5 * alpha)?;
    let center = t_stat(y, a) / n;
    let halfwidth = sigma_hat(y, a).value.sqrt() / n.sqrt() * z;
    Ok(ConfidenceInterval {
        lower: center - halfwidth,
        upper: center + halfwidth,
        level: 1.0 - alpha,
        center,
        halfwidth,
    })
}

/// Asymptotic level `1 - alpha` interval `T/n -/+ sigma_hat z / sqrt(n)`.
pub fn confidence_interval(x: &DataMatrix, a: WeightParam, alpha: f64) -> Result<ConfidenceInterval> {
    confidence_interval_standardized(&scaled_residuals(x)?, a, alpha)
}

/// Empirical coverage of the interval for a known `Delta_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub rate: f64,
    pub std_error: f64,
    pub reps: usize,
}

/// Fraction of `reps` intervals from samples of `spec` that contain
/// `delta`. Replicate `r` draws from stream `(seed, r)`.
pub fn coverage_rate(
    spec: &AlternativeSpec,
    n: usize,
    a: WeightParam,
    alpha: f64,
    delta: f64,
    reps: usize,
    seed: u64,
) -> Result<CoverageResult> {
    if reps == 0 {
        return Err(invalid("reps must be positive"));
    }
    if n < spec.d + 1 {
        return Err(invalid(format!("need n >= d + 1, got n = {n}, d = {}", spec.d)));
    }
    let sampler = Sampler::new(*spec)?;
    let hits: Vec<bool> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(seed, r).rng();
            let mut last = None;
            for _ in 0..=crate::nulldist::MAX_SINGULAR_RETRIES {
                let x = sampler.sample(n, &mut rng)?;
                match scaled_residuals(&x) {
                    Ok(y) => return Ok(confidence_interval_standardized(&y, a, alpha)?.contains(delta)),
                    Err(e @ Error::SingularCovariance { .. }) => last = Some(e),
                    Err(e) => return Err(e),
                }
            }
            Err(last.expect("loop ran"))
        })
        .collect::<Result<_>>()?;
    let rate = hits.iter().filter(|h| **h).count() as f64 / reps as f64;
    Ok(CoverageResult {
        rate,
        std_error: (rate * (1.0 - rate) / reps as f64).sqrt(),
        reps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaMethod {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaValue {
    pub value: f64,
    pub a: f64,
    pub alternative: AlternativeSpec,
    pub method: DeltaMethod,
}

/// Below this argument the characteristic-function factors use series.
const SERIES_CUTOFF: f64 = 1e-4;

/// `(phi(t), phi'(t))` of a unit-variance symmetric marginal.
fn marginal_cf(m: Marginal, t: f64) -> Result<(f64, f64)> {
    let r3 = 3f64.sqrt();
    match m {
        Marginal::Uniform => {
            let u = r3 * t;
            if u.abs() < SERIES_CUTOFF {
                let u2 = u * u;
                let phi = 1.0 - u2 / 6.0 + u2 * u2 / 120.0 - u2.powi(3) / 5040.0 + u2.powi(4) / 362_880.0;
                let dphi = u * (-1.0 / 3.0 + u2 / 30.0 - u2 * u2 / 840.0 + u2.powi(3) / 45_360.0);
                Ok((phi, r3 * dphi))
            } else {
                let (s, c) = u.sin_cos();
                Ok((s / u, (3.0 * c * t - r3 * s) / (3.0 * t * t)))
            }
        }
        Marginal::Laplace => {
            let q = 2.0 + t * t;
            Ok((2.0 / q, -4.0 * t / (q * q)))
        }
        Marginal::Logistic => {
            let u = r3 * t;
            if u.abs() < SERIES_CUTOFF {
                let u2 = u * u;
                let phi = 1.0 - u2 / 6.0 + 7.0 * u2 * u2 / 360.0 - 31.0 * u2.powi(3) / 15_120.0
                    + 127.0 * u2.powi(4) / 604_800.0;
                let dphi = u * (-1.0 / 3.0 + 7.0 * u2 / 90.0 - 31.0 * u2 * u2 / 2520.0 + 127.0 * u2.powi(3) / 75_600.0);
                Ok((phi, r3 * dphi))
            } else {
                // u / sinh u and its derivative via exp(-|u|) to avoid overflow
                let au = u.abs();
                let e = (-au).exp();
                // 1 - e^{-2|u|}
                let one_minus = -(-2.0 * au).exp_m1();
                let csch = 2.0 * e / one_minus;
                let phi = au * csch;
                let dphi_abs = csch * (one_minus - au * (2.0 - one_minus)) / one_minus;
                Ok((phi, r3 * dphi_abs * u.signum()))
            }
        }
        other => Err(invalid(format!("no closed-form characteristic function for {other:?}"))),
    }
}

/// Squared distance `|grad psi_X(t) - grad psi(t)|^2` for i.i.d. marginals.
fn gradient_gap(m: Marginal, t: &[f64]) -> Result<f64> {
    let d = t.len();
    let mut phi = [0.0; 2];
    let mut dphi = [0.0; 2];
    for (c, &tc) in t.iter().enumerate() {
        (phi[c], dphi[c]) = marginal_cf(m, tc)?;
    }
    let psi = (-0.5 * dot(t, t)).exp();
    let mut acc = 0.0;
    for j in 0..d {
        let others: f64 = (0..d).filter(|&i| i != j).map(|i| phi[i]).product();
        let g = dphi[j] * others + t[j] * psi;
        acc += g * g;
    }
    Ok(acc)
}

const DELTA_START_NODES: usize = 32;
const DELTA_MAX_NODES: usize = 512;
const DELTA_ABS_TOL: f64 = 1e-7;
const DELTA_REL_TOL: f64 = 1e-7;

/// `Delta_a` by adaptive tensor Gauss–Legendre quadrature on the closed-form
/// characteristic-function gradients. Nodes per axis double until successive
/// estimates agree within `1e-7` absolute and relative.
pub fn delta_numeric(alt: &AlternativeSpec, a: WeightParam) -> Result<DeltaValue> {
    let d = alt.d;
    if !(1..=2).contains(&d) {
        return Err(Error::UnsupportedDimension { d, max: 2 });
    }
    let marginal = match alt.family {
        Family::StandardNormal => {
            return Ok(DeltaValue {
                value: 0.0,
                a: a.get(),
                alternative: *alt,
                method: DeltaMethod::Quadrature,
            })
        }
        Family::Iid(m @ (Marginal::Uniform | Marginal::Laplace | Marginal::Logistic)) => m,
        other => return Err(invalid(format!("no closed-form Delta_a for alternative `{other}`"))),
    };
    let av = a.get();
    let radius = (40.0 / av).sqrt();
    // the integrand is even in every coordinate: integrate over [0, R]^d
    let orthants = (1usize << d) as f64;
    let integrate = |nodes: usize| -> Result<f64> {
        let rule = LineRule::new(nodes, 0.0, radius);
        let mut err = None;
        let v = tensor_integrate(&rule, d, |t| match gradient_gap(marginal, t) {
            Ok(g) => g * (-av * dot(t, t)).exp(),
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        err.map_or(Ok(orthants * v), Err)
    };
    let mut nodes = DELTA_START_NODES;
    let mut prev = integrate(nodes)?;
    loop {
        let next_nodes = 2 * nodes;
        let cur = integrate(next_nodes)?;
        let diff = (cur - prev).abs();
        if diff < DELTA_ABS_TOL && diff <= DELTA_REL_TOL * cur.abs() {
            return Ok(DeltaValue {
                value: cur.max(0.0),
                a: av,
                alternative: *alt,
                method: DeltaMethod::Quadrature,
            });
        }
        if next_nodes >= DELTA_MAX_NODES {
            return Err(Error::Accuracy(format!(
                "Delta_a quadrature did not converge by {DELTA_MAX_NODES} nodes per axis (last change {diff:.2e})"
            )));
        }
        nodes = next_nodes;
        prev = cur;
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

fn mean_and_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    let var = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    Estimate {
        value: mean,
        std_error: (var / n).sqrt(),
    }
}

/// Population limits of `Delta_a` at the boundary of the weight range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaLimits {
    /// `E[X1'X2 |X1|^2 |X2|^2] + 2 E[(X1'X2)^3]`, the `a -> infinity` limit
    /// of `16 a^2 (a/pi)^{d/2} Delta_a`.
    pub lim_inf_scaled: Estimate,
    /// `d/2 - 2^{d/2+1} E[|X|^2 exp(-|X|^2/2)]`.
    pub lim_zero_scaled: Estimate,
}

/// Monte Carlo estimates of the boundary limits. `2 * cfg.reps` draws are
/// standardized together and split into `cfg.reps` independent pairs.
pub fn delta_limits(alt: &AlternativeSpec, cfg: &SimulationConfig) -> Result<DeltaLimits> {
    if cfg.reps < 2 {
        return Err(invalid("need at least two pairs"));
    }
    let m = cfg.reps;
    let sampler = Sampler::new(*alt)?;
    let x = sampler.sample(2 * m, &mut RngStream::new(cfg.seed, 0).rng())?;
    let y = scaled_residuals(&x)?;
    let d = alt.d as f64;

    let pair_terms: Vec<f64> = (0..m)
        .map(|k| {
            let (x1, x2) = (y.row(k), y.row(m + k));
            let g = dot(x1, x2);
            g * dot(x1, x1) * dot(x2, x2) + 2.0 * g * g * g
        })
        .collect();
    let zero_terms: Vec<f64> = y
        .rows()
        .map(|r| {
            let r2 = dot(r, r);
            d / 2.0 - 2f64.powf(d / 2.0 + 1.0) * r2 * (-0.5 * r2).exp()
        })
        .collect();
    Ok(DeltaLimits {
        lim_inf_scaled: mean_and_se(&pair_terms),
        lim_zero_scaled: mean_and_se(&zero_terms),
    })
}

/// Density collision term `(2 pi)^d pi^{-d/2} int |x|^2 f(x)^2 dx` for the
/// normal and the i.i.d. alternatives with a closed-form density. It is the `a -> 0` limit
/// of `pi^{-d/2} I_{a,1}`, the cross-moment part of `Delta_a`, and is missing
/// from the `lim_zero_scaled` expression.
pub fn delta_zero_collision_term(alt: &AlternativeSpec) -> Result<f64> {
    let r3 = 3f64.sqrt();
    let (f2, x2f2) = match alt.family {
        Family::StandardNormal => (0.5 / PI.sqrt(), 0.25 / PI.sqrt()),
        Family::Iid(Marginal::Uniform) => {
            let h = 1.0 / (2.0 * r3);
            (2.0 * r3 * h * h, h * h * 2.0 * r3.powi(3) / 3.0)
        }
        Family::Iid(m @ (Marginal::Laplace | Marginal::Logistic)) => {
            let pdf = |x: f64| match m {
                Marginal::Laplace => (-(2f64.sqrt()) * x.abs()).exp() / 2f64.sqrt(),
                _ => {
                    let s = r3 / PI;
                    let e = (-x.abs() / s).exp();
                    e / (s * (1.0 + e).powi(2))
                }
            };
            let rule = LineRule::new(400, 0.0, 40.0);
            let f2 = 2.0 * rule.integrate(|x| pdf(x).powi(2));
            let x2f2 = 2.0 * rule.integrate(|x| x * x * pdf(x).powi(2));
            (f2, x2f2)
        }
        other => return Err(invalid(format!("no closed-form density for `{other}`"))),
    };
    let d = alt.d;
    let integral = d as f64 * x2f2 * f2.powi(d as i32 - 1);
    Ok((2.0 * PI).powi(d as i32) * PI.powf(-0.5 * d as f64) * integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::draw;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wp(a: f64) -> WeightParam {
        WeightParam::new(a).unwrap()
    }

    fn random_sample(n: usize, d: usize, seed: u64) -> StandardizedSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d)
            .map(|_| rng.random_range(-1.0..1.0f64).powi(3) * 2.0)
            .collect();
        scaled_residuals(&DataMatrix::new(data, n, d).unwrap()).unwrap()
    }

    fn cs_plus(t: &[f64], x: &[f64]) -> f64 {
        let (s, c) = dot(t, x).sin_cos();
        c + s
    }

    fn cs_minus(t: &[f64], x: &[f64]) -> f64 {
        let (s, c) = dot(t, x).sin_cos();
        c - s
    }

    #[test]
    fn helper_integrals_on_the_diagonal() {
        let x = [0.4, -1.1];
        let h = helper_integrals(wp(0.7), &x, &x);
        assert!((h.i1 - (PI / 0.7)).abs() < 1e-14);
        assert!(h.i2.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn helper_integrals_match_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in [1usize, 2] {
            for a in [0.5, 2.0] {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
                let y: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
                let rule = LineRule::symmetric(96, (40.0f64 / a).sqrt());
                let w = |t: &[f64]| (-a * dot(t, t)).exp();
                let psi = |t: &[f64]| (-0.5 * dot(t, t)).exp();
                let h = helper_integrals(wp(a), &x, &y);
                for c in 0..d {
                    let l1 = tensor_integrate(&rule, d, |t| t[c] * psi(t) * cs_plus(t, &x) * w(t));
                    let l2 = tensor_integrate(&rule, d, |t| t[c] * dot(t, &x) * psi(t) * cs_minus(t, &x) * w(t));
                    let i2 = tensor_integrate(&rule, d, |t| t[c] * cs_plus(t, &x) * cs_minus(t, &y) * w(t));
                    assert!((l1 - h.l1[c]).abs() <= 1e-6 * h.l1[c].abs().max(1e-3), "L1 d={d} a={a}");
                    assert!((l2 - h.l2[c]).abs() <= 1e-6 * h.l2[c].abs().max(1e-3), "L2 d={d} a={a}");
                    assert!((i2 - h.i2[c]).abs() <= 1e-6 * h.i2[c].abs().max(1e-3), "I2 d={d} a={a}");
                }
                let i1 = tensor_integrate(&rule, d, |t| cs_plus(t, &x) * cs_plus(t, &y) * w(t));
                assert!((i1 - h.i1).abs() <= 1e-6 * h.i1);
            }
        }
    }

    #[test]
    fn factored_equals_naive() {
        for (n, d, a, seed) in [
            (4, 1, 1.0, 1),
            (6, 1, 0.5, 2),
            (7, 2, 2.0, 3),
            (9, 3, 5.0, 4),
            (10, 2, 1.0, 5),
        ] {
            let y = random_sample(n, d, seed);
            let fast = sigma_hat(&y, wp(a));
            let slow = sigma_hat_naive(&y, wp(a)).unwrap();
            assert!((fast.value - slow.value).abs() <= 1e-10 * slow.value, "n={n} d={d}");
            for (f, s) in fast.blocks.iter().zip(&slow.blocks) {
                assert!((f - s).abs() <= 1e-10 * slow.value.max(f.abs()));
            }
        }
    }

    #[test]
    fn naive_rejects_large_samples() {
        let y = random_sample(13, 1, 1);
        assert!(matches!(
            sigma_hat_naive(&y, wp(1.0)),
            Err(Error::TooLargeForNaive { n: 13, .. })
        ));
    }

    #[test]
    fn block_lookup_is_symmetric() {
        let y = random_sample(8, 2, 9);
        let s = sigma_hat(&y, wp(1.0));
        assert_eq!(s.block(2, 4), s.block(4, 2));
        assert_eq!(s.block(1, 1), s.blocks[0]);
        assert_eq!(s.block(5, 5), s.blocks[14]);
        let total: f64 = (1..=5)
            .flat_map(|p| (1..=5).map(move |q| (p, q)))
            .map(|(p, q)| s.block(p, q))
            .sum();
        assert!((total - s.value).abs() < 1e-12 * s.value);
    }

    #[test]
    fn interval_arithmetic() {
        let x = draw(
            &AlternativeSpec::new(Family::Iid(Marginal::Uniform), 1).unwrap(),
            40,
            RngStream::new(3, 0),
        )
        .unwrap();
        let ci = confidence_interval(&x, wp(0.5), 0.05).unwrap();
        assert!((ci.lower - (ci.center - ci.halfwidth)).abs() < 1e-15);
        assert!((ci.upper - (ci.center + ci.halfwidth)).abs() < 1e-15);
        assert!(ci.lower <= ci.upper && ci.halfwidth >= 0.0);
        assert_eq!(ci, confidence_interval(&x, wp(0.5), 0.05).unwrap());
        assert!(confidence_interval(&x, wp(0.5), 1.0).is_err());
    }

    #[test]
    fn normal_delta_is_zero() {
        let v = delta_numeric(&AlternativeSpec::standard_normal(2), wp(1.0)).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(delta_numeric(&AlternativeSpec::standard_normal(3), wp(1.0)).is_err());
        assert!(delta_numeric(&AlternativeSpec::new(Family::NMix1, 1).unwrap(), wp(1.0)).is_err());
    }

    #[test]
    fn cf_series_matches_closed_form_near_origin() {
        for m in [Marginal::Uniform, Marginal::Logistic] {
            for t in [1.01e-4 / 3f64.sqrt(), -2e-4, 1e-3] {
                // just above the cutoff: compare against the series evaluated directly
                let (phi, dphi) = marginal_cf(m, t).unwrap();
                let (phi_s, dphi_s) = marginal_cf(m, t * 1e-2).unwrap();
                // both sides are smooth; check the known leading behaviour
                assert!((phi - (1.0 - 0.5 * t * t)).abs() < 1e-6);
                assert!((dphi + t).abs() < 1e-5);
                assert!((phi_s - 1.0).abs() < 1e-9 && dphi_s.abs() < 1e-5);
            }
        }
    }

    #[test]
    fn cf_series_is_continuous_at_cutoff() {
        let r3 = 3f64.sqrt();
        for m in [Marginal::Uniform, Marginal::Logistic] {
            let (tb, ta) = (0.999_999 * SERIES_CUTOFF / r3, 1.000_001 * SERIES_CUTOFF / r3);
            let below = marginal_cf(m, tb).unwrap();
            let above = marginal_cf(m, ta).unwrap();
            assert!((below.0 - above.0).abs() < 1e-12);
            // phi' is odd and ~ -t near 0
            assert!((below.1 / tb - above.1 / ta).abs() < 1e-7, "{m:?} {below:?} {above:?}");
        }
    }

    #[test]
    fn delta_is_positive_for_non_normal() {
        for m in [Marginal::Uniform, Marginal::Laplace, Marginal::Logistic] {
            let v = delta_numeric(&AlternativeSpec::new(Family::Iid(m), 1).unwrap(), wp(1.0)).unwrap();
            assert!(v.value > 0.0);
        }
    }

    #[test]
    fn normal_limits_vanish() {
        let cfg = SimulationConfig::new(20_000, 4, 0.95).unwrap();
        let lim = delta_limits(&AlternativeSpec::standard_normal(2), &cfg).unwrap();
        assert!(lim.lim_inf_scaled.value.abs() < 3.0 * lim.lim_inf_scaled.std_error);
        // E|X|^2 exp(-|X|^2/2) = d 2^{-d/2-1} under N(0, I_d), so the
        // expectation part alone is -d/2; the collision term restores 0.
        let collision = delta_zero_collision_term(&AlternativeSpec::standard_normal(2)).unwrap();
        assert!((collision - 1.0).abs() < 1e-12);
        let total = lim.lim_zero_scaled.value + collision;
        assert!(total.abs() < 3.0 * lim.lim_zero_scaled.std_error + 1e-3, "{total}");
    }
}
