//! Small numerical building blocks shared by the statistic, kernel and
//! inference code: Gauss–Legendre rules, compensated summation and the
//! standard normal quantile.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Gauss–Legendre nodes and weights on [-1, 1].
///
/// Nodes are found by Newton iteration on the three-term recurrence, which
/// is accurate to machine precision for the orders used here (up to a few
/// thousand).
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A one-dimensional Gauss–Legendre rule mapped onto `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct LineRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    pub fn new(order: usize, lo: f64, hi: f64) -> Self {
        let (x, w) = gauss_legendre(order);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        Self {
            nodes: x.iter().map(|&u| mid + half * u).collect(),
            weights: w.iter().map(|&v| half * v).collect(),
        }
    }

    /// Symmetric rule on `[-radius, radius]`.
    pub fn symmetric(order: usize, radius: f64) -> Self {
        Self::new(order, -radius, radius)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)))
    }
}

/// Integrates `f` over the tensor grid `rule^d`, passing each node as a slice.
pub fn tensor_integrate(rule: &LineRule, d: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let m = rule.len();
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    let mut acc = CompensatedSum::new();
    loop {
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            point[k] = rule.nodes[i];
            w *= rule.weights[i];
        }
        acc.add(w * f(&point));
        let mut k = 0;
        loop {
            if k == d {
                return acc.value();
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Tensor-product Gauss–Legendre grid on the box `[-R, R]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub nodes_per_axis: usize,
    pub truncation_radius: f64,
}

impl QuadratureSpec {
    pub const MIN_NODES: usize = 16;

    pub fn new(nodes_per_axis: usize, truncation_radius: f64) -> Result<Self> {
        if nodes_per_axis < Self::MIN_NODES {
            return Err(invalid(format!(
                "quadrature needs at least {} nodes per axis, got {nodes_per_axis}",
                Self::MIN_NODES
            )));
        }
        if !(truncation_radius > 0.0 && truncation_radius.is_finite()) {
            return Err(invalid("truncation radius must be positive and finite"));
        }
        Ok(Self {
            nodes_per_axis,
            truncation_radius,
        })
    }

    /// Box radius `sqrt(30 / a)`: the weight `exp(-a |t|^2)` has dropped
    /// below `e^-30` at the boundary.
    pub fn for_weight(a: f64, nodes_per_axis: usize) -> Result<Self> {
        if a.is_nan() || a <= 0.0 {
            return Err(invalid("weight parameter must be positive"));
        }
        Self::new(nodes_per_axis, (30.0 / a).sqrt())
    }

    pub fn line_rule(&self) -> LineRule {
        LineRule::symmetric(self.nodes_per_axis, self.truncation_radius)
    }

    /// Same box, twice the nodes.
    pub fn refined(&self) -> Self {
        Self {
            nodes_per_axis: 2 * self.nodes_per_axis,
            ..*self
        }
    }
}

/// Quantile of the standard normal distribution, `sqrt(2) * erfinv(2p - 1)`.
pub fn standard_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("probability {p} outside (0, 1)")));
    }
    Ok(std::f64::consts::SQRT_2 * statrs::function::erf::erf_inv(2.0 * p - 1.0))
}

/// Lower-interpolated empirical quantile of already sorted data: the order
/// statistic at index `floor(level * (len - 1))`.
pub fn lower_quantile(sorted: &[f64], level: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let idx = (level * (sorted.len() - 1) as f64).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}
