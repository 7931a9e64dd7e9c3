//! Reproducible sampling of the null distribution and of the alternatives
//! used in the power and coverage studies.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::standardize::DataMatrix;

/// A `(seed, stream)` pair naming an independent random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Univariate law used independently for each coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Marginal {
    Chi2 {
        k: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
    /// Logistic with scale `sqrt(3)/pi` (unit variance).
    Logistic,
    /// Uniform on `(-sqrt 3, sqrt 3)` (unit variance).
    Uniform,
    /// Laplace with scale `1/sqrt 2` (unit variance).
    Laplace,
    /// Student t with `m` degrees of freedom.
    Pearson7 {
        m: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    StandardNormal,
    /// `0.9 N(0, I) + 0.1 N(3 * 1, I)`.
    NMix1,
    /// `0.1 N(0, I) + 0.9 N(0, B)` with unit diagonal, 0.9 off the diagonal.
    NMix2,
    /// Spherical multivariate t.
    Mvt {
        nu: f64,
    },
    Iid(Marginal),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlternativeSpec {
    pub family: Family,
    pub d: usize,
}

impl AlternativeSpec {
    pub fn new(family: Family, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {v}")))
            }
        };
        match family {
            Family::Mvt { nu } => positive("degrees of freedom", nu)?,
            Family::Iid(Marginal::Chi2 { k }) => positive("degrees of freedom", k)?,
            Family::Iid(Marginal::Pearson7 { m }) => positive("degrees of freedom", m)?,
            Family::Iid(Marginal::Gamma { shape, rate }) => {
                positive("shape", shape)?;
                positive("rate", rate)?;
            }
            _ => {}
        }
        Ok(Self { family, d })
    }

    pub fn standard_normal(d: usize) -> Self {
        Self::new(Family::StandardNormal, d).expect("d >= 1")
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::StandardNormal => write!(f, "normal"),
            Family::NMix1 => write!(f, "nmix1"),
            Family::NMix2 => write!(f, "nmix2"),
            Family::Mvt { nu } => write!(f, "t:{nu}"),
            Family::Iid(Marginal::Chi2 { k }) => write!(f, "chi2:{k}"),
            Family::Iid(Marginal::Gamma { shape, rate }) => write!(f, "gamma:{shape},{rate}"),
            Family::Iid(Marginal::Logistic) => write!(f, "logistic"),
            Family::Iid(Marginal::Uniform) => write!(f, "uniform"),
            Family::Iid(Marginal::Laplace) => write!(f, "laplace"),
            Family::Iid(Marginal::Pearson7 { m }) => write!(f, "pearson7:{m}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Parses `name[:p1[,p2]]`, e.g. `t:5`, `gamma:5,1`, `uniform`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = match s.split_once(':') {
            Some((name, p)) => (name, Some(p)),
            None => (s, None),
        };
        let values: Vec<f64> = match params {
            Some(p) => p
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| invalid(format!("bad parameter `{v}` in `{s}`")))
                })
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let arity = |want: usize| {
            if values.len() == want {
                Ok(())
            } else {
                Err(invalid(format!(
                    "`{name}` takes {want} parameter(s), got {}",
                    values.len()
                )))
            }
        };
        let family = match name.trim().to_ascii_lowercase().as_str() {
            "normal" | "standard-normal" | "n" => {
                arity(0)?;
                Family::StandardNormal
            }
            "nmix1" => {
                arity(0)?;
                Family::NMix1
            }
            "nmix2" => {
                arity(0)?;
                Family::NMix2
            }
            "t" | "mvt" => {
                arity(1)?;
                Family::Mvt { nu: values[0] }
            }
            "chi2" => {
                arity(1)?;
                Family::Iid(Marginal::Chi2 { k: values[0] })
            }
            "gamma" => {
                arity(2)?;
                Family::Iid(Marginal::Gamma {
                    shape: values[0],
                    rate: values[1],
                })
            }
            "logistic" => {
                arity(0)?;
                Family::Iid(Marginal::Logistic)
            }
            "uniform" => {
                arity(0)?;
                Family::Iid(Marginal::Uniform)
            }
            "laplace" => {
                arity(0)?;
                Family::Iid(Marginal::Laplace)
            }
            "pearson7" | "p7" => {
                arity(1)?;
                Family::Iid(Marginal::Pearson7 { m: values[0] })
            }
            other => return Err(invalid(format!("unknown alternative `{other}`"))),
        };
        Ok(family)
    }
}

/// Returns `L z` where `L L^T = b` is the lower Cholesky factor.
pub fn cholesky_correlated(b: &DMatrix<f64>, z: &[f64]) -> Result<Vec<f64>> {
    let l = cholesky_factor(b)?;
    if z.len() != l.nrows() {
        return Err(invalid("vector length does not match matrix"));
    }
    Ok((l * DVector::from_column_slice(z)).as_slice().to_vec())
}

fn cholesky_factor(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !b.is_square() {
        return Err(Error::Factorization("matrix is not square".into()));
    }
    b.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Factorization("matrix is not positive definite".into()))
}

/// Equicorrelation matrix with unit diagonal and `rho` elsewhere.
pub fn equicorrelation(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })
}

/// Prepared sampler; holds factorizations so repeated draws are cheap.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: AlternativeSpec,
    mix_factor: Option<DMatrix<f64>>,
}

impl Sampler {
    pub fn new(spec: AlternativeSpec) -> Result<Self> {
        let spec = AlternativeSpec::new(spec.family, spec.d)?;
        let mix_factor = match spec.family {
            Family::NMix2 => Some(cholesky_factor(&equicorrelation(spec.d, 0.9))?),
            _ => None,
        };
        Ok(Self { spec, mix_factor })
    }

    pub fn spec(&self) -> &AlternativeSpec {
        &self.spec
    }

    /// Draws `n` observations into a fresh matrix.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DataMatrix> {
        if n == 0 {
            return Err(invalid("sample size must be at least 1"));
        }
        let d = self.spec.d;
        let mut data = vec![0.0; n * d];
        for row in data.chunks_exact_mut(d) {
            self.fill_row(row, rng);
        }
        DataMatrix::new(data, n, d)
    }

    fn fill_row<R: Rng + ?Sized>(&self, row: &mut [f64], rng: &mut R) {
        let normal = |rng: &mut R| -> f64 { rng.sample(StandardNormal) };
        match self.spec.family {
            Family::StandardNormal => row.iter_mut().for_each(|x| *x = normal(rng)),
            Family::NMix1 => {
                let shift = if rng.random_bool(0.1) { 3.0 } else { 0.0 };
                row.iter_mut().for_each(|x| *x = normal(rng) + shift);
            }
            Family::NMix2 => {
                let correlated = rng.random_bool(0.9);
                row.iter_mut().for_each(|x| *x = normal(rng));
                if correlated {
                    let l = self.mix_factor.as_ref().expect("factor prepared");
                    let z = DVector::from_column_slice(row);
                    row.copy_from_slice((l * z).as_slice());
                }
            }
            Family::Mvt { nu } => {
                row.iter_mut().for_each(|x| *x = normal(rng));
                let w: f64 = ChiSquared::new(nu).expect("validated").sample(rng);
                let scale = (w / nu).sqrt().recip();
                row.iter_mut().for_each(|x| *x *= scale);
            }
            Family::Iid(m) => row.iter_mut().for_each(|x| *x = sample_marginal(m, rng)),
        }
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn sample_marginal<R: Rng + ?Sized>(m: Marginal, rng: &mut R) -> f64 {
    match m {
        Marginal::Chi2 { k } => ChiSquared::new(k).expect("validated").sample(rng),
        Marginal::Gamma { shape, rate } => Gamma::new(shape, rate.recip()).expect("validated").sample(rng),
        Marginal::Logistic => {
            let u = open_unit(rng);
            3f64.sqrt() / PI * (u / (1.0 - u)).ln()
        }
        Marginal::Uniform => 3f64.sqrt() * rng.random_range(-1.0..1.0),
        Marginal::Laplace => {
            let u = open_unit(rng) - 0.5;
            -u.signum() * (1.0 - 2.0 * u.abs()).ln() / 2f64.sqrt()
        }
        Marginal::Pearson7 { m } => StudentT::new(m).expect("validated").sample(rng),
    }
}

/// Draws `n` observations of `spec` from the given stream.
pub fn draw(spec: &AlternativeSpec, n: usize, stream: RngStream) -> Result<DataMatrix> {
    Sampler::new(*spec)?.sample(n, &mut stream.rng())
}
