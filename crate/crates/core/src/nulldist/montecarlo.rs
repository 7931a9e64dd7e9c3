use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::competitors::{bhep_stat, energy_stat, hv_stat, hz_stat};
use crate::error::{invalid, Error, Result};
use crate::numeric::lower_quantile;
use crate::samplers::{AlternativeSpec, RngStream, Sampler};
use crate::standardize::{scaled_residuals, DataMatrix, StandardizedSample};
use crate::statistic::{scaled_stat, t_inf_stat, t_stat, WeightParam};

/// Singular draws are redrawn from the same stream at most this often.
pub const MAX_SINGULAR_RETRIES: usize = 10;

/// Fewest replications accepted for a quantile estimate.
pub const MIN_QUANTILE_REPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub reps: usize,
    pub seed: u64,
    pub level: f64,
}

impl SimulationConfig {
    pub fn new(reps: usize, seed: u64, level: f64) -> Result<Self> {
        if reps == 0 {
            return Err(invalid("reps must be positive"));
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(invalid(format!("level must lie in (0, 1), got {level}")));
        }
        Ok(Self { reps, seed, level })
    }
}

/// Statistic evaluated inside a simulation. `T` is reported on the scaled
/// (tabulated) axis; the rest as defined in `competitors`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stat", content = "a", rename_all = "lowercase")]
pub enum StatKind {
    T(WeightParam),
    TInf,
    Bhep(f64),
    Hz,
    Hv(f64),
    Energy,
}

impl StatKind {
    pub fn evaluate(&self, y: &StandardizedSample) -> Result<f64> {
        match *self {
            StatKind::T(a) => Ok(scaled_stat(t_stat(y, a), a, y.d())),
            StatKind::TInf => Ok(t_inf_stat(y)),
            StatKind::Bhep(a) => bhep_stat(y, a),
            StatKind::Hz => Ok(hz_stat(y)),
            StatKind::Hv(a) => hv_stat(y, a),
            StatKind::Energy => Ok(energy_stat(y)),
        }
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatKind::T(a) => write!(f, "T_{}", a.get()),
            StatKind::TInf => write!(f, "T_inf"),
            StatKind::Bhep(a) => write!(f, "BHEP_{a}"),
            StatKind::Hz => write!(f, "HZ"),
            StatKind::Hv(a) => write!(f, "HV_{a}"),
            StatKind::Energy => write!(f, "EN"),
        }
    }
}

fn one_replicate(sampler: &Sampler, n: usize, kinds: &[StatKind], stream: RngStream) -> Result<Vec<f64>> {
    let mut rng = stream.rng();
    let mut last = None;
    for _ in 0..=MAX_SINGULAR_RETRIES {
        let x = sampler.sample(n, &mut rng)?;
        match scaled_residuals(&x) {
            Ok(y) => return kinds.iter().map(|k| k.evaluate(&y)).collect(),
            Err(e @ Error::SingularCovariance { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("loop ran at least once"))
}

/// Simulates every statistic in `kinds` on `reps` samples of size `n`.
/// Replicate `r` uses stream `(seed, r)`, so the output (indexed
/// `[kind][rep]`) does not depend on the number of worker threads.
pub fn simulate(spec: &AlternativeSpec, n: usize, kinds: &[StatKind], reps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n < spec.d + 1 {
        return Err(invalid(format!("need n >= d + 1, got n = {n}, d = {}", spec.d)));
    }
    let sampler = Sampler::new(*spec)?;
    let rows: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| one_replicate(&sampler, n, kinds, RngStream::new(seed, r)))
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::with_capacity(reps); kinds.len()];
    for row in rows {
        for (col, v) in out.iter_mut().zip(row) {
            col.push(v);
        }
    }
    Ok(out)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Null quantiles at several levels, all from the same set of draws.
pub fn mc_critical_values(
    n: usize,
    d: usize,
    kind: StatKind,
    levels: &[f64],
    cfg: &SimulationConfig,
) -> Result<Vec<f64>> {
    if cfg.reps < MIN_QUANTILE_REPS {
        return Err(invalid(format!(
            "quantile estimation needs at least {MIN_QUANTILE_REPS} reps"
        )));
    }
    if let Some(bad) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(invalid(format!("level must lie in (0, 1), got {bad}")));
    }
    let sims = simulate(&AlternativeSpec::standard_normal(d), n, &[kind], cfg.reps, cfg.seed)?;
    let s = sorted(sims.into_iter().next().expect("one statistic"));
    Ok(levels.iter().map(|&l| lower_quantile(&s, l)).collect())
}

/// Null quantile at `cfg.level` of the scaled `T_{n,a}`.
pub fn mc_critical_value(n: usize, d: usize, a: WeightParam, cfg: &SimulationConfig) -> Result<f64> {
    Ok(mc_critical_values(n, d, StatKind::T(a), &[cfg.level], cfg)?[0])
}

/// Monte Carlo p-value `(#{sim >= obs} + 1) / (reps + 1)` of `T_{n,a}`.
pub fn mc_pvalue(x: &DataMatrix, a: WeightParam, cfg: &SimulationConfig) -> Result<f64> {
    Ok(mc_pvalues(x, &[StatKind::T(a)], cfg)?[0])
}

/// p-values of several statistics against one shared set of null draws.
pub fn mc_pvalues(x: &DataMatrix, kinds: &[StatKind], cfg: &SimulationConfig) -> Result<Vec<f64>> {
    let y = scaled_residuals(x)?;
    let sims = simulate(
        &AlternativeSpec::standard_normal(x.d()),
        x.n(),
        kinds,
        cfg.reps,
        cfg.seed,
    )?;
    kinds
        .iter()
        .zip(&sims)
        .map(|(kind, col)| {
            let obs = kind.evaluate(&y)?;
            let exceed = col.iter().filter(|&&s| s >= obs).count();
            Ok((exceed + 1) as f64 / (cfg.reps + 1) as f64)
        })
        .collect()
}

/// Fraction of samples from `spec` whose statistic exceeds the matching
/// critical value.
pub fn rejection_rates(
    spec: &AlternativeSpec,
    n: usize,
    kinds: &[StatKind],
    critical: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if kinds.len() != critical.len() {
        return Err(invalid("one critical value per statistic is required"));
    }
    let sims = simulate(spec, n, kinds, reps, seed)?;
    Ok(sims
        .iter()
        .zip(critical)
        .map(|(col, &c)| col.iter().filter(|&&s| s > c).count() as f64 / reps as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{draw, Family};

    fn wp(a: f64) -> WeightParam {
        WeightParam::new(a).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SimulationConfig::new(0, 1, 0.95).is_err());
        assert!(SimulationConfig::new(10, 1, 1.0).is_err());
        let cfg = SimulationConfig::new(50, 1, 0.95).unwrap();
        assert!(mc_critical_value(10, 1, wp(1.0), &cfg).is_err());
    }

    #[test]
    fn critical_values_are_deterministic_and_monotone() {
        let cfg = SimulationConfig::new(400, 7, 0.95).unwrap();
        let a = mc_critical_values(15, 2, StatKind::T(wp(1.0)), &[0.9, 0.95, 0.99], &cfg).unwrap();
        let b = mc_critical_values(15, 2, StatKind::T(wp(1.0)), &[0.9, 0.95, 0.99], &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a[0] <= a[1] && a[1] <= a[2]);
        assert_eq!(mc_critical_value(15, 2, wp(1.0), &cfg).unwrap(), a[1]);
    }

    #[test]
    fn result_independent_of_pool_size() {
        let spec = AlternativeSpec::new(Family::NMix1, 2).unwrap();
        let kinds = [StatKind::T(wp(2.0)), StatKind::Energy];
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = serial.install(|| simulate(&spec, 20, &kinds, 64, 3)).unwrap();
        let b = wide.install(|| simulate(&spec, 20, &kinds, 64, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pvalue_near_one_for_tiny_statistic() {
        // a perfectly symmetric, light-tailed configuration
        let rows: Vec<Vec<f64>> = (-10..=10).map(|k| vec![k as f64 / 10.0]).collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let cfg = SimulationConfig::new(200, 1, 0.95).unwrap();
        let p = mc_pvalue(&x, wp(5.0), &cfg).unwrap();
        assert!(p > 0.5, "{p}");
        // heavily skewed data is rejected
        let x = draw(
            &AlternativeSpec::new("chi2:1".parse().unwrap(), 1).unwrap(),
            60,
            RngStream::new(2, 0),
        )
        .unwrap();
        assert!(mc_pvalue(&x, wp(1.0), &cfg).unwrap() < 0.02);
    }

    #[test]
    fn shared_draws_match_single_pvalue() {
        let x = draw(&AlternativeSpec::standard_normal(2), 15, RngStream::new(3, 0)).unwrap();
        let cfg = SimulationConfig::new(150, 4, 0.95).unwrap();
        let both = mc_pvalues(&x, &[StatKind::Hz, StatKind::T(wp(2.0))], &cfg).unwrap();
        assert_eq!(both[1], mc_pvalue(&x, wp(2.0), &cfg).unwrap());
    }

    #[test]
    fn pvalue_bounds() {
        let cfg = SimulationConfig::new(99, 5, 0.95).unwrap();
        let x = draw(&AlternativeSpec::standard_normal(1), 12, RngStream::new(1, 1)).unwrap();
        let p = mc_pvalue(&x, wp(1.0), &cfg).unwrap();
        assert!((0.01..=1.0).contains(&p));
    }

    #[test]
    fn rejection_rate_needs_matching_lengths() {
        let spec = AlternativeSpec::standard_normal(1);
        assert!(rejection_rates(&spec, 10, &[StatKind::Hz], &[], 10, 1).is_err());
        let r = rejection_rates(&spec, 10, &[StatKind::Hz], &[f64::INFINITY], 10, 1).unwrap();
        assert_eq!(r, vec![0.0]);
    }

    #[test]
    fn labels() {
        assert_eq!(StatKind::T(wp(0.5)).to_string(), "T_0.5");
        assert_eq!(StatKind::Hv(5.0).to_string(), "HV_5");
        assert_eq!(StatKind::TInf.to_string(), "T_inf");
    }
}
