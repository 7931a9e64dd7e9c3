//! Competing normality statistics: BHEP, Henze–Zirkler, Henze–Visagie and
//! the energy statistic, all computed from scaled residuals.

use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};

use crate::error::{invalid, Error, Result};
use crate::numeric::{compensated_sum, ln_gamma, LineRule};
use crate::standardize::{dist_sq, dot, StandardizedSample};
use crate::statistic::{clamp_roundoff, symmetric_pair_sum};

/// Largest exponent accepted by [`hv_stat`] before reporting overflow.
pub const HV_MAX_EXPONENT: f64 = 700.0;

/// Weight parameter recommended for the HV statistic.
pub const HV_DEFAULT_A: f64 = 5.0;

/// Weight parameter used for BHEP in the power comparison.
pub const BHEP_DEFAULT_A: f64 = 1.0;

fn check_positive(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("bandwidth must be positive and finite, got {a}")))
    }
}

/// BHEP statistic with Gaussian bandwidth `a`. No factor `n`.
pub fn bhep_stat(y: &StandardizedSample, a: f64) -> Result<f64> {
    check_positive(a)?;
    let n = y.n() as f64;
    let d = y.d() as f64;
    let a2 = a * a;
    let pairs = symmetric_pair_sum(y, |yi, yj| (-0.5 * a2 * dist_sq(yi, yj)).exp()) / (n * n);
    let single = compensated_sum(y.rows().map(|yj| (-a2 * dot(yj, yj) / (2.0 * (1.0 + a2))).exp())) / n;
    let value = pairs - 2.0 * (1.0 + a2).powf(-0.5 * d) * single + (1.0 + 2.0 * a2).powf(-0.5 * d);
    Ok(clamp_roundoff(value))
}

/// Henze–Zirkler bandwidth `(1/sqrt 2) ((2d+1) n / 4)^{1/(d+4)}`.
pub fn hz_bandwidth(n: usize, d: usize) -> f64 {
    let (n, d) = (n as f64, d as f64);
    ((2.0 * d + 1.0) * n / 4.0).powf(1.0 / (d + 4.0)) / SQRT_2
}

/// BHEP at the Henze–Zirkler bandwidth.
pub fn hz_stat(y: &StandardizedSample) -> f64 {
    bhep_stat(y, hz_bandwidth(y.n(), y.d())).expect("HZ bandwidth is positive")
}

/// Henze–Visagie statistic based on the empirical moment generating function.
pub fn hv_stat(y: &StandardizedSample, a: f64) -> Result<f64> {
    check_positive(a)?;
    let n = y.n() as f64;
    let d = y.d() as f64;
    let inv_4a = 1.0 / (4.0 * a);

    let max_r2 = y.rows().map(|r| dot(r, r)).fold(0.0, f64::max);
    if 4.0 * max_r2 * inv_4a > HV_MAX_EXPONENT {
        // the crude bound failed; check the actual pairs
        let mut worst = 0.0f64;
        for i in 0..y.n() {
            for j in i..y.n() {
                let s2: f64 = y.row(i).iter().zip(y.row(j)).map(|(p, q)| (p + q) * (p + q)).sum();
                worst = worst.max(s2 * inv_4a);
            }
        }
        if worst > HV_MAX_EXPONENT {
            return Err(Error::NumericOverflow(format!(
                "HV exponent {worst:.1} exceeds {HV_MAX_EXPONENT} at a = {a}"
            )));
        }
    }

    let c_sum = 1.0 / (4.0 * a * a) - 1.0 / (2.0 * a);
    let c_const = d / (2.0 * a);
    let pairs = symmetric_pair_sum(y, |yi, yj| {
        let s2: f64 = yi.iter().zip(yj).map(|(p, q)| (p + q) * (p + q)).sum();
        (s2 * inv_4a).exp() * (dot(yi, yj) + s2 * c_sum + c_const)
    });
    Ok((PI / a).powf(0.5 * d) * pairs / n)
}

/// `E|Z1 - Z2|` for independent standard normal vectors in dimension `d`.
pub fn expected_gaussian_distance(d: usize) -> f64 {
    2.0 * gamma_ratio(d)
}

/// `Gamma((d+1)/2) / Gamma(d/2)`.
fn gamma_ratio(d: usize) -> f64 {
    let d = d as f64;
    (ln_gamma(0.5 * (d + 1.0)) - ln_gamma(0.5 * d)).exp()
}

const SERIES_MAX_TERMS: usize = 500;
const SERIES_REL_TOL: f64 = 1e-12;
/// Below this radius the alternating power series is used directly.
const ALTERNATING_MAX_RADIUS: f64 = 1.5;
/// Above this radius the Poisson mixture needs too many terms; use quadrature.
const MIXTURE_MAX_RADIUS: f64 = 20.0;

/// `E|x - Z|` for `Z ~ N_d(0, I)` and a point at Euclidean norm `r`.
pub fn expected_norm_to_gaussian(r: f64, d: usize) -> f64 {
    let r = r.abs();
    if r <= ALTERNATING_MAX_RADIUS {
        alternating_series(r, d)
    } else if r <= MIXTURE_MAX_RADIUS {
        poisson_mixture_series(r, d)
    } else {
        radial_quadrature(r, d)
    }
}

/// Power series in `r^2` with alternating signs; accurate only while
/// `exp(r^2/2)` stays small.
pub(crate) fn alternating_series(r: f64, d: usize) -> f64 {
    let df = d as f64;
    let lead = SQRT_2 * gamma_ratio(d);
    if r == 0.0 {
        return lead;
    }
    let log_c = ln_gamma(0.5 * (df + 1.0));
    let ln_r = r.ln();
    let mut acc = 0.0;
    for k in 0..SERIES_MAX_TERMS {
        let kf = k as f64;
        let ln_term = -ln_gamma(kf + 1.0) - kf * std::f64::consts::LN_2 + (2.0 * kf + 2.0) * ln_r
            - ((2.0 * kf + 1.0) * (2.0 * kf + 2.0)).ln()
            + log_c
            + ln_gamma(kf + 1.5)
            - ln_gamma(kf + 0.5 * df + 1.0);
        let term = if k % 2 == 0 { ln_term.exp() } else { -ln_term.exp() };
        acc += term;
        if kf > 0.5 * r * r && term.abs() < SERIES_REL_TOL * acc.abs() {
            break;
        }
    }
    lead + FRAC_2_PI.sqrt() * acc
}

/// `|x - Z|^2` is noncentral chi-square with `lambda = r^2`: a Poisson(lambda/2)
/// mixture of central chi-squares with `d + 2k` degrees of freedom.
pub(crate) fn poisson_mixture_series(r: f64, d: usize) -> f64 {
    let df = d as f64;
    let half_lambda = 0.5 * r * r;
    let ln_hl = half_lambda.ln();
    let mut acc = 0.0;
    for k in 0..SERIES_MAX_TERMS {
        let kf = k as f64;
        let ln_w = -half_lambda + kf * ln_hl - ln_gamma(kf + 1.0);
        let mean_chi = SQRT_2 * (ln_gamma(kf + 0.5 * (df + 1.0)) - ln_gamma(kf + 0.5 * df)).exp();
        let term = ln_w.exp() * mean_chi;
        acc += term;
        if kf > half_lambda && term < SERIES_REL_TOL * acc {
            break;
        }
    }
    acc
}

/// `E sqrt((r - z)^2 + u^2)` with `z ~ N(0,1)` and `u ~ chi_{d-1}`.
pub(crate) fn radial_quadrature(r: f64, d: usize) -> f64 {
    let z_rule = LineRule::new(96, -12.0, 12.0);
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    if d == 1 {
        return z_rule.integrate(|z| (r - z).abs() * phi(z));
    }
    let k = (d - 1) as f64;
    let u_rule = LineRule::new(96, 0.0, k.sqrt() + 12.0);
    let ln_norm = (0.5 * k - 1.0) * std::f64::consts::LN_2 + ln_gamma(0.5 * k);
    let chi_pdf = |u: f64| {
        if u == 0.0 {
            return if d == 2 { (-ln_norm).exp() } else { 0.0 };
        }
        ((k - 1.0) * u.ln() - 0.5 * u * u - ln_norm).exp()
    };
    z_rule.integrate(|z| phi(z) * u_rule.integrate(|u| ((r - z).powi(2) + u * u).sqrt() * chi_pdf(u)))
}

/// Energy statistic of Székely and Rizzo against `N_d(0, I)`.
pub fn energy_stat(y: &StandardizedSample) -> f64 {
    let n = y.n();
    let nf = n as f64;
    let d = y.d();
    let scale = (nf / (nf - 1.0)).sqrt();
    let to_gauss = compensated_sum(
        y.rows()
            .map(|yj| expected_norm_to_gaussian(scale * dot(yj, yj).sqrt(), d)),
    );
    let within = scale * symmetric_pair_sum(y, |yi, yj| dist_sq(yi, yj).sqrt());
    let value = nf * (2.0 * to_gauss / nf - expected_gaussian_distance(d) - within / (nf * nf));
    clamp_roundoff(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{tensor_integrate, LineRule};
    use crate::standardize::{scaled_residuals, DataMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn random_sample(n: usize, d: usize, seed: u64) -> StandardizedSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d)
            .map(|_| rng.random_range(-1.0..1.0f64).powi(3) * 2.0)
            .collect();
        scaled_residuals(&DataMatrix::new(data, n, d).unwrap()).unwrap()
    }

    fn bhep_quadrature(y: &StandardizedSample, a: f64) -> f64 {
        let d = y.d();
        let rule = LineRule::symmetric(96, a * 60f64.sqrt());
        let n = y.n() as f64;
        tensor_integrate(&rule, d, |t| {
            let (mut c, mut s) = (0.0, 0.0);
            for yj in y.rows() {
                let (sn, cs) = dot(t, yj).sin_cos();
                c += cs / n;
                s += sn / n;
            }
            let t2 = dot(t, t);
            let diff = c - (-0.5 * t2).exp();
            let phi_a = (2.0 * PI * a * a).powf(-0.5 * d as f64) * (-t2 / (2.0 * a * a)).exp();
            (diff * diff + s * s) * phi_a
        })
    }

    #[test]
    fn bhep_matches_quadrature() {
        for (n, d, seed) in [(5, 1, 1), (8, 1, 2), (6, 2, 3), (8, 2, 4)] {
            let y = random_sample(n, d, seed);
            for a in [0.5, 1.0] {
                let closed = bhep_stat(&y, a).unwrap();
                let quad = bhep_quadrature(&y, a);
                assert!(
                    (closed - quad).abs() <= 1e-6 * quad,
                    "n={n} d={d} a={a}: {closed} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn bhep_rejects_bad_bandwidth() {
        let y = random_sample(5, 1, 0);
        assert!(bhep_stat(&y, 0.0).is_err());
        assert!(hv_stat(&y, -1.0).is_err());
    }

    #[test]
    fn hz_bandwidth_values() {
        assert!((hz_bandwidth(20, 1) - 15f64.powf(0.2) / SQRT_2).abs() < 1e-15);
        assert!((hz_bandwidth(20, 1) - 1.2154).abs() < 1e-4);
        assert!((hz_bandwidth(50, 3) - (350.0f64 / 4.0).powf(1.0 / 7.0) / SQRT_2).abs() < 1e-15);
        let y = random_sample(20, 1, 9);
        assert_eq!(
            hz_stat(&y).to_bits(),
            bhep_stat(&y, hz_bandwidth(20, 1)).unwrap().to_bits()
        );
    }

    #[test]
    fn hv_symmetric_pair_by_hand() {
        let y = scaled_residuals(&DataMatrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap()).unwrap();
        let a: f64 = 5.0;
        let c = 1.0 / (4.0 * a * a) - 1.0 / (2.0 * a);
        let diag = (4.0 / (4.0 * a)).exp() * (1.0 + 4.0 * c + 1.0 / (2.0 * a));
        let off = -1.0 + 1.0 / (2.0 * a);
        let expected = 0.5 * (PI / a).sqrt() * (2.0 * diag + 2.0 * off);
        let got = hv_stat(&y, a).unwrap();
        assert!((got - expected).abs() < 1e-14 * expected.abs().max(1.0));
    }

    #[test]
    fn hv_overflow_is_an_error() {
        let y = random_sample(30, 1, 5);
        assert!(matches!(hv_stat(&y, 1e-4), Err(Error::NumericOverflow(_))));
    }

    #[test]
    fn energy_series_at_origin() {
        for d in 1..=6 {
            let expected = SQRT_2 * gamma_ratio(d);
            assert!((expected_norm_to_gaussian(0.0, d) - expected).abs() < 1e-15);
        }
        assert!((expected_gaussian_distance(1) - 2.0 / PI.sqrt()).abs() < 1e-14);
    }

    fn univariate_quadrature(a: f64) -> f64 {
        // split at the kink z = a
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        let f = |z: f64| (a - z).abs() * phi(z);
        if a < 14.0 {
            LineRule::new(200, -14.0, a).integrate(f) + LineRule::new(200, a, 14.0).integrate(f)
        } else {
            LineRule::new(200, -14.0, 14.0).integrate(f)
        }
    }

    #[test]
    fn univariate_expected_norm_matches_quadrature() {
        let normal = Normal::standard();
        for a in [0.5, 1.0, 3.0, 10.0, 25.0] {
            let got = expected_norm_to_gaussian(a, 1);
            let quad = univariate_quadrature(a);
            let closed = a * (2.0 * normal.cdf(a) - 1.0) + 2.0 * (-0.5 * a * a).exp() / (2.0 * PI).sqrt();
            assert!((got - quad).abs() < 1e-9, "a={a}: {got} vs {quad}");
            assert!((got - closed).abs() < 1e-9, "a={a}: {got} vs {closed}");
        }
    }

    #[test]
    fn series_routes_agree_where_they_overlap() {
        for d in [1, 2, 3, 5, 10] {
            for r in [0.3, 1.0, 1.5] {
                let (alt, mix) = (alternating_series(r, d), poisson_mixture_series(r, d));
                assert!((alt - mix).abs() < 1e-11, "d={d} r={r}: {alt} vs {mix}");
            }
            // the quadrature box must not reach the kink at z = r
            for r in [15.0, 20.0] {
                let (mix, quad) = (poisson_mixture_series(r, d), radial_quadrature(r, d));
                assert!((mix - quad).abs() < 1e-9 * mix, "d={d} r={r}: {mix} vs {quad}");
            }
        }
    }

    #[test]
    fn mixture_matches_univariate_closed_form() {
        let normal = Normal::standard();
        for r in [2.0, 5.0, 12.0, 19.0] {
            let closed = r * (2.0 * normal.cdf(r) - 1.0) + 2.0 * (-0.5 * r * r).exp() / (2.0 * PI).sqrt();
            assert!((poisson_mixture_series(r, 1) - closed).abs() < 1e-11 * closed);
        }
    }

    #[test]
    fn alternating_series_breaks_down_at_large_radius() {
        // cancellation of terms of size ~ exp(r^2/2)
        let exact = poisson_mixture_series(10.0, 2);
        assert!((alternating_series(10.0, 2) - exact).abs() > 1e-3);
    }

    #[test]
    fn energy_nonnegative_and_permutation_invariant() {
        let y = random_sample(25, 3, 12);
        let e = energy_stat(&y);
        assert!(e >= 0.0);
        let mut rows: Vec<Vec<f64>> = y.rows().map(|r| r.to_vec()).collect();
        rows.rotate_left(7);
        let z = StandardizedSample::from_residuals(DataMatrix::from_rows(&rows).unwrap());
        assert!((energy_stat(&z) - e).abs() <= 1e-12 * e);
    }
}
