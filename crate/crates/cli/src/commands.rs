use std::time::Instant;

use cfnorm::competitors::{BHEP_DEFAULT_A, HV_DEFAULT_A};
use cfnorm::inference::{coverage_rate, delta_limits, delta_numeric, delta_zero_collision_term};
use cfnorm::nulldist::{mc_pvalues, rejection_rates, simulate, SimulationConfig, StatKind, MIN_QUANTILE_REPS};
use cfnorm::numeric::lower_quantile;
use cfnorm::samplers::{AlternativeSpec, Family};
use cfnorm::statistic::t_inf_stat;
use cfnorm::{scaled_residuals, t_stat};

use crate::args::{CoverageArgs, CritvalsArgs, DeltaArgs, PowerArgs, TestArgs};
use crate::data::load_csv;
use crate::error::{CliError, CliResult};
use crate::report::*;
use crate::weights::{parse_list, WeightChoice};

/// Progress sink; writes to standard error unless silenced.
#[derive(Debug, Clone, Copy)]
pub struct Progress {
    pub quiet: bool,
}

impl Progress {
    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("cfnorm: {}", msg.as_ref());
        }
    }
}

fn competitor_kinds() -> [StatKind; 4] {
    [
        StatKind::Bhep(BHEP_DEFAULT_A),
        StatKind::Hz,
        StatKind::Hv(HV_DEFAULT_A),
        StatKind::Energy,
    ]
}

fn alternative(name: &str, d: usize) -> CliResult<AlternativeSpec> {
    let family: Family = name.parse()?;
    Ok(AlternativeSpec::new(family, d)?)
}

fn low_precision(reps: usize, progress: Progress) -> bool {
    let low = reps < LOW_PRECISION_REPS;
    if low {
        progress.note(format!(
            "warning: {reps} replications (< {LOW_PRECISION_REPS}); results are low precision"
        ));
    }
    low
}

fn finish(
    command: &[String],
    parameters: Parameters,
    results: Results,
    low: bool,
    start: Instant,
) -> CliResult<ReportRecord> {
    let record = ReportRecord {
        command: command.to_vec(),
        parameters,
        results,
        low_precision: low,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    record.check_finite()?;
    Ok(record)
}

pub fn test(args: &TestArgs, command: &[String], progress: Progress) -> CliResult<ReportRecord> {
    let start = Instant::now();
    let weights = parse_list(&args.a)?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let data = load_csv(&args.data)?;
    let x = &data.matrix;
    let (n, d) = (x.n(), x.d());
    if n < d + 1 {
        return Err(CliError::Degenerate(format!(
            "{n} observations in {d} dimensions: the sample covariance is singular unless n >= d + 1 = {}",
            d + 1
        )));
    }
    let y = scaled_residuals(x)?;
    let mut kinds: Vec<StatKind> = weights.iter().map(|w| w.kind()).collect();
    if args.competitors {
        kinds.extend(competitor_kinds());
    }
    progress.note(format!("n = {n}, d = {d}; simulating {} null samples", args.reps));
    let cfg = SimulationConfig::new(args.reps, args.seed, 0.95)?;
    let p_values = mc_pvalues(x, &kinds, &cfg)?;
    let rows = kinds
        .iter()
        .zip(p_values)
        .map(|(kind, p)| {
            let statistic = kind.evaluate(&y)?;
            let raw = match kind {
                StatKind::T(a) => t_stat(&y, *a),
                StatKind::TInf => t_inf_stat(&y),
                _ => statistic,
            };
            Ok(StatRow {
                label: kind.to_string(),
                raw,
                statistic,
                p_value: p,
                reject: p <= args.alpha,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let parameters = Parameters {
        data: Some(args.data.display().to_string()),
        n: vec![n],
        d: vec![d],
        a: args.a.clone(),
        reps: Some(args.reps),
        seed: Some(args.seed),
        alpha: Some(args.alpha),
        ..Parameters::default()
    };
    let results = Results::Test(TestResults {
        n,
        d,
        columns: data.columns,
        rows,
    });
    let low = low_precision(args.reps, progress);
    finish(command, parameters, results, low, start)
}

pub fn critvals(args: &CritvalsArgs, command: &[String], progress: Progress) -> CliResult<ReportRecord> {
    let start = Instant::now();
    let weights = parse_list(&args.a)?;
    if args.reps < MIN_QUANTILE_REPS {
        return Err(CliError::Usage(format!(
            "quantiles need at least {MIN_QUANTILE_REPS} reps"
        )));
    }
    let cfg = SimulationConfig::new(args.reps, args.seed, args.level)?;
    let kinds: Vec<StatKind> = weights.iter().map(|w| w.kind()).collect();
    let cells = args.n.len() * args.d.len();
    let mut rows = Vec::new();
    for (i, (&d, &n)) in args
        .d
        .iter()
        .flat_map(|d| args.n.iter().map(move |n| (d, n)))
        .enumerate()
    {
        progress.note(format!("cell {}/{cells}: d = {d}, n = {n}", i + 1));
        // all weights share one set of null draws per (n, d)
        let sims = simulate(&AlternativeSpec::standard_normal(d), n, &kinds, cfg.reps, cfg.seed)?;
        for (label, mut col) in args.a.iter().zip(sims) {
            col.sort_by(f64::total_cmp);
            rows.push(CritRow {
                n,
                d,
                a: label.clone(),
                quantile: lower_quantile(&col, cfg.level),
            });
        }
    }
    let parameters = Parameters {
        n: args.n.clone(),
        d: args.d.clone(),
        a: args.a.clone(),
        reps: Some(args.reps),
        seed: Some(args.seed),
        level: Some(args.level),
        ..Parameters::default()
    };
    let low = low_precision(args.reps, progress);
    let record = finish(command, parameters, Results::Critvals { rows }, low, start)?;
    record.write_to(&args.out)?;
    Ok(record)
}

pub fn power(args: &PowerArgs, command: &[String], progress: Progress) -> CliResult<ReportRecord> {
    let start = Instant::now();
    let weights = parse_list(&args.a)?;
    let spec = alternative(&args.alt, args.d)?;
    if args.reps < MIN_QUANTILE_REPS {
        return Err(CliError::Usage(format!(
            "quantiles need at least {MIN_QUANTILE_REPS} reps"
        )));
    }
    let cfg = SimulationConfig::new(args.reps, args.seed, args.level)?;
    let mut kinds: Vec<StatKind> = weights.iter().map(|w| w.kind()).collect();
    if args.competitors {
        kinds.extend(competitor_kinds());
    }
    progress.note(format!(
        "null run: {} samples, n = {}, d = {}",
        args.reps, args.n, args.d
    ));
    let null = simulate(
        &AlternativeSpec::standard_normal(args.d),
        args.n,
        &kinds,
        cfg.reps,
        cfg.seed,
    )?;
    let critical: Vec<f64> = null
        .into_iter()
        .map(|mut col| {
            col.sort_by(f64::total_cmp);
            lower_quantile(&col, cfg.level)
        })
        .collect();
    progress.note(format!("alternative run: {}", spec.family));
    // a different seed keeps the alternative draws independent of the null run
    let rates = rejection_rates(&spec, args.n, &kinds, &critical, args.reps, args.seed.wrapping_add(1))?;
    let rows: Vec<PowerRow> = kinds
        .iter()
        .zip(critical)
        .zip(rates)
        .map(|((kind, c), r)| PowerRow {
            statistic: kind.to_string(),
            critical_value: c,
            rejection_pct: 100.0 * r,
        })
        .collect();
    let parameters = Parameters {
        alt: Some(args.alt.clone()),
        n: vec![args.n],
        d: vec![args.d],
        a: args.a.clone(),
        reps: Some(args.reps),
        seed: Some(args.seed),
        level: Some(args.level),
        ..Parameters::default()
    };
    let low = low_precision(args.reps, progress);
    let record = finish(command, parameters, Results::Power { rows }, low, start)?;
    if let Some(out) = &args.out {
        record.write_to(out)?;
    }
    Ok(record)
}

pub fn coverage(args: &CoverageArgs, command: &[String], progress: Progress) -> CliResult<ReportRecord> {
    let start = Instant::now();
    let a = WeightChoice::parse(&args.a)?.finite()?;
    let spec = alternative(&args.alt, args.d)?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let delta = match args.delta {
        Some(v) => v,
        None => {
            progress.note("computing Delta_a by quadrature");
            delta_numeric(&spec, a)?.value
        }
    };
    progress.note(format!("{} intervals at n = {}", args.reps, args.n));
    let cov = coverage_rate(&spec, args.n, a, args.alpha, delta, args.reps, args.seed)?;
    let parameters = Parameters {
        alt: Some(args.alt.clone()),
        n: vec![args.n],
        d: vec![args.d],
        a: vec![args.a.clone()],
        reps: Some(args.reps),
        seed: Some(args.seed),
        alpha: Some(args.alpha),
        delta: args.delta,
        ..Parameters::default()
    };
    let results = Results::Coverage(CoverageRow {
        delta,
        coverage_pct: 100.0 * cov.rate,
        std_error_pct: 100.0 * cov.std_error,
    });
    let low = low_precision(args.reps, progress);
    finish(command, parameters, results, low, start)
}

pub fn delta(args: &DeltaArgs, command: &[String], progress: Progress) -> CliResult<ReportRecord> {
    let start = Instant::now();
    let weights = parse_list(&args.a)?;
    let spec = alternative(&args.alt, args.d)?;
    let rows = args
        .a
        .iter()
        .zip(&weights)
        .map(|(label, w)| {
            progress.note(format!("Delta_a at a = {label}"));
            Ok(DeltaRow {
                a: label.clone(),
                delta: delta_numeric(&spec, w.finite()?)?.value,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut low = false;
    let limits = if args.limits {
        progress.note(format!("boundary limits from {} pairs", args.reps));
        let cfg = SimulationConfig::new(args.reps, args.seed, 0.95)?;
        let lim = delta_limits(&spec, &cfg)?;
        low = low_precision(args.reps, progress);
        Some(LimitRow {
            inf_scaled: lim.lim_inf_scaled.value,
            inf_scaled_se: lim.lim_inf_scaled.std_error,
            zero_scaled: lim.lim_zero_scaled.value,
            zero_scaled_se: lim.lim_zero_scaled.std_error,
            zero_collision: delta_zero_collision_term(&spec).ok(),
        })
    } else {
        None
    };
    let parameters = Parameters {
        alt: Some(args.alt.clone()),
        d: vec![args.d],
        a: args.a.clone(),
        reps: args.limits.then_some(args.reps),
        seed: args.limits.then_some(args.seed),
        ..Parameters::default()
    };
    let record = finish(
        command,
        parameters,
        Results::Delta(DeltaResults { rows, limits }),
        low,
        start,
    )?;
    if let Some(out) = &args.out {
        record.write_to(out)?;
    }
    Ok(record)
}
