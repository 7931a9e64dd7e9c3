//! Machine-readable reports. JSON is canonical; grid commands can also
//! write CSV tables.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Below this many replications a Monte Carlo result is flagged as imprecise.
pub const LOW_PRECISION_REPS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    /// The invocation, argument by argument.
    pub command: Vec<String>,
    pub parameters: Parameters,
    pub results: Results,
    pub low_precision: bool,
    pub wall_seconds: f64,
}

/// Parameters as given on the command line; unused ones are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Results {
    Test(TestResults),
    Critvals { rows: Vec<CritRow> },
    Power { rows: Vec<PowerRow> },
    Coverage(CoverageRow),
    Delta(DeltaResults),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResults {
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
    pub rows: Vec<StatRow>,
}

/// One statistic on the observed data. `raw` is `T_{n,a}` itself for the
/// weighted family and equals `statistic` for everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub label: String,
    pub raw: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CritRow {
    pub n: usize,
    pub d: usize,
    pub a: String,
    pub quantile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub statistic: String,
    pub critical_value: f64,
    pub rejection_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub delta: f64,
    pub coverage_pct: f64,
    pub std_error_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaResults {
    pub rows: Vec<DeltaRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<LimitRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub a: String,
    pub delta: f64,
}

/// Monte Carlo boundary estimates; `zero_collision` is the density term that
/// must be added to `zero_scaled` to obtain the small-`a` limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub inf_scaled: f64,
    pub inf_scaled_se: f64,
    pub zero_scaled: f64,
    pub zero_scaled_se: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_collision: Option<f64>,
}

impl ReportRecord {
    /// Every floating-point field, paired with its name.
    fn numbers(&self) -> Vec<(&'static str, f64)> {
        let p = &self.parameters;
        let mut out: Vec<(&'static str, f64)> = vec![("wall_seconds", self.wall_seconds)];
        out.extend(p.level.map(|v| ("level", v)));
        out.extend(p.alpha.map(|v| ("alpha", v)));
        out.extend(p.delta.map(|v| ("delta", v)));
        match &self.results {
            Results::Test(t) => {
                for r in &t.rows {
                    out.extend([("raw", r.raw), ("statistic", r.statistic), ("p_value", r.p_value)]);
                }
            }
            Results::Critvals { rows } => out.extend(rows.iter().map(|r| ("quantile", r.quantile))),
            Results::Power { rows } => {
                for r in rows {
                    out.extend([("critical_value", r.critical_value), ("rejection_pct", r.rejection_pct)]);
                }
            }
            Results::Coverage(c) => out.extend([
                ("delta", c.delta),
                ("coverage_pct", c.coverage_pct),
                ("std_error_pct", c.std_error_pct),
            ]),
            Results::Delta(dr) => {
                out.extend(dr.rows.iter().map(|r| ("delta", r.delta)));
                if let Some(l) = &dr.limits {
                    out.extend([
                        ("inf_scaled", l.inf_scaled),
                        ("inf_scaled_se", l.inf_scaled_se),
                        ("zero_scaled", l.zero_scaled),
                        ("zero_scaled_se", l.zero_scaled_se),
                    ]);
                    out.extend(l.zero_collision.map(|v| ("zero_collision", v)));
                }
            }
        }
        out
    }

    pub fn check_finite(&self) -> CliResult<()> {
        match self.numbers().into_iter().find(|(_, v)| !v.is_finite()) {
            Some((name, _)) => Err(CliError::NonFinite(name.into())),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are serializable")
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(format!("report: {e}")))
    }

    /// CSV rendering of the result rows, if the command produces a table.
    pub fn to_csv(&self) -> Option<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.results {
            Results::Critvals { rows } => rows.iter().try_for_each(|r| w.serialize(r)),
            Results::Power { rows } => rows.iter().try_for_each(|r| w.serialize(r)),
            Results::Delta(dr) => dr.rows.iter().try_for_each(|r| w.serialize(r)),
            Results::Test(t) => t.rows.iter().try_for_each(|r| w.serialize(r)),
            Results::Coverage(_) => return None,
        }
        .expect("writing to memory");
        Some(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8"))
    }

    /// Writes the report to `path`: CSV table for `.csv` paths, JSON otherwise.
    pub fn write_to(&self, path: &Path) -> CliResult<()> {
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let body = match (is_csv, self.to_csv()) {
            (true, Some(table)) => table,
            (true, None) => {
                return Err(CliError::Usage(
                    "this command has no tabular output; use a .json path".into(),
                ))
            }
            (false, _) => self.to_json() + "\n",
        };
        let mut file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        file.write_all(body.as_bytes()).map_err(|e| CliError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ReportRecord {
        ReportRecord {
            command: vec!["cfnorm".into(), "delta".into()],
            parameters: Parameters {
                alt: Some("uniform".into()),
                d: vec![1],
                a: vec!["0.5".into(), "1".into()],
                ..Parameters::default()
            },
            results: Results::Delta(DeltaResults {
                rows: vec![
                    DeltaRow {
                        a: "0.5".into(),
                        delta: 0.029273098765432,
                    },
                    DeltaRow {
                        a: "1".into(),
                        delta: 0.1 + 0.2,
                    },
                ],
                limits: None,
            }),
            low_precision: false,
            wall_seconds: 0.0123,
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = sample();
        assert_eq!(ReportRecord::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn csv_table() {
        let csv = sample().to_csv().unwrap();
        assert!(csv.starts_with("a,delta\n0.5,0.029273098765432\n"), "{csv}");
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut r = sample();
        r.wall_seconds = f64::NAN;
        assert!(matches!(r.check_finite(), Err(CliError::NonFinite(_))));
        assert!(sample().check_finite().is_ok());
    }
}
