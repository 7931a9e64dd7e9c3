use cfnorm::nulldist::StatKind;
use cfnorm::WeightParam;

use crate::error::{CliError, CliResult};

/// One entry of an `--a` list: a positive number or `inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightChoice {
    Finite(WeightParam),
    Infinity,
}

impl WeightChoice {
    pub fn parse(s: &str) -> CliResult<Self> {
        let t = s.trim();
        if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity") {
            return Ok(WeightChoice::Infinity);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| CliError::Usage(format!("bad weight parameter `{s}`")))?;
        Ok(WeightChoice::Finite(WeightParam::new(v)?))
    }

    pub fn kind(self) -> StatKind {
        match self {
            WeightChoice::Finite(a) => StatKind::T(a),
            WeightChoice::Infinity => StatKind::TInf,
        }
    }

    pub fn finite(self) -> CliResult<WeightParam> {
        match self {
            WeightChoice::Finite(a) => Ok(a),
            WeightChoice::Infinity => Err(CliError::Usage("`inf` is not allowed here".into())),
        }
    }
}

pub fn parse_list(items: &[String]) -> CliResult<Vec<WeightChoice>> {
    if items.is_empty() {
        return Err(CliError::Usage("at least one weight parameter is required".into()));
    }
    items.iter().map(|s| WeightChoice::parse(s)).collect()
}
