//! CSV input: comma separated, optional header row, one observation per row.

use std::io::Read;
use std::path::Path;

use cfnorm::DataMatrix;

use crate::error::{CliError, CliResult};

/// A parsed data file. `columns` is empty when the file has no header.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub matrix: DataMatrix,
}

pub fn load_csv(path: &Path) -> CliResult<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_csv(file).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Parses CSV text. The first row is a header if any of its cells is not a
/// number. Row numbers in errors are 1-based file lines.
pub fn parse_csv<R: Read>(input: R) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let mut columns = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| CliError::Parse(format!("row {line}: {e}")))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0 && record.iter().any(|c| c.parse::<f64>().is_err()) {
            columns = record.iter().map(str::to_owned).collect();
            width = Some(columns.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::Parse(format!(
                "row {line}: expected {expected} columns, found {}",
                record.len()
            )));
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::Parse(format!(
                    "row {line}, column {}: `{cell}` is not a finite number",
                    col + 1
                ))),
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Parse("no data rows".into()));
    }
    let matrix = DataMatrix::from_rows(&rows).map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(Dataset { columns, matrix })
}
