use std::fs::File;
use std::path::Path;

use fwdsearch::{Dataset, Matrix};

use crate::CliError;

/// Reads a headed CSV with a `y` column; every other column is a regressor.
///
/// A file holding only `y` gives the location model. With `add_intercept` a
/// column of ones is prepended to the regressors.
pub fn read_dataset(path: &Path, add_intercept: bool) -> Result<(Dataset, Vec<String>), CliError> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: bad header: {e}", path.display())))?
        .clone();
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| CliError::Input(format!("{}: no column named 'y'", path.display())))?;
    let x_cols: Vec<usize> = (0..headers.len()).filter(|&j| j != y_col).collect();

    let mut y = Vec::new();
    let mut x = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let row = row + 1;
        let record = record.map_err(|e| CliError::Input(format!("row {row}: {e}")))?;
        let cell = |j: usize| -> Result<f64, CliError> {
            let raw = record.get(j).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    CliError::Input(format!(
                        "row {row}, column '{}': cannot read '{raw}' as a finite number",
                        &headers[j]
                    ))
                })
        };
        y.push(cell(y_col)?);
        for &j in &x_cols {
            x.push(cell(j)?);
        }
    }

    let n = y.len();
    let mut names: Vec<String> = x_cols.iter().map(|&j| headers[j].to_string()).collect();
    let dataset = if x_cols.is_empty() {
        names.push("const".into());
        Dataset::location(y)?
    } else {
        let ds = Dataset::new(y, Matrix::from_row_major(n, x_cols.len(), x))?;
        if add_intercept {
            names.insert(0, "const".into());
            ds.with_intercept()?
        } else {
            ds
        }
    };
    Ok((dataset, names))
}
