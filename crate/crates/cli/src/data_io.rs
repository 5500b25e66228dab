//! CSV interchange: comma separator, '.' decimal point, mandatory header,
//! UTF-8.

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use std::path::Path;

use ccgp::data::ExperimentalDesign;

/// Read a training table: `M` input columns followed by one output column,
/// with a header row naming the columns.
pub fn read_design(path: &Path) -> Result<ExperimentalDesign> {
    let (header, rows) = read_numeric_table(path)?;
    if header.len() < 2 {
        bail!(
            "{}: need at least one input column and the output column",
            path.display()
        );
    }
    let m = header.len() - 1;
    let n = rows.len();
    if n == 0 {
        bail!("{}: no data rows", path.display());
    }
    let inputs = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
    let outputs = DVector::from_fn(n, |i, _| rows[i][m]);
    ExperimentalDesign::new(inputs, outputs)
        .with_context(|| format!("{}: invalid training data", path.display()))
}

/// Read a prediction-input table: all columns are inputs.
pub fn read_inputs(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let (header, rows) = read_numeric_table(path)?;
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let m = header.len();
    let inputs = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    Ok((header, inputs))
}

fn read_numeric_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let header: Vec<String> = reader
        .headers()
        .with_context(|| format!("{}: missing header row", path.display()))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if header.is_empty() {
        bail!("{}: empty header", path.display());
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), idx + 2))?;
        if record.len() != header.len() {
            bail!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                idx + 2,
                record.len(),
                header.len()
            );
        }
        let row: Result<Vec<f64>> = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().with_context(|| {
                    format!(
                        "{}: row {} column '{}' is not numeric: '{field}'",
                        path.display(),
                        idx + 2,
                        header[col]
                    )
                })
            })
            .collect();
        rows.push(row?);
    }
    Ok((header, rows))
}
