//! Reading `date`-keyed CSV files and joining returns with factors.

use std::collections::HashMap;
use std::path::Path;

use mvgls::{Matrix, PanelData};

use crate::error::{CliError, Result};

/// A numeric table keyed by its first (`date`) column.
#[derive(Debug, Clone, PartialEq)]
pub struct DatedTable {
    pub columns: Vec<String>,
    pub dates: Vec<String>,
    /// Row-major values, `dates.len() × columns.len()`.
    pub values: Vec<f64>,
}

impl DatedTable {
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.columns.len();
        &self.values[i * w..(i + 1) * w]
    }
}

pub fn read_dated_csv(path: &Path) -> Result<DatedTable> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_dated_csv(&bytes).map_err(|e| match e {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        e => e,
    })
}

pub fn parse_dated_csv(bytes: &[u8]) -> Result<DatedTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| CliError::Input(e.to_string()))?
        .clone();
    let mut names = header.iter();
    match names.next() {
        Some(first) if first.trim_start_matches('\u{feff}').eq_ignore_ascii_case("date") => {}
        _ => return Err(CliError::Input("first column must be `date`".into())),
    }
    let columns: Vec<String> = names.map(str::to_string).collect();
    if columns.is_empty() {
        return Err(CliError::Input("no data columns after `date`".into()));
    }
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(e.to_string()))?;
        let row = line + 2;
        if record.len() != columns.len() + 1 {
            return Err(CliError::Input(format!(
                "row {row} has {} fields, expected {}",
                record.len(),
                columns.len() + 1
            )));
        }
        dates.push(record[0].to_string());
        for (field, name) in record.iter().skip(1).zip(&columns) {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::Input(format!("row {row}, column {name}: `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(CliError::Input(format!("row {row}, column {name}: value is not finite")));
            }
            values.push(v);
        }
    }
    Ok(DatedTable {
        columns,
        dates,
        values,
    })
}

/// Returns joined with factors on `date`, in the order of the returns file.
#[derive(Debug, Clone)]
pub struct Joined {
    pub dates: Vec<String>,
    pub assets: Vec<String>,
    pub factors: Vec<String>,
    pub y: Matrix,
    pub f: Matrix,
}

impl Joined {
    pub fn panel(&self) -> Result<PanelData> {
        Ok(PanelData::with_common_factors(self.y.clone(), &self.f)?)
    }
}

pub fn inner_join(returns: &DatedTable, factors: &DatedTable) -> Result<Joined> {
    let mut index = HashMap::with_capacity(factors.dates.len());
    for (i, d) in factors.dates.iter().enumerate() {
        if index.insert(d.as_str(), i).is_some() {
            return Err(CliError::Input(format!("duplicate date `{d}` in factors")));
        }
    }
    let mut seen = HashMap::with_capacity(returns.dates.len());
    let mut dates = Vec::new();
    let mut y = Vec::new();
    let mut f = Vec::new();
    for (i, d) in returns.dates.iter().enumerate() {
        if seen.insert(d.as_str(), ()).is_some() {
            return Err(CliError::Input(format!("duplicate date `{d}` in returns")));
        }
        if let Some(&j) = index.get(d.as_str()) {
            dates.push(d.clone());
            y.extend_from_slice(returns.row(i));
            f.extend_from_slice(factors.row(j));
        }
    }
    if dates.is_empty() {
        return Err(CliError::Input("returns and factors share no dates".into()));
    }
    let t = dates.len();
    Ok(Joined {
        dates,
        assets: returns.columns.clone(),
        factors: factors.columns.clone(),
        y: Matrix::new(t, returns.columns.len(), y),
        f: Matrix::new(t, factors.columns.len(), f),
    })
}
