use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use contrastkit_core::Dataset;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("row {row}, column {column:?}: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },
    #[error(transparent)]
    Data(#[from] contrastkit_core::Error),
}

/// Which columns hold what. An empty covariate list means every column not
/// otherwise named.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub id: String,
    pub treatment: String,
    pub outcome: String,
    pub covariates: Vec<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            id: "id".into(),
            treatment: "treatment".into(),
            outcome: "outcome".into(),
            covariates: Vec::new(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset, CsvError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CsvError::Open {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema)
}

/// Parses a header-led csv. Rows are numbered from 1 after the header.
pub fn read_csv(reader: impl Read, schema: &CsvSchema) -> Result<Dataset, CsvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CsvError::MissingColumn(name.to_string()))
    };
    let id_col = find(&schema.id)?;
    let t_col = find(&schema.treatment)?;
    let y_col = find(&schema.outcome)?;
    let cov_names: Vec<String> = if schema.covariates.is_empty() {
        header
            .iter()
            .enumerate()
            .filter(|(k, _)| ![id_col, t_col, y_col].contains(k))
            .map(|(_, h)| h.to_string())
            .collect()
    } else {
        schema.covariates.clone()
    };
    let cov_cols = cov_names
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>, _>>()?;

    let mut ids = Vec::new();
    let mut treated = Vec::new();
    let mut rows = Vec::new();
    let mut outcome = Vec::new();
    let mut seen = HashSet::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record?;
        let cell = |col: usize| record.get(col).unwrap_or("");
        let bad = |col: usize, message: String| CsvError::Cell {
            row,
            column: header[col].to_string(),
            message,
        };
        let number = |col: usize| -> Result<f64, CsvError> {
            let text = cell(col);
            if text.is_empty() {
                return Err(bad(col, "missing value".into()));
            }
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(col, format!("{text:?} is not a finite number"))),
            }
        };

        let id = cell(id_col);
        if id.is_empty() {
            return Err(bad(id_col, "missing id".into()));
        }
        if !seen.insert(id.to_string()) {
            return Err(bad(id_col, format!("duplicate id {id:?}")));
        }
        let z = match cell(t_col) {
            "1" => true,
            "0" => false,
            other => {
                return Err(bad(
                    t_col,
                    format!("treatment must be 0 or 1, found {other:?}"),
                ))
            }
        };
        let x = cov_cols
            .iter()
            .map(|&c| number(c))
            .collect::<Result<Vec<_>, _>>()?;
        let y = number(y_col)?;
        ids.push(id.to_string());
        treated.push(z);
        rows.push(x);
        outcome.push(y);
    }
    Ok(Dataset::new(ids, treated, rows, outcome, cov_names)?)
}

/// Writes `id,treatment,outcome,<covariates…>` with shortest round-trip
/// number formatting, so reading the file back gives an equal dataset.
pub fn write_csv(data: &Dataset, writer: impl Write) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "id".to_string(),
        "treatment".to_string(),
        "outcome".to_string(),
    ];
    header.extend(data.covariate_names().iter().cloned());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec = vec![
            data.id(i).to_string(),
            if data.is_treated(i) { "1" } else { "0" }.to_string(),
            data.outcome(i).to_string(),
        ];
        rec.extend(data.covariates_of(i).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
