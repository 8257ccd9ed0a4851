//! Numeric regression datasets read from delimited text.

use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x: DenseMatrix,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        x: DenseMatrix,
        y: Vec<f64>,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if feature_names.len() != x.cols() {
            return Err(Error::DimensionMismatch {
                expected: x.cols(),
                got: feature_names.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if x.cols() == 0 {
            return Err(Error::Data("dataset has no features".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("target column"));
        }
        Ok(Dataset {
            name: name.into(),
            x,
            y,
            feature_names,
            target_name: target_name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    /// Rows `rows` in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        Ok(Dataset {
            name: self.name.clone(),
            x: self.x.select_rows(rows)?,
            y: rows.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        })
    }

    pub fn with_features(&self, x: DenseMatrix) -> Result<Dataset> {
        Dataset::new(
            self.name.clone(),
            x,
            self.y.clone(),
            self.feature_names.clone(),
            self.target_name.clone(),
        )
    }
}

/// Target column, by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
}

impl FromStr for TargetColumn {
    type Err = Error;

    /// Plain integers are positions; anything else is a header name. A
    /// header that is itself an integer can be written as `name:<header>`.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(name) = s.strip_prefix("name:") {
            return Ok(TargetColumn::Name(name.to_string()));
        }
        if s.is_empty() {
            return Err(Error::Config("empty target column".into()));
        }
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

/// What happened while reading a file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_rejected: usize,
    /// Rejected rows, zero-based among data rows.
    pub rejected: Vec<usize>,
    pub dropped_columns: Vec<String>,
}

/// Tab if the header line has more tabs than commas, comma otherwise.
pub fn detect_delimiter(header: &str) -> u8 {
    let tabs = header.matches('\t').count();
    let commas = header.matches(',').count();
    if tabs > commas {
        b'\t'
    } else {
        b','
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let header_line = text.lines().next().ok_or(Error::EmptyDataset)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header_line))
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Parses a delimited table with a header row.
///
/// A column counts as numeric when most of its non-empty cells parse as
/// finite numbers. Other columns are dropped when `drop_non_numeric` is set
/// and rejected otherwise. Rows with a missing or unparseable value in a kept
/// column are skipped and counted in the report.
pub fn read_csv<R: Read>(
    mut source: R,
    name: &str,
    target: &TargetColumn,
    drop_non_numeric: bool,
) -> Result<(Dataset, LoadReport)> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let (header, rows) = read_table(&text)?;
    let t = match target {
        TargetColumn::Name(n) => header
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| Error::Data(format!("no column named {n:?}")))?,
        TargetColumn::Index(i) if *i < header.len() => *i,
        TargetColumn::Index(i) => {
            return Err(Error::Data(format!(
                "target index {i} but only {} columns",
                header.len()
            )))
        }
    };

    let numeric: Vec<bool> = (0..header.len())
        .map(|c| {
            let (mut ok, mut seen) = (0usize, 0usize);
            for r in &rows {
                if let Some(cell) = r.get(c).filter(|s| !s.is_empty()) {
                    seen += 1;
                    ok += usize::from(parse_cell(cell).is_some());
                }
            }
            seen > 0 && 2 * ok > seen
        })
        .collect();
    if !numeric[t] {
        return Err(Error::Data(format!("target column {:?} is not numeric", header[t])));
    }
    let mut report = LoadReport::default();
    let mut features = Vec::new();
    for c in (0..header.len()).filter(|&c| c != t) {
        if numeric[c] {
            features.push(c);
        } else if drop_non_numeric {
            report.dropped_columns.push(header[c].clone());
        } else {
            return Err(Error::Data(format!("column {:?} is not numeric", header[c])));
        }
    }
    if features.is_empty() {
        return Err(Error::Data("no numeric feature columns".into()));
    }

    let mut data = Vec::with_capacity(rows.len() * features.len());
    let mut y = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        report.rows_read += 1;
        let cell = |c: usize| r.get(c).and_then(|s| parse_cell(s));
        let values: Option<Vec<f64>> = features.iter().map(|&c| cell(c)).collect();
        match (values, cell(t)) {
            (Some(v), Some(target)) => {
                data.extend(v);
                y.push(target);
            }
            _ => {
                report.rows_rejected += 1;
                report.rejected.push(i);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::Data("no usable rows".into()));
    }
    let x = DenseMatrix::new(y.len(), features.len(), data)?;
    let names = features.iter().map(|&c| header[c].clone()).collect();
    Ok((Dataset::new(name, x, y, names, header[t].clone())?, report))
}

/// [`read_csv`] on a file; the dataset is named after the file stem.
pub fn load_csv(
    path: impl AsRef<Path>,
    target: &TargetColumn,
    drop_non_numeric: bool,
) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    read_csv(File::open(path)?, &name, target, drop_non_numeric)
}

/// Reads a feature matrix with a header row. With `columns` the named
/// columns are taken in that order; otherwise every column is used.
pub fn read_features<R: Read>(mut source: R, columns: Option<&[String]>) -> Result<DenseMatrix> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let (header, rows) = read_table(&text)?;
    let picks: Vec<usize> = match columns {
        Some(names) => names
            .iter()
            .map(|n| {
                header
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| Error::Data(format!("no column named {n:?}")))
            })
            .collect::<Result<_>>()?,
        None => (0..header.len()).collect(),
    };
    let mut data = Vec::with_capacity(rows.len() * picks.len());
    for (i, r) in rows.iter().enumerate() {
        for &c in &picks {
            let v = r.get(c).and_then(|s| parse_cell(s)).ok_or_else(|| {
                Error::Data(format!("row {}: column {:?} is not a number", i + 1, header[c]))
            })?;
            data.push(v);
        }
    }
    DenseMatrix::new(rows.len(), picks.len(), data)
}

pub const ABALONE_COLUMNS: [&str; 9] = [
    "sex",
    "length",
    "diameter",
    "height",
    "whole_weight",
    "shucked_weight",
    "viscera_weight",
    "shell_weight",
    "rings",
];

/// Zero-based row indices, one per line; `#` starts a comment.
pub fn parse_index_list(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<usize>()
                .map_err(|_| Error::Data(format!("bad row index {l:?}")))
        })
        .collect()
}

/// The UCI abalone table (headerless, comma separated, 4177 rows) with the
/// categorical `sex` column removed and `rings` as the target, optionally
/// restricted to the rows in `subsample`.
pub fn load_abalone_uci(path: impl AsRef<Path>, subsample: Option<&[usize]>) -> Result<Dataset> {
    let mut raw = String::new();
    File::open(path.as_ref())?.read_to_string(&mut raw)?;
    let text = format!("{}\n{}", ABALONE_COLUMNS.join(","), raw);
    let (full, report) = read_csv(
        text.as_bytes(),
        "abalone",
        &TargetColumn::Name("rings".into()),
        true,
    )?;
    if report.rows_rejected > 0 {
        return Err(Error::Data(format!(
            "{} malformed abalone rows",
            report.rows_rejected
        )));
    }
    match subsample {
        None => Ok(full),
        Some(rows) => {
            if let Some(&bad) = rows.iter().find(|&&i| i >= full.n()) {
                return Err(Error::Data(format!(
                    "subsample index {bad} beyond {} rows",
                    full.n()
                )));
            }
            full.subset(rows)
        }
    }
}
