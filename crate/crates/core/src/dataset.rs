//! Mixed-type tables, numeric matrices with missingness masks, z-scores and
//! the PCA-based intrinsic dimension estimate.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::{column_means, scatter_matrix, symmetric_eigen_desc};
use crate::{Error, Result};

/// Tokens treated as missing when a schema entry does not list its own.
/// Shortest round-trip formatting that switches to exponent notation for
/// very small or very large magnitudes.
#[derive(Debug, Clone, Copy)]
pub struct Num(pub f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}

pub const DEFAULT_MISSING_TOKENS: [&str; 5] = ["", "?", "NA", "NaN", "nan"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Binary,
    Ordinal,
    Categorical,
}

impl VariableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariableKind::Continuous => "continuous",
            VariableKind::Binary => "binary",
            VariableKind::Ordinal => "ordinal",
            VariableKind::Categorical => "categorical",
        }
    }

    /// Binary and ordinal columns are quantified through their level order.
    pub fn is_ordered_discrete(self) -> bool {
        matches!(self, VariableKind::Binary | VariableKind::Ordinal)
    }
}

/// One entry of the schema JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSchema {
    pub name: String,
    pub kind: VariableKind,
    /// Ordered level tokens. Required for ordinal columns; resolved from the
    /// data for binary and categorical columns when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_tokens: Option<Vec<String>>,
    /// CSV column to read; defaults to `name`. Several schema entries may
    /// derive from one source column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// Token substitutions applied on load. Unlisted tokens pass through.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recode: Option<BTreeMap<String, String>>,
}

impl VariableSchema {
    pub fn new(name: impl Into<String>, kind: VariableKind) -> Self {
        VariableSchema {
            name: name.into(),
            kind,
            levels: None,
            missing_tokens: None,
            source: None,
            recode: None,
        }
    }

    pub fn with_levels<S: Into<String>>(mut self, levels: impl IntoIterator<Item = S>) -> Self {
        self.levels = Some(levels.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_missing_tokens<S: Into<String>>(
        mut self,
        tokens: impl IntoIterator<Item = S>,
    ) -> Self {
        self.missing_tokens = Some(tokens.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_source(mut self, column: impl Into<String>) -> Self {
        self.source = Some(column.into());
        self
    }

    pub fn with_recode<S: Into<String>>(mut self, pairs: impl IntoIterator<Item = (S, S)>) -> Self {
        self.recode = Some(pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect());
        self
    }

    /// CSV column this entry is read from.
    pub fn source_column(&self) -> &str {
        self.source.as_deref().unwrap_or(&self.name)
    }

    pub fn is_missing_token(&self, token: &str) -> bool {
        match &self.missing_tokens {
            Some(tokens) => tokens.iter().any(|t| t == token),
            None => DEFAULT_MISSING_TOKENS.contains(&token),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(levels) = &self.levels {
            let unique: BTreeSet<&String> = levels.iter().collect();
            if unique.len() != levels.len() {
                return Err(Error::Schema(format!(
                    "column `{}` declares duplicate levels",
                    self.name
                )));
            }
            if self.kind == VariableKind::Binary && levels.len() != 2 {
                return Err(Error::Schema(format!(
                    "binary column `{}` must declare exactly two levels",
                    self.name
                )));
            }
            if self.kind == VariableKind::Continuous {
                return Err(Error::Schema(format!(
                    "continuous column `{}` cannot declare levels",
                    self.name
                )));
            }
        }
        if self.kind == VariableKind::Ordinal
            && self.levels.as_ref().is_none_or(|l| l.is_empty())
        {
            return Err(Error::Schema(format!(
                "ordinal column `{}` needs a non-empty `levels` list",
                self.name
            )));
        }
        Ok(())
    }
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Vec<VariableSchema>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let schema: Vec<VariableSchema> = serde_json::from_reader(std::io::BufReader::new(file))?;
    Ok(schema)
}

/// Raw tokens of a table together with the schema that interprets them.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDataTable {
    schema: Vec<VariableSchema>,
    cells: Vec<Vec<String>>,
    missing: Vec<bool>,
}

impl MixedDataTable {
    /// Builds a table from in-memory rows, applying the same validation as
    /// [`load_table`]. Rows must follow schema order.
    pub fn from_rows(schema: Vec<VariableSchema>, rows: Vec<Vec<String>>) -> Result<Self> {
        let mut schema = schema;
        let mut seen = BTreeSet::new();
        for var in &schema {
            var.validate()?;
            if !seen.insert(var.name.clone()) {
                return Err(Error::Schema(format!("duplicate column `{}`", var.name)));
            }
        }
        let n_cols = schema.len();
        let mut missing = Vec::with_capacity(rows.len() * n_cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::RaggedRow {
                    row: r,
                    expected: n_cols,
                    found: row.len(),
                });
            }
            for (var, token) in schema.iter().zip(row) {
                missing.push(var.is_missing_token(token));
            }
        }
        for (c, var) in schema.iter_mut().enumerate() {
            resolve_levels(var, rows.iter().enumerate().filter_map(|(r, row)| {
                (!missing[r * n_cols + c]).then_some((r, row[c].as_str()))
            }))?;
        }
        Ok(MixedDataTable {
            schema,
            cells: rows,
            missing,
        })
    }

    pub fn schema(&self) -> &[VariableSchema] {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn token(&self, row: usize, col: usize) -> &str {
        &self.cells[row][col]
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.n_cols() + col]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|v| v.name == name)
    }

    /// Resolved level tokens of a discrete column (empty for continuous).
    pub fn levels(&self, col: usize) -> &[String] {
        self.schema[col].levels.as_deref().unwrap_or(&[])
    }

    /// Index of a non-missing discrete token within its column's levels.
    pub fn level_index(&self, row: usize, col: usize) -> Option<usize> {
        if self.is_missing(row, col) {
            return None;
        }
        let token = self.token(row, col);
        self.levels(col).iter().position(|l| l == token)
    }

    /// Codes every column as one real: continuous values are parsed, discrete
    /// columns use their level index. Used for missingness accounting on the
    /// raw table before any quantification.
    pub fn to_codes(&self) -> NumericMatrix {
        let rows = self.n_rows();
        let cols = self.n_cols();
        let mut values = vec![f64::NAN; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                if self.is_missing(r, c) {
                    continue;
                }
                values[r * cols + c] = match self.schema[c].kind {
                    VariableKind::Continuous => self.token(r, c).trim().parse().unwrap_or(f64::NAN),
                    _ => self.level_index(r, c).map_or(f64::NAN, |i| i as f64),
                };
            }
        }
        let names = self.schema.iter().map(|v| v.name.clone()).collect();
        NumericMatrix::with_nan_as_missing(rows, cols, values, names)
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> MixedDataTable {
        let schema = cols.iter().map(|&c| self.schema[c].clone()).collect();
        let cells: Vec<Vec<String>> = rows
            .iter()
            .map(|&r| cols.iter().map(|&c| self.cells[r][c].clone()).collect())
            .collect();
        let n = self.n_cols();
        let missing = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| self.missing[r * n + c]))
            .collect();
        MixedDataTable {
            schema,
            cells,
            missing,
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.schema.iter().map(|v| v.name.as_str()))?;
        for row in &self.cells {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn sort_tokens(tokens: &mut [String]) {
    let numeric: Option<Vec<f64>> = tokens.iter().map(|t| t.trim().parse().ok()).collect();
    if numeric.is_some() {
        tokens.sort_by(|a, b| {
            let x: f64 = a.trim().parse().unwrap();
            let y: f64 = b.trim().parse().unwrap();
            x.partial_cmp(&y).unwrap().then_with(|| a.cmp(b))
        });
    } else {
        tokens.sort();
    }
}

fn resolve_levels<'a>(
    var: &mut VariableSchema,
    observed: impl Iterator<Item = (usize, &'a str)>,
) -> Result<()> {
    match var.kind {
        VariableKind::Continuous => {
            for (row, token) in observed {
                let parsed: std::result::Result<f64, _> = token.trim().parse();
                if !parsed.is_ok_and(f64::is_finite) {
                    return Err(Error::NotNumeric {
                        column: var.name.clone(),
                        row,
                        token: token.to_string(),
                    });
                }
            }
        }
        _ => {
            if let Some(levels) = &var.levels {
                for (row, token) in observed {
                    if !levels.iter().any(|l| l == token) {
                        return Err(Error::UndeclaredLevel {
                            column: var.name.clone(),
                            row,
                            token: token.to_string(),
                        });
                    }
                }
            } else {
                let distinct: BTreeSet<&str> = observed.map(|(_, t)| t).collect();
                let mut levels: Vec<String> = distinct.into_iter().map(String::from).collect();
                if var.kind == VariableKind::Binary && levels.len() > 2 {
                    return Err(Error::Schema(format!(
                        "binary column `{}` has {} distinct tokens",
                        var.name,
                        levels.len()
                    )));
                }
                sort_tokens(&mut levels);
                var.levels = Some(levels);
            }
        }
    }
    Ok(())
}

/// Reads a CSV with a header row and interprets the columns named in the
/// schema. CSV columns absent from the schema are ignored; the resulting
/// table follows schema order.
pub fn load_table(csv_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<MixedDataTable> {
    let schema = load_schema(schema_path)?;
    load_table_with_schema(csv_path, schema)
}

pub fn load_table_with_schema(
    csv_path: impl AsRef<Path>,
    schema: Vec<VariableSchema>,
) -> Result<MixedDataTable> {
    let csv_path = csv_path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(csv_path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let position: HashMap<&str, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    let mut source_cols = Vec::with_capacity(schema.len());
    for var in &schema {
        match position.get(var.source_column()) {
            Some(&i) => source_cols.push(i),
            None => return Err(Error::UnknownColumn(var.source_column().to_string())),
        }
    }
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row: r,
                expected: header.len(),
                found: record.len(),
            });
        }
        rows.push(
            source_cols
                .iter()
                .zip(&schema)
                .map(|(&i, var)| {
                    let token = &record[i];
                    match var.recode.as_ref().and_then(|m| m.get(token.trim())) {
                        Some(t) => t.clone(),
                        None => token.to_string(),
                    }
                })
                .collect(),
        );
    }
    let table = MixedDataTable::from_rows(schema, rows)?;
    log::info!(
        "loaded {} rows x {} columns from {}",
        table.n_rows(),
        table.n_cols(),
        csv_path.display()
    );
    Ok(table)
}

/// Dense row-major real matrix with a missingness mask. Missing cells hold
/// NaN in `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
    column_names: Vec<String>,
}

impl NumericMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        missing: Vec<bool>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: values.len(),
            });
        }
        if missing.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: missing.len(),
            });
        }
        if column_names.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: column_names.len(),
            });
        }
        let mut values = values;
        for (v, &m) in values.iter_mut().zip(&missing) {
            if m {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::InvalidArgument(
                    "observed matrix entries must be finite".into(),
                ));
            }
        }
        Ok(NumericMatrix {
            rows,
            cols,
            values,
            missing,
            column_names,
        })
    }

    /// Complete matrix from row-major values with generated column names.
    pub fn from_rows(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        let names = (0..cols).map(|j| format!("x{j}")).collect();
        Self::new(rows, cols, values, vec![false; rows * cols], names)
    }

    /// Non-finite entries become missing.
    pub fn with_nan_as_missing(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        column_names: Vec<String>,
    ) -> Self {
        let missing = values.iter().map(|v| !v.is_finite()).collect();
        Self::new(rows, cols, values, missing, column_names).expect("consistent dimensions")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn is_missing(&self, r: usize, c: usize) -> bool {
        self.missing[r * self.cols + c]
    }

    /// Sets an observed value, clearing the mask bit.
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
        self.missing[r * self.cols + c] = false;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_missing(&self, r: usize) -> &[bool] {
        &self.missing[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn observed_column(&self, c: usize) -> Vec<f64> {
        (0..self.rows)
            .filter(|&r| !self.is_missing(r, c))
            .map(|r| self.get(r, c))
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.missing_count() as f64 / self.values.len() as f64
        }
    }

    pub fn is_complete(&self) -> bool {
        !self.missing.iter().any(|&m| m)
    }

    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .filter(|&r| !self.row_missing(r).iter().any(|&m| m))
            .collect()
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> NumericMatrix {
        let mut values = Vec::with_capacity(rows.len() * cols.len());
        let mut missing = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            for &c in cols {
                values.push(self.get(r, c));
                missing.push(self.is_missing(r, c));
            }
        }
        NumericMatrix {
            rows: rows.len(),
            cols: cols.len(),
            values,
            missing,
            column_names: cols.iter().map(|&c| self.column_names[c].clone()).collect(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> NumericMatrix {
        let cols: Vec<usize> = (0..self.cols).collect();
        self.select(rows, &cols)
    }

    pub fn select_cols(&self, cols: &[usize]) -> NumericMatrix {
        let rows: Vec<usize> = (0..self.rows).collect();
        self.select(&rows, cols)
    }

    /// Appends the columns of `other` (same row count).
    pub fn hstack(&self, other: &NumericMatrix) -> Result<NumericMatrix> {
        if other.rows != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: other.rows,
            });
        }
        let cols = self.cols + other.cols;
        let mut values = Vec::with_capacity(self.rows * cols);
        let mut missing = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            values.extend_from_slice(self.row(r));
            values.extend_from_slice(other.row(r));
            missing.extend_from_slice(self.row_missing(r));
            missing.extend_from_slice(other.row_missing(r));
        }
        let mut names = self.column_names.clone();
        names.extend(other.column_names.iter().cloned());
        Ok(NumericMatrix {
            rows: self.rows,
            cols,
            values,
            missing,
            column_names: names,
        })
    }

    pub fn require_complete(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(Error::MissingValues)
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.column_names)?;
        let mut record = Vec::with_capacity(self.cols);
        for r in 0..self.rows {
            record.clear();
            for c in 0..self.cols {
                record.push(if self.is_missing(r, c) {
                    String::new()
                } else {
                    Num(self.get(r, c)).to_string()
                });
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Writes the 0/1 sidecar mask CSV (1 = missing).
    pub fn write_mask_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.column_names)?;
        for r in 0..self.rows {
            w.write_record(self.row_missing(r).iter().map(|&m| if m { "1" } else { "0" }))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a matrix written by [`write_csv`](Self::write_csv). Empty cells
    /// are missing; when a mask file is given it must agree with them.
    pub fn read_csv(path: impl AsRef<Path>, mask_path: Option<&Path>) -> Result<NumericMatrix> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let names: Vec<String> = reader.headers()?.iter().map(String::from).collect();
        let cols = names.len();
        let mut values = Vec::new();
        let mut rows = 0;
        for (r, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != cols {
                return Err(Error::RaggedRow {
                    row: r,
                    expected: cols,
                    found: record.len(),
                });
            }
            for (c, field) in record.iter().enumerate() {
                if field.is_empty() {
                    values.push(f64::NAN);
                } else {
                    values.push(field.parse().map_err(|_| Error::NotNumeric {
                        column: names[c].clone(),
                        row: r,
                        token: field.to_string(),
                    })?);
                }
            }
            rows += 1;
        }
        let m = NumericMatrix::with_nan_as_missing(rows, cols, values, names);
        if let Some(mask_path) = mask_path {
            let mut reader = csv::Reader::from_path(mask_path)?;
            let mut mask = Vec::with_capacity(rows * cols);
            for record in reader.records() {
                for field in record?.iter() {
                    mask.push(field == "1");
                }
            }
            if mask != m.missing {
                return Err(Error::InvalidArgument(format!(
                    "mask {} disagrees with empty cells of {}",
                    mask_path.display(),
                    path.display()
                )));
            }
        }
        Ok(m)
    }
}

/// Mean and standard deviation used to standardize one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    pub sd: f64,
}

/// Mean and sample standard deviation (N - 1 denominator) of the observed
/// entries of a column.
pub fn column_scale(m: &NumericMatrix, c: usize) -> Result<ColumnScale> {
    let obs = m.observed_column(c);
    let name = &m.column_names()[c];
    if obs.is_empty() {
        return Err(Error::EmptyColumn(name.clone()));
    }
    let n = obs.len() as f64;
    let mean = obs.iter().sum::<f64>() / n;
    let ss: f64 = obs.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = if obs.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::ConstantColumn(name.clone()));
    }
    Ok(ColumnScale { mean, sd })
}

/// z-scores every column over its observed entries; missing entries stay
/// missing.
pub fn standardize(m: &NumericMatrix) -> Result<NumericMatrix> {
    standardize_with_scales(m).map(|(z, _)| z)
}

pub fn standardize_with_scales(m: &NumericMatrix) -> Result<(NumericMatrix, Vec<ColumnScale>)> {
    let scales = (0..m.cols())
        .map(|c| column_scale(m, c))
        .collect::<Result<Vec<_>>>()?;
    let mut out = m.clone();
    for r in 0..m.rows() {
        for (c, s) in scales.iter().enumerate() {
            if !m.is_missing(r, c) {
                out.values[r * m.cols + c] = (m.get(r, c) - s.mean) / s.sd;
            }
        }
    }
    Ok((out, scales))
}

/// Covariance eigenvalues (descending) of a complete matrix.
pub fn covariance_eigenvalues(m: &NumericMatrix) -> Result<Vec<f64>> {
    m.require_complete()?;
    if m.rows() < 2 {
        return Err(Error::InsufficientData("need at least 2 rows".into()));
    }
    let mean = column_means(m.values(), m.rows(), m.cols());
    let mut s = scatter_matrix(m.values(), m.rows(), m.cols(), &mean);
    s /= (m.rows() - 1) as f64;
    Ok(symmetric_eigen_desc(&s).0)
}

/// Number of covariance eigenvalues strictly greater than `lambda_max / c`.
pub fn estimate_dimension_pca(m: &NumericMatrix, c: f64) -> Result<usize> {
    if !(c > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "conditioning ratio must exceed 1, got {c}"
        )));
    }
    let eig = covariance_eigenvalues(m)?;
    let threshold = eig.first().copied().unwrap_or(0.0) / c;
    Ok(eig.iter().filter(|&&l| l > threshold).count())
}
