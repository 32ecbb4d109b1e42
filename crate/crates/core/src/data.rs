//! Dense row-major tables and the labeled/unlabeled datasets built on them.
//!
//! CSV layout: a header row naming feature columns `x_1..x_p` and, for labeled
//! data, response columns `y_1..y_d`. Column order in the file does not matter;
//! columns are matched by name and sorted by their numeric suffix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `rows × cols` matrix of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::invalid(format!(
                "matrix buffer has {} entries, expected {rows}×{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at row {}, column {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Single-column matrix.
    pub fn column_vector(values: Vec<f64>) -> Result<Self> {
        Self::new(values.len(), 1, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// New matrix holding the listed rows, in the listed order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Features paired with responses: `features` is n×p, `responses` n×d.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    features: Matrix,
    responses: Matrix,
}

impl LabeledSet {
    pub fn new(features: Matrix, responses: Matrix) -> Result<Self> {
        if features.rows() != responses.rows() {
            return Err(Error::DimensionMismatch {
                context: "labeled set rows",
                expected: features.rows(),
                got: responses.rows(),
            });
        }
        Ok(Self { features, responses })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn responses(&self) -> &Matrix {
        &self.responses
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn response_dim(&self) -> usize {
        self.responses.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            responses: self.responses.select_rows(idx),
        }
    }

    pub fn into_parts(self) -> (Matrix, Matrix) {
        (self.features, self.responses)
    }

    /// Reads a CSV with `x_*` and `y_*` columns.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let table = read_named_columns(path)?;
        if table.y_cols.is_empty() {
            return Err(Error::data(path, "labeled data needs at least one y_ column"));
        }
        let features = table.extract(&table.x_cols, path)?;
        let responses = table.extract(&table.y_cols, path)?;
        LabeledSet::new(features, responses)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_table(path.as_ref(), &self.features, Some(&self.responses))
    }
}

/// Unlabeled features for the test candidates; at least one row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    features: Matrix,
}

impl FeatureSet {
    pub fn new(features: Matrix) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::invalid("feature set must contain at least one row"));
        }
        Ok(Self { features })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    /// Reads `x_*` columns. Any `y_*` columns are returned separately so a
    /// held-out test file can double as ground truth for evaluation.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<(Self, Option<Matrix>)> {
        let path = path.as_ref();
        let table = read_named_columns(path)?;
        let features = table.extract(&table.x_cols, path)?;
        let truth = if table.y_cols.is_empty() {
            None
        } else {
            Some(table.extract(&table.y_cols, path)?)
        };
        let set = FeatureSet::new(features).map_err(|e| Error::data(path, e.to_string()))?;
        Ok((set, truth))
    }
}

struct NamedTable {
    headers: Vec<String>,
    records: Vec<Vec<String>>,
    x_cols: Vec<usize>,
    y_cols: Vec<usize>,
}

impl NamedTable {
    fn extract(&self, cols: &[usize], path: &Path) -> Result<Matrix> {
        let mut data = Vec::with_capacity(self.records.len() * cols.len());
        for (r, rec) in self.records.iter().enumerate() {
            for &c in cols {
                let raw = rec[c].trim();
                let v: f64 = raw.parse().map_err(|_| {
                    Error::data(
                        path,
                        format!("row {}: column {} is not a number: {raw:?}", r + 1, self.headers[c]),
                    )
                })?;
                if !v.is_finite() {
                    return Err(Error::data(
                        path,
                        format!("row {}: column {} is not finite", r + 1, self.headers[c]),
                    ));
                }
                data.push(v);
            }
        }
        Matrix::new(self.records.len(), cols.len(), data).map_err(|e| Error::data(path, e.to_string()))
    }
}

fn column_index(name: &str, prefix: &str) -> Option<usize> {
    name.strip_prefix(prefix)?.parse().ok()
}

fn sorted_prefixed(headers: &[String], prefix: &str, path: &Path) -> Result<Vec<usize>> {
    let mut found: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(pos, h)| column_index(h.trim(), prefix).map(|k| (k, pos)))
        .collect();
    found.sort_unstable();
    for (expect, (k, _)) in (1..).zip(&found) {
        if *k != expect {
            return Err(Error::data(
                path,
                format!("columns {prefix}* must be numbered 1..n without gaps"),
            ));
        }
    }
    Ok(found.into_iter().map(|(_, pos)| pos).collect())
}

fn read_named_columns(path: &Path) -> Result<NamedTable> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::data(path, e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(path, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let x_cols = sorted_prefixed(&headers, "x_", path)?;
    let y_cols = sorted_prefixed(&headers, "y_", path)?;
    if x_cols.is_empty() {
        return Err(Error::data(path, "no x_ feature columns in header"));
    }
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::data(path, e.to_string()))?;
        records.push(rec.iter().map(str::to_owned).collect());
    }
    Ok(NamedTable {
        headers,
        records,
        x_cols,
        y_cols,
    })
}

pub(crate) fn write_table(path: &Path, features: &Matrix, responses: Option<&Matrix>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let mut header: Vec<String> = (1..=features.cols()).map(|i| format!("x_{i}")).collect();
    if let Some(r) = responses {
        header.extend((1..=r.cols()).map(|i| format!("y_{i}")));
    }
    w.write_record(&header).map_err(|e| Error::io(path, e.into()))?;
    for i in 0..features.rows() {
        let mut rec: Vec<String> = features.row(i).iter().map(f64::to_string).collect();
        if let Some(r) = responses {
            rec.extend(r.row(i).iter().map(f64::to_string));
        }
        w.write_record(&rec).map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
