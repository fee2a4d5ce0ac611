//! Row-labelled numeric feature matrices and their csv form.
//!
//! The csv layout is a header row `subject_id,<col_1>,...,<col_K>` followed
//! by one row per subject. Floats are written with Rust's shortest
//! round-trip formatting, so a write/read cycle is bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    subject_ids: Vec<String>,
    columns: Vec<String>,
    values: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(
        subject_ids: Vec<String>,
        columns: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if values.nrows() != subject_ids.len() || values.ncols() != columns.len() {
            return Err(Error::Shape(format!(
                "feature matrix is {}x{} but has {} subject ids and {} column names",
                values.nrows(),
                values.ncols(),
                subject_ids.len(),
                columns.len()
            )));
        }
        Ok(Self {
            subject_ids,
            columns,
            values,
        })
    }

    /// Builds a matrix whose columns are named `{prefix}_1..{prefix}_K`.
    pub fn with_prefix(
        subject_ids: Vec<String>,
        prefix: &str,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        let columns = (1..=values.ncols())
            .map(|k| format!("{prefix}_{k}"))
            .collect();
        Self::new(subject_ids, columns, values)
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let values = self.values.select_rows(rows);
        FeatureMatrix {
            subject_ids: rows.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            columns: self.columns.clone(),
            values,
        }
    }

    /// First `k` columns.
    pub fn leading_columns(&self, k: usize) -> FeatureMatrix {
        let k = k.min(self.ncols());
        FeatureMatrix {
            subject_ids: self.subject_ids.clone(),
            columns: self.columns[..k].to_vec(),
            values: self.values.columns(0, k).into_owned(),
        }
    }

    /// Side-by-side concatenation. Both matrices must list the same subjects
    /// in the same order.
    pub fn hconcat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.subject_ids != other.subject_ids {
            return Err(Error::Shape(
                "cannot concatenate feature matrices with different subject alignment".into(),
            ));
        }
        let n = self.nrows();
        let mut values = DMatrix::zeros(n, self.ncols() + other.ncols());
        values.columns_mut(0, self.ncols()).copy_from(&self.values);
        values
            .columns_mut(self.ncols(), other.ncols())
            .copy_from(&other.values);
        let mut columns = self.columns.clone();
        columns.extend(other.columns.iter().cloned());
        Ok(FeatureMatrix {
            subject_ids: self.subject_ids.clone(),
            columns,
            values,
        })
    }

    /// Reorders rows to follow `subject_ids`. Every requested id must exist.
    pub fn align_to(&self, subject_ids: &[String]) -> Result<FeatureMatrix> {
        let index: std::collections::HashMap<&str, usize> = self
            .subject_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let rows = subject_ids
            .iter()
            .map(|s| {
                index
                    .get(s.as_str())
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("subject `{s}` has no feature row")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_rows(&rows))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let header = std::iter::once("subject_id").chain(self.columns.iter().map(String::as_str));
        w.write_record(header).map_err(csv_err)?;
        for (i, id) in self.subject_ids.iter().enumerate() {
            let mut record = Vec::with_capacity(self.ncols() + 1);
            record.push(id.clone());
            for j in 0..self.ncols() {
                record.push(format!("{}", self.values[(i, j)]));
            }
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, source: &str) -> Result<FeatureMatrix> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = r.headers().map_err(csv_err)?.clone();
        if header.get(0) != Some("subject_id") {
            return Err(Error::Parse {
                path: source.into(),
                line: 1,
                message: "first column must be `subject_id`".into(),
            });
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (row, record) in r.records().enumerate() {
            let line = row + 2;
            let record = record.map_err(csv_err)?;
            if record.len() != columns.len() + 1 {
                return Err(Error::Parse {
                    path: source.into(),
                    line,
                    message: format!(
                        "expected {} fields, found {}",
                        columns.len() + 1,
                        record.len()
                    ),
                });
            }
            ids.push(record[0].to_owned());
            for field in record.iter().skip(1) {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    path: source.into(),
                    line,
                    message: format!("not a number: `{field}`"),
                })?;
                data.push(v);
            }
        }
        let values = DMatrix::from_row_slice(ids.len(), columns.len(), &data);
        FeatureMatrix::new(ids, columns, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<FeatureMatrix> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        FeatureMatrix::read_csv(std::io::BufReader::new(file), &path.display().to_string())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        path: "<csv>".into(),
        line,
        message: e.to_string(),
    }
}
