use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::csv_err;

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Continuous(Vec<Option<f64>>),
    /// Two-level variable; `codes` index into `levels`.
    Binary {
        levels: Vec<String>,
        codes: Vec<Option<u8>>,
    },
    /// Free text, e.g. a country code.
    Text(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Continuous(v) => v.len(),
            ColumnData::Binary { codes, .. } => codes.len(),
            ColumnData::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Continuous(v) => v[row].is_none(),
            ColumnData::Binary { codes, .. } => codes[row].is_none(),
            ColumnData::Text(v) => v[row].is_none(),
        }
    }

    fn render(&self, row: usize) -> String {
        match self {
            ColumnData::Continuous(v) => v[row].map(|x| format!("{x}")).unwrap_or_default(),
            ColumnData::Binary { levels, codes } => codes[row]
                .map(|c| levels[c as usize].clone())
                .unwrap_or_default(),
            ColumnData::Text(v) => v[row].clone().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

/// Per-subject external variables with missing cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CovariateTable {
    subject_ids: Vec<String>,
    columns: Vec<Column>,
}

impl CovariateTable {
    pub fn new(subject_ids: Vec<String>) -> Self {
        Self {
            subject_ids,
            columns: Vec::new(),
        }
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subject_ids.is_empty()
    }

    pub fn push(&mut self, name: impl Into<String>, data: ColumnData) -> Result<()> {
        let name = name.into();
        if data.len() != self.subject_ids.len() {
            return Err(Error::Shape(format!(
                "column `{name}` has {} values for {} subjects",
                data.len(),
                self.subject_ids.len()
            )));
        }
        if let ColumnData::Binary { levels, codes } = &data {
            if levels.len() > 2 || codes.iter().flatten().any(|&c| c as usize >= levels.len()) {
                return Err(Error::invalid(format!(
                    "binary column `{name}` has more than two levels"
                )));
            }
        }
        if self.column(&name).is_some() {
            return Err(Error::invalid(format!("duplicate column `{name}`")));
        }
        self.columns.push(Column { name, data });
        Ok(())
    }

    pub fn push_continuous(
        &mut self,
        name: impl Into<String>,
        values: Vec<Option<f64>>,
    ) -> Result<()> {
        self.push(name, ColumnData::Continuous(values))
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    fn require(&self, name: &str) -> Result<&Column> {
        self.column(name)
            .ok_or_else(|| Error::invalid(format!("unknown covariate column `{name}`")))
    }

    /// Numeric view of a column; binary codes become 0.0/1.0.
    pub fn numeric(&self, name: &str) -> Result<Vec<Option<f64>>> {
        match &self.require(name)?.data {
            ColumnData::Continuous(v) => Ok(v.clone()),
            ColumnData::Binary { codes, .. } => {
                Ok(codes.iter().map(|c| c.map(f64::from)).collect())
            }
            ColumnData::Text(_) => Err(Error::invalid(format!("column `{name}` is not numeric"))),
        }
    }

    pub fn text(&self, name: &str) -> Result<Vec<Option<String>>> {
        match &self.require(name)?.data {
            ColumnData::Text(v) => Ok(v.clone()),
            other => Ok((0..other.len())
                .map(|i| (!other.is_missing(i)).then(|| other.render(i)))
                .collect()),
        }
    }

    pub fn missing_mask(&self, name: &str) -> Result<Vec<bool>> {
        let col = self.require(name)?;
        Ok((0..col.data.len())
            .map(|i| col.data.is_missing(i))
            .collect())
    }

    /// Rows reordered to `subject_ids`. Unknown subjects get all-missing rows.
    pub fn align_to(&self, subject_ids: &[String]) -> CovariateTable {
        let index: HashMap<&str, usize> = self
            .subject_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let rows: Vec<Option<usize>> = subject_ids
            .iter()
            .map(|s| index.get(s.as_str()).copied())
            .collect();
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let data = match &c.data {
                    ColumnData::Continuous(v) => {
                        ColumnData::Continuous(rows.iter().map(|r| r.and_then(|i| v[i])).collect())
                    }
                    ColumnData::Binary { levels, codes } => ColumnData::Binary {
                        levels: levels.clone(),
                        codes: rows.iter().map(|r| r.and_then(|i| codes[i])).collect(),
                    },
                    ColumnData::Text(v) => ColumnData::Text(
                        rows.iter().map(|r| r.and_then(|i| v[i].clone())).collect(),
                    ),
                };
                Column {
                    name: c.name.clone(),
                    data,
                }
            })
            .collect();
        CovariateTable {
            subject_ids: subject_ids.to_vec(),
            columns,
        }
    }

    /// Reads a covariate csv. Column kinds are inferred: numeric columns whose
    /// values are all 0/1 and text columns with at most two distinct values are
    /// binary; other numeric columns are continuous; the rest are text.
    pub fn read_csv<R: Read>(reader: R, source: &str) -> Result<CovariateTable> {
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
        let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut ids = Vec::new();
        let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); names.len()];
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                path: source.into(),
                line: i + 2,
                message: e.to_string(),
            })?;
            if rec.len() != names.len() + 1 {
                return Err(Error::Parse {
                    path: source.into(),
                    line: i + 2,
                    message: format!("expected {} fields, found {}", names.len() + 1, rec.len()),
                });
            }
            ids.push(rec[0].to_owned());
            for (j, f) in rec.iter().skip(1).enumerate() {
                raw[j].push((!f.is_empty()).then(|| f.to_owned()));
            }
        }
        let mut table = CovariateTable::new(ids);
        for (name, cells) in names.into_iter().zip(raw) {
            table.push(name, infer_column(cells))?;
        }
        Ok(table)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let header =
            std::iter::once("subject_id").chain(self.columns.iter().map(|c| c.name.as_str()));
        w.write_record(header).map_err(csv_err)?;
        for (i, id) in self.subject_ids.iter().enumerate() {
            let row =
                std::iter::once(id.clone()).chain(self.columns.iter().map(|c| c.data.render(i)));
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<covariates>", e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CovariateTable> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f), &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn infer_column(cells: Vec<Option<String>>) -> ColumnData {
    let parsed: Option<Vec<Option<f64>>> = cells
        .iter()
        .map(|c| match c {
            None => Some(None),
            Some(s) => s.parse::<f64>().ok().map(Some),
        })
        .collect();
    if let Some(values) = parsed {
        if values.iter().flatten().all(|&v| v == 0.0 || v == 1.0)
            && values.iter().any(Option::is_some)
        {
            return ColumnData::Binary {
                levels: vec!["0".into(), "1".into()],
                codes: values.iter().map(|v| v.map(|x| x as u8)).collect(),
            };
        }
        return ColumnData::Continuous(values);
    }
    let distinct: BTreeSet<&str> = cells.iter().flatten().map(String::as_str).collect();
    if distinct.len() <= 2 {
        let levels: Vec<String> = distinct.iter().map(|s| s.to_string()).collect();
        let codes = cells
            .iter()
            .map(|c| {
                c.as_ref()
                    .map(|s| levels.iter().position(|l| l == s).unwrap() as u8)
            })
            .collect();
        return ColumnData::Binary { levels, codes };
    }
    ColumnData::Text(cells)
}
