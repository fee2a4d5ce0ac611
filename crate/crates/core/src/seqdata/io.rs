use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ActionSequence, Cohort};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceFormat {
    JsonLines,
    Csv,
}

impl SequenceFormat {
    /// Guesses the format from a file extension; anything but `.csv` is json-lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => SequenceFormat::Csv,
            _ => SequenceFormat::JsonLines,
        }
    }
}

impl FromStr for SequenceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json-lines" | "jsonl" => Ok(SequenceFormat::JsonLines),
            "csv" => Ok(SequenceFormat::Csv),
            other => Err(Error::config(format!("unknown sequence format `{other}`"))),
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    subject_id: String,
    item_id: String,
    actions: Vec<String>,
    #[serde(default)]
    score: Option<u32>,
}

#[derive(Serialize)]
struct JsonRecordRef<'a> {
    subject_id: &'a str,
    item_id: &'a str,
    actions: &'a [String],
    score: Option<u32>,
}

/// Reads raw records in file order without grouping.
pub fn read_sequences<R: Read>(
    reader: R,
    format: SequenceFormat,
    source: &str,
) -> Result<Vec<ActionSequence>> {
    match format {
        SequenceFormat::JsonLines => read_json_lines(reader, source),
        SequenceFormat::Csv => read_csv(reader, source),
    }
}

fn read_json_lines<R: Read>(reader: R, source: &str) -> Result<Vec<ActionSequence>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            path: source.into(),
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: source.into(),
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(build(
            rec.subject_id,
            rec.item_id,
            rec.actions,
            rec.score,
            source,
            line_no,
        )?);
    }
    Ok(out)
}

fn read_csv<R: Read>(reader: R, source: &str) -> Result<Vec<ActionSequence>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = r.headers().map_err(crate::features::csv_err)?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                path: source.into(),
                line: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let (c_subject, c_item, c_score, c_actions) = (
        col("subject_id")?,
        col("item_id")?,
        col("score")?,
        col("actions")?,
    );
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line_no = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            path: source.into(),
            line: line_no,
            message: e.to_string(),
        })?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let score = match field(c_score) {
            "" => None,
            s => Some(s.parse::<u32>().map_err(|_| Error::Parse {
                path: source.into(),
                line: line_no,
                message: format!("score `{s}` is not a non-negative integer"),
            })?),
        };
        let actions: Vec<String> = match field(c_actions) {
            "" => Vec::new(),
            a => a.split('|').map(str::to_owned).collect(),
        };
        out.push(build(
            field(c_subject).to_owned(),
            field(c_item).to_owned(),
            actions,
            score,
            source,
            line_no,
        )?);
    }
    Ok(out)
}

fn build(
    subject_id: String,
    item_id: String,
    tokens: Vec<String>,
    score: Option<u32>,
    source: &str,
    line: usize,
) -> Result<ActionSequence> {
    let seq = ActionSequence {
        subject_id,
        item_id,
        tokens,
        score,
    };
    match seq.validate() {
        Ok(()) => Ok(seq),
        Err(e @ Error::EmptySequence { .. }) => Err(e),
        Err(e) => Err(Error::Parse {
            path: source.into(),
            line,
            message: e.to_string(),
        }),
    }
}

/// Groups records by item, preserving first-appearance order of items and
/// record order within each item.
pub fn ingest_reader<R: Read>(
    reader: R,
    format: SequenceFormat,
    source: &str,
) -> Result<Vec<Cohort>> {
    let records = read_sequences(reader, format, source)?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<ActionSequence>> = HashMap::new();
    for rec in records {
        if !groups.contains_key(&rec.item_id) {
            order.push(rec.item_id.clone());
        }
        groups.entry(rec.item_id.clone()).or_default().push(rec);
    }
    order
        .into_iter()
        .map(|item| {
            let seqs = groups.remove(&item).unwrap_or_default();
            Cohort::new(item, seqs)
        })
        .collect()
}

pub fn ingest_path(path: &Path, format: SequenceFormat) -> Result<Vec<Cohort>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, format, &path.display().to_string())
}

/// Writes cohorts back out as json-lines, one record per sequence, cohorts in
/// the order given.
pub fn emit_sequences<W: Write>(cohorts: &[Cohort], mut writer: W) -> Result<()> {
    for c in cohorts {
        for s in c.sequences() {
            let rec = JsonRecordRef {
                subject_id: &s.subject_id,
                item_id: &s.item_id,
                actions: &s.tokens,
                score: s.score,
            };
            let line = serde_json::to_string(&rec).map_err(|e| Error::invalid(e.to_string()))?;
            writeln!(writer, "{line}").map_err(|e| Error::io("<sequences>", e))?;
        }
    }
    Ok(())
}
