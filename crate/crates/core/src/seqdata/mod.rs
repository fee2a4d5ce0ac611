//! Action sequences, per-item cohorts and subject covariates.

mod covariates;
mod describe;
mod io;
mod preprocess;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use covariates::{Column, ColumnData, CovariateTable};
pub use describe::{describe, Description};
pub use io::{emit_sequences, ingest_path, ingest_reader, read_sequences, SequenceFormat};
pub use preprocess::{adjust_income, casewise_filter, center_by_country, median, strip_wrappers};

/// One subject's recorded actions on one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub subject_id: String,
    pub item_id: String,
    #[serde(rename = "actions")]
    pub tokens: Vec<String>,
    pub score: Option<u32>,
}

impl ActionSequence {
    pub fn new(
        subject_id: impl Into<String>,
        item_id: impl Into<String>,
        tokens: Vec<String>,
        score: Option<u32>,
    ) -> Result<Self> {
        let seq = Self {
            subject_id: subject_id.into(),
            item_id: item_id.into(),
            tokens,
            score,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Convenience constructor for tests and generators.
    pub fn from_tokens(subject_id: &str, item_id: &str, tokens: &[&str]) -> Result<Self> {
        Self::new(
            subject_id,
            item_id,
            tokens.iter().map(|t| t.to_string()).collect(),
            None,
        )
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::EmptySequence {
                subject_id: self.subject_id.clone(),
                item_id: self.item_id.clone(),
            });
        }
        if let Some(bad) = self
            .tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::invalid(format!(
                "subject `{}` item `{}`: invalid action label {:?}",
                self.subject_id, self.item_id, bad
            )));
        }
        Ok(())
    }
}

/// Dense index for the action labels observed on one item.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    item_id: String,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(item_id: impl Into<String>) -> Self {
        Self {
            item_id: item_id.into(),
            ..Default::default()
        }
    }

    /// Labels are indexed in order of first appearance.
    pub fn from_sequences<'a>(
        item_id: &str,
        seqs: impl IntoIterator<Item = &'a ActionSequence>,
    ) -> Self {
        let mut vocab = Vocabulary::new(item_id);
        for s in seqs {
            for t in &s.tokens {
                vocab.insert(t);
            }
        }
        vocab
    }

    pub fn insert(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), i);
        i
    }

    pub fn item_id(&self) -> &str {
        &self.item_id
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn encode(&self, tokens: &[String]) -> Result<Vec<usize>> {
        tokens
            .iter()
            .map(|t| {
                self.get(t).ok_or_else(|| {
                    Error::invalid(format!(
                        "action `{t}` is not in the vocabulary of item `{}`",
                        self.item_id
                    ))
                })
            })
            .collect()
    }
}

/// All sequences recorded for one item.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    item_id: String,
    sequences: Vec<ActionSequence>,
    vocabulary: Vocabulary,
}

impl Cohort {
    pub fn new(item_id: impl Into<String>, sequences: Vec<ActionSequence>) -> Result<Self> {
        let item_id = item_id.into();
        let mut seen = HashSet::new();
        for s in &sequences {
            s.validate()?;
            if s.item_id != item_id {
                return Err(Error::invalid(format!(
                    "sequence for subject `{}` belongs to item `{}`, not `{item_id}`",
                    s.subject_id, s.item_id
                )));
            }
            if !seen.insert(s.subject_id.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate subject `{}` in item `{item_id}`",
                    s.subject_id
                )));
            }
        }
        let vocabulary = Vocabulary::from_sequences(&item_id, &sequences);
        Ok(Self {
            item_id,
            sequences,
            vocabulary,
        })
    }

    pub fn item_id(&self) -> &str {
        &self.item_id
    }

    pub fn sequences(&self) -> &[ActionSequence] {
        &self.sequences
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.sequences
            .iter()
            .map(|s| s.subject_id.clone())
            .collect()
    }

    /// Sequences mapped to vocabulary indices.
    pub fn indexed(&self) -> Vec<Vec<usize>> {
        self.sequences
            .iter()
            .map(|s| s.tokens.iter().map(|t| self.vocabulary.index[t]).collect())
            .collect()
    }

    /// Sub-cohort with the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Cohort> {
        Cohort::new(
            self.item_id.clone(),
            rows.iter().map(|&i| self.sequences[i].clone()).collect(),
        )
    }

    /// Reorders sequences to follow `subject_ids`; subjects absent from the
    /// list are dropped.
    pub fn align_to(&self, subject_ids: &[String]) -> Result<Cohort> {
        let index: HashMap<&str, usize> = self
            .sequences
            .iter()
            .enumerate()
            .map(|(i, s)| (s.subject_id.as_str(), i))
            .collect();
        let rows = subject_ids
            .iter()
            .map(|id| {
                index.get(id.as_str()).copied().ok_or_else(|| {
                    Error::invalid(format!(
                        "subject `{id}` has no sequence on item `{}`",
                        self.item_id
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.select(&rows)
    }

    /// Item scores as reals; missing scores stay `None`.
    pub fn scores(&self) -> Vec<Option<f64>> {
        self.sequences
            .iter()
            .map(|s| s.score.map(f64::from))
            .collect()
    }
}
