use serde::{Deserialize, Serialize};

use super::Cohort;
use crate::error::{Error, Result};

/// Per-item summary: full-credit rate and sequence-length statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub item_id: String,
    pub n_subjects: usize,
    /// Share of scored subjects at the cohort's maximum observed score.
    pub p: Option<f64>,
    pub min_len: usize,
    pub max_len: usize,
    pub mean_len: f64,
    pub n_action_types: usize,
}

pub fn describe(cohort: &Cohort) -> Result<Description> {
    if cohort.is_empty() {
        return Err(Error::invalid(format!(
            "item `{}` has no sequences",
            cohort.item_id()
        )));
    }
    let lens: Vec<usize> = cohort.sequences().iter().map(|s| s.len()).collect();
    let total: usize = lens.iter().sum();
    let scores: Vec<u32> = cohort.sequences().iter().filter_map(|s| s.score).collect();
    let p = scores
        .iter()
        .max()
        .map(|&top| scores.iter().filter(|&&s| s == top).count() as f64 / scores.len() as f64);
    Ok(Description {
        item_id: cohort.item_id().to_owned(),
        n_subjects: cohort.len(),
        p,
        min_len: *lens.iter().min().unwrap(),
        max_len: *lens.iter().max().unwrap(),
        mean_len: total as f64 / lens.len() as f64,
        n_action_types: cohort.vocabulary().len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdata::ActionSequence;

    fn seq(id: &str, n: usize, score: Option<u32>) -> ActionSequence {
        let tokens = (0..n).map(|i| format!("a{}", i % 3)).collect();
        ActionSequence::new(id, "I", tokens, score).unwrap()
    }

    #[test]
    fn lengths_three_and_five() {
        let c = Cohort::new("I", vec![seq("a", 3, Some(1)), seq("b", 5, Some(0))]).unwrap();
        let d = describe(&c).unwrap();
        assert_eq!((d.min_len, d.max_len, d.mean_len), (3, 5, 4.0));
        assert_eq!(d.p, Some(0.5));
        assert_eq!(d.n_action_types, 3);
    }

    #[test]
    fn single_sequence() {
        let c = Cohort::new("I", vec![seq("a", 7, None)]).unwrap();
        let d = describe(&c).unwrap();
        assert_eq!((d.min_len, d.max_len, d.mean_len), (7, 7, 7.0));
        assert_eq!(d.p, None);
    }

    #[test]
    fn empty_cohort_errors() {
        let c = Cohort::new("I", vec![]).unwrap();
        assert!(describe(&c).is_err());
    }
}
