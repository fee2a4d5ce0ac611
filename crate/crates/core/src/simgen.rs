//! Synthetic cohorts with planted trait-to-strategy associations.
//!
//! Each subject draws latent traits, then for every item picks a strategy
//! with softmax-linear probabilities in the traits and walks that strategy's
//! first-order Markov chain from the item's start token until a termination
//! draw succeeds. The item score counts how many key actions occurred.

use std::collections::BTreeMap;
use std::path::Path;

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqdata::{ActionSequence, Cohort, ColumnData, CovariateTable};

pub const DEFAULT_MAX_LENGTH: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "lowercase")]
pub enum TraitDist {
    Normal { mean: f64, sd: f64 },
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitSpec {
    pub name: String,
    #[serde(flatten)]
    pub dist: TraitDist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub name: String,
    /// Linear predictor: `intercept + sum(weights[t] * trait_t)`.
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    /// Row-stochastic transition table, `from -> (to -> probability)`.
    pub transitions: BTreeMap<String, BTreeMap<String, f64>>,
    /// Per-state stopping probability; states not listed use `default_termination`,
    /// and states without outgoing transitions always stop.
    #[serde(default)]
    pub termination: BTreeMap<String, f64>,
    pub default_termination: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemSpec {
    pub id: String,
    pub start: String,
    /// Score = number of these actions that occur at least once.
    #[serde(default)]
    pub key_actions: Vec<String>,
    pub strategies: Vec<StrategySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    #[serde(default = "default_max_length")]
    pub max_length: usize,
    #[serde(default)]
    pub traits: Vec<TraitSpec>,
    pub items: Vec<ItemSpec>,
}

fn default_max_length() -> usize {
    DEFAULT_MAX_LENGTH
}

impl AgentSpec {
    pub fn from_toml_str(text: &str) -> Result<AgentSpec> {
        let spec: AgentSpec =
            toml::from_str(text).map_err(|e| Error::config(format!("agent spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<AgentSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.max_length < 1 {
            errs.push("max_length must be at least 1".to_string());
        }
        let mut trait_names = Vec::new();
        for t in &self.traits {
            if trait_names.contains(&t.name.as_str()) {
                errs.push(format!("trait `{}` defined twice", t.name));
            }
            trait_names.push(t.name.as_str());
            match t.dist {
                TraitDist::Normal { mean, sd }
                    if !(mean.is_finite() && sd.is_finite() && sd > 0.0) =>
                {
                    errs.push(format!(
                        "trait `{}`: normal needs finite mean and sd > 0",
                        t.name
                    ))
                }
                TraitDist::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                    errs.push(format!("trait `{}`: bernoulli p must be in [0, 1]", t.name))
                }
                _ => {}
            }
        }
        if self.items.is_empty() {
            errs.push("at least one item is required".to_string());
        }
        let mut item_ids = Vec::new();
        for item in &self.items {
            let at = format!("item `{}`", item.id);
            if item.id.is_empty() {
                errs.push("item id must be non-empty".to_string());
            }
            if item_ids.contains(&item.id.as_str()) {
                errs.push(format!("{at} defined twice"));
            }
            item_ids.push(item.id.as_str());
            if !valid_token(&item.start) {
                errs.push(format!("{at}: invalid start token {:?}", item.start));
            }
            if item.strategies.is_empty() {
                errs.push(format!("{at}: alphabet is empty (no strategies)"));
            }
            for s in &item.strategies {
                let at = format!("{at} strategy `{}`", s.name);
                for w in s.weights.keys() {
                    if !trait_names.contains(&w.as_str()) {
                        errs.push(format!("{at}: weight on unknown trait `{w}`"));
                    }
                }
                if !s.intercept.is_finite() || s.weights.values().any(|w| !w.is_finite()) {
                    errs.push(format!("{at}: mixture coefficients must be finite"));
                }
                if !(s.default_termination > 0.0 && s.default_termination <= 1.0) {
                    errs.push(format!("{at}: default_termination must be in (0, 1]"));
                }
                for (state, p) in &s.termination {
                    if !(*p > 0.0 && *p <= 1.0) {
                        errs.push(format!("{at}: termination of `{state}` must be in (0, 1]"));
                    }
                }
                for (from, row) in &s.transitions {
                    let total: f64 = row.values().sum();
                    if (total - 1.0).abs() > 1e-9 || row.values().any(|p| !(*p >= 0.0)) {
                        errs.push(format!("{at}: transitions from `{from}` must be non-negative and sum to 1 (got {total})"));
                    }
                    for tok in std::iter::once(from).chain(row.keys()) {
                        if !valid_token(tok) {
                            errs.push(format!("{at}: invalid token {tok:?}"));
                        }
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

fn valid_token(t: &str) -> bool {
    !t.is_empty() && !t.chars().any(char::is_whitespace)
}

/// Softmax strategy probabilities for one subject.
pub fn strategy_probabilities(item: &ItemSpec, traits: &BTreeMap<&str, f64>) -> Vec<f64> {
    let eta: Vec<f64> = item
        .strategies
        .iter()
        .map(|s| {
            s.intercept
                + s.weights
                    .iter()
                    .map(|(t, w)| w * traits[t.as_str()])
                    .sum::<f64>()
        })
        .collect();
    let max = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = eta.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn categorical<R: Rng>(rng: &mut R, probs: impl IntoIterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        acc += p;
        if p > 0.0 {
            last = i;
        }
        if u < acc {
            return i;
        }
    }
    last
}

fn walk<R: Rng>(
    rng: &mut R,
    start: &str,
    s: &StrategySpec,
    max_length: usize,
) -> Result<Vec<String>> {
    let mut seq = vec![start.to_string()];
    loop {
        let state = seq.last().unwrap();
        let row = s.transitions.get(state);
        let stop = match row {
            None => 1.0,
            Some(_) => s
                .termination
                .get(state)
                .copied()
                .unwrap_or(s.default_termination),
        };
        if rng.random::<f64>() < stop {
            return Ok(seq);
        }
        let row = row.unwrap();
        let next = categorical(rng, row.values().copied());
        let tok = row.keys().nth(next).unwrap().clone();
        seq.push(tok);
        if seq.len() > max_length {
            return Err(Error::invalid(format!(
                "strategy `{}` produced a sequence longer than max_length {max_length}",
                s.name
            )));
        }
    }
}

struct SubjectDraw {
    traits: Vec<f64>,
    strategies: Vec<usize>,
    sequences: Vec<Vec<String>>,
}

fn draw_subject(spec: &AgentSpec, seed: u64, subject: usize) -> Result<SubjectDraw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(subject as u64);
    let mut values = Vec::with_capacity(spec.traits.len());
    for t in &spec.traits {
        values.push(match t.dist {
            TraitDist::Normal { mean, sd } => Normal::new(mean, sd)
                .map_err(|e| Error::config(format!("trait `{}`: {e}", t.name)))?
                .sample(&mut rng),
            TraitDist::Bernoulli { p } => {
                let b = Bernoulli::new(p)
                    .map_err(|e| Error::config(format!("trait `{}`: {e}", t.name)))?;
                if b.sample(&mut rng) {
                    1.0
                } else {
                    0.0
                }
            }
        });
    }
    let by_name: BTreeMap<&str, f64> = spec
        .traits
        .iter()
        .map(|t| t.name.as_str())
        .zip(values.iter().copied())
        .collect();
    let mut strategies = Vec::with_capacity(spec.items.len());
    let mut sequences = Vec::with_capacity(spec.items.len());
    for item in &spec.items {
        let k = categorical(&mut rng, strategy_probabilities(item, &by_name));
        sequences.push(walk(
            &mut rng,
            &item.start,
            &item.strategies[k],
            spec.max_length,
        )?);
        strategies.push(k);
    }
    Ok(SubjectDraw {
        traits: values,
        strategies,
        sequences,
    })
}

pub fn subject_id(index: usize, n_subjects: usize) -> String {
    let width = n_subjects.to_string().len();
    format!("s{:0width$}", index + 1)
}

/// Generates one cohort per item plus a covariate table holding the traits
/// and the chosen strategy per item (`strategy_<item>`).
pub fn generate(
    spec: &AgentSpec,
    n_subjects: usize,
    seed: u64,
) -> Result<(Vec<Cohort>, CovariateTable)> {
    spec.validate()?;
    if n_subjects < 1 {
        return Err(Error::config("n_subjects must be at least 1"));
    }
    let draws: Vec<SubjectDraw> = (0..n_subjects)
        .into_par_iter()
        .map(|i| draw_subject(spec, seed, i))
        .collect::<Result<_>>()?;
    let ids: Vec<String> = (0..n_subjects).map(|i| subject_id(i, n_subjects)).collect();

    let mut cohorts = Vec::with_capacity(spec.items.len());
    for (j, item) in spec.items.iter().enumerate() {
        let seqs = draws
            .iter()
            .zip(&ids)
            .map(|(d, id)| {
                let tokens = d.sequences[j].clone();
                let score = item
                    .key_actions
                    .iter()
                    .filter(|k| tokens.contains(k))
                    .count() as u32;
                ActionSequence::new(id.clone(), item.id.clone(), tokens, Some(score))
            })
            .collect::<Result<Vec<_>>>()?;
        cohorts.push(Cohort::new(item.id.clone(), seqs)?);
    }

    let mut table = CovariateTable::new(ids);
    for (t_idx, t) in spec.traits.iter().enumerate() {
        let data = match t.dist {
            TraitDist::Normal { .. } => {
                ColumnData::Continuous(draws.iter().map(|d| Some(d.traits[t_idx])).collect())
            }
            TraitDist::Bernoulli { .. } => ColumnData::Binary {
                levels: vec!["0".into(), "1".into()],
                codes: draws.iter().map(|d| Some(d.traits[t_idx] as u8)).collect(),
            },
        };
        table.push(t.name.clone(), data)?;
    }
    for (j, item) in spec.items.iter().enumerate() {
        let names = draws
            .iter()
            .map(|d| Some(item.strategies[d.strategies[j]].name.clone()))
            .collect();
        table.push(format!("strategy_{}", item.id), ColumnData::Text(names))?;
    }
    Ok((cohorts, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEGENERATE: &str = r#"
traits = []
[[items]]
id = "one"
start = "A"
[[items.strategies]]
name = "only"
default_termination = 1.0
transitions = {}
"#;

    #[test]
    fn degenerate_spec_yields_single_token() {
        let spec = AgentSpec::from_toml_str(DEGENERATE).unwrap();
        let (cohorts, table) = generate(&spec, 10, 1).unwrap();
        assert_eq!(cohorts.len(), 1);
        assert!(cohorts[0].sequences().iter().all(|s| s.tokens == ["A"]));
        assert_eq!(table.len(), 10);
    }

    #[test]
    fn validation_lists_every_violation() {
        let text = r#"
traits = [{ name = "t", distribution = "normal", mean = 0.0, sd = -1.0 }]
[[items]]
id = "x"
start = "S"
[[items.strategies]]
name = "a"
default_termination = 0.0
weights = { nope = 1.0 }
transitions = { S = { A = 0.5, B = 0.4 } }
"#;
        match AgentSpec::from_toml_str(text) {
            Err(Error::Config(v)) => assert_eq!(v.len(), 4, "{v:?}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn length_cap_is_an_error() {
        let text = r#"
max_length = 5
traits = []
[[items]]
id = "x"
start = "S"
[[items.strategies]]
name = "loop"
default_termination = 1e-9
transitions = { S = { S = 1.0 } }
"#;
        let spec = AgentSpec::from_toml_str(text).unwrap();
        assert!(generate(&spec, 3, 0).is_err());
    }
}
