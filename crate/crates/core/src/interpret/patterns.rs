//! Analyst-defined sequence probes.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pattern evaluated on one token list. Boolean kinds yield 0 or 1, so
/// their windowed mean is a proportion; `TokenCount` yields a frequency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PatternSpec {
    ContainsToken {
        token: String,
    },
    /// Matches a contiguous run of tokens.
    ContainsSubsequence {
        tokens: Vec<String>,
    },
    TokenCount {
        token: String,
    },
    #[serde(rename = "predicate-name")]
    Predicate {
        name: String,
    },
}

impl PatternSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PatternSpec::ContainsToken { token } | PatternSpec::TokenCount { token }
                if token.is_empty() =>
            {
                Err(Error::config("pattern token must be non-empty"))
            }
            PatternSpec::ContainsSubsequence { tokens }
                if tokens.is_empty() || tokens.iter().any(String::is_empty) =>
            {
                Err(Error::config(
                    "pattern subsequence must be a non-empty list of non-empty tokens",
                ))
            }
            PatternSpec::Predicate { name } if name.is_empty() => {
                Err(Error::config("predicate name must be non-empty"))
            }
            _ => Ok(()),
        }
    }

    /// Whether the statistic is a proportion in [0, 1].
    pub fn is_indicator(&self) -> bool {
        !matches!(self, PatternSpec::TokenCount { .. })
    }

    pub fn label(&self) -> String {
        match self {
            PatternSpec::ContainsToken { token } => format!("contains:{token}"),
            PatternSpec::ContainsSubsequence { tokens } => format!("contains:{}", tokens.join(">")),
            PatternSpec::TokenCount { token } => format!("count:{token}"),
            PatternSpec::Predicate { name } => format!("predicate:{name}"),
        }
    }

    pub fn evaluate(&self, tokens: &[String], registry: &PredicateRegistry) -> Result<f64> {
        Ok(match self {
            PatternSpec::ContainsToken { token } => indicator(tokens.iter().any(|t| t == token)),
            PatternSpec::ContainsSubsequence { tokens: run } => indicator(
                run.len() <= tokens.len() && tokens.windows(run.len()).any(|w| w == run.as_slice()),
            ),
            PatternSpec::TokenCount { token } => {
                tokens.iter().filter(|t| *t == token).count() as f64
            }
            PatternSpec::Predicate { name } => {
                let f = registry
                    .get(name)
                    .ok_or_else(|| Error::config(format!("unknown predicate `{name}`")))?;
                let v = f(tokens);
                if !v.is_finite() {
                    return Err(Error::Numeric(format!("predicate `{name}` returned {v}")));
                }
                v
            }
        })
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub type Predicate = Arc<dyn Fn(&[String]) -> f64 + Send + Sync>;

/// Named predicates over token lists, referenced by `PatternSpec::Predicate`.
#[derive(Clone, Default)]
pub struct PredicateRegistry {
    entries: BTreeMap<String, Predicate>,
}

impl PredicateRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(&mut self, name: impl Into<String>, f: F)
    where
        F: Fn(&[String]) -> f64 + Send + Sync + 'static,
    {
        self.entries.insert(name.into(), Arc::new(f));
    }

    pub fn get(&self, name: &str) -> Option<&Predicate> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl fmt::Debug for PredicateRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.entries.keys()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn kinds() {
        let reg = PredicateRegistry::new();
        let seq = toks("a b c b");
        let eval = |p: PatternSpec| p.evaluate(&seq, &reg).unwrap();
        assert_eq!(eval(PatternSpec::ContainsToken { token: "c".into() }), 1.0);
        assert_eq!(eval(PatternSpec::ContainsToken { token: "z".into() }), 0.0);
        assert_eq!(
            eval(PatternSpec::ContainsSubsequence {
                tokens: toks("b c")
            }),
            1.0
        );
        assert_eq!(
            eval(PatternSpec::ContainsSubsequence {
                tokens: toks("a c")
            }),
            0.0
        );
        assert_eq!(
            eval(PatternSpec::ContainsSubsequence {
                tokens: toks("a b c b a")
            }),
            0.0
        );
        assert_eq!(eval(PatternSpec::TokenCount { token: "b".into() }), 2.0);
    }

    #[test]
    fn predicates_resolve_by_name() {
        let mut reg = PredicateRegistry::new();
        reg.register("len", |t: &[String]| t.len() as f64);
        let p = PatternSpec::Predicate { name: "len".into() };
        assert_eq!(p.evaluate(&toks("x y z"), &reg).unwrap(), 3.0);
        let missing = PatternSpec::Predicate {
            name: "nope".into(),
        };
        assert!(missing.evaluate(&toks("x"), &reg).is_err());
    }

    #[test]
    fn serde_tags() {
        let p: PatternSpec =
            serde_json::from_str(r#"{"kind":"contains-token","token":"A"}"#).unwrap();
        assert_eq!(p, PatternSpec::ContainsToken { token: "A".into() });
        let p: PatternSpec =
            serde_json::from_str(r#"{"kind":"predicate-name","name":"f"}"#).unwrap();
        assert_eq!(p, PatternSpec::Predicate { name: "f".into() });
    }
}
