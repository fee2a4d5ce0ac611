use std::collections::{BTreeMap, HashMap};

use super::{ActionSequence, Cohort, CovariateTable};
use crate::error::{Error, Result};

/// Median of a non-empty slice; an even count averages the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Subtracts each country's median (over its non-missing cells) from the
/// values of that country. Missing cells stay missing.
pub fn center_by_country(
    values: &[Option<f64>],
    country: &[Option<String>],
) -> Result<Vec<Option<f64>>> {
    if values.len() != country.len() {
        return Err(Error::Shape(format!(
            "{} values but {} country codes",
            values.len(),
            country.len()
        )));
    }
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (i, (v, c)) in values.iter().zip(country).enumerate() {
        match (v, c) {
            (Some(x), Some(c)) => groups.entry(c).or_default().push(*x),
            (None, Some(c)) => {
                groups.entry(c).or_default();
            }
            (Some(_), None) => {
                return Err(Error::invalid(format!(
                    "row {i} has a value but no country"
                )));
            }
            (None, None) => {}
        }
    }
    let mut medians = HashMap::new();
    for (c, vals) in &groups {
        let m = median(vals)
            .ok_or_else(|| Error::invalid(format!("country `{c}` has no non-missing values")))?;
        medians.insert(*c, m);
    }
    Ok(values
        .iter()
        .zip(country)
        .map(|(v, c)| match (v, c) {
            (Some(x), Some(c)) => Some(x - medians[c.as_str()]),
            _ => None,
        })
        .collect())
}

/// Log hourly income in US dollars, centred on each country's median log
/// income.
pub fn adjust_income(
    raw_hourly_income: &[Option<f64>],
    country: &[Option<String>],
    rates: &HashMap<String, f64>,
) -> Result<Vec<Option<f64>>> {
    if raw_hourly_income.len() != country.len() {
        return Err(Error::Shape(
            "income and country columns differ in length".into(),
        ));
    }
    let mut logs = Vec::with_capacity(raw_hourly_income.len());
    for (i, (inc, c)) in raw_hourly_income.iter().zip(country).enumerate() {
        let Some(inc) = inc else {
            logs.push(None);
            continue;
        };
        if !(*inc > 0.0) {
            return Err(Error::invalid(format!(
                "row {i}: income {inc} is not positive"
            )));
        }
        let c = c
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("row {i}: income without a country")))?;
        let rate = rates
            .get(c)
            .ok_or_else(|| Error::invalid(format!("no exchange rate for country `{c}`")))?;
        logs.push(Some((inc * rate).ln()));
    }
    center_by_country(&logs, country)
}

/// Indices of subjects with a non-missing value in `target`, in table order.
pub fn casewise_filter(table: &CovariateTable, target: &str) -> Result<Vec<usize>> {
    Ok(table
        .missing_mask(target)?
        .into_iter()
        .enumerate()
        .filter_map(|(i, missing)| (!missing).then_some(i))
        .collect())
}

/// Removes leading `leading` and trailing `trailing` wrapper tokens (such as
/// `Start` and `Next, Next_OK`). A sequence made only of wrappers is left as
/// it was, since sequences may not be empty.
pub fn strip_wrappers(cohort: &Cohort, leading: &[String], trailing: &[String]) -> Result<Cohort> {
    let seqs = cohort
        .sequences()
        .iter()
        .map(|s| {
            let mut t: &[String] = &s.tokens;
            if !leading.is_empty() && t.starts_with(leading) {
                t = &t[leading.len()..];
            }
            if !trailing.is_empty() && t.ends_with(trailing) {
                t = &t[..t.len() - trailing.len()];
            }
            let tokens = if t.is_empty() {
                s.tokens.clone()
            } else {
                t.to_vec()
            };
            ActionSequence {
                tokens,
                ..s.clone()
            }
        })
        .collect();
    Cohort::new(cohort.item_id(), seqs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_country(n: usize) -> Vec<Option<String>> {
        vec![Some("A".to_string()); n]
    }

    #[test]
    fn centering_odd_and_even() {
        let out =
            center_by_country(&[Some(10.0), Some(12.0), Some(14.0)], &one_country(3)).unwrap();
        assert_eq!(out, vec![Some(-2.0), Some(0.0), Some(2.0)]);
        let out = center_by_country(&[Some(10.0), Some(12.0)], &one_country(2)).unwrap();
        assert_eq!(out, vec![Some(-1.0), Some(1.0)]);
    }

    #[test]
    fn all_missing_country_is_named() {
        let c = vec![Some("A".into()), Some("B".into())];
        let err = center_by_country(&[Some(1.0), None], &c).unwrap_err();
        assert!(err.to_string().contains("`B`"));
    }

    #[test]
    fn income_log_then_center() {
        let e = std::f64::consts::E;
        let inc = [Some(1.0), Some(e), Some(e * e), Some(5.0), Some(5.0), None];
        let country: Vec<Option<String>> = ["A", "A", "A", "B", "B", "B"]
            .iter()
            .map(|c| Some(c.to_string()))
            .collect();
        let rates = HashMap::from([("A".to_string(), 1.0), ("B".to_string(), 0.7)]);
        let out = adjust_income(&inc, &country, &rates).unwrap();
        let want = [-1.0, 0.0, 1.0];
        for (o, w) in out.iter().zip(want) {
            assert!((o.unwrap() - w).abs() < 1e-12);
        }
        assert_eq!(out[3], Some(0.0));
        assert_eq!(out[4], Some(0.0));
        assert_eq!(out[5], None);
    }

    #[test]
    fn income_errors() {
        let c = vec![Some("A".to_string())];
        let rates = HashMap::from([("A".to_string(), 1.0)]);
        assert!(adjust_income(&[Some(0.0)], &c, &rates).is_err());
        assert!(adjust_income(&[Some(1.0)], &[Some("Z".into())], &rates).is_err());
    }

    #[test]
    fn casewise() {
        let mut t = CovariateTable::new(vec!["a".into(), "b".into(), "c".into()]);
        t.push_continuous("x", vec![Some(1.0), None, Some(3.0)])
            .unwrap();
        t.push_continuous("full", vec![Some(1.0); 3]).unwrap();
        t.push_continuous("none", vec![None; 3]).unwrap();
        assert_eq!(casewise_filter(&t, "x").unwrap(), vec![0, 2]);
        assert_eq!(casewise_filter(&t, "full").unwrap(), vec![0, 1, 2]);
        assert!(casewise_filter(&t, "none").unwrap().is_empty());
        assert!(casewise_filter(&t, "nope").is_err());
    }

    #[test]
    fn strips_wrappers_but_never_empties() {
        let s1 = ActionSequence::from_tokens("a", "I", &["Start", "X", "Next", "Next_OK"]).unwrap();
        let s2 = ActionSequence::from_tokens("b", "I", &["Start", "Next", "Next_OK"]).unwrap();
        let c = Cohort::new("I", vec![s1, s2]).unwrap();
        let lead = vec!["Start".to_string()];
        let trail = vec!["Next".to_string(), "Next_OK".to_string()];
        let out = strip_wrappers(&c, &lead, &trail).unwrap();
        assert_eq!(out.sequences()[0].tokens, ["X"]);
        assert_eq!(out.sequences()[1].tokens.len(), 3);
    }
}
