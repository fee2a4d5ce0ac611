use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{auc, osr};
use super::ridge::{lambda_grid, select_penalty, Family};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// One random 70/10/20 partition of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub seed: u64,
    pub replication: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitPlan {
    pub const FRACTIONS: [f64; 3] = [0.7, 0.1, 0.2];

    /// Each replication draws from its own stream of the seeded generator.
    pub fn new(n: usize, seed: u64, replication: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replication as u64);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let n_train = (n as f64 * Self::FRACTIONS[0]).round() as usize;
        let n_val = ((n as f64 * Self::FRACTIONS[1]).round() as usize).min(n - n_train);
        let test = idx.split_off(n_train + n_val);
        let validation = idx.split_off(n_train);
        Self {
            seed,
            replication,
            train: idx,
            validation,
            test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplicationConfig {
    pub n_rep: usize,
    pub seed: u64,
    pub grid_size: usize,
    /// Smallest penalty as a fraction of the largest.
    pub grid_ratio: f64,
}

impl Default for ReplicationConfig {
    fn default() -> Self {
        Self {
            n_rep: 10,
            seed: 0,
            grid_size: 50,
            grid_ratio: 1e-4,
        }
    }
}

/// Which part of a replication touched a set of rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Fit,
    SelectPenalty,
    Evaluate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub target: String,
    pub predictor_set: String,
    /// `osr` or `auc`.
    pub metric: String,
    /// Test-set metric per replication; `None` where it is undefined.
    pub values: Vec<Option<f64>>,
    pub penalties: Vec<f64>,
    /// Mean over replications with a defined metric.
    pub mean: Option<f64>,
}

fn metric_name(family: Family) -> &'static str {
    match family {
        Family::Gaussian => "osr",
        Family::Binomial => "auc",
    }
}

struct RepOutcome {
    value: Option<f64>,
    penalty: f64,
    events: Vec<(Phase, Vec<usize>)>,
}

fn replicate(
    x: &DMatrix<f64>,
    y: &[f64],
    family: Family,
    cfg: &ReplicationConfig,
    rep: usize,
) -> Result<RepOutcome> {
    let plan = SplitPlan::new(y.len(), cfg.seed, rep);
    if family == Family::Binomial {
        for (name, part) in [
            ("training", &plan.train),
            ("validation", &plan.validation),
            ("test", &plan.test),
        ] {
            let pos = part.iter().filter(|&&i| y[i] == 1.0).count();
            if pos == 0 || pos == part.len() {
                return Err(Error::invalid(format!(
                    "replication {rep}: the {name} split lacks one of the two classes"
                )));
            }
        }
    }
    let take = |rows: &[usize]| {
        (
            x.select_rows(rows),
            rows.iter().map(|&i| y[i]).collect::<Vec<_>>(),
        )
    };
    let (xt, yt) = take(&plan.train);
    let (xv, yv) = take(&plan.validation);
    let (xs, ys) = take(&plan.test);
    let grid = lambda_grid(&xt, &yt, cfg.grid_size, cfg.grid_ratio)?;
    let (penalty, model) = select_penalty(&xt, &yt, &xv, &yv, family, &grid)?;
    let pred = model.predict(&xs)?;
    let value = match family {
        Family::Gaussian => osr(&ys, pred.as_slice()).ok(),
        Family::Binomial => {
            let labels: Vec<bool> = ys.iter().map(|&v| v == 1.0).collect();
            auc(&labels, pred.as_slice()).ok()
        }
    };
    Ok(RepOutcome {
        value,
        penalty,
        events: vec![
            (Phase::Fit, plan.train),
            (Phase::SelectPenalty, plan.validation),
            (Phase::Evaluate, plan.test),
        ],
    })
}

/// Like [`run_replications`], reporting every row set each phase touches
/// to `audit`, in replication order.
pub fn run_replications_audited(
    predictors: &FeatureMatrix,
    target: &[f64],
    target_name: &str,
    predictor_set: &str,
    family: Family,
    cfg: &ReplicationConfig,
    audit: &mut dyn FnMut(usize, Phase, &[usize]),
) -> Result<PredictionReport> {
    if predictors.nrows() != target.len() {
        return Err(Error::Shape(format!(
            "{} predictor rows but {} targets",
            predictors.nrows(),
            target.len()
        )));
    }
    if cfg.n_rep < 1 {
        return Err(Error::config("n_rep must be at least 1"));
    }
    if target.len() < 10 {
        return Err(Error::invalid(format!(
            "{} rows are too few to split 70/10/20",
            target.len()
        )));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "target has missing values; filter cases first",
        ));
    }
    let x = predictors.values();
    let outcomes: Vec<RepOutcome> = (0..cfg.n_rep)
        .into_par_iter()
        .map(|rep| replicate(x, target, family, cfg, rep))
        .collect::<Result<_>>()?;
    for (rep, o) in outcomes.iter().enumerate() {
        for (phase, rows) in &o.events {
            audit(rep, *phase, rows);
        }
    }
    let values: Vec<Option<f64>> = outcomes.iter().map(|o| o.value).collect();
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(PredictionReport {
        target: target_name.to_owned(),
        predictor_set: predictor_set.to_owned(),
        metric: metric_name(family).to_owned(),
        values,
        penalties: outcomes.iter().map(|o| o.penalty).collect(),
        mean,
    })
}

/// Repeats split / fit / penalty selection / test evaluation `cfg.n_rep`
/// times. Rows must already be restricted to cases with a known target.
pub fn run_replications(
    predictors: &FeatureMatrix,
    target: &[f64],
    target_name: &str,
    predictor_set: &str,
    family: Family,
    cfg: &ReplicationConfig,
) -> Result<PredictionReport> {
    run_replications_audited(
        predictors,
        target,
        target_name,
        predictor_set,
        family,
        cfg,
        &mut |_, _, _| {},
    )
}

/// Report `j` uses the column-wise concatenation of feature sets `1..=j`.
pub fn cumulative_predict(
    feature_sets: &[(String, FeatureMatrix)],
    target: &[f64],
    target_name: &str,
    family: Family,
    cfg: &ReplicationConfig,
) -> Result<Vec<PredictionReport>> {
    let mut reports = Vec::with_capacity(feature_sets.len());
    let mut acc: Option<FeatureMatrix> = None;
    let mut labels: Vec<&str> = Vec::new();
    for (label, fm) in feature_sets {
        let combined = match &acc {
            None => fm.clone(),
            Some(prev) => prev.hconcat(fm).map_err(|_| {
                Error::invalid(format!(
                    "feature set `{label}` is not aligned with the previous sets"
                ))
            })?,
        };
        labels.push(label);
        reports.push(run_replications(
            &combined,
            target,
            target_name,
            &labels.join("+"),
            family,
            cfg,
        )?);
        acc = Some(combined);
    }
    Ok(reports)
}

/// Long-format csv: `target,predictor_set,replication,metric_name,value`.
pub fn write_reports_csv<W: Write>(reports: &[PredictionReport], mut w: W) -> Result<()> {
    let io = |e| Error::io("<report>", e);
    writeln!(w, "target,predictor_set,replication,metric_name,value").map_err(io)?;
    for r in reports {
        for (i, v) in r.values.iter().enumerate() {
            let v = v.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{}",
                r.target,
                r.predictor_set,
                i + 1,
                r.metric,
                v
            )
            .map_err(io)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    target: &'a str,
    predictor_set: &'a str,
    metric: &'a str,
    mean: Option<f64>,
    n_defined: usize,
    n_rep: usize,
}

/// JSON array of per-report means.
pub fn write_summary_json<W: Write>(reports: &[PredictionReport], mut w: W) -> Result<()> {
    let rows: Vec<SummaryRow> = reports
        .iter()
        .map(|r| SummaryRow {
            target: &r.target,
            predictor_set: &r.predictor_set,
            metric: &r.metric,
            mean: r.mean,
            n_defined: r.values.iter().flatten().count(),
            n_rep: r.values.len(),
        })
        .collect();
    serde_json::to_writer_pretty(&mut w, &rows).map_err(|e| Error::invalid(e.to_string()))?;
    writeln!(w).map_err(|e| Error::io("<summary>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_disjoint_and_exhaustive() {
        for n in [10, 11, 97, 1000] {
            let p = SplitPlan::new(n, 5, 3);
            let mut all: Vec<usize> = p
                .train
                .iter()
                .chain(&p.validation)
                .chain(&p.test)
                .copied()
                .collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            assert_eq!(p.train.len(), (n as f64 * 0.7).round() as usize);
        }
        assert_ne!(
            SplitPlan::new(100, 5, 0).train,
            SplitPlan::new(100, 5, 1).train
        );
        assert_eq!(SplitPlan::new(100, 5, 1), SplitPlan::new(100, 5, 1));
    }
}
