//! Reading PLS components: ranked sequences for inspection, windowed pattern
//! statistics along a component, and LOWESS curves for overlays.

mod lowess;
mod patterns;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seqdata::Cohort;

pub use lowess::{lowess, lowess_at, LowessFit};
pub use patterns::{PatternSpec, Predicate, PredicateRegistry};

pub const DEFAULT_GRID_SIZE: usize = 40;
pub const DEFAULT_WINDOW: usize = 100;
pub const DEFAULT_SPAN: f64 = 2.0 / 3.0;

/// One emitted line of the inspection file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRecord {
    pub rank: usize,
    pub score: f64,
    pub subject_id: String,
    pub tokens: Vec<String>,
}

fn check_aligned(cohort: &Cohort, scores: &[f64]) -> Result<()> {
    if scores.len() != cohort.len() {
        return Err(Error::Shape(format!(
            "{} scores for a cohort of {} sequences",
            scores.len(),
            cohort.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("component scores must be finite"));
    }
    Ok(())
}

/// Sequences ordered by `(score, subject_id)`, keeping ranks 1, 1 + interval, ...
pub fn rank_export(cohort: &Cohort, scores: &[f64], interval: usize) -> Result<Vec<RankRecord>> {
    if interval < 1 {
        return Err(Error::invalid("inspection interval must be at least 1"));
    }
    check_aligned(cohort, scores)?;
    let seqs = cohort.sequences();
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .total_cmp(&scores[b])
            .then_with(|| seqs[a].subject_id.cmp(&seqs[b].subject_id))
    });
    Ok(order
        .iter()
        .enumerate()
        .step_by(interval)
        .map(|(pos, &i)| RankRecord {
            rank: pos + 1,
            score: scores[i],
            subject_id: seqs[i].subject_id.clone(),
            tokens: seqs[i].tokens.clone(),
        })
        .collect())
}

/// Plain-text inspection file: `rank<TAB>score<TAB>subject_id<TAB>tokens`.
pub fn write_inspection<W: Write>(records: &[RankRecord], mut w: W) -> Result<()> {
    let io = |e| Error::io("<inspection>", e);
    writeln!(w, "rank\tscore\tsubject_id\tactions").map_err(io)?;
    for r in records {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            r.rank,
            r.score,
            r.subject_id,
            r.tokens.join(" ")
        )
        .map_err(io)?;
    }
    Ok(())
}

/// Window statistic of a pattern along a component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternSeries {
    pub pattern: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub grid_size: usize,
    pub window: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            grid_size: DEFAULT_GRID_SIZE,
            window: DEFAULT_WINDOW,
        }
    }
}

/// Sample quantile (linear interpolation between order statistics) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// `grid_size` equally spaced quantiles (0 through 1) of the scores.
pub fn quantile_grid(scores: &[f64], grid_size: usize) -> Vec<f64> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    if grid_size == 1 {
        return vec![quantile_sorted(&sorted, 0.5)];
    }
    (0..grid_size)
        .map(|k| quantile_sorted(&sorted, k as f64 / (grid_size - 1) as f64))
        .collect()
}

/// Indices of the `window` subjects whose scores are closest to `at`, ties
/// broken by lower index, returned in ascending index order.
pub fn nearest_window(scores: &[f64], at: f64, window: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let key = |i: &usize| ((scores[*i] - at).abs(), *i);
    let cmp = |a: &usize, b: &usize| {
        let (da, ia) = key(a);
        let (db, ib) = key(b);
        da.total_cmp(&db).then(ia.cmp(&ib))
    };
    if window < idx.len() {
        idx.select_nth_unstable_by(window - 1, cmp);
        idx.truncate(window);
    }
    idx.sort_unstable();
    idx
}

/// Mean of per-subject values over an index set, summed in index order.
fn window_mean(values: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
}

/// Per-subject pattern values for a cohort.
pub fn pattern_values(
    cohort: &Cohort,
    pattern: &PatternSpec,
    registry: &PredicateRegistry,
) -> Result<Vec<f64>> {
    pattern.validate()?;
    cohort
        .sequences()
        .iter()
        .map(|s| pattern.evaluate(&s.tokens, registry))
        .collect()
}

/// Pattern statistic over the nearest-`window` subjects at each quantile grid point.
pub fn pattern_series(
    cohort: &Cohort,
    scores: &[f64],
    pattern: &PatternSpec,
    registry: &PredicateRegistry,
    opts: SeriesOptions,
) -> Result<PatternSeries> {
    check_aligned(cohort, scores)?;
    if opts.grid_size < 1 || opts.window < 1 {
        return Err(Error::invalid("grid size and window must be at least 1"));
    }
    if cohort.len() < opts.window {
        return Err(Error::invalid(format!(
            "pattern window of {} needs at least that many subjects, got {}; set a smaller window",
            opts.window,
            cohort.len()
        )));
    }
    let values = pattern_values(cohort, pattern, registry)?;
    let grid = quantile_grid(scores, opts.grid_size);
    let stats = grid
        .par_iter()
        .map(|&g| window_mean(&values, &nearest_window(scores, g, opts.window)))
        .collect();
    Ok(PatternSeries {
        pattern: pattern.label(),
        grid,
        values: stats,
    })
}

/// LOWESS of a covariate on component scores.
pub fn component_variable_curve(scores: &[f64], variable: &[f64], span: f64) -> Result<LowessFit> {
    lowess(scores, variable, span)
}

/// One row of overlay data at a grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub component_score: f64,
    pub smoothed_variable: f64,
    pub pattern_statistic: f64,
    pub smoothed_pattern_statistic: f64,
}

/// Smoothed covariate and smoothed pattern statistic on the series grid.
pub fn plot_data(
    scores: &[f64],
    variable: &[f64],
    series: &PatternSeries,
    span: f64,
) -> Result<Vec<PlotRow>> {
    let smoothed_var = lowess_at(scores, variable, span, &series.grid)?;
    let smoothed_pat = if series.grid.len() >= 3 {
        lowess_at(&series.grid, &series.values, span, &series.grid)?
    } else {
        series.values.clone()
    };
    Ok(series
        .grid
        .iter()
        .enumerate()
        .map(|(k, &g)| PlotRow {
            component_score: g,
            smoothed_variable: smoothed_var[k],
            pattern_statistic: series.values[k],
            smoothed_pattern_statistic: smoothed_pat[k],
        })
        .collect())
}

pub fn write_plot_csv<W: Write>(rows: &[PlotRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = crate::features::csv_err;
    out.write_record([
        "component_score",
        "smoothed_variable",
        "pattern_statistic",
        "smoothed_pattern_statistic",
    ])
    .map_err(err)?;
    for r in rows {
        out.write_record([
            r.component_score.to_string(),
            r.smoothed_variable.to_string(),
            r.pattern_statistic.to_string(),
            r.smoothed_pattern_statistic.to_string(),
        ])
        .map_err(err)?;
    }
    out.flush().map_err(|e| Error::io("<plot data>", e))?;
    Ok(())
}

pub fn save_plot_csv(rows: &[PlotRow], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_plot_csv(rows, std::io::BufWriter::new(f))
}

/// Fraction of adjacent pairs where the series strictly decreases.
pub fn decrease_rate(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let drops = values.windows(2).filter(|w| w[1] < w[0]).count();
    drops as f64 / (values.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdata::ActionSequence;

    fn cohort(n: usize, f: impl Fn(usize) -> Vec<&'static str>) -> Cohort {
        let seqs = (0..n)
            .map(|i| ActionSequence::from_tokens(&format!("s{i:04}"), "it", &f(i)).unwrap())
            .collect();
        Cohort::new("it", seqs).unwrap()
    }

    #[test]
    fn rank_export_counts_and_ties() {
        let c = cohort(3645, |_| vec!["a"]);
        let scores: Vec<f64> = (0..3645).map(|i| ((i * 7919) % 3645) as f64).collect();
        let recs = rank_export(&c, &scores, 50).unwrap();
        assert_eq!(recs.len(), 73);
        assert_eq!(recs[0].rank, 1);
        assert_eq!(recs.last().unwrap().rank, 3601);

        let c = cohort(4, |_| vec!["a"]);
        let recs = rank_export(&c, &[1.0, 0.0, 1.0, 0.0], 1).unwrap();
        let ids: Vec<&str> = recs.iter().map(|r| r.subject_id.as_str()).collect();
        assert_eq!(ids, ["s0001", "s0003", "s0000", "s0002"]);
        assert!(rank_export(&c, &[0.0; 4], 0).is_err());
    }

    #[test]
    fn planted_token_switches_at_median() {
        let c = cohort(400, |i| if i >= 200 { vec!["a", "T"] } else { vec!["a"] });
        let scores: Vec<f64> = (0..400).map(|i| i as f64).collect();
        let p = PatternSpec::ContainsToken { token: "T".into() };
        let s = pattern_series(
            &c,
            &scores,
            &p,
            &PredicateRegistry::new(),
            SeriesOptions::default(),
        )
        .unwrap();
        assert_eq!(s.grid.len(), 40);
        assert_eq!(s.values[0], 0.0);
        assert_eq!(s.values[39], 1.0);
        assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
        let p = PatternSpec::TokenCount { token: "a".into() };
        let s = pattern_series(
            &c,
            &scores,
            &p,
            &PredicateRegistry::new(),
            SeriesOptions::default(),
        )
        .unwrap();
        assert!(s.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn small_cohort_needs_smaller_window() {
        let c = cohort(50, |_| vec!["a"]);
        let p = PatternSpec::ContainsToken { token: "a".into() };
        let err = pattern_series(
            &c,
            &[0.0; 50],
            &p,
            &PredicateRegistry::new(),
            SeriesOptions::default(),
        );
        assert!(err.unwrap_err().to_string().contains("smaller window"));
        let opts = SeriesOptions {
            grid_size: 5,
            window: 10,
        };
        assert!(pattern_series(&c, &[0.0; 50], &p, &PredicateRegistry::new(), opts).is_ok());
    }

    #[test]
    fn nearest_window_breaks_ties_by_index() {
        let scores = [1.0, 0.0, 2.0, 0.0, 1.0];
        assert_eq!(nearest_window(&scores, 1.0, 3), vec![0, 1, 4]);
        assert_eq!(nearest_window(&scores, 0.5, 2), vec![0, 1]);
    }
}
