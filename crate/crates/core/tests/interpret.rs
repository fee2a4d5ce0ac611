use actseq::interpret::{
    component_variable_curve, lowess, nearest_window, pattern_series, quantile_grid, rank_export,
    PatternSpec, PredicateRegistry, SeriesOptions, DEFAULT_WINDOW,
};
use actseq::{ActionSequence, Cohort};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn cohort_from(tokens: &[Vec<&str>]) -> Cohort {
    let seqs = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| ActionSequence::from_tokens(&format!("s{i:04}"), "item", t).unwrap())
        .collect();
    Cohort::new("item", seqs).unwrap()
}

/// Sorts every candidate by (distance, index) and averages the first `window`.
fn brute_force(scores: &[f64], values: &[f64], at: f64, window: usize) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        (scores[a] - at)
            .abs()
            .total_cmp(&(scores[b] - at).abs())
            .then(a.cmp(&b))
    });
    let mut chosen = idx[..window].to_vec();
    chosen.sort();
    chosen.iter().map(|&i| values[i]).sum::<f64>() / window as f64
}

/// Tricube-weighted least squares line at `x0` over the `k` nearest points.
fn wls_oracle(x: &[f64], y: &[f64], x0: f64, k: usize) -> f64 {
    let mut d: Vec<f64> = x.iter().map(|v| (v - x0).abs()).collect();
    d.sort_by(f64::total_cmp);
    let h = d[k - 1];
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let u = (xi - x0).abs() / h;
        if u >= 1.0 {
            continue;
        }
        let w = (1.0 - u.powi(3)).powi(3);
        sw += w;
        sx += w * xi;
        sy += w * yi;
        sxx += w * xi * xi;
        sxy += w * xi * yi;
    }
    let (mx, my) = (sx / sw, sy / sw);
    let slope = (sxy / sw - mx * my) / (sxx / sw - mx * mx);
    my + slope * (x0 - mx)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn series_equals_brute_force_scan(
        raw in prop::collection::vec((0i32..20, 0u8..3), 30..120),
        window_frac in 0.05..1.0f64,
        grid_size in 1usize..12,
    ) {
        let n = raw.len();
        let scores: Vec<f64> = raw.iter().map(|r| r.0 as f64 * 0.25).collect();
        let tokens: Vec<Vec<&str>> = raw
            .iter()
            .map(|r| match r.1 {
                0 => vec!["Start", "X"],
                1 => vec!["Start", "X", "X", "Y"],
                _ => vec!["Start"],
            })
            .collect();
        let cohort = cohort_from(&tokens);
        let window = ((n as f64 * window_frac) as usize).max(1);
        let registry = PredicateRegistry::new();
        for pattern in [
            PatternSpec::ContainsToken { token: "Y".into() },
            PatternSpec::TokenCount { token: "X".into() },
        ] {
            let values: Vec<f64> = tokens.iter().map(|t| pattern.evaluate(&t.iter().map(|s| s.to_string()).collect::<Vec<_>>(), &registry).unwrap()).collect();
            let series = pattern_series(&cohort, &scores, &pattern, &registry, SeriesOptions { grid_size, window }).unwrap();
            prop_assert!(series.grid.windows(2).all(|w| w[0] <= w[1]));
            for (&g, &v) in series.grid.iter().zip(&series.values) {
                prop_assert_eq!(v, brute_force(&scores, &values, g, window));
            }
        }
    }

    #[test]
    fn lowess_is_permutation_invariant(seed in 0u64..100_000, n in 3usize..60, span in 0.2..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..15) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let xp: Vec<f64> = order.iter().map(|&i| x[i]).collect();
        let yp: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        prop_assert_eq!(lowess(&x, &y, span).unwrap(), lowess(&xp, &yp, span).unwrap());
    }

    #[test]
    fn nearest_window_has_exactly_window_members(
        scores in prop::collection::vec(-5.0..5.0f64, 1..80),
        at in -6.0..6.0f64,
        window in 1usize..90,
    ) {
        let got = nearest_window(&scores, at, window);
        prop_assert_eq!(got.len(), window.min(scores.len()));
        prop_assert!(got.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn sine_smoother_matches_wls_oracle_and_beats_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let n = 400;
    let x: Vec<f64> = (0..n)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let y: Vec<f64> = x.iter().map(|v| v.sin() + noise.sample(&mut rng)).collect();
    let span = 2.0 / 3.0;
    let fit = lowess(&x, &y, span).unwrap();
    let k = (span * n as f64).ceil() as usize;
    let mut mse = 0.0;
    for (&xi, &fi) in fit.x.iter().zip(&fit.fitted) {
        assert!((fi - wls_oracle(&x, &y, xi, k)).abs() < 1e-9);
        mse += (fi - xi.sin()).powi(2);
    }
    let mse = mse / n as f64;
    assert!(mse < 0.09, "mse {mse}");
}

#[test]
fn component_variable_curve_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 2000;
    let span = 2.0 / 3.0;
    let scores: Vec<f64> = (0..n)
        .map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
        .collect();

    let identity = component_variable_curve(&scores, &scores, span).unwrap();
    for (x, f) in identity.x.iter().zip(&identity.fitted) {
        assert!((x - f).abs() < 1e-8);
    }

    let sigma = 1.0;
    let uniform: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let null: Vec<f64> = (0..n)
        .map(|_| Normal::new(5.0, sigma).unwrap().sample(&mut rng))
        .collect();
    let flat = component_variable_curve(&uniform, &null, span).unwrap();
    let window = DEFAULT_WINDOW as f64;
    let (lo, hi) = flat
        .fitted
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi - lo < 3.0 * sigma / window.sqrt(), "range {}", hi - lo);

    let planted: Vec<f64> = scores
        .iter()
        .map(|s| s.tanh() + 0.3 * Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
        .collect();
    let curve = component_variable_curve(&scores, &planted, span).unwrap();
    let drops = curve.fitted.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(
        (drops as f64) < 0.05 * (n - 1) as f64,
        "{drops} decreasing steps"
    );
}

#[test]
fn planted_token_switches_at_the_median() {
    let n = 600;
    let scores: Vec<f64> = (0..n).map(|i| ((i * 37) % n) as f64).collect();
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let median = (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
    let tokens: Vec<Vec<&str>> = scores
        .iter()
        .map(|&s| {
            if s > median {
                vec!["Start", "T"]
            } else {
                vec!["Start"]
            }
        })
        .collect();
    let cohort = cohort_from(&tokens);
    let series = pattern_series(
        &cohort,
        &scores,
        &PatternSpec::ContainsToken { token: "T".into() },
        &PredicateRegistry::new(),
        SeriesOptions::default(),
    )
    .unwrap();
    assert_eq!(series.grid, quantile_grid(&scores, 40));
    for (&g, &v) in series.grid.iter().zip(&series.values) {
        if g < median - 60.0 {
            assert_eq!(v, 0.0);
        } else if g > median + 60.0 {
            assert_eq!(v, 1.0);
        }
    }
    let near = series.grid.iter().position(|&g| g > median).unwrap();
    assert!(series.values[near - 1] < 0.5 + 1e-12 || series.values[near] > 0.5 - 1e-12);
}

#[test]
fn small_cohorts_need_a_smaller_window() {
    let cohort = cohort_from(&vec![vec!["A"]; 50]);
    let scores: Vec<f64> = (0..50).map(f64::from).collect();
    let err = pattern_series(
        &cohort,
        &scores,
        &PatternSpec::ContainsToken { token: "A".into() },
        &PredicateRegistry::new(),
        SeriesOptions::default(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("smaller window"));
}

#[test]
fn rank_export_depends_only_on_scores_and_ids() {
    let tokens: Vec<Vec<&str>> = (0..120)
        .map(|i| {
            if i % 3 == 0 {
                vec!["A"]
            } else {
                vec!["B", "A"]
            }
        })
        .collect();
    let cohort = cohort_from(&tokens);
    let scores: Vec<f64> = (0..120).map(|i| ((i * 7) % 13) as f64).collect();
    let records = rank_export(&cohort, &scores, 50).unwrap();
    assert_eq!(
        records.iter().map(|r| r.rank).collect::<Vec<_>>(),
        [1, 51, 101]
    );

    let mut order: Vec<usize> = (0..120).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(4));
    let shuffled = Cohort::new(
        "item",
        order
            .iter()
            .map(|&i| cohort.sequences()[i].clone())
            .collect(),
    )
    .unwrap();
    let shuffled_scores: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    assert_eq!(
        rank_export(&shuffled, &shuffled_scores, 50).unwrap(),
        records
    );
    assert_eq!(rank_export(&cohort, &scores, 1).unwrap().len(), 120);
    assert!(rank_export(&cohort, &scores, 0).is_err());
}
