use actseq::reduce::{pca_fit_transform, pls_fit, pls_scores, rmsep_curve};
use actseq::FeatureMatrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn features(x: DMatrix<f64>) -> FeatureMatrix {
    let ids = (0..x.nrows()).map(|i| format!("r{i:04}")).collect();
    FeatureMatrix::with_prefix(ids, "x", x).unwrap()
}

fn gaussian(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng))
}

fn centred(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    c
}

#[test]
fn pca_two_columns_matches_closed_form_eigenpairs() {
    let mut x = gaussian(200, 2, 1);
    for i in 0..200 {
        x[(i, 1)] = 0.8 * x[(i, 0)] + 0.3 * x[(i, 1)];
    }
    let c = centred(&x);
    let n1 = 199.0;
    let (a, b, d) = (
        c.column(0).norm_squared() / n1,
        c.column(0).dot(&c.column(1)) / n1,
        c.column(1).norm_squared() / n1,
    );
    let disc = ((a - d).powi(2) / 4.0 + b * b).sqrt();
    let (l1, l2) = ((a + d) / 2.0 + disc, (a + d) / 2.0 - disc);
    let v1 = DVector::from_vec(vec![b, l1 - a]).normalize();

    let (model, scores) = pca_fit_transform(&features(x)).unwrap();
    assert!((model.explained_variance[0] - l1).abs() < 1e-10);
    assert!((model.explained_variance[1] - l2).abs() < 1e-10);
    assert!((model.loadings.column(0).dot(&v1).abs() - 1.0).abs() < 1e-10);
    let t = scores.values();
    assert!(t.column(0).dot(&t.column(1)).abs() < 1e-8);
    assert!((t.column(0).norm_squared() / n1 - l1).abs() < 1e-9);
}

#[test]
fn first_pls_weight_is_normalised_cross_product() {
    let x = gaussian(40, 6, 2);
    let y: Vec<f64> = (0..40)
        .map(|i| x[(i, 0)] - x[(i, 4)] + 0.1 * i as f64)
        .collect();
    let model = pls_fit(&features(x.clone()), &y, 3).unwrap();
    let yc = DVector::from_iterator(40, y.iter().map(|v| v - y.iter().sum::<f64>() / 40.0));
    let w = (centred(&x).transpose() * yc).normalize();
    let diff = (model.weights.column(0) - &w)
        .amax()
        .min((model.weights.column(0) + &w).amax());
    assert!(diff < 1e-10);
}

#[test]
fn deflation_steps_match_direct_computation() {
    let x = gaussian(30, 5, 3);
    let y: Vec<f64> = (0..30)
        .map(|i| x[(i, 1)] + 0.5 * x[(i, 2)] * x[(i, 3)])
        .collect();
    let model = pls_fit(&features(x.clone()), &y, 4).unwrap();
    let mut e = centred(&x);
    let ybar = y.iter().sum::<f64>() / 30.0;
    let mut f = DVector::from_iterator(30, y.iter().map(|v| v - ybar));
    for a in 0..model.n_extracted() {
        let mut w = e.transpose() * &f;
        w.normalize_mut();
        let t = &e * &w;
        let tt = t.norm_squared();
        let p = e.transpose() * &t / tt;
        let q = f.dot(&t) / tt;
        let sign = if model.weights.column(a).dot(&w) < 0.0 {
            -1.0
        } else {
            1.0
        };
        assert!(
            (model.weights.column(a) * sign - &w).amax() < 1e-9,
            "weight {a}"
        );
        assert!(
            (model.scores.column(a) * sign - &t).amax() < 1e-9,
            "score {a}"
        );
        assert!(
            (model.y_loadings[a] * sign - q).abs() < 1e-9,
            "y loading {a}"
        );
        e -= &t * p.transpose();
        f -= &t * q;
    }
}

#[test]
fn exact_signal_in_an_uncorrelated_column_needs_one_component() {
    let q = centred(&gaussian(60, 8, 4)).qr().q();
    let x = q.clone() * 10.0;
    let y: Vec<f64> = (0..60).map(|i| 3.0 * x[(i, 0)] + 7.0).collect();
    let model = pls_fit(&features(x), &y, 5).unwrap();
    assert_eq!(model.n_components, 1);
    let yc = DVector::from_iterator(60, y.iter().map(|v| v - 7.0));
    let t = model.scores.column(0);
    let r = &yc - t * (t.dot(&yc) / t.norm_squared());
    assert!(r.norm() / yc.norm() < 1e-8);
}

#[test]
fn scores_of_training_data_equal_stored_scores() {
    let x = gaussian(25, 4, 5);
    let y: Vec<f64> = (0..25).map(|i| x[(i, 0)] + x[(i, 3)]).collect();
    let fm = features(x);
    let model = pls_fit(&fm, &y, 4).unwrap().with_components(3).unwrap();
    let s = pls_scores(&model, &fm).unwrap();
    assert!((s.values() - model.scores.columns(0, 3)).amax() < 1e-10);
    assert_eq!(s.columns(), ["pls_1", "pls_2", "pls_3"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn insample_rmsep_is_non_increasing(seed in 0u64..10_000, n in 8usize..40, k in 2usize..6) {
        let x = gaussian(n, k, seed);
        let y: Vec<f64> = gaussian(n, 1, seed + 1).iter().copied().collect();
        let model = pls_fit(&features(x.clone()), &y, k.min(n - 1)).unwrap();
        let curve = rmsep_curve(&model, &x, &y).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10);
        }
        for (a, b) in curve.iter().zip(&model.rmsep) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_shifts_leave_scores_unchanged(seed in 0u64..10_000, shift in -100.0..100.0f64) {
        let x = gaussian(20, 3, seed);
        let y: Vec<f64> = (0..20).map(|i| x[(i, 0)] - x[(i, 2)] + 0.2 * x[(i, 1)]).collect();
        let base = pls_fit(&features(x.clone()), &y, 3).unwrap();
        let xs = x.add_scalar(shift);
        let ys: Vec<f64> = y.iter().map(|v| v + 2.0 * shift).collect();
        let moved = pls_fit(&features(xs.clone()), &ys, 3).unwrap();
        prop_assert_eq!(base.n_extracted(), moved.n_extracted());
        prop_assert!((&base.scores - &moved.scores).amax() < 1e-8);
        let p = moved.predict(&xs, moved.n_extracted()).unwrap();
        let q = base.predict(&x, base.n_extracted()).unwrap();
        prop_assert!((p - q).add_scalar(-2.0 * shift).amax() < 1e-8);
    }
}
