use actseq::mds::{classical_mds, mds_embed, stress, MdsConfig, MdsInit};
use actseq::oss::{dissimilarity_matrix, oss_distance, DissimilarityMatrix};
use actseq::{ActionSequence, Cohort};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn tokens() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["A", "B", "C", "D", "E"]), 1..15)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn seq(id: &str, t: Vec<String>) -> ActionSequence {
    ActionSequence::new(id, "item", t, None).unwrap()
}

/// Direct floating-point evaluation of the definition: positional shifts of
/// rank-paired occurrences of shared actions, scaled by the longer length,
/// plus every occurrence of an action the other sequence lacks.
fn oss_oracle(a: &[String], b: &[String]) -> f64 {
    let positions = |s: &[String], label: &String| -> Vec<usize> {
        s.iter()
            .enumerate()
            .filter(|(_, t)| *t == label)
            .map(|(i, _)| i + 1)
            .collect()
    };
    let longest = a.len().max(b.len()) as f64;
    let mut f = 0.0;
    let mut g = 0.0;
    let mut labels: Vec<&String> = a.iter().chain(b).collect();
    labels.sort();
    labels.dedup();
    for l in labels {
        let (x, y) = (positions(a, l), positions(b, l));
        if x.is_empty() || y.is_empty() {
            g += (x.len() + y.len()) as f64;
        } else {
            f += x
                .iter()
                .zip(&y)
                .map(|(i, j)| i.abs_diff(*j) as f64)
                .sum::<f64>()
                / longest;
        }
    }
    (f + g) / (a.len() + b.len()) as f64
}

proptest! {
    #[test]
    fn oss_is_a_normalised_symmetric_dissimilarity(a in tokens(), b in tokens()) {
        let (sa, sb) = (seq("a", a.clone()), seq("b", b.clone()));
        let d = oss_distance(&sa, &sb).unwrap();
        prop_assert_eq!(d, oss_distance(&sb, &sa).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(oss_distance(&sa, &sa).unwrap(), 0.0);
        prop_assert!((d - oss_oracle(&a, &b)).abs() < 1e-12, "{} vs oracle {}", d, oss_oracle(&a, &b));
    }

    #[test]
    fn matrix_entries_equal_pairwise_distances(seqs in prop::collection::vec(tokens(), 2..12)) {
        let list: Vec<ActionSequence> = seqs
            .into_iter()
            .enumerate()
            .map(|(i, t)| seq(&format!("s{i}"), t))
            .collect();
        let cohort = Cohort::new("item", list.clone()).unwrap();
        let d = dissimilarity_matrix(&cohort).unwrap();
        for i in 0..list.len() {
            for j in 0..list.len() {
                prop_assert_eq!(d.get(i, j), oss_distance(&list[i], &list[j]).unwrap());
            }
        }
    }
}

#[test]
fn oracle_agrees_with_hand_cases() {
    let s = |v: &[&str]| v.iter().map(|t| t.to_string()).collect::<Vec<_>>();
    assert_eq!(oss_oracle(&s(&["A", "B", "C"]), &s(&["A", "B", "C"])), 0.0);
    assert_eq!(oss_oracle(&s(&["A", "B"]), &s(&["C", "D"])), 1.0);
    assert_eq!(oss_oracle(&s(&["A", "B"]), &s(&["B", "A"])), 0.25);
    assert_eq!(oss_oracle(&s(&["A", "B"]), &s(&["A", "C"])), 0.5);
}

/// Euclidean distances rescaled into [0, 1].
fn euclidean(points: &DMatrix<f64>) -> DissimilarityMatrix {
    let n = points.nrows();
    let d = DMatrix::from_fn(n, n, |i, j| (points.row(i) - points.row(j)).norm());
    let d = &d / d.max();
    DissimilarityMatrix::new((0..n).map(|i| format!("p{i}")).collect(), d).unwrap()
}

#[test]
fn classical_init_recovers_planar_configuration_exactly() {
    let pts = DMatrix::from_row_slice(
        6,
        2,
        &[0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 3.0, 1.0, -1.0, 2.5, 2.0, -2.0],
    );
    let d = euclidean(&pts);
    let x = classical_mds(&d, 2).unwrap();
    assert!(stress(&d, &x).unwrap() < 1e-18);
    let emb = mds_embed(
        &d,
        &MdsConfig {
            dims: 2,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(emb.final_stress < 1e-18);
}

#[test]
fn smacof_stress_never_increases() {
    let pts = DMatrix::from_fn(40, 4, |i, j| {
        ((i * 7 + j * 13) % 11) as f64 + (i as f64 * 0.37 + j as f64).sin()
    });
    let d = euclidean(&pts);
    for init in [MdsInit::Classical, MdsInit::Random] {
        for dims in [1, 2, 3] {
            let emb = mds_embed(
                &d,
                &MdsConfig {
                    dims,
                    init,
                    seed: 5,
                    max_iter: 200,
                    rel_tol: 1e-9,
                },
            )
            .unwrap();
            for w in emb.stress_history.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-12),
                    "{init:?} dims {dims}: {} -> {}",
                    w[0],
                    w[1]
                );
            }
            assert_eq!(emb.final_stress, *emb.stress_history.last().unwrap());
            assert_eq!(emb.coordinates.shape(), (40, dims));
        }
    }
}

#[test]
fn embedding_is_deterministic_for_a_seed() {
    let pts = DMatrix::from_fn(15, 3, |i, j| (i as f64 * 1.3 + j as f64 * 0.7).cos());
    let d = euclidean(&pts);
    let cfg = MdsConfig {
        dims: 2,
        init: MdsInit::Random,
        seed: 11,
        ..Default::default()
    };
    assert_eq!(mds_embed(&d, &cfg).unwrap(), mds_embed(&d, &cfg).unwrap());
}
