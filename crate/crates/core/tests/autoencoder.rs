use actseq::autoencoder::{
    decode, encode, encode_cohort, loss, loss_and_grad, train, AeConfig, AeParams, PaddedBatch,
    TrainedAutoencoder,
};
use actseq::{ActionSequence, Cohort};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_seqs(rng: &mut ChaCha8Rng, n: usize, alphabet: usize, max_len: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            (0..len).map(|_| rng.random_range(0..alphabet)).collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn backprop_matches_central_differences(seed in 0u64..1_000_000, dims in 2usize..5, alphabet in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = AeParams::random(alphabet, dims, 0.5, &mut rng);
        let batch = PaddedBatch::new(&random_seqs(&mut rng, 3, alphabet, 5));
        let (_, g) = loss_and_grad(&params, &batch).unwrap();
        let h = 1e-5;
        for (b, (name, analytic)) in g.blocks().into_iter().enumerate() {
            let mut num = vec![0.0; analytic.len()];
            for (i, slot) in num.iter_mut().enumerate() {
                let mut up = params.clone();
                up.blocks_mut()[b].1[i] += h;
                let mut down = params.clone();
                down.blocks_mut()[b].1[i] -= h;
                *slot = (loss(&up, &batch).unwrap() - loss(&down, &batch).unwrap()) / (2.0 * h);
            }
            let diff = analytic.iter().zip(&num).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
            let scale = analytic.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
            prop_assert!(diff / scale < 1e-5 || diff < 1e-9, "block {}: rel error {}", name, diff / scale);
        }
    }

    #[test]
    fn padding_width_does_not_change_loss(seed in 0u64..1_000_000, extra in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = AeParams::random(4, 3, 0.3, &mut rng);
        let seqs = random_seqs(&mut rng, 4, 4, 6);
        let tight = PaddedBatch::new(&seqs);
        let wide = PaddedBatch::with_width(&seqs, 6 + extra);
        let (a, ga) = loss_and_grad(&params, &tight).unwrap();
        let (b, gb) = loss_and_grad(&params, &wide).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(ga, gb);
    }
}

#[test]
fn loss_is_mean_negative_log_likelihood_of_decoded_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = AeParams::random(5, 4, 0.4, &mut rng);
    let seqs = random_seqs(&mut rng, 6, 5, 7);
    let mut nll = 0.0;
    let mut steps = 0;
    for s in &seqs {
        let p = decode(&params, &encode(&params, s).unwrap(), s.len()).unwrap();
        for (t, &tok) in s.iter().enumerate() {
            nll -= p[(t, tok)].ln();
        }
        steps += s.len();
    }
    let got = loss(&params, &PaddedBatch::new(&seqs)).unwrap();
    assert!((got - nll / steps as f64).abs() < 1e-12);
}

fn toy_cohort() -> Cohort {
    let a = ["Start", "Open", "Edit", "Save", "End"];
    let b = ["Start", "Help", "Back", "End"];
    let seqs = (0..40)
        .map(|i| {
            let t = if i % 2 == 0 { &a[..] } else { &b[..] };
            ActionSequence::from_tokens(&format!("u{i:02}"), "toy", t).unwrap()
        })
        .collect();
    Cohort::new("toy", seqs).unwrap()
}

#[test]
fn training_is_deterministic_and_checkpoints_round_trip() {
    let cohort = toy_cohort();
    let cfg = AeConfig {
        dims: 4,
        max_epochs: 6,
        batch_size: 8,
        seed: 9,
        ..Default::default()
    };
    let (m1, log1) = train(&cohort, &cfg).unwrap();
    let (m2, log2) = train(&cohort, &cfg).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(log1, log2);
    assert!(log1.best_epoch < log1.epochs.len());
    let best = log1.epochs[log1.best_epoch].val_loss;
    assert!(log1.epochs.iter().all(|r| r.val_loss >= best));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    m1.save(&path).unwrap();
    let back = TrainedAutoencoder::load(&path).unwrap();
    assert_eq!(back, m1);
    assert_eq!(
        encode_cohort(&back, &cohort).unwrap(),
        encode_cohort(&m1, &cohort).unwrap()
    );
}

#[test]
fn encoding_unseen_actions_fails() {
    let cohort = toy_cohort();
    let (model, _) = train(
        &cohort,
        &AeConfig {
            dims: 2,
            max_epochs: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let other = Cohort::new(
        "toy",
        vec![ActionSequence::from_tokens("x", "toy", &["Start", "Quit"]).unwrap()],
    )
    .unwrap();
    assert!(encode_cohort(&model, &other).is_err());
    let fm = encode_cohort(&model, &cohort).unwrap();
    assert_eq!(fm.columns(), ["ae_1", "ae_2"]);
}
