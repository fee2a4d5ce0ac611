//! Fixtures shared by the benchmarks.

use actseq::autoencoder::PaddedBatch;
use actseq::{ActionSequence, Cohort};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` random sequences over an alphabet of `alphabet` actions with lengths
/// in `1..=max_len`.
pub fn random_cohort(n: usize, alphabet: usize, max_len: usize, seed: u64) -> Cohort {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seqs = (0..n)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            let tokens = (0..len)
                .map(|_| format!("a{}", rng.random_range(0..alphabet)))
                .collect();
            ActionSequence::new(format!("s{i:05}"), "bench", tokens, None).expect("valid sequence")
        })
        .collect();
    Cohort::new("bench", seqs).expect("valid cohort")
}

/// Padded batch of the first `batch` sequences of `cohort`.
pub fn batch_of(cohort: &Cohort, batch: usize) -> PaddedBatch {
    let idx = cohort.indexed();
    PaddedBatch::new(&idx[..batch.min(idx.len())])
}
