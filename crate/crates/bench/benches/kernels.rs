use actseq::autoencoder::{loss_and_grad, AeParams};
use actseq::mds::{mds_embed, MdsConfig};
use actseq::oss::dissimilarity_matrix;
use actseq_bench::{batch_of, random_cohort};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn oss_matrix(c: &mut Criterion) {
    let mut g = c.benchmark_group("oss_matrix");
    g.sample_size(10);
    for n in [100, 400] {
        let cohort = random_cohort(n, 20, 40, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &cohort, |b, cohort| {
            b.iter(|| dissimilarity_matrix(cohort).unwrap())
        });
    }
    g.finish();
}

fn smacof(c: &mut Criterion) {
    let mut g = c.benchmark_group("smacof");
    g.sample_size(10);
    let d = dissimilarity_matrix(&random_cohort(300, 15, 30, 2)).unwrap();
    for dims in [5, 20] {
        let cfg = MdsConfig {
            max_iter: 50,
            rel_tol: 0.0,
            ..MdsConfig::with_dims(dims)
        };
        g.bench_with_input(BenchmarkId::from_parameter(dims), &cfg, |b, cfg| {
            b.iter(|| mds_embed(&d, cfg).unwrap())
        });
    }
    g.finish();
}

fn ae_gradient(c: &mut Criterion) {
    let mut g = c.benchmark_group("ae_gradient");
    let cohort = random_cohort(64, 12, 30, 3);
    let batch = batch_of(&cohort, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for dims in [16, 64] {
        let params = AeParams::random(cohort.vocabulary().len(), dims, 0.08, &mut rng);
        g.bench_with_input(BenchmarkId::from_parameter(dims), &params, |b, p| {
            b.iter(|| loss_and_grad(p, &batch).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, oss_matrix, smacof, ae_gradient);
criterion_main!(benches);
