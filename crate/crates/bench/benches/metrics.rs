use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use vatts_bench::bench_tone;
use vatts_core::dsp::SpectralConfig;
use vatts_core::metrics;

fn metric_benches(c: &mut Criterion) {
    let reference = bench_tone();
    let mut estimate = bench_tone();
    for s in estimate.samples.iter_mut() {
        *s *= 0.8;
    }
    let cep_cfg = SpectralConfig::for_cepstra();

    c.bench_function("mcd13_1s_pair", |b| {
        b.iter(|| metrics::mcd13(black_box(&reference), &estimate, &cep_cfg).unwrap())
    });

    let costs: Vec<Vec<f64>> = (0..98)
        .map(|i| (0..98).map(|j| ((i * 98 + j) as f64 * 0.37).sin().abs()).collect())
        .collect();
    c.bench_function("dtw_98x98", |b| {
        b.iter(|| metrics::dtw_align(black_box(&costs)).unwrap())
    });
}

criterion_group!(benches, metric_benches);
criterion_main!(benches);
