use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use vatts_bench::bench_tone;
use vatts_core::dsp::{self, F0Config, SpectralConfig};

fn dsp_benches(c: &mut Criterion) {
    let audio = bench_tone();
    let spec_cfg = SpectralConfig::default();
    let cep_cfg = SpectralConfig::for_cepstra();
    let f0_cfg = F0Config::default();

    c.bench_function("stft_1s_22k", |b| {
        b.iter(|| dsp::stft(black_box(&audio), &spec_cfg).unwrap())
    });
    c.bench_function("mel_cepstra_1s_22k", |b| {
        b.iter(|| dsp::mel_cepstra(black_box(&audio), &cep_cfg).unwrap())
    });
    c.bench_function("estimate_f0_1s_22k", |b| {
        b.iter(|| dsp::estimate_f0(black_box(&audio), &f0_cfg).unwrap())
    });
}

criterion_group!(benches, dsp_benches);
criterion_main!(benches);
