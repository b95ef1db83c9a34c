use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use strata_core::{
    compress_corpus, gen_corpus, hac_compress, maxsim, search, CompressionConfig, Selector,
    SynthConfig,
};

fn corpus(n_pages: usize, tokens_per_level: Vec<usize>) -> strata_core::SynthCorpus {
    gen_corpus(&SynthConfig {
        n_pages,
        n_queries: 8,
        dim: 128,
        tokens_per_level,
        ..Default::default()
    })
    .unwrap()
}

fn bench_maxsim(c: &mut Criterion) {
    let data = corpus(1, vec![64, 128, 256, 384]);
    let q = &data.queries[0];
    let doc = data.pages[0].tokens().view();
    c.bench_function("maxsim/4x832x128", |b| {
        b.iter(|| maxsim(black_box(&q.view()), black_box(&doc)).unwrap())
    });
}

fn bench_search(c: &mut Criterion) {
    let data = corpus(256, vec![16, 32, 64, 96]);
    let compressed = compress_corpus(&data.pages, &CompressionConfig::new(64).unwrap()).unwrap();
    let mut group = c.benchmark_group("search");
    group.bench_function("raw/256 pages", |b| {
        b.iter(|| search(&data.queries[0], &data.pages, 5, Selector::Full).unwrap())
    });
    group.bench_function("budget64/256 pages", |b| {
        b.iter(|| search(&data.queries[0], &compressed, 5, Selector::Full).unwrap())
    });
    group.finish();
}

fn bench_hac(c: &mut Criterion) {
    let mut group = c.benchmark_group("hac");
    group.sample_size(10);
    for tokens in [208usize, 832] {
        let per_level = vec![
            tokens / 13,
            tokens * 2 / 13,
            tokens * 4 / 13,
            tokens * 6 / 13,
        ];
        let data = corpus(1, per_level);
        let view = data.pages[0].tokens().view();
        let cfg = CompressionConfig::new(64).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(tokens), &view, |b, v| {
            b.iter(|| hac_compress("p", v, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_maxsim, bench_search, bench_hac);
criterion_main!(benches);
