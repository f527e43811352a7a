use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use visionfuse_core::analysis::{topk_iou, TokenScoreVector};
use visionfuse_core::fusion::{apply_pruning, concat_tokens, DropScope, PruningPolicy, Segment};
use visionfuse_core::rng::SplitMix64;
use visionfuse_core::toy::{forward, init_base_weights, Matrix, ToyConfig};

fn toy_forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("toy_forward");
    for len in [16usize, 64] {
        let config = ToyConfig {
            model_dim: 32,
            num_layers: 4,
            num_heads: 4,
            vocab_size: 64,
            max_seq: 128,
            encoders: vec![],
            image_dim: 1,
            use_positions: true,
        };
        let weights = init_base_weights(&config, 3).unwrap();
        let mut rng = SplitMix64::new(len as u64);
        let vision = Matrix::from_vec(len - 4, 32, (0..(len - 4) * 32).map(|_| rng.uniform(-1.0, 1.0) as f32).collect());
        group.bench_with_input(BenchmarkId::from_parameter(len), &vision, |b, v| {
            b.iter(|| forward(black_box(&weights), &config, v, &[1, 2, 3, 4]).unwrap())
        });
    }
    group.finish();
}

fn analysis(c: &mut Criterion) {
    let mut rng = SplitMix64::new(9);
    let mut scores = |n: usize| TokenScoreVector::new((0..n).map(|_| rng.next_f64()).collect(), "s").unwrap();
    let (a, b) = (scores(2880), scores(2880));
    c.bench_function("topk_iou/2880", |bench| bench.iter(|| topk_iou(black_box(&a), black_box(&b), 5.0).unwrap()));

    let seq = concat_tokens(vec![Segment::vision("mgm", 2880), Segment::vision("slime", 2240).with_local_range(576, 2240)], 56);
    let policy = PruningPolicy::random_drop(1000, DropScope::LocalOnly, 1);
    c.bench_function("random_drop/1000", |bench| bench.iter(|| apply_pruning(black_box(&seq), &policy).unwrap()));
}

criterion_group!(benches, toy_forward, analysis);
criterion_main!(benches);
