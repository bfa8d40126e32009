use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gefa::fusion::{Ablation, Model, ModelConfig, ModelDims, ModelKind};
use gefa::par::Execution;
use gefa::synth::{toy_data, ToySpec};
use gefa::traineval::batch_gradient;

const EMBED: usize = 16;

fn batch(c: &mut Criterion) {
    let toy = toy_data(&ToySpec {
        drugs: 8,
        targets: 4,
        fragments: (3, 6),
        residues: (80, 160),
        embedding_dim: EMBED,
        seed: 1,
        ..ToySpec::default()
    });
    let indices: Vec<usize> = (0..toy.prepared.samples.len()).collect();
    let mut group = c.benchmark_group("batch_gradient");
    group.sample_size(10);
    for kind in [ModelKind::Gefa, ModelKind::Glfa] {
        let config = ModelConfig {
            kind,
            dims: ModelDims {
                protein_in: EMBED + 6,
                hidden: 64,
                attention: 32,
                predictor: [128, 32],
                ..ModelDims::default()
            },
            ablation: Ablation::default(),
        };
        let model = Model::new(config, 0).expect("model");
        for execution in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(
                BenchmarkId::new(kind.to_string(), execution),
                &execution,
                |b, &e| {
                    b.iter(|| {
                        batch_gradient(&model, &toy.prepared, black_box(&indices), e)
                            .expect("gradient")
                    })
                },
            );
        }
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
