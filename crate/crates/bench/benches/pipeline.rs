use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use converse_core::adjacency::{normalize, AdjacencyMatrix, GcnVariant};
use converse_core::conversation::ConversationThread;
use converse_core::model::ModelConfig;
use converse_core::synth::{generate_synthetic, SyntheticSpec};
use converse_core::train::{train, TrainConfig, TrainMode};

fn corpus_of(n_threads: usize) -> converse_core::corpus::Corpus {
    generate_synthetic(&SyntheticSpec {
        n_threads,
        tweets_min: 5,
        tweets_max: 10,
        seed: 7,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

fn bench_normalization(c: &mut Criterion) {
    let corpus = corpus_of(64);
    let trees: Vec<_> = corpus.threads.iter().map(|t| t.tree().unwrap()).collect();
    c.bench_function("normalize customized (64 threads)", |b| {
        b.iter(|| {
            for tree in &trees {
                let adj = AdjacencyMatrix::from_tree(tree);
                black_box(normalize(&adj, GcnVariant::Customized).unwrap());
            }
        })
    });
}

fn bench_predict(c: &mut Criterion) {
    let corpus = corpus_of(8);
    let threads: Vec<&ConversationThread> = corpus.threads.iter().collect();
    let config = TrainConfig {
        max_epochs: 1,
        dropout: 0.0,
        patience: None,
        ..TrainConfig::default()
    };
    let outcome = train(&threads, None, &ModelConfig::small(), &config, None).unwrap();
    c.bench_function("predict thread (small model)", |b| {
        b.iter(|| black_box(outcome.model.predict(&corpus.threads[0]).unwrap()))
    });
}

fn bench_train_epoch(c: &mut Criterion) {
    let corpus = corpus_of(20);
    let threads: Vec<&ConversationThread> = corpus.threads.iter().collect();
    let config = TrainConfig {
        mode: TrainMode::Joint,
        max_epochs: 1,
        dropout: 0.0,
        learning_rate: 0.01,
        patience: None,
        ..TrainConfig::default()
    };
    c.bench_function("train epoch (20 threads, small model)", |b| {
        b.iter(|| black_box(train(&threads, None, &ModelConfig::small(), &config, None).unwrap()))
    });
}

criterion_group!(benches, bench_normalization, bench_predict, bench_train_epoch);
criterion_main!(benches);
