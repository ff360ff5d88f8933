//! One optimizer step per cell kind at equal widths. Run with and without
//! `--no-default-features` to compare the parallel and sequential kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use charrnn::corpus::{CorpusPlan, SequenceBatch};
use charrnn::layers::CellKind;
use charrnn::model::{build_model, ModelConfig};
use charrnn::numerics::Rng;
use charrnn::trainer::{prepare_corpus, train_step, TrainPlan};

const FIXTURE: &str = include_str!("../fixtures/sample_script.txt");

fn bench_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("train_step");
    group.sample_size(10);
    let seq_len = 50;
    let (vocab, pairs) = prepare_corpus(FIXTURE, seq_len).unwrap();
    let plan = CorpusPlan {
        seq_len,
        batch_size: 16,
        shuffle_seed: 0,
    };
    let batch = SequenceBatch::from_pairs(&pairs[..plan.batch_size]).unwrap();
    for widths in [vec![128], vec![128, 64]] {
        for kind in CellKind::ALL {
            let mut config = ModelConfig::new(kind, widths.clone(), vocab.len());
            config.embed_dim = 64;
            config.seq_len = seq_len;
            config.batch_size = plan.batch_size;
            let mut model = build_model(config, vocab.clone()).unwrap();
            let train_plan = TrainPlan::default();
            let mut state = train_plan.optimizer(&model);
            let mut rng = Rng::new(0);
            let id = BenchmarkId::new(kind.name(), format!("{widths:?}"));
            group.bench_function(id, |b| {
                b.iter(|| train_step(&mut model, &batch, &train_plan, &mut state, &mut rng).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_steps);
criterion_main!(benches);
