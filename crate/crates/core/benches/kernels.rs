use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use charrnn::numerics::kernels::{self, Mat};
use charrnn::numerics::Rng;

fn random(len: usize, rng: &mut Rng) -> Vec<f64> {
    (0..len).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

// Shapes from the training loop: input projection of a whole batch, one
// recurrent step, and a weight gradient.
const SHAPES: [(&str, usize, usize, usize); 3] = [
    ("input_projection", 6400, 1024, 256),
    ("recurrent_step", 64, 1024, 256),
    ("weight_grad", 256, 1024, 6400),
];

fn bench_gemm(c: &mut Criterion) {
    let mut group = c.benchmark_group("gemm_nn");
    group.sample_size(10);
    let mut rng = Rng::new(1);
    for (name, m, n, k) in SHAPES {
        let a = random(m * k, &mut rng);
        let b = random(k * n, &mut rng);
        let mut out = vec![0.0; m * n];
        group.throughput(Throughput::Elements((2 * m * n * k) as u64));
        group.bench_with_input(BenchmarkId::new("sequential", name), &(), |bench, _| {
            bench.iter(|| kernels::seq::gemm_nn(m, n, k, Mat::new(&a, k), Mat::new(&b, n), black_box(&mut out), n, false))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", name), &(), |bench, _| {
            bench.iter(|| kernels::par::gemm_nn(m, n, k, Mat::new(&a, k), Mat::new(&b, n), black_box(&mut out), n, false))
        });
    }
    group.finish();
}

fn bench_gemm_tn(c: &mut Criterion) {
    let mut group = c.benchmark_group("gemm_tn");
    group.sample_size(10);
    let mut rng = Rng::new(2);
    let (m, n, k) = (256, 1024, 6400);
    let a = random(k * m, &mut rng);
    let b = random(k * n, &mut rng);
    let mut out = vec![0.0; m * n];
    group.bench_function("sequential", |bench| {
        bench.iter(|| kernels::seq::gemm_tn(m, n, k, Mat::new(&a, m), Mat::new(&b, n), black_box(&mut out), n, false))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |bench| {
        bench.iter(|| kernels::par::gemm_tn(m, n, k, Mat::new(&a, m), Mat::new(&b, n), black_box(&mut out), n, false))
    });
    group.finish();
}

criterion_group!(benches, bench_gemm, bench_gemm_tn);
criterion_main!(benches);
