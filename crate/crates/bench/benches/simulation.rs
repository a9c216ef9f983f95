use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qaoa_bench::chain_model;
use qaoa_core::noise::{simulate_noisy, NoiseModel};
use qaoa_core::simulator::{build_qaoa_circuit, evolve_direct, QaoaAngles};

fn bench_statevector(c: &mut Criterion) {
    let mut group = c.benchmark_group("statevector_p2");
    for n in [2usize, 8, 12] {
        let model = chain_model(n);
        let angles = QaoaAngles::new(vec![0.7, 0.4], vec![0.3, 0.5]).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| build_qaoa_circuit(&model, &angles).run().unwrap())
        });
    }
    group.finish();
}

fn bench_direct_evolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("direct_evolution_p2");
    for n in [2usize, 8, 12] {
        let model = chain_model(n);
        let angles = QaoaAngles::new(vec![0.7, 0.4], vec![0.3, 0.5]).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| evolve_direct(&model, &angles).unwrap())
        });
    }
    group.finish();
}

fn bench_noisy_density_matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("noisy_density_matrix_p2");
    for n in [2usize, 4, 6] {
        let model = chain_model(n);
        let angles = QaoaAngles::new(vec![0.7, 0.4], vec![0.3, 0.5]).unwrap();
        let circuit = build_qaoa_circuit(&model, &angles);
        let noise = NoiseModel::new(vec![0.9986; n], 0.986, vec![0.9; n]).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| simulate_noisy(&circuit, &noise).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_statevector,
    bench_direct_evolution,
    bench_noisy_density_matrix
);
criterion_main!(benches);
