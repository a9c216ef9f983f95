use criterion::{criterion_group, criterion_main, Criterion};
use qaoa_bench::chain_model;
use qaoa_core::estimator::{evaluate_angles, sample, Backend, Shots};
use qaoa_core::harness::{EvalSetup, QaoaObjective};
use qaoa_core::optimizers::{cma_es, nelder_mead, FnObjective, OptimizerConfig};
use qaoa_core::simulator::QaoaAngles;

fn bench_sampling(c: &mut Criterion) {
    let probs = vec![0.4, 0.3, 0.2, 0.1];
    c.bench_function("sample_5000_shots_n2", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed = seed.wrapping_add(1);
            sample(&probs, 5000, seed).unwrap()
        })
    });
}

fn bench_objective_evaluation(c: &mut Criterion) {
    let model = chain_model(2);
    let angles = QaoaAngles::new(vec![0.7, 0.4], vec![0.3, 0.5]).unwrap();
    c.bench_function("evaluate_angles_ideal_5000_shots", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed = seed.wrapping_add(1);
            evaluate_angles(
                &model,
                &angles,
                &Backend::Ideal,
                Shots::Counted(5000),
                None,
                seed,
            )
            .unwrap()
        })
    });
}

fn bench_optimizer_runs(c: &mut Criterion) {
    let sphere = |x: &[f64]| -> f64 { x.iter().map(|v| v * v).sum() };
    let config = OptimizerConfig {
        max_calls: 200,
        convergence_threshold: -1.0,
        seed: 7,
    };
    c.bench_function("nelder_mead_sphere_d4_200_calls", |b| {
        b.iter(|| {
            let mut obj = FnObjective::new(4, sphere);
            nelder_mead(&mut obj, &[1.0; 4], &config).unwrap()
        })
    });
    c.bench_function("cma_es_sphere_d4_200_calls", |b| {
        b.iter(|| {
            let mut obj = FnObjective::new(4, sphere);
            cma_es(&mut obj, &[1.0; 4], &config).unwrap()
        })
    });
}

fn bench_qaoa_objective_run(c: &mut Criterion) {
    let model = chain_model(2);
    let solutions = vec![];
    let setup = EvalSetup::ideal_sampled(5000);
    let config = OptimizerConfig {
        max_calls: 100,
        convergence_threshold: -0.95,
        seed: 3,
    };
    c.bench_function("nelder_mead_qaoa_p2_100_calls", |b| {
        b.iter(|| {
            let mut obj = QaoaObjective::new(&model, &solutions, 2, &setup, 11).unwrap();
            nelder_mead(&mut obj, &[0.7, 0.4, 0.3, 0.5], &config).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_sampling,
    bench_objective_evaluation,
    bench_optimizer_runs,
    bench_qaoa_objective_run
);
criterion_main!(benches);
