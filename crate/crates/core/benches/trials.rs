use acdl_core::exec::Execution;
use acdl_core::harness::{run_point_chains, ChainSpec, SimConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn config(execution: Execution) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.noise.sir_db = 0.0;
    cfg.noise.eb_n0_db = 10.0;
    cfg.sweep.trial_symbols = 8;
    cfg.sweep.trials = 4;
    cfg.sweep.batch_size = 4;
    cfg.sweep.bits_min = 1;
    cfg.sweep.stop_at_errors = 0;
    cfg.sweep.execution = execution;
    cfg
}

fn trials(c: &mut Criterion) {
    let chains = [
        ChainSpec::Linear,
        ChainSpec::Acdl {
            beta: 3.0,
            substeps: 1,
            force_linear: false,
        },
    ];
    let mut group = c.benchmark_group("point_4_trials");
    group.sample_size(10);
    for execution in [Execution::Sequential, Execution::Parallel] {
        let cfg = config(execution);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{execution:?}")), &cfg, |b, cfg| {
            b.iter(|| run_point_chains(cfg, &chains, 10.0, 1).expect("point runs"))
        });
    }
    group.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);
