use std::time::Duration;

use alignmem::rotor::{MoleculeSpec, PulseSpec, RotorSolver};
use alignmem::{units, Execution, TimeGrid};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn thermal_average(c: &mut Criterion) {
    let solver = RotorSolver::new(MoleculeSpec::co2(), vec![PulseSpec::from_lab(50.0, 50.0, 5e13).unwrap()]);
    let grid = TimeGrid::spanning(0.0, units::fs_to_au(22_000.0), units::fs_to_au(10.0)).unwrap();
    let mut group = c.benchmark_group("thermal_alignment");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| solver.thermal_alignment(295.0, grid, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, thermal_average);
criterion_main!(benches);
