use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use neckfield::geometry::{build_geometry, BoundaryData};
use neckfield::harness::{log_space, sweep, SweepConfig};
use neckfield::mesh::{generate_mesh, MeshParams};
use neckfield::solver::{assemble_system, capacity_matrix, solve_constants, solve_subproblems, SolveOptions};
use neckfield::SolverBackend;
use neckfield_bench::{holder, m2};

fn geometry(c: &mut Criterion) {
    let g = m2(1e-3);
    c.bench_function("build_geometry/m2", |b| b.iter(|| build_geometry(&g).unwrap()));
}

fn mesh(c: &mut Criterion) {
    let mut group = c.benchmark_group("generate_mesh");
    for eps in [1e-2, 1e-3, 1e-4] {
        let g = m2(eps);
        group.bench_with_input(BenchmarkId::from_parameter(eps), &g, |b, g| {
            b.iter(|| generate_mesh(g, &MeshParams::default()).unwrap())
        });
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let g = holder(1e-3);
    let mesh = generate_mesh(&g, &MeshParams::default()).unwrap();
    let mut group = c.benchmark_group("solve");
    for backend in [SolverBackend::Cholesky, SolverBackend::Cg] {
        let opts = SolveOptions { backend, tol: 1e-10 };
        group.bench_function(format!("{backend:?}"), |b| {
            b.iter(|| {
                let sys = assemble_system(&mesh, opts).unwrap();
                let (v0, v1, v2) = solve_subproblems(&sys, &BoundaryData::LinearXn).unwrap();
                solve_constants(&capacity_matrix(&sys, &v0, &v1, &v2)).unwrap()
            })
        });
    }
    group.finish();
}

fn sweep_bench(c: &mut Criterion) {
    let cfg = SweepConfig::new(m2(1e-3), log_space(1e-4, 1e-2, 4));
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("m2/4pts", |b| b.iter(|| sweep(&cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, geometry, mesh, solve, sweep_bench);
criterion_main!(benches);
