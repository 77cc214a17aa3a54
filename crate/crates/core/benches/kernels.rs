//! Parallel against sequential paths for the main kernels.
//!
//! Without the `parallel` feature both variants run the same code.

use std::f64::consts::{PI, SQRT_2};

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qpe_core::density::{build_locally_radial, pack_balls, StreamFunction, VerticalLines};
use qpe_core::gluing::{GluedSolution, GluingConfig};
use qpe_core::par;
use qpe_core::spectral::SpectralWorkspace;
use qpe_core::verify::{euler_residual, random_vorticity, solve_euler_2d, SolverOptions};
use qpe_core::{Grid, SampledField};

fn both<R>(c: &mut Criterion, group: &str, size: usize, f: impl Fn() -> R) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("parallel", size), |b| b.iter(&f));
    g.bench_function(BenchmarkId::new("sequential", size), |b| b.iter(|| par::sequential(&f)));
    g.finish();
}

fn spectral(c: &mut Criterion) {
    let n = 256;
    let grid = Grid::cube(2, n);
    let ws = SpectralWorkspace::new(&grid).unwrap();
    let f = SampledField::from_fn(grid, |x| (x[0] + 2.0 * x[1]).sin() * x[1].cos());
    both(c, "derivative", n, || ws.derivative(&f.values, 0));
}

fn solver(c: &mut Criterion) {
    let n = 128;
    let omega = random_vorticity(n, 3, 8).unwrap();
    let opts = SolverOptions::new(1e-3, 1e-2);
    both(c, "solver_10_steps", n, || solve_euler_2d(&omega, &opts).unwrap());
}

fn residual(c: &mut Criterion) {
    let n = 256;
    let config = GluingConfig::with_default_centers(2, 1, 0.15 * PI, vec![vec![1.0], vec![SQRT_2]]);
    let sol = GluedSolution::new(config).unwrap();
    let grid = Grid::cube(2, n);
    both(c, "glued_residual", n, || euler_residual(&sol, None, 0.37, &grid).unwrap());
}

fn density(c: &mut Criterion) {
    let lines = VerticalLines::equispaced(2).unwrap();
    let psi = StreamFunction::sin_sin();
    let (phi, _) = build_locally_radial(&psi, 8, &lines, 2.0).unwrap();
    both(c, "locally_radial_sample", 512, || phi.sample(512));
    c.bench_function("pack_balls/8", |b| b.iter(|| pack_balls(8, &lines).unwrap()));
}

criterion_group!(benches, spectral, solver, residual, density);
criterion_main!(benches);
