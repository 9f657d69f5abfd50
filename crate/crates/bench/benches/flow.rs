use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use warpflow::graph::graph_quantities;
use warpflow::{Integrator, Stencil, Stepper};
use warpflow_bench::sphere;

const SIZES: [usize; 3] = [16, 32, 64];

fn rhs(c: &mut Criterion) {
    let mut group = c.benchmark_group("rhs");
    for n in SIZES {
        let (_, op, phi) = sphere(n);
        let mut out = vec![0.0; phi.len()];
        group.throughput(Throughput::Elements(phi.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{}", 2 * n)), &phi, |b, phi| {
            b.iter(|| op.eval(black_box(phi), &mut out).unwrap())
        });
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for integrator in [Integrator::Rk2, Integrator::Rk4] {
        for n in SIZES {
            let (_, op, phi0) = sphere(n);
            let dt = op.stable_dt(&phi0, 0.9).unwrap();
            let mut stepper = Stepper::new(integrator, phi0.len());
            let mut phi = phi0.clone();
            group.throughput(Throughput::Elements(phi.len() as u64));
            group.bench_function(BenchmarkId::new(integrator.name(), format!("{n}x{}", 2 * n)), |b| {
                b.iter(|| {
                    phi.copy_from_slice(&phi0);
                    stepper.step(&op, &mut phi, dt).unwrap();
                })
            });
        }
    }
    group.finish();
}

fn geometry(c: &mut Criterion) {
    let mut group = c.benchmark_group("graph_quantities");
    for n in SIZES {
        let (metric, _, phi) = sphere(n);
        let st = Stencil::new(&metric.grid);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{}", 2 * n)), &phi, |b, phi| {
            b.iter(|| graph_quantities(black_box(phi), &metric, &st).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, rhs, step, geometry);
criterion_main!(benches);
