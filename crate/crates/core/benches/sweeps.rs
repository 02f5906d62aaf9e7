//! Sequential against parallel execution on the batch-heavy sweeps.
//!
//! Build with `--no-default-features` to see the fallback: both variants
//! then run sequentially.

use std::f64::consts::SQRT_2;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cosymlab::catalog::{self, product_example};
use cosymlab::obstruct::{surface_integral, MeshedSurface};
use cosymlab::phase::volume_transport;
use cosymlab::section::{verify_global, DEFAULT_T_MAX};
use cosymlab::tischler::{rationalize, PeriodVector};
use cosymlab::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn global_section(c: &mut Criterion) {
    let ex = product_example(catalog::t3_seed()).unwrap();
    let samples = ex.surface_samples(256, 0);
    let mut g = c.benchmark_group("verify_global_t3_256");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| black_box(verify_global(&ex.system, &ex.section, &samples, DEFAULT_T_MAX, 1e-10, exec)))
        });
    }
    g.finish();
}

fn volume(c: &mut Criterion) {
    let sys = catalog::pendulum();
    let mut g = c.benchmark_group("volume_transport_pendulum");
    g.sample_size(10);
    for per_axis in [50, 100] {
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, per_axis * per_axis), &per_axis, |b, &n| {
                b.iter(|| black_box(volume_transport(&sys, &[0.5, -0.5], &[1.5, 0.5], 1.0, n, 1e-10, exec).unwrap()))
            });
        }
    }
    g.finish();
}

fn denominators(c: &mut Criterion) {
    // no denominator below the cap works, so the whole range is scanned
    let pv = PeriodVector {
        values: vec![1.0, SQRT_2, 3f64.sqrt(), 5f64.sqrt()],
        cycles: vec![String::new(); 4],
        errors: vec![0.0; 4],
    };
    let mut g = c.benchmark_group("rationalize_exhaustive_1e5");
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| black_box(rationalize(&pv, 1e-9, 100_000, exec))));
    }
    g.finish();
}

fn stokes(c: &mut Criterion) {
    let sys = catalog::cotangent_r4();
    let sphere = MeshedSurface::sphere_cap(1.0, std::f64::consts::PI);
    let mut g = c.benchmark_group("surface_integral_sphere_256");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| black_box(surface_integral(&sys.omega, &sphere, exec).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, global_section, volume, denominators, stokes);
criterion_main!(benches);
