use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nlgreen::analysis::uniform_grid;
use nlgreen::ode::{integrate_fundamental_system, DEFAULT_TOL};
use nlgreen::{sign_region_scan, NonlocalGreen, NonlocalOptions, PeriodicFamily, ScanOptions, SolveOptions};
use nlgreen_bench::{periodic, second_order};

fn fundamental_system(c: &mut Criterion) {
    let spec = second_order([0.3, -0.2]);
    c.bench_function("fundamental_system/order2", |b| {
        b.iter(|| integrate_fundamental_system(black_box(&spec.problem), DEFAULT_TOL).unwrap())
    });
}

fn build(c: &mut Criterion) {
    let opts = NonlocalOptions::default();
    let p = periodic(1.0, 0.5);
    c.bench_function("build/periodic", |b| b.iter(|| NonlocalGreen::build(black_box(&p), opts).unwrap()));
    let s = second_order([0.3, -0.2]);
    c.bench_function("build/second_order", |b| b.iter(|| NonlocalGreen::build(black_box(&s), opts).unwrap()));
}

fn sample(c: &mut Criterion) {
    let green = NonlocalGreen::build(&second_order([0.3, -0.2]), NonlocalOptions::default()).unwrap();
    let grid = uniform_grid(0.0, 1.0, 41);
    c.bench_function("sample_grid/41x41", |b| {
        b.iter(|| {
            // fresh δ so the slice cache of C_j(g(·, s)) is the only reuse
            let g = green.with_deltas(&[0.3, -0.2]).unwrap();
            g.sample_grid(&grid, &grid).unwrap()
        })
    });
}

fn solve(c: &mut Criterion) {
    let green = NonlocalGreen::build(&second_order([0.3, -0.2]), NonlocalOptions::default()).unwrap();
    let sigma = |t: f64| t.exp() * (3.0 * t).cos();
    c.bench_function("solve/256", |b| b.iter(|| green.solve(&sigma, SolveOptions::default()).unwrap()));
}

fn scan(c: &mut Criterion) {
    let family = PeriodicFamily::default();
    let mut group = c.benchmark_group("scan");
    group.sample_size(10);
    for workers in [1, 4] {
        let opts = ScanOptions {
            workers,
            ..ScanOptions::default()
        };
        group.bench_function(format!("periodic_21x27_w{workers}"), |b| {
            b.iter(|| sign_region_scan(&family, (-3.0, 3.0), (-4.0, 4.0), (21, 27), opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fundamental_system, build, sample, solve, scan);
criterion_main!(benches);
