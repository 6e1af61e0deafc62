use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use billiard_bench::perturbed_circle;
use billiard_core::dynamics::{billiard_step, iterate_map, PhasePoint};
use billiard_core::fitting::{closest_ellipse, elliptic_projection, fit_ellipse, reexpress};
use billiard_core::geometry::{DeformedCurve, EllipseSpec};
use billiard_core::orbits::{find_periodic_orbit, solve_chain};

fn bench_billiard_step(c: &mut Criterion) {
    let curve = perturbed_circle(0.004);
    c.bench_function("billiard_step", |b| {
        b.iter(|| billiard_step(black_box(&curve), PhasePoint::new(0.3, 1.4)).unwrap())
    });
    c.bench_function("iterate_map_100", |b| {
        b.iter(|| iterate_map(black_box(&curve), PhasePoint::new(0.3, 1.4), 100).unwrap())
    });
}

fn bench_orbit_solvers(c: &mut Criterion) {
    let curve = perturbed_circle(0.002);
    c.bench_function("solve_chain_q8", |b| {
        b.iter(|| solve_chain(black_box(&curve), 8, 0.1).unwrap())
    });
    c.bench_function("find_periodic_orbit_q5", |b| {
        b.iter(|| find_periodic_orbit(black_box(&curve), 5, 0.0).unwrap())
    });
}

fn bench_fitting(c: &mut Criterion) {
    let base = EllipseSpec::unit_circle();
    let domain = EllipseSpec::axis_aligned(1.015, 1.0 / 1.015).unwrap();
    let n = reexpress(&DeformedCurve::ellipse(domain), &base).unwrap();
    let omega = DeformedCurve::new(base, n.clone()).unwrap();

    c.bench_function("reexpress", |b| {
        b.iter(|| reexpress(black_box(&omega), black_box(&base)).unwrap())
    });
    c.bench_function("fit_ellipse", |b| {
        let (ell, _) = elliptic_projection(&n);
        b.iter(|| fit_ellipse(black_box(&base), black_box(&ell)).unwrap())
    });
    c.bench_function("closest_ellipse", |b| {
        b.iter(|| closest_ellipse(black_box(&omega), 10, 1e-8).unwrap())
    });
}

criterion_group!(benches, bench_billiard_step, bench_orbit_solvers, bench_fitting);
criterion_main!(benches);
