use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use finsler_core::domain::{diameter, inscribed_wulff_radius, triangulate, ConvexPolygon};
use finsler_core::dual::{dual_value, numerical_dual};
use finsler_core::eigen::{
    solve_first_eigen, Assembly, BoundaryCondition, EigenProblem, SolverOptions,
};
use finsler_core::model1d::{match_model, solve_model, OneDModel};
use finsler_core::{Norm, NormSpec};

fn norms() -> Vec<NormSpec> {
    vec![
        NormSpec::Euclidean,
        NormSpec::pnorm(1.5),
        NormSpec::pnorm(4.0),
        NormSpec::quadratic(vec![vec![2.0, 0.5], vec![0.5, 1.0]]),
    ]
}

fn energy(c: &mut Criterion) {
    let mesh = triangulate(&ConvexPolygon::unit_square(), 6).unwrap();
    let asm = Assembly::new(&mesh).unwrap();
    let u: Vec<f64> = mesh
        .nodes
        .iter()
        .map(|p| (3.0 * p[0]).cos() * (2.0 * p[1]).sin() + 0.1)
        .collect();
    let mut grad = vec![0.0; u.len()];
    let mut g = c.benchmark_group("energy_gradient_level6");
    for spec in norms() {
        let norm = Norm::new(&spec).unwrap();
        g.bench_function(spec.label(), |b| {
            b.iter(|| asm.energy(&norm, black_box(&u), Some(&mut grad)))
        });
    }
    g.finish();
}

fn dual(c: &mut Criterion) {
    let x = [0.7, -1.3];
    let mut g = c.benchmark_group("dual_norm");
    for spec in norms() {
        let norm = Norm::new(&spec).unwrap();
        g.bench_function(BenchmarkId::new("closed", spec.label()), |b| {
            b.iter(|| dual_value(&norm, black_box(&x)))
        });
        g.bench_function(BenchmarkId::new("numerical", spec.label()), |b| {
            b.iter(|| numerical_dual(&norm, black_box(&x), 1))
        });
    }
    g.finish();
}

fn geometry(c: &mut Criterion) {
    let poly = ConvexPolygon::regular(64, 1.0).unwrap();
    let spec = NormSpec::pnorm(3.0);
    c.bench_function("diameter_64gon_p3", |b| {
        b.iter(|| diameter(black_box(&poly), &spec).unwrap())
    });
    c.bench_function("inradius_64gon_p3", |b| {
        b.iter(|| inscribed_wulff_radius(black_box(&poly), &spec).unwrap())
    });
}

fn model(c: &mut Criterion) {
    let mut g = c.benchmark_group("model1d");
    for a in [0.0, 10.0, 1000.0] {
        g.bench_with_input(BenchmarkId::new("solve", a), &a, |b, &a| {
            b.iter(|| solve_model(&OneDModel::radial(2, 1.0, a)).unwrap())
        });
    }
    g.bench_function("match_0.9", |b| {
        b.iter(|| match_model(2, 1.0, black_box(0.9)).unwrap())
    });
    g.finish();
}

fn eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigen_square_level4");
    g.sample_size(10);
    for bc in [BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
        let problem = EigenProblem {
            mesh: triangulate(&ConvexPolygon::unit_square(), 4).unwrap(),
            spec: NormSpec::Euclidean,
            bc,
            solver: SolverOptions {
                restarts: 1,
                ..Default::default()
            },
        };
        g.bench_function(bc.as_str(), |b| {
            b.iter(|| solve_first_eigen(&problem).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, energy, dual, geometry, model, eigen);
criterion_main!(benches);
