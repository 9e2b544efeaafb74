//! Sequential vs rayon execution of the per-element hot loops on a real
//! adapted mesh: stiffness assembly and degree-8 source quadrature.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use anisofem::adapt::{adaptation_loop, final_iteration, AdaptMode, AdaptParams, LoopOptions};
use anisofem::fem;
use anisofem::mesh::Mesh;
use anisofem::par;
use anisofem::problem::{PoissonProblem, TestProblem};
use anisofem::quadrature::TriangleRule;

fn bench_mesh(target: usize) -> Mesh {
    let p = TestProblem::mitchell_lshape();
    let seq = adaptation_loop(
        &p,
        AdaptMode::Isotropic,
        target,
        &AdaptParams::default(),
        &LoopOptions::default(),
    )
    .unwrap();
    final_iteration(&seq).mesh.clone()
}

fn element_stiffness_work(m: &Mesh, t: usize) -> [[f64; 3]; 3] {
    fem::element_stiffness(m.points(t)).unwrap()
}

fn source_quadrature_work(m: &Mesh, p: &TestProblem, rule: &TriangleRule, t: usize) -> f64 {
    let pts = m.points(t);
    let area = m.area(t);
    let mut acc = 0.0;
    for (bary, w) in rule.points.iter().zip(&rule.weights) {
        let x = bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0];
        let y = bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1];
        acc += w * p.source(x, y).unwrap();
    }
    area * acc
}

fn bench_hot_loops(c: &mut Criterion) {
    let m = bench_mesh(8000);
    let n = m.triangles.len();
    let p = TestProblem::mitchell_lshape();
    let rule = TriangleRule::of_degree(8);

    let mut g = c.benchmark_group("element_stiffness");
    g.bench_with_input(BenchmarkId::new("seq", n), &n, |b, &n| {
        b.iter(|| par::map_indexed_seq(n, |t| element_stiffness_work(&m, t)))
    });
    g.bench_with_input(BenchmarkId::new("par", n), &n, |b, &n| {
        b.iter(|| par::map_indexed_par(n, |t| element_stiffness_work(&m, t)))
    });
    g.finish();

    let mut g = c.benchmark_group("source_quadrature");
    g.bench_with_input(BenchmarkId::new("seq", n), &n, |b, &n| {
        b.iter(|| par::map_indexed_seq(n, |t| source_quadrature_work(&m, &p, &rule, t)))
    });
    g.bench_with_input(BenchmarkId::new("par", n), &n, |b, &n| {
        b.iter(|| par::map_indexed_par(n, |t| source_quadrature_work(&m, &p, &rule, t)))
    });
    g.finish();
}

criterion_group!(benches, bench_hot_loops);
criterion_main!(benches);
