//! Globally defined hierarchical basis error estimate in the quadratic
//! edge-bubble space, relaxed by symmetric Gauss-Seidel sweeps.
//!
//! The estimate z_h lives in span{ψ_e = 4 λ_a λ_b} over non-Dirichlet edges,
//! so it vanishes at every mesh vertex: the P1 interpolant of z_h is
//! identically zero and the solution error is bounded by the interpolation
//! error of z_h.

use crate::error::{Error, Result};
use crate::fem::{barycentric_gradients, FemSolution, SparseSpdMatrix};
use crate::mesh::Mesh;
use crate::par;
use crate::problem::PoissonProblem;
use crate::quadrature::TriangleRule;
use crate::tensor::Sym2;
use std::collections::HashMap;

pub const DEFAULT_GS_TOL: f64 = 1e-2;
pub const DEFAULT_GS_MAX_SWEEPS: usize = 20;

/// Canonical table of the bubble-space edges (interior edges only; edges on
/// the Dirichlet boundary carry no bubble).
#[derive(Debug, Clone)]
pub struct EdgeTable {
    /// Sorted unordered vertex pairs.
    pub edges: Vec<[usize; 2]>,
    index: HashMap<(usize, usize), usize>,
}

impl EdgeTable {
    /// Build from the mesh: every edge shared by two triangles.
    pub fn interior(m: &Mesh) -> EdgeTable {
        let mut edges = Vec::new();
        for (e, tris) in m.edges() {
            if tris[1].is_some() {
                edges.push(e);
            }
        }
        let index = edges
            .iter()
            .enumerate()
            .map(|(i, e)| ((e[0], e[1]), i))
            .collect();
        EdgeTable { edges, index }
    }

    pub fn lookup(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.index.get(&key).copied()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// The global error problem in the bubble space: stiffness and residual.
#[derive(Debug, Clone)]
pub struct HbSystem {
    pub table: EdgeTable,
    pub stiffness: SparseSpdMatrix,
    pub residual: Vec<f64>,
}

/// Coefficients of z_h, one per bubble edge.
#[derive(Debug, Clone)]
pub struct HbEstimate {
    pub table: EdgeTable,
    pub edge_coefficients: Vec<f64>,
    pub sweeps_used: usize,
}

/// `∫_K λ_i λ_j = |K| (1 + δ_ij) / 12`.
fn mass(i: usize, j: usize, area: f64) -> f64 {
    area * if i == j { 2.0 } else { 1.0 } / 12.0
}

/// Local edges of a triangle: edge k is opposite local vertex k.
fn local_edges() -> [[usize; 2]; 3] {
    [[1, 2], [2, 0], [0, 1]]
}

/// Exact `∫_K ∇ψ_e · ∇ψ_f` for edge bubbles `ψ = 4 λ_a λ_b` from constant
/// barycentric gradients.
fn bubble_stiffness_entry(
    grads: &[[f64; 2]; 3],
    area: f64,
    e: [usize; 2],
    f: [usize; 2],
) -> f64 {
    let dot = |i: usize, j: usize| grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1];
    let (a, b) = (e[0], e[1]);
    let (c, d) = (f[0], f[1]);
    16.0 * (dot(b, d) * mass(a, c, area)
        + dot(b, c) * mass(a, d, area)
        + dot(a, d) * mass(b, c, area)
        + dot(a, c) * mass(b, d, area))
}

/// Assemble the bubble-space stiffness and the residual
/// `r_e = ∫ f ψ_e - ∫ ∇u_h · ∇ψ_e`.
pub fn assemble_hb_system<P: PoissonProblem>(
    m: &Mesh,
    s: &FemSolution,
    p: &P,
    quad_degree: usize,
) -> Result<HbSystem> {
    let table = EdgeTable::interior(m);
    let n = table.len();
    let rule = TriangleRule::of_degree(quad_degree);

    type Local = (Vec<(usize, usize, f64)>, Vec<(usize, f64)>);
    let per_element: Vec<Result<Local>> = par::map_indexed(m.triangles.len(), |t| {
        let pts = m.points(t);
        let (grads, area) = barycentric_gradients(pts);
        if area <= 0.0 {
            return Err(Error::DegenerateElement { element: Some(t) });
        }
        let v = m.triangles[t].v;
        let le = local_edges();
        let ids: Vec<Option<usize>> = le
            .iter()
            .map(|&[a, b]| table.lookup(v[a], v[b]))
            .collect();
        let mut trips = Vec::new();
        let mut res = Vec::new();
        // element gradient of u_h
        let mut gh = [0.0; 2];
        for a in 0..3 {
            gh[0] += s.values[v[a]] * grads[a][0];
            gh[1] += s.values[v[a]] * grads[a][1];
        }
        for (k, &ek) in le.iter().enumerate() {
            let Some(i) = ids[k] else { continue };
            for (l, &el) in le.iter().enumerate() {
                if let Some(j) = ids[l] {
                    trips.push((i, j, bubble_stiffness_entry(&grads, area, ek, el)));
                }
            }
            // -∫ ∇u_h · ∇ψ_e = -∇u_h · (4|K|/3)(∇λ_a + ∇λ_b)
            let ga = grads[ek[0]];
            let gb = grads[ek[1]];
            let c = 4.0 * area / 3.0;
            let mut r = -(gh[0] * c * (ga[0] + gb[0]) + gh[1] * c * (ga[1] + gb[1]));
            // + ∫ f ψ_e by quadrature
            let mut load = 0.0;
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let x = bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0];
                let y = bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1];
                load += w * p.source(x, y)? * 4.0 * bary[ek[0]] * bary[ek[1]];
            }
            r += area * load;
            res.push((i, r));
        }
        Ok((trips, res))
    });

    let mut triplets = Vec::new();
    let mut residual = vec![0.0; n];
    for r in per_element {
        let (trips, res) = r?;
        triplets.extend(trips);
        for (i, v) in res {
            residual[i] += v;
        }
    }
    Ok(HbSystem {
        table,
        stiffness: SparseSpdMatrix::from_triplets(n, triplets),
        residual,
    })
}

/// Energy norm `|z_h|_{H1} = sqrt(cᵀ S c)` of bubble coefficients under the
/// bubble stiffness.
fn system_energy_norm(sys: &HbSystem, c: &[f64]) -> f64 {
    let mut y = vec![0.0; sys.stiffness.n];
    sys.stiffness.matvec(c, &mut y);
    crate::solver::dot(c, &y).max(0.0).sqrt()
}

/// Symmetric (forward + backward) Gauss-Seidel sweeps from a zero start,
/// stopping when the relative change of the estimate's energy norm drops
/// below `rel_change_tol`.
pub fn gauss_seidel_estimate(
    sys: &HbSystem,
    rel_change_tol: f64,
    max_sweeps: usize,
) -> Result<HbEstimate> {
    assert!(rel_change_tol > 0.0 && rel_change_tol < 1.0);
    let n = sys.stiffness.n;
    if sys.residual.iter().all(|&r| r == 0.0) {
        return Err(Error::ZeroEstimate);
    }
    let a = &sys.stiffness;
    let mut x = vec![0.0; n];
    let mut eta_old = 0.0f64;
    let mut sweeps = 0;
    for sweep in 1..=max_sweeps {
        sweeps = sweep;
        let relax = |i: usize, x: &mut Vec<f64>| {
            let mut s = sys.residual[i];
            let mut diag = 0.0;
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k];
                if j == i {
                    diag = a.values[k];
                } else {
                    s -= a.values[k] * x[j];
                }
            }
            if diag > 0.0 {
                x[i] = s / diag;
            }
        };
        for i in 0..n {
            relax(i, &mut x);
        }
        for i in (0..n).rev() {
            relax(i, &mut x);
        }
        let eta = system_energy_norm(sys, &x);
        if eta > 0.0 && (eta - eta_old).abs() / eta < rel_change_tol {
            break;
        }
        eta_old = eta;
    }
    Ok(HbEstimate {
        table: sys.table.clone(),
        edge_coefficients: x,
        sweeps_used: sweeps,
    })
}

/// Constant Hessian of z_h restricted to triangle `t`:
/// `Hess(λ_a λ_b) = ∇λ_a ∇λ_bᵀ + ∇λ_b ∇λ_aᵀ`.
pub fn element_hessian(est: &HbEstimate, t: usize, m: &Mesh) -> Result<Sym2> {
    let pts = m.points(t);
    let (grads, area) = barycentric_gradients(pts);
    if area <= 0.0 {
        return Err(Error::DegenerateElement { element: Some(t) });
    }
    let v = m.triangles[t].v;
    let mut h = Sym2::ZERO;
    for &[a, b] in &local_edges() {
        if let Some(i) = est.table.lookup(v[a], v[b]) {
            let c = est.edge_coefficients[i];
            h = h.add(&Sym2::sym_outer(grads[a], grads[b]).scale(4.0 * c));
        }
    }
    Ok(h)
}

/// Energy norm `|z_h|_{H1}` accumulated element-wise from the exact bubble
/// integrals.
pub fn estimate_energy_norm(est: &HbEstimate, m: &Mesh) -> f64 {
    let per_element: Vec<f64> = par::map_indexed(m.triangles.len(), |t| {
        let pts = m.points(t);
        let (grads, area) = barycentric_gradients(pts);
        let v = m.triangles[t].v;
        let le = local_edges();
        let coef: Vec<f64> = le
            .iter()
            .map(|&[a, b]| {
                est.table
                    .lookup(v[a], v[b])
                    .map(|i| est.edge_coefficients[i])
                    .unwrap_or(0.0)
            })
            .collect();
        let mut acc = 0.0;
        for k in 0..3 {
            for l in 0..3 {
                if coef[k] != 0.0 && coef[l] != 0.0 {
                    acc += coef[k]
                        * coef[l]
                        * bubble_stiffness_entry(&grads, area, le[k], le[l]);
                }
            }
        }
        acc
    });
    per_element.iter().sum::<f64>().max(0.0).sqrt()
}

/// Evaluate z_h at a barycentric point of triangle `t` (vanishes at all
/// vertices by construction).
pub fn evaluate_estimate(est: &HbEstimate, m: &Mesh, t: usize, bary: [f64; 3]) -> f64 {
    let v = m.triangles[t].v;
    let mut z = 0.0;
    for &[a, b] in &local_edges() {
        if let Some(i) = est.table.lookup(v[a], v[b]) {
            z += est.edge_coefficients[i] * 4.0 * bary[a] * bary[b];
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem;
    use crate::mesh::{initial_lshape_mesh, BoundaryTag, Polygon, Triangle, Vertex};
    use crate::problem::TestProblem;
    use approx::assert_relative_eq;

    fn two_triangle_square() -> Mesh {
        let domain = Polygon {
            points: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        };
        let vertices = vec![
            Vertex { pos: [0.0, 0.0], tag: BoundaryTag::Corner },
            Vertex { pos: [1.0, 0.0], tag: BoundaryTag::Corner },
            Vertex { pos: [1.0, 1.0], tag: BoundaryTag::Corner },
            Vertex { pos: [0.0, 1.0], tag: BoundaryTag::Corner },
        ];
        let tris = [[0, 1, 2], [0, 2, 3]];
        let triangles = tris
            .iter()
            .map(|&v| Triangle { v, neighbors: [None; 3] })
            .collect();
        let mut m = Mesh { vertices, triangles, domain };
        m.rebuild_neighbors();
        m
    }

    struct Zero;
    impl PoissonProblem for Zero {
        fn source(&self, _x: f64, _y: f64) -> crate::Result<f64> {
            Ok(0.0)
        }
        fn boundary(&self, _x: f64, _y: f64) -> f64 {
            0.0
        }
        fn grad(&self, _x: f64, _y: f64) -> crate::Result<[f64; 2]> {
            Ok([0.0, 0.0])
        }
    }

    /// High-order quadrature oracle for ∫ ∇g · ∇h over a triangle given
    /// closures for the gradients.
    fn quad_grad_dot(
        pts: [[f64; 2]; 3],
        area: f64,
        g: impl Fn(f64, f64) -> [f64; 2],
        h: impl Fn(f64, f64) -> [f64; 2],
    ) -> f64 {
        let rule = TriangleRule::of_degree(6);
        rule.integrate(pts, area, |x, y| {
            let a = g(x, y);
            let b = h(x, y);
            a[0] * b[0] + a[1] * b[1]
        })
    }

    #[test]
    fn single_triangle_has_empty_system() {
        let domain = Polygon {
            points: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        };
        let vertices = vec![
            Vertex { pos: [0.0, 0.0], tag: BoundaryTag::Corner },
            Vertex { pos: [1.0, 0.0], tag: BoundaryTag::Corner },
            Vertex { pos: [0.0, 1.0], tag: BoundaryTag::Corner },
        ];
        let m = Mesh {
            vertices,
            triangles: vec![Triangle { v: [0, 1, 2], neighbors: [None; 3] }],
            domain,
        };
        let s = fem::FemSolution { values: vec![0.0; 3] };
        let sys = assemble_hb_system(&m, &s, &Zero, 4).unwrap();
        assert_eq!(sys.table.len(), 0);
        assert!(sys.residual.is_empty());
    }

    #[test]
    fn exact_linear_solution_has_zero_residual() {
        let m = initial_lshape_mesh();
        let p = crate::fem::tests::LinearProblem([0.3, 1.0, -2.0]);
        let s = fem::solve_fem(&m, &p, 4).unwrap();
        let sys = assemble_hb_system(&m, &s, &p, 4).unwrap();
        for &r in &sys.residual {
            assert!(r.abs() < 1e-12, "residual {r}");
        }
        // exactly zero data produces the ZeroEstimate signal
        let s0 = fem::FemSolution { values: vec![0.0; m.vertices.len()] };
        let sys0 = assemble_hb_system(&m, &s0, &Zero, 4).unwrap();
        assert!(matches!(
            gauss_seidel_estimate(&sys0, 1e-2, 20),
            Err(Error::ZeroEstimate)
        ));
    }

    #[test]
    fn bubble_diagonal_matches_quadrature_oracle() {
        let m = two_triangle_square();
        let s = fem::FemSolution { values: vec![0.0; 4] };
        let sys = assemble_hb_system(&m, &s, &Zero, 4).unwrap();
        assert_eq!(sys.table.len(), 1); // the diagonal 0-2
        // oracle: ∫ |∇(4 λ_0 λ_2)|² over both triangles by quadrature
        let mut oracle = 0.0;
        for t in 0..2 {
            let pts = m.points(t);
            let (grads, area) = barycentric_gradients(pts);
            let v = m.triangles[t].v;
            let (la, lb) = (
                v.iter().position(|&x| x == 0).unwrap(),
                v.iter().position(|&x| x == 2).unwrap(),
            );
            let bary_grad = move |x: f64, y: f64| {
                // gradient of 4 λ_a λ_b with λ linear in (x, y)
                let lam = |i: usize, x: f64, y: f64| {
                    let p0 = pts[(i + 1) % 3];
                    let p1 = pts[(i + 2) % 3];
                    crate::mesh::signed_area([x, y], p0, p1) / area
                };
                let (a, b) = (lam(la, x, y), lam(lb, x, y));
                [
                    4.0 * (a * grads[lb][0] + b * grads[la][0]),
                    4.0 * (a * grads[lb][1] + b * grads[la][1]),
                ]
            };
            oracle += quad_grad_dot(pts, area, bary_grad, bary_grad);
        }
        assert_relative_eq!(sys.stiffness.get(0, 0), oracle, epsilon = 1e-12);
    }

    #[test]
    fn gs_energy_norm_nondecreasing_and_matches_direct_solve() {
        let m = initial_lshape_mesh();
        let p = TestProblem::mitchell_lshape();
        let s = fem::solve_fem(&m, &p, 8).unwrap();
        let sys = assemble_hb_system(&m, &s, &p, 8).unwrap();
        let mut last = 0.0;
        for sweeps in 1..=8 {
            let est = gauss_seidel_estimate(&sys, 1e-14, sweeps).unwrap();
            let eta = system_energy_norm(&sys, &est.edge_coefficients);
            assert!(eta >= last - 1e-13, "eta {eta} < {last}");
            last = eta;
        }
        // dense direct-solve oracle
        let n = sys.stiffness.n;
        let ad = nalgebra::DMatrix::from_fn(n, n, |i, j| sys.stiffness.get(i, j));
        let bd = nalgebra::DVector::from_column_slice(&sys.residual);
        let xd = ad.clone().cholesky().unwrap().solve(&bd);
        let eta_direct =
            system_energy_norm(&sys, xd.as_slice());
        let est = gauss_seidel_estimate(&sys, 1e-10, 500).unwrap();
        let eta_gs = system_energy_norm(&sys, &est.edge_coefficients);
        assert_relative_eq!(eta_gs, eta_direct, max_relative = 1e-6);
    }

    #[test]
    fn hessian_of_single_bubble() {
        // unit coefficient on edge {(1,0),(0,1)} of the unit right triangle:
        // the bubble is 4xy with Hessian [[0,4],[4,0]]
        let domain = Polygon {
            points: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        };
        let vertices = vec![
            Vertex { pos: [0.0, 0.0], tag: BoundaryTag::Corner },
            Vertex { pos: [1.0, 0.0], tag: BoundaryTag::Corner },
            Vertex { pos: [0.0, 1.0], tag: BoundaryTag::Corner },
            Vertex { pos: [1.0, 1.0], tag: BoundaryTag::Corner },
        ];
        let tris = [[0, 1, 2], [1, 3, 2]];
        let triangles = tris
            .iter()
            .map(|&v| Triangle { v, neighbors: [None; 3] })
            .collect();
        let mut m = Mesh { vertices, triangles, domain };
        m.rebuild_neighbors();
        let table = EdgeTable::interior(&m);
        assert_eq!(table.len(), 1);
        let est = HbEstimate {
            table,
            edge_coefficients: vec![1.0],
            sweeps_used: 0,
        };
        let h = element_hessian(&est, 0, &m).unwrap();
        assert_relative_eq!(h.a11, 0.0, epsilon = 1e-12);
        assert_relative_eq!(h.a12, 4.0, epsilon = 1e-12);
        assert_relative_eq!(h.a22, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_norm_of_single_bubble_matches_oracle() {
        let m = two_triangle_square();
        let table = EdgeTable::interior(&m);
        let est = HbEstimate {
            table,
            edge_coefficients: vec![1.0],
            sweeps_used: 0,
        };
        let s = fem::FemSolution { values: vec![0.0; 4] };
        let sys = assemble_hb_system(&m, &s, &Zero, 4).unwrap();
        let direct = sys.stiffness.get(0, 0).sqrt();
        assert_relative_eq!(estimate_energy_norm(&est, &m), direct, epsilon = 1e-12);
    }

    #[test]
    fn estimate_vanishes_at_vertices() {
        let m = initial_lshape_mesh();
        let table = EdgeTable::interior(&m);
        let n = table.len();
        let est = HbEstimate {
            table,
            edge_coefficients: (0..n).map(|i| 1.0 + i as f64).collect(),
            sweeps_used: 0,
        };
        for t in 0..m.triangles.len() {
            for corner in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                assert_eq!(evaluate_estimate(&est, &m, t, corner), 0.0);
            }
        }
    }
}
