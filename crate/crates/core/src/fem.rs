//! P1 finite element discretization: stiffness/load assembly, Dirichlet
//! lifting, and energy-norm error evaluation.

use crate::error::{Error, Result};
use crate::mesh::{signed_area, BoundaryTag, Mesh, DEGENERACY_TOL};
use crate::par;
use crate::problem::PoissonProblem;
use crate::quadrature::TriangleRule;
use crate::solver;

/// Default quadrature degree; the source has sharp features and lower-order
/// rules corrupt the load on coarse elements.
pub const DEFAULT_QUAD_DEGREE: usize = 8;

/// Symmetric positive definite matrix in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct SparseSpdMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseSpdMatrix {
    /// Build from triplets; duplicates are summed. Entry order within a row
    /// is by column index.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> SparseSpdMatrix {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSpdMatrix { n, row_ptr, col_idx, values }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.values[k];
                }
            }
        }
        d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.values[k];
            }
        }
        0.0
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i][self.col_idx[k]] = self.values[k];
            }
        }
        d
    }
}

#[derive(Debug, Clone)]
pub struct LoadVector {
    pub values: Vec<f64>,
}

/// Nodal values at all mesh vertices: interior unknowns plus boundary data.
#[derive(Debug, Clone)]
pub struct FemSolution {
    pub values: Vec<f64>,
}

/// Map from vertex id to interior unknown index.
pub fn interior_index(m: &Mesh) -> (Vec<Option<usize>>, usize) {
    let mut map = vec![None; m.vertices.len()];
    let mut n = 0;
    for (i, v) in m.vertices.iter().enumerate() {
        if v.tag == BoundaryTag::Interior {
            map[i] = Some(n);
            n += 1;
        }
    }
    (map, n)
}

/// Gradients of the three barycentric coordinate functions and the area.
pub fn barycentric_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let area = signed_area(p[0], p[1], p[2]);
    let inv = 1.0 / (2.0 * area);
    let mut grads = [[0.0; 2]; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        grads[i] = [(p[j][1] - p[k][1]) * inv, (p[k][0] - p[j][0]) * inv];
    }
    (grads, area)
}

/// Exact element stiffness matrix of constant P1 gradients.
pub fn element_stiffness(p: [[f64; 2]; 3]) -> Result<[[f64; 3]; 3]> {
    let (grads, area) = barycentric_gradients(p);
    let mut longest2 = 0.0f64;
    for k in 0..3 {
        let a = p[k];
        let b = p[(k + 1) % 3];
        longest2 = longest2.max((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2));
    }
    if area.abs() <= DEGENERACY_TOL * longest2 {
        return Err(Error::DegenerateElement { element: None });
    }
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
        }
    }
    Ok(k)
}

/// Assemble the interior-vertex stiffness matrix.
pub fn assemble_stiffness(m: &Mesh) -> Result<SparseSpdMatrix> {
    let (idx, n) = interior_index(m);
    let kes = par::map_indexed(m.triangles.len(), |t| element_stiffness(m.points(t)));
    let mut triplets = Vec::with_capacity(9 * m.triangles.len());
    for (t, ke) in kes.into_iter().enumerate() {
        let ke = ke.map_err(|_| Error::DegenerateElement { element: Some(t) })?;
        let v = m.triangles[t].v;
        for a in 0..3 {
            if let Some(i) = idx[v[a]] {
                for b in 0..3 {
                    if let Some(j) = idx[v[b]] {
                        triplets.push((i, j, ke[a][b]));
                    }
                }
            }
        }
    }
    Ok(SparseSpdMatrix::from_triplets(n, triplets))
}

/// Assemble the load vector `F_i = ∫ f φ_i` with the Dirichlet lifting
/// `-Σ_b A_ib g_b` folded into interior rows.
pub fn assemble_load<P: PoissonProblem>(
    m: &Mesh,
    p: &P,
    quad_degree: usize,
) -> Result<LoadVector> {
    assert!((2..=10).contains(&quad_degree), "quad_degree must be in 2..=10");
    let rule = TriangleRule::of_degree(quad_degree);
    let (idx, n) = interior_index(m);

    let per_element: Vec<Result<([f64; 3], [[f64; 3]; 3])>> =
        par::map_indexed(m.triangles.len(), |t| {
            let pts = m.points(t);
            let area = signed_area(pts[0], pts[1], pts[2]);
            let mut load = [0.0; 3];
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let x = bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0];
                let y = bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1];
                // quadrature nodes are strictly interior, so the origin (a
                // corner-tagged mesh vertex) is never sampled
                let f = p.source(x, y)?;
                for a in 0..3 {
                    load[a] += w * f * bary[a];
                }
            }
            for l in &mut load {
                *l *= area;
            }
            let ke = element_stiffness(pts)?;
            Ok((load, ke))
        });

    let mut f = vec![0.0; n];
    for (t, res) in per_element.into_iter().enumerate() {
        let (load, ke) = res?;
        let v = m.triangles[t].v;
        for a in 0..3 {
            if let Some(i) = idx[v[a]] {
                f[i] += load[a];
                for b in 0..3 {
                    if idx[v[b]].is_none() {
                        let pos = m.vertices[v[b]].pos;
                        f[i] -= ke[a][b] * p.boundary(pos[0], pos[1]);
                    }
                }
            }
        }
    }
    Ok(LoadVector { values: f })
}

/// Assemble, impose Dirichlet data by lifting, and solve with CG.
pub fn solve_fem<P: PoissonProblem>(m: &Mesh, p: &P, quad_degree: usize) -> Result<FemSolution> {
    let a = assemble_stiffness(m)?;
    let b = assemble_load(m, p, quad_degree)?;
    let (idx, _) = interior_index(m);
    let x = solver::cg_solve(&a, &b.values, 1e-12, 100_000)?;
    let mut values = vec![0.0; m.vertices.len()];
    for (v, vert) in m.vertices.iter().enumerate() {
        values[v] = match idx[v] {
            Some(i) => x[i],
            None => p.boundary(vert.pos[0], vert.pos[1]),
        };
    }
    Ok(FemSolution { values })
}

/// Energy-norm (H1 semi-norm) error `sqrt(Σ_K ∫_K |∇u - ∇u_h|²)`.
pub fn energy_error<P: PoissonProblem>(
    m: &Mesh,
    s: &FemSolution,
    p: &P,
    quad_degree: usize,
) -> Result<f64> {
    assert!((2..=10).contains(&quad_degree), "quad_degree must be in 2..=10");
    let rule = TriangleRule::of_degree(quad_degree);
    let per_element: Vec<Result<f64>> = par::map_indexed(m.triangles.len(), |t| {
        let pts = m.points(t);
        let (grads, area) = barycentric_gradients(pts);
        let v = m.triangles[t].v;
        let mut gh = [0.0; 2];
        for a in 0..3 {
            gh[0] += s.values[v[a]] * grads[a][0];
            gh[1] += s.values[v[a]] * grads[a][1];
        }
        let mut acc = 0.0;
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let x = bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0];
            let y = bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1];
            let g = p.grad(x, y)?;
            let dx = g[0] - gh[0];
            let dy = g[1] - gh[1];
            acc += w * (dx * dx + dy * dy);
        }
        Ok(area * acc)
    });
    let mut total = 0.0;
    for r in per_element {
        total += r?;
    }
    Ok(total.sqrt())
}

/// Interpolate nodal values of an arbitrary function (test helper and patch
/// tests).
pub fn interpolate<F: Fn(f64, f64) -> f64>(m: &Mesh, f: F) -> FemSolution {
    FemSolution {
        values: m.vertices.iter().map(|v| f(v.pos[0], v.pos[1])).collect(),
    }
}
