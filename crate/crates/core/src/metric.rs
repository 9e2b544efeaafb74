//! Optimal metric tensors for H1-seminorm error minimization.
//!
//! Element-wise, with `B = I + |H_K|/α_h`:
//!
//! `M_K = ||B||₂ · det(B)^{-1/4} · B`
//!
//! where `H_K` is the constant Hessian of the quadratic error estimate on
//! the element and `α_h` regularizes and controls adaptation intensity
//! (`α_h = ∞` gives a uniform mesh).

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::par;
use crate::tensor::Sym2;
use std::io::Write;

/// Per-element SPD metric tensors together with the calibrated intensity.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub tensors: Vec<Sym2>,
    pub alpha_h: f64,
}

/// Matrix absolute value through the eigendecomposition: same eigenvectors,
/// eigenvalues replaced by their absolute values.
pub fn absolute_tensor(h: &Sym2) -> Sym2 {
    let (l1, l2, v1) = h.eigen();
    Sym2::from_eigen(l1.abs(), l2.abs(), v1)
}

/// The metric formula. `B = I + |H|/α` is SPD, `||B||₂` its largest
/// eigenvalue.
pub fn metric_tensor(h: &Sym2, alpha_h: f64) -> Sym2 {
    assert!(alpha_h > 0.0);
    let (l1, l2, v1) = h.eigen();
    let b1 = 1.0 + l1.abs() / alpha_h;
    let b2 = 1.0 + l2.abs() / alpha_h;
    let scale = b1.max(b2) * (b1 * b2).powf(-0.25);
    Sym2::from_eigen(scale * b1, scale * b2, v1)
}

/// Density functional `Σ_K |K| det(I + |H_K|/α)^{1/4}`, strictly decreasing
/// in α.
fn density(abs_eigs: &[(f64, f64)], areas: &[f64], alpha: f64) -> f64 {
    abs_eigs
        .iter()
        .zip(areas)
        .map(|(&(h1, h2), &a)| a * ((1.0 + h1 / alpha) * (1.0 + h2 / alpha)).powf(0.25))
        .sum()
}

/// Calibrate α_h so that `Σ |K| det(B_K)^{1/4} = 2 Σ |K|`: about half of the
/// adapted mesh is then concentrated where det(M) is large. Bisection to
/// 1e-3 relative residual.
pub fn calibrate_alpha(hessians: &[Sym2], areas: &[f64]) -> Result<f64> {
    assert_eq!(hessians.len(), areas.len());
    let abs_eigs: Vec<(f64, f64)> = hessians
        .iter()
        .map(|h| {
            let (l1, l2) = h.eigenvalues();
            (l1.abs().max(l2.abs()), l1.abs().min(l2.abs()))
        })
        .collect();
    let h_max = abs_eigs.iter().map(|e| e.0).fold(0.0f64, f64::max);
    if h_max == 0.0 {
        return Err(Error::UniformField);
    }
    let total: f64 = areas.iter().sum();
    let target = 2.0 * total;
    let mut lo = 1e-12 * h_max;
    let mut hi = h_max;
    // the root is bracketed by construction at hi; expand lo if needed
    let mut guard = 0;
    while density(&abs_eigs, areas, lo) < target {
        lo *= 1e-3;
        guard += 1;
        if guard > 100 {
            return Err(Error::UniformField);
        }
    }
    while density(&abs_eigs, areas, hi) > target {
        hi *= 8.0;
    }
    let mut alpha = (lo * hi).sqrt();
    for _ in 0..200 {
        alpha = 0.5 * (lo + hi);
        let d = density(&abs_eigs, areas, alpha);
        if (d - target).abs() <= 1e-3 * total {
            return Ok(alpha);
        }
        if d > target {
            lo = alpha;
        } else {
            hi = alpha;
        }
    }
    Ok(alpha)
}

/// Per-vertex SPD tensors: area-weighted arithmetic mean of incident element
/// tensors. A convex combination of SPD tensors stays SPD.
pub fn vertex_metrics(m: &Mesh, field: &MetricField) -> Vec<Sym2> {
    let mut acc = vec![Sym2::ZERO; m.vertices.len()];
    let mut weight = vec![0.0f64; m.vertices.len()];
    for (t, tri) in m.triangles.iter().enumerate() {
        let a = m.area(t);
        for &v in &tri.v {
            acc[v] = acc[v].add(&field.tensors[t].scale(a));
            weight[v] += a;
        }
    }
    for (a, &w) in acc.iter_mut().zip(&weight) {
        if w > 0.0 {
            *a = a.scale(1.0 / w);
        } else {
            *a = Sym2::IDENTITY;
        }
    }
    acc
}

/// Build the field from per-element Hessians, calibrating α_h. A field of
/// all-zero Hessians yields the identity metric with `α_h = ∞` semantics.
pub fn field_from_hessians(m: &Mesh, hessians: &[Sym2]) -> MetricField {
    let areas: Vec<f64> = (0..m.triangles.len()).map(|t| m.area(t)).collect();
    match calibrate_alpha(hessians, &areas) {
        Ok(alpha) => {
            let tensors =
                par::map_indexed(hessians.len(), |t| metric_tensor(&hessians[t], alpha));
            MetricField { tensors, alpha_h: alpha }
        }
        Err(_) => MetricField {
            tensors: vec![Sym2::IDENTITY; m.triangles.len()],
            alpha_h: f64::INFINITY,
        },
    }
}

/// Replace each tensor by its isotropic density equivalent
/// `(det M_K)^{1/2} I`: same element size distribution, no orientation.
pub fn isotropize(field: &MetricField) -> MetricField {
    MetricField {
        tensors: field
            .tensors
            .iter()
            .map(|m| Sym2::diag(m.det().sqrt(), m.det().sqrt()))
            .collect(),
        alpha_h: field.alpha_h,
    }
}

/// Cap the aspect ratio `sqrt(l1/l2)` each tensor may request, preserving its
/// determinant so the element size distribution is untouched; with a cap of 1
/// this is exactly [`isotropize`]. Directional curvature recovered from a
/// piecewise-linear solution is only trustworthy once the mesh resolves the
/// feature, so the caller passes a cap that grows with the element budget.
pub fn limit_anisotropy(field: &MetricField, max_aspect: f64) -> MetricField {
    assert!(max_aspect >= 1.0);
    let ratio_cap = max_aspect * max_aspect;
    MetricField {
        tensors: field
            .tensors
            .iter()
            .map(|m| {
                let (l1, l2, v1) = m.eigen();
                if l2 > 0.0 && l1 / l2 > ratio_cap {
                    let d = (l1 * l2).sqrt();
                    Sym2::from_eigen(d * max_aspect, d / max_aspect, v1)
                } else {
                    *m
                }
            })
            .collect(),
        alpha_h: field.alpha_h,
    }
}

/// Bound how fast the metric may decay between neighboring elements: element
/// sizes are allowed to grow by at most a factor `gamma` per unit of metric
/// distance. Without this, remeshing cannot satisfy the edge-length band next
/// to sharp layers, where the raw tensors jump by orders of magnitude.
///
/// Eigenvalues scale as 1/size², so the neighbor's tensor shrunk by
/// `gamma^(2 d)` is a lower bound, enforced with the metric intersection and
/// swept until stationary.
pub fn limit_gradation(m: &Mesh, field: &MetricField, gamma: f64, max_sweeps: usize) -> MetricField {
    assert!(gamma > 1.0);
    let n = m.triangles.len();
    assert_eq!(field.tensors.len(), n);
    let centroid = |t: usize| -> [f64; 2] {
        let p = m.points(t);
        [
            (p[0][0] + p[1][0] + p[2][0]) / 3.0,
            (p[0][1] + p[1][1] + p[2][1]) / 3.0,
        ]
    };
    let mut tensors = field.tensors.clone();
    let log_g = gamma.ln();
    for _ in 0..max_sweeps {
        let mut changed = false;
        for t in 0..n {
            for s in m.triangles[t].neighbors.into_iter().flatten() {
                let (ct, cs) = (centroid(t), centroid(s));
                let e = [ct[0] - cs[0], ct[1] - cs[1]];
                let d = tensors[s].quad_form(e).max(0.0).sqrt();
                let factor = (-2.0 * log_g * d).exp();
                let bound = tensors[s].scale(factor);
                let merged = tensors[t].spd_max(&bound);
                if merged.trace() > tensors[t].trace() * (1.0 + 1e-9) {
                    tensors[t] = merged;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    MetricField { tensors, alpha_h: field.alpha_h }
}

/// Text export `element_id m11 m12 m22`, one row per element.
pub fn write_field<W: Write>(field: &MetricField, w: &mut W) -> Result<()> {
    for (t, m) in field.tensors.iter().enumerate() {
        writeln!(w, "{t} {:.16e} {:.16e} {:.16e}", m.a11, m.a12, m.a22)?;
    }
    Ok(())
}
