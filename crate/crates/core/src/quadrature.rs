//! Symmetric triangle quadrature (Grundmann-Moeller simplex rules).
//!
//! Rules are generated for any odd degree, are symmetric under permutations
//! of barycentric coordinates, and place every node strictly inside the
//! triangle, so integrands with vertex singularities are never sampled at a
//! vertex.

/// A quadrature rule on the reference triangle in barycentric coordinates.
/// Weights sum to 1, so `∫_K g ≈ |K| Σ w_q g(x_q)`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Compositions of `total` into 3 nonnegative parts.
fn compositions3(total: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..=total {
        for b in 0..=(total - a) {
            out.push([a, b, total - a - b]);
        }
    }
    out
}

impl TriangleRule {
    /// Smallest Grundmann-Moeller rule exact for polynomials of `degree`.
    pub fn of_degree(degree: usize) -> TriangleRule {
        let s = degree.saturating_sub(1).div_ceil(2);
        let d = 2 * s + 1; // rule degree
        let n = 2usize; // simplex dimension
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for i in 0..=s {
            let denom = (d + n - 2 * i) as f64;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            // weight relative to simplex volume 1/2, hence the factor 2
            let w = 2.0 * sign * 0.25f64.powi(s as i32) * denom.powi(d as i32)
                / (factorial(i) * factorial(d + n - i));
            for beta in compositions3(s - i) {
                points.push([
                    (2 * beta[0] + 1) as f64 / denom,
                    (2 * beta[1] + 1) as f64 / denom,
                    (2 * beta[2] + 1) as f64 / denom,
                ]);
                weights.push(w);
            }
        }
        TriangleRule { degree: d, points, weights }
    }

    /// Integrate `f(x, y)` over the physical triangle `(p0, p1, p2)`
    /// with area `area`.
    pub fn integrate<F: Fn(f64, f64) -> f64>(
        &self,
        p: [[f64; 2]; 3],
        area: f64,
        f: F,
    ) -> f64 {
        let mut acc = 0.0;
        for (bary, w) in self.points.iter().zip(&self.weights) {
            let x = bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0];
            let y = bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1];
            acc += w * f(x, y);
        }
        area * acc
    }
}
