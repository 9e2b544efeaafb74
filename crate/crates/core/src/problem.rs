//! Closed-form multi-feature benchmark problem on the L-shaped domain.
//!
//! The exact solution combines a reentrant-corner term `r^{2/3} sin(2θ/3)`,
//! a circular wavefront (arctangent), a sharp Gaussian peak, and an
//! exponential boundary layer along `y = -1`. Source term and gradient are
//! analytic per term; the corner term is harmonic and contributes nothing to
//! the source.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Wavefront steepness.
const WAVE_S: f64 = 200.0;
/// Wavefront center (0, -3/4) and radius 3/4.
const WAVE_CY: f64 = -0.75;
const WAVE_R: f64 = 0.75;
/// Peak sharpness and center (-sqrt(5)/4, -1/4).
const PEAK_A: f64 = 1000.0;
const PEAK_CY: f64 = -0.25;
/// Boundary layer steepness along y = -1.
const LAYER_B: f64 = 100.0;

fn peak_cx() -> f64 {
    -5f64.sqrt() / 4.0
}

/// Polar angle remapped to [0, 3π/2] so that the slit edges y=0 (x>0) and
/// x=0 (y<0) map to θ=0 and θ=3π/2; the corner term then vanishes on both.
fn theta(x: f64, y: f64) -> f64 {
    let t = y.atan2(x);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

fn corner_u(x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    if r2 == 0.0 {
        return 0.0;
    }
    r2.powf(1.0 / 3.0) * (2.0 * theta(x, y) / 3.0).sin()
}

/// Gradient of the corner term: magnitude (2/3) r^{-1/3}.
fn corner_grad(x: f64, y: f64) -> [f64; 2] {
    let r = (x * x + y * y).sqrt();
    let t = theta(x, y);
    let c = 2.0 / (3.0 * r.powf(1.0 / 3.0));
    [-c * (t / 3.0).sin(), c * (t / 3.0).cos()]
}

fn wave_u(x: f64, y: f64) -> f64 {
    let rho = (x * x + (y - WAVE_CY) * (y - WAVE_CY)).sqrt();
    (WAVE_S * (rho - WAVE_R)).atan()
}

fn wave_grad(x: f64, y: f64) -> [f64; 2] {
    let dy = y - WAVE_CY;
    let rho = (x * x + dy * dy).sqrt();
    if rho < 1e-14 {
        return [0.0, 0.0];
    }
    let d = WAVE_S * (rho - WAVE_R);
    let gp = WAVE_S / (1.0 + d * d);
    [gp * x / rho, gp * dy / rho]
}

fn wave_laplacian(x: f64, y: f64) -> f64 {
    let dy = y - WAVE_CY;
    let rho = (x * x + dy * dy).sqrt();
    let d = WAVE_S * (rho - WAVE_R);
    let denom = 1.0 + d * d;
    let gp = WAVE_S / denom;
    let gpp = -2.0 * WAVE_S * WAVE_S * WAVE_S * (rho - WAVE_R) / (denom * denom);
    gpp + gp / rho
}

fn peak_u(x: f64, y: f64) -> f64 {
    let dx = x - peak_cx();
    let dy = y - PEAK_CY;
    (-PEAK_A * (dx * dx + dy * dy)).exp()
}

fn peak_grad(x: f64, y: f64) -> [f64; 2] {
    let dx = x - peak_cx();
    let dy = y - PEAK_CY;
    let e = (-PEAK_A * (dx * dx + dy * dy)).exp();
    [-2.0 * PEAK_A * dx * e, -2.0 * PEAK_A * dy * e]
}

fn peak_laplacian(x: f64, y: f64) -> f64 {
    let dx = x - peak_cx();
    let dy = y - PEAK_CY;
    let r2 = dx * dx + dy * dy;
    (-PEAK_A * r2).exp() * (4.0 * PEAK_A * PEAK_A * r2 - 4.0 * PEAK_A)
}

fn layer_u(_x: f64, y: f64) -> f64 {
    (-LAYER_B * (y + 1.0)).exp()
}

fn layer_grad(_x: f64, y: f64) -> [f64; 2] {
    [0.0, -LAYER_B * (-LAYER_B * (y + 1.0)).exp()]
}

fn layer_laplacian(_x: f64, y: f64) -> f64 {
    LAYER_B * LAYER_B * (-LAYER_B * (y + 1.0)).exp()
}

/// Dirichlet Poisson data: source, boundary values, and (when available)
/// the exact gradient for energy-norm errors.
pub trait PoissonProblem: Sync {
    fn source(&self, x: f64, y: f64) -> Result<f64>;
    fn boundary(&self, x: f64, y: f64) -> f64;
    fn grad(&self, x: f64, y: f64) -> Result<[f64; 2]>;
}

impl PoissonProblem for TestProblem {
    fn source(&self, x: f64, y: f64) -> Result<f64> {
        self.source_f(x, y)
    }

    fn boundary(&self, x: f64, y: f64) -> f64 {
        self.boundary_g(x, y)
    }

    fn grad(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        self.exact_grad(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    MitchellLshape,
}

/// A Dirichlet Poisson benchmark with closed-form exact solution.
#[derive(Debug, Clone, Copy)]
pub struct TestProblem {
    kind: Kind,
}

impl TestProblem {
    pub fn mitchell_lshape() -> TestProblem {
        TestProblem { kind: Kind::MitchellLshape }
    }

    /// Look a problem up by its CLI name.
    pub fn by_name(name: &str) -> Option<TestProblem> {
        match name {
            "mitchell-lshape" => Some(TestProblem::mitchell_lshape()),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::MitchellLshape => "mitchell-lshape",
        }
    }

    pub fn exact_u(&self, x: f64, y: f64) -> f64 {
        corner_u(x, y) + wave_u(x, y) + peak_u(x, y) + layer_u(x, y)
    }

    /// Analytic gradient; singular at the reentrant corner.
    pub fn exact_grad(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        if x * x + y * y < 1e-28 {
            return Err(Error::EvaluationAtSingularity);
        }
        let g1 = corner_grad(x, y);
        let g2 = wave_grad(x, y);
        let g3 = peak_grad(x, y);
        let g4 = layer_grad(x, y);
        Ok([g1[0] + g2[0] + g3[0] + g4[0], g1[1] + g2[1] + g3[1] + g4[1]])
    }

    /// Source `f = -Δu`; the corner term is harmonic and contributes 0.
    pub fn source_f(&self, x: f64, y: f64) -> Result<f64> {
        if x * x + y * y < 1e-28 {
            return Err(Error::EvaluationAtSingularity);
        }
        Ok(-(wave_laplacian(x, y) + peak_laplacian(x, y) + layer_laplacian(x, y)))
    }

    /// Dirichlet boundary data `g = u` on the boundary (same code path).
    pub fn boundary_g(&self, x: f64, y: f64) -> f64 {
        self.exact_u(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn in_lshape(x: f64, y: f64) -> bool {
        let inside_square = x > -1.0 && x < 1.0 && y > -1.0 && y < 1.0;
        let in_slit = x >= 0.0 && x < 1.0 && y > -1.0 && y <= 0.0;
        inside_square && !in_slit
    }

    fn random_interior_point(rng: &mut impl Rng, min_r: f64) -> (f64, f64) {
        loop {
            let x = rng.gen_range(-0.95..0.95);
            let y = rng.gen_range(-0.95..0.95);
            if in_lshape(x, y)
                && (x * x + y * y).sqrt() >= min_r
                && ((x - peak_cx()).powi(2) + (y - PEAK_CY).powi(2)).sqrt() >= 0.25
            {
                return (x, y);
            }
        }
    }

    #[test]
    fn value_at_origin_is_tiny() {
        let p = TestProblem::mitchell_lshape();
        assert!(p.exact_u(0.0, 0.0).abs() < 1e-12);
    }

    #[test]
    fn value_at_half_half() {
        let p = TestProblem::mitchell_lshape();
        assert_relative_eq!(p.exact_u(0.5, 0.5), 1.95926, max_relative = 1e-4);
    }

    #[test]
    fn boundary_layer_on_bottom_line() {
        // the layer term contributes e^0 = 1 on y = -1
        for x in [-0.9, -0.5, -0.3] {
            assert_eq!(layer_u(x, -1.0), 1.0);
        }
    }

    #[test]
    fn corner_term_vanishes_on_slit_edges() {
        for t in [0.1, 0.4, 0.9] {
            assert!(corner_u(t, 0.0).abs() < 1e-12);
            assert!(corner_u(0.0, -t).abs() < 1e-10);
        }
    }

    #[test]
    fn corner_gradient_magnitude() {
        // |∇(r^{2/3} sin(2θ/3))| = (2/3) r^{-1/3}
        for &(x, y) in &[(-0.5, 0.5), (0.3, 0.7), (-0.2, -0.8)] {
            let g = corner_grad(x, y);
            let r = (x * x + y * y).sqrt() as f64;
            let mag = (g[0] * g[0] + g[1] * g[1]).sqrt();
            assert_relative_eq!(mag, 2.0 / (3.0 * r.powf(1.0 / 3.0)), max_relative = 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = TestProblem::mitchell_lshape();
        let h = 1e-6;
        let (x, y) = (0.5, 0.5);
        let g = p.exact_grad(x, y).unwrap();
        let fdx = (p.exact_u(x + h, y) - p.exact_u(x - h, y)) / (2.0 * h);
        let fdy = (p.exact_u(x, y + h) - p.exact_u(x, y - h)) / (2.0 * h);
        assert_relative_eq!(g[0], fdx, max_relative = 1e-5);
        assert_relative_eq!(g[1], fdy, max_relative = 1e-5);
    }

    #[test]
    fn gradient_singular_at_origin() {
        let p = TestProblem::mitchell_lshape();
        assert!(matches!(p.exact_grad(0.0, 0.0), Err(Error::EvaluationAtSingularity)));
        assert!(matches!(p.source_f(0.0, 0.0), Err(Error::EvaluationAtSingularity)));
    }

    #[test]
    fn corner_term_is_harmonic() {
        // FD Laplacian of the corner term is zero relative to the local
        // gradient magnitude
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        for _ in 0..100 {
            let (x, y) = random_interior_point(&mut rng, 0.1);
            let lap = (corner_u(x + h, y)
                + corner_u(x - h, y)
                + corner_u(x, y + h)
                + corner_u(x, y - h)
                - 4.0 * corner_u(x, y))
                / (h * h);
            let g = corner_grad(x, y);
            let scale = (g[0] * g[0] + g[1] * g[1]).sqrt() / h;
            assert!(lap.abs() / scale < 1e-3, "lap={lap} at ({x},{y})");
        }
    }

    #[test]
    fn layer_laplacian_closed_form() {
        // Δ e^{-100(y+1)} = 10000 e^{-100(y+1)}
        assert_relative_eq!(
            layer_laplacian(0.0, -0.9),
            1e4 * (-10.0f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn source_matches_fd_laplacian() {
        let p = TestProblem::mitchell_lshape();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-4;
        for _ in 0..20 {
            let (x, y) = random_interior_point(&mut rng, 0.05);
            let f = p.source_f(x, y).unwrap();
            let fd = -((p.exact_u(x + h, y)
                + p.exact_u(x - h, y)
                + p.exact_u(x, y + h)
                + p.exact_u(x, y - h)
                - 4.0 * p.exact_u(x, y))
                / (h * h));
            let denom = f.abs().max(fd.abs()).max(1.0);
            assert!(
                (f - fd).abs() / denom < 1e-4,
                "f={f}, fd={fd} at ({x},{y})"
            );
        }
    }

    #[test]
    fn registry_lookup() {
        assert!(TestProblem::by_name("mitchell-lshape").is_some());
        assert!(TestProblem::by_name("unknown").is_none());
    }
}
