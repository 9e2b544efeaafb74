//! Anisotropic adaptive finite elements for 2D Dirichlet Poisson problems.
//!
//! The crate solves the Poisson equation with linear elements on unstructured
//! triangle meshes and adapts the mesh with a metric tensor built from a
//! globally defined hierarchical basis error estimate. It ships a CLI driver
//! (`anisofem`) that reproduces convergence and stiffness-matrix conditioning
//! studies on the classic L-shaped multi-feature benchmark.
//!
//! Modules follow the pipeline:
//!
//! * [`mesh`] — conforming triangulations, validity checks, aspect ratios
//! * [`problem`] — the closed-form benchmark problem (corner singularity,
//!   wavefront, peak, boundary layer)
//! * [`fem`] — P1 stiffness/load assembly and energy-norm errors
//! * [`solver`] — CG, diagonal scaling, condition number estimation
//! * [`estimator`] — hierarchical basis error estimate in the edge-bubble space
//! * [`metric`] — optimal metric tensors from estimate Hessians
//! * [`adapt`] — local metric-conforming remeshing and the adaptation loop
//! * [`harness`] — study driver with CSV output

pub mod adapt;
pub mod error;
pub mod estimator;
pub mod fem;
pub mod harness;
pub mod mesh;
pub mod metric;
pub mod par;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
