use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate element{}", fmt_id(*.element))]
    DegenerateElement { element: Option<usize> },

    #[error("evaluation at the gradient singularity (0,0)")]
    EvaluationAtSingularity,

    #[error("iterative solver exceeded {max_iter} iterations (residual {residual:.3e})")]
    SolverDivergence { max_iter: usize, residual: f64 },

    #[error("matrix diagonal entry {index} is not positive ({value:.3e})")]
    NonpositiveDiagonal { index: usize, value: f64 },

    #[error("factorization failure: matrix is not positive definite")]
    FactorizationFailure,

    /// All estimate Hessians vanish; the caller should use the identity metric.
    #[error("uniform field: all Hessians are zero")]
    UniformField,

    /// The hierarchical basis residual is identically zero; the estimate is
    /// zero and the mesh should be treated as converged.
    #[error("zero estimate: residual is identically zero")]
    ZeroEstimate,

    #[error("malformed CSV at line {line}: {message}")]
    MalformedCsv { line: usize, message: String },

    #[error("malformed mesh file: {0}")]
    MalformedMesh(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_id(id: Option<usize>) -> String {
    match id {
        Some(i) => format!(" (element {i})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
