use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    #[error("box is not a cube: {0}")]
    NotACube(String),

    #[error("breakpoint {value} is not a multiple of 2^{level} (mesh level {mesh_level})")]
    NonDyadicBreakpoint { value: f64, level: i32, mesh_level: i32 },

    #[error("quadrature order {q} cannot integrate degree {degree} exactly (need q >= degree + 1)")]
    QuadratureOrder { q: usize, degree: usize },

    #[error("cells overlap at {0}")]
    OverlappingCells(String),

    #[error("cell {cell} lies outside the domain {domain}")]
    CellOutsideDomain { cell: String, domain: String },

    #[error("cell {cell} is finer than mesh level {mesh_level}")]
    CellTooFine { cell: String, mesh_level: i32 },

    #[error("coefficient count {got} does not match basis size {expected}")]
    CoefficientCount { expected: usize, got: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("atom failed validation: {0}")]
    InvalidAtom(String),

    #[error("cube {cube} is outside the requested family/window: {reason}")]
    CubeOutsideWindow { cube: String, reason: String },

    #[error("truncation depth {depth} too small for n = {n} (need depth >= n + 8)")]
    InsufficientDepth { n: u32, depth: u32 },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field: field.into(), reason: reason.into() }
    }
}
