use std::path::PathBuf;

use crate::mae::IterationTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("duplicate vertices {0} and {1}")]
    DuplicateVertex(usize, usize),

    #[error("degenerate triangle {0} (area {1:e})")]
    DegenerateTriangle(usize, f64),

    #[error("non-manifold edge ({0}, {1}) shared by {2} triangles")]
    NonManifoldEdge(usize, usize, usize),

    #[error("dangling vertex {0} is not used by any triangle")]
    DanglingVertex(usize),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("center ({0}, {1}) is not strictly inside the boundary polygon")]
    CenterOutside(f64, f64),

    #[error("domain is not star-shaped about its center: ray at angle {angle} rad crosses the boundary {crossings} times")]
    NotStarShaped { angle: f64, crossings: usize },

    #[error("ray at angle {0} rad does not meet the boundary")]
    NoIntersection(f64),

    #[error("point ({0}, {1}) lies outside the triangulation")]
    OutOfDomain(f64, f64),

    #[error("density out of range: {0}")]
    DensityRange(String),

    #[error("invalid spline space: {0}")]
    SplineSpace(String),

    #[error("constraint residual {residual:e} exceeds tolerance {tolerance:e}")]
    Infeasible { residual: f64, tolerance: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "iteration {k}: sup |Laplacian| = {lap_inf:e} exceeds the blow-up cap {cap:e}; \
         restart with a different initial guess"
    )]
    BlowUp {
        k: usize,
        lap_inf: f64,
        cap: f64,
        trace: Box<IterationTrace>,
    },

    #[error("map quality: {0}")]
    MapQuality(String),

    #[error("image error: {0}")]
    Image(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable identifier, used by the CLI error JSON and the C API.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } | Error::IndexOutOfRange(_) => "parse",
            Error::DuplicateVertex(..)
            | Error::DegenerateTriangle(..)
            | Error::NonManifoldEdge(..)
            | Error::DanglingVertex(_)
            | Error::Geometry(_)
            | Error::CenterOutside(..)
            | Error::NotStarShaped { .. }
            | Error::NoIntersection(_)
            | Error::OutOfDomain(..) => "geometry",
            Error::DensityRange(_) => "density",
            Error::SplineSpace(_) | Error::Config(_) | Error::Dimension(_) => "invalid_argument",
            Error::Infeasible { .. } | Error::NonFinite(_) | Error::BlowUp { .. } => "solver",
            Error::Image(_) => "parse",
            Error::MapQuality(_) => "solver",
            Error::Io { .. } | Error::Json(_) => "io",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
