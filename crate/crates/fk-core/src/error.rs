//! Error type shared across the solver stack.

/// Failure modes surfaced by chart construction, assembly and the solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("metric sample at node ({i}, {j}) is not positive definite")]
    NonSpdSample { i: usize, j: usize },

    #[error("invalid chart spec: {0}")]
    ChartSpec(String),

    #[error("grid too coarse for this operation: {0}")]
    GridTooCoarse(String),

    #[error("field is identically zero, nothing to threshold")]
    ZeroField,

    #[error("volume target {target} not attainable (available {available})")]
    VolumeOutOfRange { target: f64, available: f64 },

    #[error("support touches the truncation boundary (required margin {margin} cells)")]
    TruncationContact { margin: usize },

    #[error("annulus at radius {radius} contains no grid nodes")]
    EmptyAnnulus { radius: f64 },

    #[error("support with {size} of {total} nodes has no two-phase boundary")]
    DegenerateSupport { size: usize, total: usize },

    #[error("probe radius {radius} exceeds the chart limit {limit}")]
    RadiusOutOfRange { radius: f64, limit: f64 },

    #[error("eigensolver stalled after {iterations} iterations (residual {residual})")]
    EigenStalled { iterations: usize, residual: f64 },

    #[error("shape iteration exceeded {max_iter} iterations without converging")]
    ShapeStalled { max_iter: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
