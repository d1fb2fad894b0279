use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("non-manifold edge ({0}, {1}) shared by {2} triangles")]
    NonManifoldEdge(usize, usize, usize),

    #[error("open surface: edge ({0}, {1}) belongs to a single triangle")]
    OpenSurface(usize, usize),

    #[error("inconsistent triangle orientation across edge ({0}, {1})")]
    InconsistentOrientation(usize, usize),

    #[error("degenerate triangle {0} (zero area)")]
    DegenerateTriangle(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("ensemble placement failed: placed {placed} of {requested} bodies")]
    Placement { placed: usize, requested: usize },

    #[error("body {index} at {position:?} lies outside the region")]
    OutsideRegion { index: usize, position: [f64; 3] },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of a numerical method rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem(_) | Error::NotConverged { .. } | Error::Placement { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
