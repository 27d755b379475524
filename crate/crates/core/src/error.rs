use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("face {face:?} is shared by {count} tetrahedra")]
    NonManifoldFace { face: [usize; 3], count: usize },

    #[error("tetrahedron {tet} is degenerate (relative volume {relative_volume:e})")]
    DegenerateTet { tet: usize, relative_volume: f64 },

    #[error("invalid mesh input: {0}")]
    InvalidMesh(String),

    #[error("boundary surface does not close up: {0}")]
    OpenBoundary(String),

    #[error("invalid grid specification: {0}")]
    InvalidSpec(String),

    #[error("ring touches the box boundary or is malformed: {0}")]
    RingTouchesBoundary(String),

    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("mesh contains no tetrahedra")]
    EmptyMesh,

    #[error("first Betti number is zero")]
    TrivialH1,

    #[error("singular geometry in tetrahedron {0}")]
    SingularGeometry(usize),

    #[error("linear solver failed: {0}")]
    SolverFailure(String),

    #[error("level {level} passes within {distance:e} of a vertex phase")]
    NonRegularLevel { level: f64, distance: f64 },

    #[error("vertex phases leave no usable gap")]
    NoGap,

    #[error("cut surface is not a manifold: {0}")]
    NonManifoldCut(String),

    #[error("boundary condition incompatible with mesh: {0}")]
    IncompatibleBC(String),

    #[error("eigensolver did not converge (best residual {best_residual:e})")]
    NoConvergence { best_residual: f64 },

    #[error("field support is empty")]
    EmptySupport,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonManifoldFace { .. } => "NonManifoldFace",
            Error::DegenerateTet { .. } => "DegenerateTet",
            Error::InvalidMesh(_) => "InvalidMesh",
            Error::OpenBoundary(_) => "OpenBoundary",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::RingTouchesBoundary(_) => "RingTouchesBoundary",
            Error::ParseError { .. } => "ParseError",
            Error::EmptyMesh => "EmptyMesh",
            Error::TrivialH1 => "TrivialH1",
            Error::SingularGeometry(_) => "SingularGeometry",
            Error::SolverFailure(_) => "SolverFailure",
            Error::NonRegularLevel { .. } => "NonRegularLevel",
            Error::NoGap => "NoGap",
            Error::NonManifoldCut(_) => "NonManifoldCut",
            Error::IncompatibleBC(_) => "IncompatibleBC",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::EmptySupport => "EmptySupport",
            Error::Io(_) => "Io",
        }
    }
}
