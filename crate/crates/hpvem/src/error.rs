use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("polygon is not simple")]
    NonSimplePolygon,
    #[error("unsupported mesh request: {0}")]
    UnsupportedMesh(String),
    #[error("element {0} cannot be refined: {1}")]
    Refinement(usize, String),
    #[error("mesh format: {0}")]
    Format(String),
    #[error("singular local system on element {element}: {what}")]
    SingularLocal { element: usize, what: String },
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("degree {0} outside the supported range 1..=6")]
    Degree(usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("patch {vertex}: compatibility defect {defect:e}")]
    Compatibility { vertex: usize, defect: f64 },
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
