use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("point lies on the lower sheet of the hyperboloid (x0 = {0})")]
    WrongSheet(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("point {0:?} lies outside the domain")]
    OutOfDomain(Vec<f64>),
    #[error("degenerate tangent space: {0}")]
    Degenerate(String),
    #[error("coordinates are not principal (off-diagonal {0:e})")]
    NonPrincipal(f64),
    #[error("rank-deficient system: {0}")]
    RankDeficient(String),
    #[error("s = {s} lies outside the admissible interval ({lo}, {hi})")]
    OutsideInterval { s: f64, lo: f64, hi: f64 },
    #[error("no admissible interval: {0}")]
    EmptyInterval(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("focal point: {0}")]
    Focal(String),
    #[error("principal curvatures too close: gap {gap:e} below {threshold:e}")]
    NearUmbilic { gap: f64, threshold: f64 },
    #[error("map domain violation: {0}")]
    MapDomain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParams(_) | Error::DimensionMismatch(..) => 2,
            Error::Io(_) => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.to_string())
        } else {
            Error::Config(e.to_string())
        }
    }
}
