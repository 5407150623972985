use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("positivity violated: {0}")]
    Positivity(String),

    #[error("positivity could not be restored after {halvings} step halvings (last dt = {dt:e})")]
    PositivityExhausted { halvings: u32, dt: f64 },

    #[error("newton iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NewtonDivergence { iterations: u32, residual: f64 },

    #[error("quadrature failed to reach tolerance {tolerance:e} on [{a}, {b}]")]
    Quadrature { a: f64, b: f64, tolerance: f64 },

    #[error("config parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },

    #[error("config validation error: {0}")]
    Validation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("at level N = {cells}: {source}")]
    AtLevel {
        cells: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_time(self, t: f64) -> Self {
        Error::AtTime { t, source: Box::new(self) }
    }

    pub fn at_level(self, cells: usize) -> Self {
        Error::AtLevel { cells, source: Box::new(self) }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Innermost error, with time/level context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } | Error::AtLevel { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 config, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Parse { .. } | Error::Validation(_) | Error::Argument(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }

    pub fn is_positivity(&self) -> bool {
        matches!(self.root(), Error::Positivity(_))
    }
}
