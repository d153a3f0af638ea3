use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
///
/// The variants map onto the CLI exit-code classes (config, solver, check),
/// see [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("geometry construction failed: {0}")]
    Construction(String),

    #[error("mesh error at ({x:.6e}, {y:.6e}): {msg}")]
    Mesh { x: f64, y: f64, msg: String },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("solver error: {msg}")]
    Solver {
        msg: String,
        residual_history: Vec<f64>,
    },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("no records")]
    NoRecords,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn mesh(at: [f64; 2], msg: impl Into<String>) -> Self {
        Error::Mesh {
            x: at[0],
            y: at[1],
            msg: msg.into(),
        }
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver {
            msg: msg.into(),
            residual_history: Vec::new(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable class name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) | Error::Geometry(_) | Error::Construction(_) | Error::Config(_) => {
                "config"
            }
            Error::Mesh { .. } => "mesh",
            Error::Assembly(_) | Error::Solver { .. } => "solver",
            Error::Fit(_) | Error::NoRecords => "check",
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => "io",
        }
    }

    /// Process exit code: 2 config, 3 solver, 4 check failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" => 2,
            "mesh" | "solver" => 3,
            "check" => 4,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
