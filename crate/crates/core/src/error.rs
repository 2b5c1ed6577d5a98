use std::path::PathBuf;

/// Errors produced by grid construction, solvers and the run loop.
#[derive(Debug, thiserror::Error)]
pub enum DpmError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid solver plan: {0}")]
    InvalidPlan(String),

    #[error("plan built for n={plan_n} does not match field with n={field_n}")]
    PlanMismatch { plan_n: usize, field_n: usize },

    #[error("dense oracle limited to n <= 16, got n={0}")]
    OracleTooLarge(usize),

    #[error("boundary projection undefined: point coincides with the sphere center")]
    DegenerateProjection,

    #[error("boundary-equation system is under-determined: {cols} unknowns but only {rows} rows")]
    UnderDetermined { rows: usize, cols: usize },

    #[error("time step mismatch between sub-domain plans: {0} vs {1}")]
    DtMismatch(f64, f64),

    #[error("diagnostic over an empty point set")]
    EmptyMask,

    #[error("negative density in free-energy evaluation: {0}")]
    NegativeDensity(f64),

    #[error("incompatible meshes: {0}")]
    MeshMismatch(String),

    #[error("series length mismatch: {0} vs {1}")]
    SeriesMismatch(usize, usize),

    #[error("missing neighbor value at flat index {0}")]
    MissingNeighbor(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("time step collapsed below {0:e}; solver cannot continue")]
    TimeStepCollapse(f64),

    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, DpmError>;

impl DpmError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DpmError::Io {
            path: path.into(),
            source,
        }
    }
}
