use thiserror::Error;

pub type Result<T> = std::result::Result<T, NskError>;

#[derive(Debug, Error)]
pub enum NskError {
    #[error("{what} requires a positive density, got {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("density fell below the floor: min = {min:e}, floor = {floor:e}")]
    Positivity { min: f64, floor: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("solution under-resolved: spectral tail ratio {tail:e} exceeds {threshold:e}")]
    UnderResolved { tail: f64, threshold: f64 },

    #[error("fields live on different grids or times: {0}")]
    Mismatch(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("at t = {time}: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<NskError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl NskError {
    pub(crate) fn at(self, time: f64) -> NskError {
        match self {
            e @ NskError::AtTime { .. } => e,
            e => NskError::AtTime {
                time,
                source: Box::new(e),
            },
        }
    }

    /// True for failures of the numerical solver itself, as opposed to bad
    /// input or IO.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            NskError::AtTime { source, .. } => source.is_solver_failure(),
            NskError::Positivity { .. }
            | NskError::NonFinite(_)
            | NskError::Cfl { .. }
            | NskError::UnderResolved { .. } => true,
            _ => false,
        }
    }
}
