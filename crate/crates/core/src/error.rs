use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {requested} cells requested, budget is {budget}")]
    Capacity { requested: u64, budget: u64 },

    #[error("layer {layer} has no admissible site inside the window")]
    Infeasible { layer: usize },

    #[error("layer {layer} out of range 1..={layers}")]
    LayerOutOfRange { layer: usize, layers: usize },

    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),

    #[error("error certificate blew up ({certificate:e}); beta * n too large for a certified sweep")]
    CertificateBlowup { certificate: f64 },

    #[error("window could not be certified exact within the capacity budget (last half-width {half_width})")]
    WindowExhausted { half_width: i64 },

    #[error("every replica failed at n = {n}")]
    AllReplicasFailed { n: usize },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed slab file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParams(_)
            | Error::Config(_)
            | Error::Json(_)
            | Error::Domain(_)
            | Error::LayerOutOfRange { .. } => 2,
            Error::Capacity { .. }
            | Error::TooLarge(_)
            | Error::WindowExhausted { .. }
            | Error::CertificateBlowup { .. } => 3,
            Error::Infeasible { .. } | Error::AllReplicasFailed { .. } => 4,
            _ => 5,
        }
    }

    /// Short machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid_params",
            Error::Domain(_) => "domain",
            Error::Capacity { .. } => "capacity",
            Error::Infeasible { .. } => "infeasible",
            Error::LayerOutOfRange { .. } => "layer_out_of_range",
            Error::TooLarge(_) => "too_large",
            Error::CertificateBlowup { .. } => "certificate_blowup",
            Error::WindowExhausted { .. } => "window_exhausted",
            Error::AllReplicasFailed { .. } => "all_replicas_failed",
            Error::Insufficient(_) => "insufficient",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
