use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed an argument outside an operation's domain.
    #[error("invalid input: {0}")]
    Input(String),
    /// A structure (network, SPaT message, scenario) failed validation.
    #[error("validation failed: {0}")]
    Validation(String),
    /// An operation was applied to an object of the wrong kind.
    #[error("logic error: {0}")]
    Logic(String),
    /// Configuration document or simulation settings are unusable.
    #[error("config error: {0}")]
    Config(String),
    /// A sweep cell failed; carries the cell coordinates.
    #[error("sweep cell (veh_rate={veh_rate}, tls_rate={tls_rate}, seed={seed}) failed: {source}")]
    Cell {
        veh_rate: f64,
        tls_rate: f64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
