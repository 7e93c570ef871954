use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("config error at `{path}`: {message}")]
    ConfigPath { path: String, message: String },
    #[error("zero symbol at subcarrier {subcarrier}, symbol {symbol}")]
    ZeroSymbol { subcarrier: usize, symbol: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("path gain is zero; cannot calibrate transmit power")]
    ZeroPathGain,
    #[error("scatterer {index} lies {distance:.3} m from the base station (minimum 1 m)")]
    ScattererTooClose { index: usize, distance: f64 },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("unknown metric `{name}`; available: {available}")]
    UnknownMetric { name: String, available: String },
    #[error("empty result table")]
    EmptyTable,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
