use std::path::PathBuf;

use thiserror::Error;

use crate::numerics::NumericError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(transparent)]
    Numeric(#[from] NumericError),

    #[error("incremental pass diverged: |theta| = {magnitude:e} exceeded guard {guard:e} after {updates} updates")]
    Divergence {
        magnitude: f64,
        guard: f64,
        updates: usize,
        trace: Vec<f64>,
    },

    #[error("detection probability is zero for {0}; expected detection time is unbounded")]
    InfiniteAgility(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("{figure}: result has no values in column `{column}`")]
    MissingColumn {
        figure: &'static str,
        column: &'static str,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
