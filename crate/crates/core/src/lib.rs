//! Spectrum sensing in cognitive radio networks: closed-form detection,
//! agility and energy analysis for non-cooperative, cooperative relay and
//! distributed strategies, with a Monte Carlo oracle and a sweep runner.

pub mod coop;
pub mod distributed;
pub mod experiment;
pub mod error;
pub mod metrics;
pub mod model;
pub mod montecarlo;
pub mod noncoop;
pub mod numerics;

pub use error::{Error, Result};
