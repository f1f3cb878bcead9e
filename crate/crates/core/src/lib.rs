//! Received-power (RSSI) prediction for low-power lossy links.
//!
//! * [`trace`]: gap-aware RSSI streams and CSV ingestion.
//! * [`stats`]: mean-removed autocovariance and the moments of the predictor.
//! * [`predictor`]: the two-term n-step MMSE predictor and its fitting paths.
//! * [`linksim`]: seeded synthetic channels, radio profiles and loss models.
//! * [`atpc`]: adaptive transmission power control driven by ACKs and, when
//!   ACKs are lost, by predictions.
//! * [`eval`]: walk-forward RMSE evaluation over a lag grid.

pub mod atpc;
pub mod config;
pub mod error;
pub mod eval;
pub mod linksim;
pub mod predictor;
pub mod stats;
pub mod trace;

pub use error::{Error, Result};
pub use predictor::{Method, PredictorModel};
pub use trace::{RssiSample, Trace};
