//! Hourly visitor forecasting for points of interest.
//!
//! The crate covers the whole pipeline: street graphs and geolocation binning
//! ([`geo`]), exogenous features and windowed datasets ([`features`]), recurrent models
//! with hand-written backpropagation ([`models`]), an ARIMA baseline ([`arima`]),
//! training and grid search ([`training`]), a synthetic city generator ([`synth`]),
//! metrics and reports ([`eval`]) and the command implementations behind the
//! `flowcast` binary ([`cli`]).

pub mod arima;
pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod geo;
pub mod models;
pub mod parallel;
pub mod series;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
