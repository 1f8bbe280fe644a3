//! Adaptive prediction intervals for tabular regression.
//!
//! The crate trains a small feed-forward network with three quantile heads
//! (pinball loss), then turns its band into finite-sample prediction
//! intervals by split-conformal calibration. Three corrections are provided:
//!
//! * naive: absolute residual scores around the median head,
//! * CQR: signed distance-to-band scores,
//! * ICQR: CQR scores calibrated per cluster, where clusters come from
//!   k-means on permutation-importance-weighted calibration features.
//!
//! Start with the runnable examples (`cargo run -p icqr --example cqr`) or
//! the `icqr run` binary for full benchmark sweeps.

// most loops here co-index a Matrix through row/get, where the index is the
// point of the loop
#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod cluster;
pub mod conformal;
pub mod data;
pub mod error;
pub mod importance;
pub mod matrix;
pub mod quantile_net;
pub mod seed;

pub use conformal::{
    calibrate_cqr, calibrate_icqr, calibrate_naive, interval_cqr, interval_icqr, interval_naive,
    interval_qr, ConformalConfig, PredictionInterval,
};
pub use data::{load_csv, split, write_csv, Dataset, Normalizer, SplitSpec};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use quantile_net::{train, QuantileModel, QuantileNetConfig, QuantilePrediction};
