//! Streaming chunked-and-averaged Kolmogorov-Smirnov (CAKS) goodness-of-fit testing.
//!
//! A stream of observations is cut into consecutive chunks of `J` values. Each
//! chunk yields a Kolmogorov distance to the null CDF, and the running average of
//! those distances is standardized against the null chunk moments `(mu_J, sigma2_J)`
//! to give a one-sided Z test. Memory use is bounded by the chunk size.
//!
//! ```
//! use caks::{calib, CaksState, NullModel};
//!
//! let mut state = CaksState::new(2, NullModel::Uniform01).unwrap();
//! state.push(&[0.25, 0.75, 0.1, 0.9]).unwrap();
//! assert_eq!(state.chunks_done(), 2);
//! assert!((state.running_mean() - 0.325).abs() < 1e-15);
//!
//! let cal = calib::calibrate(2, 10_000, 7).unwrap();
//! let report = state.report(&cal, 0.1).unwrap();
//! assert!(report.p_value >= 0.0 && report.p_value <= 1.0);
//! ```

// Parameter checks are written so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod cli;
pub mod decide;
mod error;
pub mod ksdist;
pub mod nulls;
pub mod sim;
pub mod stream;

pub use calib::Calibration;
pub use decide::{Method, TestReport};
pub use error::{CaksError, Result};
pub use ksdist::KsDistance;
pub use nulls::NullModel;
pub use stream::{CaksState, InvalidPolicy};
