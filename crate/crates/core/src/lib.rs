//! Offline decoding of grasp types from short EEG epochs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuation;
pub mod classify;
pub mod covariance;
pub mod csp;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod layout;
pub mod linalg;
pub mod persist;
pub mod preprocess;
pub mod riemann;
pub mod stats;
pub mod synth;
pub mod wavelet;

pub use data::{Condition, EpochSet, Group, Handedness, Label, SessionMeta};
pub use error::{Error, Result};
