//! Robust fixed-time CLF-CBF quadratic-program control with bounded
//! non-vanishing disturbances, and a three-vehicle overtaking simulator
//! built on it.

pub mod config;
pub mod constraints;
pub mod error;
pub mod experiments;
pub mod fxts;
pub mod output;
pub mod plot;
pub mod qp;
pub mod scenario;
pub mod vehicle;

pub use error::{Error, Result};
