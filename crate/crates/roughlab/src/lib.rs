//! Càdlàg rough paths, rough SDEs with jumps, and a Monte Carlo robust filter.
//!
//! The deterministic path algebra in [`roughpath`] and the control counts in
//! [`moments`] are generic over [`Scalar`]; the samplers, solvers and the filter run
//! in `f64`.

pub mod error;
pub mod filter;
pub mod moments;
pub mod noise;
pub mod parallel;
pub mod presets;
pub mod roughpath;
pub mod rsde;
mod scalar;
pub mod stats;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use scalar::Scalar;

pub type TimeGrid64 = roughpath::TimeGrid<f64>;
pub type GridPath64 = roughpath::GridPath<f64>;
pub type RoughPath64 = roughpath::RoughPath<f64>;
pub type TimeChange64 = roughpath::TimeChange<f64>;
pub type GridControl64 = roughpath::GridControl<f64>;

pub type TimeGrid32 = roughpath::TimeGrid<f32>;
pub type GridPath32 = roughpath::GridPath<f32>;
pub type RoughPath32 = roughpath::RoughPath<f32>;
