//! Nonlinear time-series analysis toolkit.
//!
//! The crate detects determinism and chaos in short scalar series and
//! identifies a forced Duffing oscillator per sliding window:
//!
//! - [`series`]: the [`TimeSeries`] data model, CSV ingestion, differencing,
//!   sliding windows and autocorrelation.
//! - [`spectral`]: Fourier coefficients, periodogram, the cumulative
//!   periodogram white-noise test and two-frequency signal reconstruction.
//! - [`complexity`]: delay embedding, correlation sums and dimension, and
//!   phase-randomized surrogate tests.
//! - [`lyapunov`]: largest Lyapunov exponent from data by nearest-neighbor
//!   divergence.
//! - [`market`]: the cubic price–stock law and linear mean reversion.
//! - [`duffing`]: harmonic-balance identification, RK4 simulation and the
//!   Lyapunov spectrum of the Duffing flow.
//! - [`pipeline`]: sliding-window orchestration and reports.

pub mod complexity;
pub mod duffing;
mod error;
pub mod lyapunov;
pub mod market;
pub mod pipeline;
pub mod series;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use series::{TimeSeries, WindowSpec};
