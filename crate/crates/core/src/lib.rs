//! Lancaster bivariate distributions and the strong law of large numbers for
//! false discovery counts.
//!
//! The crate is organised bottom-up:
//!
//! - [`special`]: log-gamma, Pochhammer symbols, marginal CDFs and quantiles.
//! - [`orthopoly`]: Laguerre, Charlier and Meixner polynomials.
//! - [`lancaster`]: the four Lancaster bivariate laws as truncated series.
//! - [`covariance`]: indicator covariance series, the brute-force oracle,
//!   comparison constants, variance bounds and Lyons partial sums.
//! - [`design`] and [`sampler`]: block-dependence designs and random generation.
//! - [`mtp`]: p-values, rejection counts, FDP, the plug-in FDP estimator and
//!   convergence sweeps.
//! - [`validation`]: the invariant suite behind `lancaster-mt validate`.

pub mod covariance;
pub mod design;
pub mod error;
pub mod lancaster;
pub mod mtp;
pub mod orthopoly;
pub mod quadrature;
pub mod sampler;
pub mod series;
pub mod special;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
