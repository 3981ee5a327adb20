//! Ramified transport of discrete measures and the two shape-optimization
//! payoffs built on it: sunlight exposure minus transport cost for crowns,
//! harvested growth minus transport cost for roots.
//!
//! Modules:
//! - [`measures`]: atomic measures, regions, CSV exchange
//! - [`irrigation`]: transport trees, Gilbert energy, cost brackets
//! - [`sunlight`]: direction quadratures and binned exposure
//! - [`harvest`]: state equation on a half-space, harvest functional,
//!   analytic ball bounds
//! - [`optimize`]: payoff maximization, rescaling maps, radius certificates
//! - [`verify`]: named invariant check suites used by the CLI

pub mod error;
pub mod harvest;
pub mod irrigation;
pub mod measures;
pub mod optimize;
pub mod sunlight;
pub mod verify;

pub use error::{Error, Result};
