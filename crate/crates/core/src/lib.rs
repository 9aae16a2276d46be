//! Skew stickiness ratio (SSR) toolkit for Bergomi-type forward variance models.
//!
//! The SSR is computed three ways that cross-check each other:
//!
//! * the representation `R = X / Y`, estimated by Monte Carlo on exactly simulated
//!   Volterra Gaussian factors ([`estimators::xy`]),
//! * a definition-level nested regression of ATM-vol increments on log returns
//!   ([`estimators::regression`]),
//! * closed-form and quadrature limits for short maturity and small vol-of-vol
//!   ([`asymptotics`]).

pub mod asymptotics;
pub mod error;
pub mod estimators;
pub mod math_core;
pub mod model;
pub mod quadrature;
pub mod sim;

pub use error::{Result, SsrError};
