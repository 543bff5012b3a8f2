//! Pricing of discretely monitored options (autocallables, single and double
//! barrier options, touch options, Bermudan options) under Black-Scholes
//! dynamics with piecewise-constant rates, yields and volatilities.
//!
//! The value function is propagated backwards from maturity on a single
//! uniform log-price grid. At every observation date the expectation integral
//! is split into a smooth quadrature part, integrated with composite Simpson
//! weights and evaluated on the whole grid through one FFT convolution, and an
//! early-exercise part given in closed form by asset-or-nothing and
//! cash-or-nothing binaries. The discontinuities of the payoff never enter the
//! quadrature, which keeps the scheme fourth order on a fixed grid.
//!
//! ```
//! use discrete_quad::{engine, market_model::MarketCurves, product};
//!
//! let curves = MarketCurves::constant(0.0, 1.0, 0.02, 0.0, 0.2).unwrap();
//! let dates = [0.25, 0.5, 0.75, 1.0];
//! let barriers = [110.0, 110.0, 110.0, 110.0];
//! let coupons = [0.01, 0.02, 0.03, 0.04];
//! let schedule = product::make_autocallable(
//!     0.0, 100.0, &dates, &barriers, &coupons, -0.05, product::Direction::Up,
//! )
//! .unwrap();
//! let pricing = engine::price(&schedule, &curves, 501).unwrap();
//! assert!(pricing.price.is_finite());
//! ```

pub mod analytic;
pub mod bermudan;
pub mod config;
pub mod engine;
mod error;
pub mod market_model;
pub mod product;
pub mod validation;

#[cfg(test)]
pub(crate) mod oracle;

pub use error::{PricingError, Result};
