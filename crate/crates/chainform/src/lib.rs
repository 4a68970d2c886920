//! Two-stage supply network formation: suppliers post wholesale prices,
//! retailers form costly links, and quantities compete downstream while
//! supplier yields stay uncertain.
//!
//! The crate covers the closed-form machinery for this game end to end:
//! greedy equilibrium construction with exhaustive and characterized
//! verification, the planner benchmark and price of stability, price
//! competition with variance- or mean-improved suppliers, and Monte Carlo
//! validation of every closed form on bounded moment-matched supply
//! distributions.

pub mod equilibrium;
mod error;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod payoff;
pub mod planner;
pub mod pricing;

pub use error::{Error, Result};
pub use model::{
    validate_params, validate_params_with_prices, GameParams, Network, PriceVector,
    SupplyRealization, ValidationReport,
};
pub use payoff::{expected_welfare, realized_welfare, WelfareBreakdown};
