//! Forecasting a game studio's daily active users and valuing the resulting
//! revenue stream.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`timeseries`] loads per-game DAU histories and picks the most popular
//!    titles.
//! 2. [`tailfit`] fits a power-law decay tail to each title and turns it into a
//!    replayable [`GameTemplate`].
//! 3. [`scenario`] simulates future aggregate DAU by launching randomly drawn
//!    templates at a fixed cadence, producing an ensemble of paths.
//! 4. [`revenue`] and [`growthfit`] fit logistic revenue-per-user curves under
//!    three carrying-capacity cases, and [`valuation`] discounts the projected
//!    profits of every path.
//!
//! [`fixture`] generates synthetic inputs with known ground truth.

pub mod error;
pub mod fixture;
pub mod growthfit;
mod lm;
pub mod revenue;
pub mod scenario;
pub mod stats;
pub mod tailfit;
pub mod timeseries;
pub mod valuation;

pub use error::{Error, ErrorKind, Result};
pub use growthfit::{LogisticParams, Point};
pub use revenue::{QuarterlyRevenue, RevenueCase, RevenueCurve, RevenueScenarios};
pub use scenario::{Scenario, SimulationConfig, Simulator};
pub use tailfit::{GameTemplate, PowerLawTail, TailModel};
pub use timeseries::{DailySeries, DateWindow, GameRecord};
pub use valuation::{ValuationConfig, ValuationDistribution};
