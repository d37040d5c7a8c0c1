//! Market-impact laboratory.
//!
//! The crate is organised around the lifecycle of an impact study:
//!
//! * [`marketdata`] — trade/quote ingestion, event-series preparation, and
//!   synthetic order-flow generation;
//! * [`linmodels`] — least-squares calibration of linear price/flow models
//!   and their companion-form analysis;
//! * [`irf`] — impulse responses and expected metaorder trajectories implied
//!   by a calibrated model;
//! * [`propagator`] — continuous- and discrete-time kernel models coupling
//!   transient price impact with self-exciting order flow;
//! * [`diffusivity`] — long-memory diagnostics for order flow and the
//!   variance scaling of propagator prices.

pub mod diffusivity;
pub mod irf;
pub mod linmodels;
pub mod marketdata;
pub mod numeric;
pub mod propagator;
