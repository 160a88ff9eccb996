//! Deterministic simulation stack for an automated light commercial vehicle.
//!
//! Layers, bottom up: [`dynamics`] (single-track plant with Dugoff tires),
//! [`actuation`] (throttle, brake duty and steering servo), [`guidance`]
//! (CC/ACC/CACC and the waypoint follower), [`sensing`], [`comms`] (V2V
//! codec, UDP to CAN bridge, impaired channel) and [`harness`] (scenarios,
//! multi-rate scheduler, metrics and outputs).

// `!(x > 0.0)` is used on purpose so NaN is rejected with the out-of-range case.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuation;
pub mod comms;
pub mod config;
pub mod dynamics;
pub mod guidance;
pub mod harness;
pub mod params;
pub mod pid;
pub mod sensing;

pub use params::{VehicleConfig, VehicleParameters};
