//! Dual-motor, brake-equipped ceiling-lift actuator: dynamics, control,
//! closed-loop simulation and the evaluation experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod error;
pub mod experiments;
pub mod identify;
pub mod model;
pub mod params;
pub mod sim;

pub use error::{Error, Result};
pub use params::{ActuatorParams, BrakeParams, FrictionParams, MotorParams, G};
