//! Evaluation experiments built on the simulator.

pub mod capability;
pub mod course;
pub mod design;
pub mod fall;
pub mod stats;
