//! Closed-loop simulation: plant, physics integration, scenarios, telemetry.

pub mod physics;
pub mod plant;
pub mod run;
pub mod scenario;
pub mod telemetry;

pub use physics::{step_physics, AppliedTorques, EnergyLedger, LoadState, PhysicsState, Servo, StepInfo};
pub use plant::{make_patient_profile, LegForceProfile, PlantSpec, PlantVariant, ProfileKind, ProfileTiming, Segment};
pub use run::{initial_state, run, FallEvents, RunSummary, SimResult, Termination};
pub use scenario::{Scenario, TimedEvent};
pub use telemetry::{to_csv_string, write_csv, TelemetryRecord, CSV_COLUMNS};
