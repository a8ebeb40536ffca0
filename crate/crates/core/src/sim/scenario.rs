use serde::{Deserialize, Serialize};

use crate::control::{ControllerSpec, Mode, UserInput};
use crate::error::{Error, Result};
use crate::params::ActuatorParams;
use crate::sim::plant::PlantSpec;

/// Something that happens at a scheduled time during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimedEvent {
    /// Operator asks for a mode change.
    RequestMode { t: f64, mode: Mode },
    /// Patient loses leg support.
    Fall { t: f64 },
    /// New assistance force setpoint (N).
    SetForce { t: f64, value: f64 },
    /// Remote control button.
    UserInput { t: f64, input: UserInput },
}

impl TimedEvent {
    pub fn t(&self) -> f64 {
        match *self {
            TimedEvent::RequestMode { t, .. }
            | TimedEvent::Fall { t }
            | TimedEvent::SetForce { t, .. }
            | TimedEvent::UserInput { t, .. } => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub params: ActuatorParams,
    pub plant: PlantSpec,
    pub controller: ControllerSpec,
    pub initial_mode: Mode,
    /// s
    pub duration: f64,
    /// s
    pub physics_dt: f64,
    /// s, an integer multiple of `physics_dt`
    pub control_dt: f64,
    pub events: Vec<TimedEvent>,
    pub seed: u64,
    /// Load-cell noise standard deviation (N).
    pub load_cell_noise: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            params: ActuatorParams::prototype(),
            plant: PlantSpec::default(),
            controller: ControllerSpec::default(),
            initial_mode: Mode::TransferHf,
            duration: 5.0,
            physics_dt: 1e-3,
            control_dt: 4e-3,
            events: Vec::new(),
            seed: 0,
            load_cell_noise: 0.5,
        }
    }
}

impl Scenario {
    /// Physics steps per control tick.
    pub fn substeps(&self) -> usize {
        (self.control_dt / self.physics_dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.plant.validate()?;
        self.controller.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::param("duration", "must be > 0"));
        }
        if !(self.physics_dt > 0.0 && self.control_dt > 0.0) {
            return Err(Error::param("physics_dt", "time steps must be > 0"));
        }
        let ratio = self.control_dt / self.physics_dt;
        if ratio < 0.5 || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::param(
                "control_dt",
                format!("must be an integer multiple of physics_dt (ratio {ratio})"),
            ));
        }
        if !(self.load_cell_noise >= 0.0) {
            return Err(Error::param("load_cell_noise", "must be >= 0"));
        }
        if let Some(ev) = self.events.iter().find(|e| !(e.t() >= 0.0 && e.t().is_finite())) {
            return Err(Error::param("events", format!("bad event time in {ev:?}")));
        }
        for ev in &self.events {
            if let TimedEvent::SetForce { value, .. } = ev {
                if !(*value >= 0.0 && value.is_finite()) {
                    return Err(Error::param("events.value", "force setpoint must be >= 0"));
                }
            }
        }
        Ok(())
    }
}
