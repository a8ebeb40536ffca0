use serde::{Deserialize, Serialize};

use crate::params::FrictionParams;

/// Force controller used in assistance mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceVariant {
    /// EM2 current from the static force relation only.
    OpenLoopCurrent,
    /// Open loop plus model-based friction compensation.
    FrictionComp,
    /// Friction compensation with EM1 spinning to keep EM2 off zero speed.
    FrictionCompWithEm1 {
        /// EM1 speed (rad/s). Unset: half of EM1 max speed, sign opposite to
        /// the dominant output direction.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w1_ref: Option<f64>,
    },
    /// Load-cell feedback PID around the open-loop current.
    Pid {
        kp: f64,
        ki: f64,
        kd: f64,
        /// Clamp on the integral contribution (N·m).
        anti_windup_limit: f64,
    },
    /// First-order disturbance observer.
    Dob {
        q_cutoff: f64,
        /// Nominal actuator-side inertia (kg). Unset: drum mass plus EM2
        /// reflected inertia.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nominal_mass: Option<f64>,
    },
}

impl ForceVariant {
    pub fn label(&self) -> &'static str {
        match self {
            ForceVariant::OpenLoopCurrent => "a_open_loop",
            ForceVariant::FrictionComp => "b_friction_comp",
            ForceVariant::FrictionCompWithEm1 { .. } => "c_friction_comp_em1",
            ForceVariant::Pid { .. } => "d_pid",
            ForceVariant::Dob { .. } => "e_dob",
        }
    }

    pub fn needs_force_sensor(&self) -> bool {
        matches!(self, ForceVariant::Pid { .. } | ForceVariant::Dob { .. })
    }

    /// PID defaults, tuned in simulation.
    pub fn default_pid(em2_peak: f64) -> Self {
        ForceVariant::Pid {
            kp: 0.002,
            ki: 0.1,
            kd: 0.0,
            anti_windup_limit: 0.5 * em2_peak,
        }
    }

    pub fn default_dob() -> Self {
        ForceVariant::Dob {
            q_cutoff: 50.0,
            nominal_mass: None,
        }
    }

    /// The five assistance controllers in the canonical a–e order.
    pub fn all(em2_peak: f64) -> [ForceVariant; 5] {
        [
            ForceVariant::OpenLoopCurrent,
            ForceVariant::FrictionComp,
            ForceVariant::FrictionCompWithEm1 { w1_ref: None },
            Self::default_pid(em2_peak),
            Self::default_dob(),
        ]
    }
}

/// What the fall controller aims for once a fall is detected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallTarget {
    /// Track the configured deceleration `a_d`.
    Deceleration,
    /// Close the brake fully and push EM2 at its peak torque.
    MaxForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FallConfig {
    /// Downward output speed that triggers fall prevention (m/s).
    pub detect_speed: f64,
    /// Desired deceleration (m/s²).
    pub a_d: f64,
    /// EM2 speed-error gain (N·m·s/m).
    pub k: f64,
    /// Lift speed during recovery (m/s).
    pub recovery_speed: f64,
    pub target: FallTarget,
    /// EM2 supplies the deceleration torque the brake has not reached yet.
    pub em2_feedforward: bool,
    /// EM2 torque rating used while tracking the deceleration ramp.
    pub em2_limit: TorqueRating,
    /// Time after the speed ramp ends before a fall still in progress gets
    /// full braking (s).
    #[serde(default = "default_escalate_after")]
    pub escalate_after: f64,
}

fn default_escalate_after() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TorqueRating {
    Nominal,
    Peak,
}

impl Default for FallConfig {
    fn default() -> Self {
        FallConfig {
            detect_speed: 0.90,
            a_d: 1.0,
            k: 2.0,
            recovery_speed: 0.05,
            target: FallTarget::Deceleration,
            em2_feedforward: true,
            em2_limit: TorqueRating::Nominal,
            escalate_after: default_escalate_after(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub variant: ForceVariant,
    /// Desired unloading force in assistance mode (N).
    #[serde(rename = "F_desired")]
    pub f_desired: f64,
    pub fall: FallConfig,
    /// Friction model used for compensation. Unset: the actuator's own law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction_model: Option<FrictionParams>,
    /// Load cell available to the controller.
    pub force_sensor: bool,
    /// EM1 velocity loop proportional gain (N·m·s/rad).
    pub em1_kp: f64,
    /// EM1 velocity loop integral gain (N·m/rad).
    pub em1_ki: f64,
    /// Recovery position gain (1/s).
    pub recovery_gain: f64,
    /// Mass used when no quasi-static weighing window is available (kg).
    pub fallback_mass: f64,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec {
            variant: ForceVariant::default_dob(),
            f_desired: 150.0,
            fall: FallConfig::default(),
            friction_model: None,
            force_sensor: true,
            em1_kp: 2.0e-3,
            em1_ki: 0.05,
            recovery_gain: 2.0,
            fallback_mass: 68.0,
        }
    }
}

impl ControllerSpec {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if !(self.f_desired.is_finite() && self.f_desired >= 0.0) {
            return Err(Error::param("controller.F_desired", "must be finite and >= 0"));
        }
        let gains_ok = match self.variant {
            ForceVariant::Pid { kp, ki, kd, anti_windup_limit } => {
                [kp, ki, kd].iter().all(|g| g.is_finite()) && anti_windup_limit >= 0.0
            }
            ForceVariant::Dob { q_cutoff, nominal_mass } => {
                q_cutoff > 0.0 && nominal_mass.is_none_or(|m| m > 0.0)
            }
            ForceVariant::FrictionCompWithEm1 { w1_ref } => w1_ref.is_none_or(f64::is_finite),
            _ => true,
        };
        if !gains_ok {
            return Err(Error::param("controller.variant", "gains must be finite"));
        }
        if !(self.fall.detect_speed > 0.0) {
            return Err(Error::param("controller.fall.detect_speed", "must be > 0"));
        }
        if !(self.fall.a_d > 0.0) {
            return Err(Error::param("controller.fall.a_d", "must be > 0"));
        }
        if !(self.fall.k.is_finite() && self.fall.recovery_speed > 0.0) {
            return Err(Error::param("controller.fall", "k finite, recovery_speed > 0"));
        }
        if !(self.em1_kp > 0.0 && self.em1_ki >= 0.0 && self.recovery_gain > 0.0) {
            return Err(Error::param("controller.em1", "gains must be positive"));
        }
        if !(self.fallback_mass > 0.0) {
            return Err(Error::param("controller.fallback_mass", "must be > 0"));
        }
        if let Some(fp) = &self.friction_model {
            fp.validate()?;
        }
        if self.variant.needs_force_sensor() && !self.force_sensor {
            return Err(Error::SensorUnavailable(self.variant.label()));
        }
        Ok(())
    }
}
