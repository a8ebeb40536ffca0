//! Assistance-mode force controllers acting on EM2 (and EM1 for variant c).

use crate::control::pid::Pid;
use crate::control::spec::ForceVariant;
use crate::error::{Error, Result};
use crate::model::{friction_torque, reflected_inertia};
use crate::params::{ActuatorParams, FrictionParams};

/// Signals available to a force controller.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ForceMeasurements {
    pub v0: f64,
    pub w1: f64,
    pub w2: f64,
    /// Load cell reading, `None` when the sensor is unavailable.
    pub f_strap: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ForceCommand {
    pub tau2: f64,
    /// EM1 speed setpoint (rad/s).
    pub w1_ref: f64,
}

/// Time constant of the output-direction filter used by variant c (s).
const DIRECTION_FILTER_TAU: f64 = 1.0;
/// Filtered output speed beyond which the EM1 offset direction flips (m/s).
const DIRECTION_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct ForceController {
    variant: ForceVariant,
    params: ActuatorParams,
    friction: FrictionParams,
    pid: Option<Pid>,
    // disturbance observer
    d_hat: f64,
    prev_v0: Option<f64>,
    prev_tau2: f64,
    // variant c
    v_filt: f64,
    em1_dir: f64,
}

impl ForceController {
    pub fn new(variant: ForceVariant, params: ActuatorParams, friction: FrictionParams) -> Self {
        let pid = match variant {
            ForceVariant::Pid { kp, ki, kd, anti_windup_limit } => Some(Pid::new(
                kp,
                ki,
                kd,
                anti_windup_limit,
                params.em2.peak_torque,
            )),
            _ => None,
        };
        ForceController {
            variant,
            params,
            friction,
            pid,
            d_hat: 0.0,
            prev_v0: None,
            prev_tau2: 0.0,
            v_filt: 0.0,
            em1_dir: 1.0,
        }
    }

    pub fn variant(&self) -> ForceVariant {
        self.variant
    }

    pub fn reset(&mut self) {
        if let Some(pid) = &mut self.pid {
            pid.reset();
        }
        self.d_hat = 0.0;
        self.prev_v0 = None;
        self.prev_tau2 = 0.0;
        self.v_filt = 0.0;
    }

    /// Feed back the torque actually applied (after saturation) on the last tick.
    pub fn applied(&mut self, tau2: f64) {
        self.prev_tau2 = tau2;
    }

    /// EM2 torque for the static force relation alone.
    pub fn open_loop_torque(&self, f_d: f64) -> f64 {
        f_d * self.params.drum_radius / self.params.r2
    }

    pub fn command(&mut self, f_d: f64, m: &ForceMeasurements, dt: f64) -> Result<ForceCommand> {
        let p = self.params;
        let base = self.open_loop_torque(f_d);
        let mut w1_ref = 0.0;
        let tau2 = match self.variant {
            ForceVariant::OpenLoopCurrent => base,
            ForceVariant::FrictionComp => base + friction_torque(m.w2, f_d, &self.friction),
            ForceVariant::FrictionCompWithEm1 { w1_ref: fixed } => {
                w1_ref = match fixed {
                    Some(w) => w,
                    None => self.em1_offset(m.v0, dt),
                };
                base + friction_torque(m.w2, f_d, &self.friction)
            }
            ForceVariant::Pid { .. } => {
                let f = m.f_strap.ok_or(Error::SensorUnavailable("d_pid"))?;
                let pid = self.pid.as_mut().expect("pid state for pid variant");
                base + pid.update(f_d - f, dt)
            }
            ForceVariant::Dob { q_cutoff, nominal_mass } => {
                let f = m.f_strap.ok_or(Error::SensorUnavailable("e_dob"))?;
                let nominal = nominal_mass.unwrap_or(
                    p.drum_mass + reflected_inertia(p.em2.rotor_inertia, p.r2, p.drum_radius),
                );
                let accel = match self.prev_v0 {
                    Some(prev) if dt > 0.0 => (m.v0 - prev) / dt,
                    _ => 0.0,
                };
                self.prev_v0 = Some(m.v0);
                let raw = self.prev_tau2 - p.drum_radius / p.r2 * (nominal * accel + f);
                let tc = 1.0 / (2.0 * std::f64::consts::PI * q_cutoff);
                let alpha = dt / (dt + tc);
                self.d_hat += alpha * (raw - self.d_hat);
                base + self.d_hat
            }
        };
        let tau2 = p.em2.saturate(tau2);
        if !tau2.is_finite() {
            return Err(Error::Fault {
                t: f64::NAN,
                reason: format!("{} produced a non-finite torque", self.variant.label()),
            });
        }
        Ok(ForceCommand { tau2, w1_ref })
    }

    /// Half of EM1 max speed, turning against the dominant output direction.
    fn em1_offset(&mut self, v0: f64, dt: f64) -> f64 {
        let alpha = dt / (dt + DIRECTION_FILTER_TAU);
        self.v_filt += alpha * (v0 - self.v_filt);
        if self.v_filt > DIRECTION_THRESHOLD {
            self.em1_dir = -1.0;
        } else if self.v_filt < -DIRECTION_THRESHOLD {
            self.em1_dir = 1.0;
        }
        self.em1_dir * 0.5 * self.params.em1.max_speed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctrl(v: ForceVariant) -> ForceController {
        let p = ActuatorParams::prototype();
        ForceController::new(v, p, p.friction)
    }

    #[test]
    fn open_loop_torque_for_200n() {
        let mut c = ctrl(ForceVariant::OpenLoopCurrent);
        let cmd = c.command(200.0, &ForceMeasurements::default(), 0.004).unwrap();
        assert!((cmd.tau2 - 200.0 * 0.04 / 18.0).abs() < 1e-12);
        assert!((cmd.tau2 - 0.4444).abs() < 1e-4);
    }

    #[test]
    fn friction_comp_equals_open_loop_at_rest() {
        let mut a = ctrl(ForceVariant::OpenLoopCurrent);
        let mut b = ctrl(ForceVariant::FrictionComp);
        let m = ForceMeasurements::default();
        assert_eq!(
            a.command(180.0, &m, 0.004).unwrap(),
            b.command(180.0, &m, 0.004).unwrap()
        );
    }

    #[test]
    fn friction_comp_adds_in_direction_of_motion() {
        let mut b = ctrl(ForceVariant::FrictionComp);
        let up = ForceMeasurements { w2: 50.0, ..Default::default() };
        let down = ForceMeasurements { w2: -50.0, ..Default::default() };
        let base = 200.0 * 0.04 / 18.0;
        let tu = b.command(200.0, &up, 0.004).unwrap().tau2;
        let td = b.command(200.0, &down, 0.004).unwrap().tau2;
        assert!(tu > base && td < base);
        assert!(((tu - base) + (td - base)).abs() < 1e-12);
    }

    #[test]
    fn em1_offset_opposes_dominant_direction() {
        let mut c = ctrl(ForceVariant::FrictionCompWithEm1 { w1_ref: None });
        let still = ForceMeasurements::default();
        let w = c.command(200.0, &still, 0.004).unwrap().w1_ref;
        assert_eq!(w, 375.0);
        let rising = ForceMeasurements { v0: 0.3, ..Default::default() };
        let mut last = 0.0;
        for _ in 0..500 {
            last = c.command(200.0, &rising, 0.004).unwrap().w1_ref;
        }
        assert_eq!(last, -375.0);
    }

    #[test]
    fn feedback_variants_need_the_sensor() {
        let p = ActuatorParams::prototype();
        let m = ForceMeasurements::default();
        for v in [ForceVariant::default_pid(p.em2.peak_torque), ForceVariant::default_dob()] {
            let mut c = ctrl(v);
            assert!(matches!(c.command(100.0, &m, 0.004), Err(Error::SensorUnavailable(_))));
        }
        let mut a = ctrl(ForceVariant::OpenLoopCurrent);
        assert!(a.command(100.0, &m, 0.004).is_ok());
    }

    #[test]
    fn pid_pushes_towards_setpoint() {
        let p = ActuatorParams::prototype();
        let mut c = ctrl(ForceVariant::default_pid(p.em2.peak_torque));
        let low = ForceMeasurements { f_strap: Some(150.0), ..Default::default() };
        let t = c.command(200.0, &low, 0.004).unwrap().tau2;
        assert!(t > 200.0 * 0.04 / 18.0);
    }

    #[test]
    fn dob_estimates_a_constant_disturbance() {
        // Static plant: strap force = R2/r·(τ2 − τ_f) with τ_f = 0.05 N·m.
        let p = ActuatorParams::prototype();
        let mut c = ctrl(ForceVariant::default_dob());
        let tau_f = 0.05;
        let mut f = 0.0;
        for _ in 0..2000 {
            let cmd = c
                .command(200.0, &ForceMeasurements { f_strap: Some(f), ..Default::default() }, 0.004)
                .unwrap();
            c.applied(cmd.tau2);
            f = p.r2 / p.drum_radius * (cmd.tau2 - tau_f);
        }
        assert!((f - 200.0).abs() < 1e-6, "{f}");
    }

    #[test]
    fn output_is_saturated() {
        let p = ActuatorParams::prototype();
        let mut a = ctrl(ForceVariant::OpenLoopCurrent);
        let cmd = a.command(1e5, &ForceMeasurements::default(), 0.004).unwrap();
        assert_eq!(cmd.tau2, p.em2.peak_torque);
    }
}
