//! Fall prevention: brake torque for a desired deceleration, EM2 tracking a
//! speed ramp, EM1 driving down at full speed to bring EM2 to rest sooner.

use crate::control::mode::FallCapture;
use crate::control::spec::{FallConfig, FallTarget, TorqueRating};
use crate::params::{ActuatorParams, G};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallCommand {
    pub servo_angle: f64,
    pub tau2: f64,
    pub w1_ref: f64,
}

/// Brake torque giving deceleration `a_d` to a mass `m` on the strap.
pub fn brake_torque_for(m: f64, a_d: f64, p: &ActuatorParams) -> f64 {
    p.drum_radius / p.r2 * m * (G + a_d)
}

#[derive(Debug, Clone, Default)]
pub struct FallController {
    /// Speed reference, ramps from -v_i towards 0 at `a_d`.
    v_ref: f64,
    /// Time spent with the ramp finished.
    since_ramp_end: f64,
    started: bool,
}

impl FallController {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn start(&mut self, capture: &FallCapture) {
        self.v_ref = -capture.v_i;
        self.since_ramp_end = 0.0;
        self.started = true;
    }

    pub fn speed_reference(&self) -> f64 {
        self.v_ref
    }

    /// One control tick. `servo_angle` is the current (measured) servo angle.
    pub fn command(
        &mut self,
        fc: &FallConfig,
        m_est: f64,
        v0: f64,
        servo_angle: f64,
        p: &ActuatorParams,
        dt: f64,
    ) -> FallCommand {
        debug_assert!(self.started, "fall controller used before start()");
        let w1_ref = -p.em1.max_speed;
        if self.v_ref == 0.0 {
            self.since_ramp_end += dt;
        }
        // an underweighed load keeps creeping down on the computed brake torque
        let stalled = self.since_ramp_end > fc.escalate_after;
        let max_force = fc.target == FallTarget::MaxForce || !(m_est > 0.0) || stalled;
        if max_force {
            if !(m_est > 0.0) {
                log::warn!("invalid mass estimate {m_est}, closing brake fully");
            }
            return FallCommand {
                servo_angle: p.brake.max_angle(),
                tau2: p.em2.peak_torque,
                w1_ref,
            };
        }

        let tau_b = brake_torque_for(m_est, fc.a_d, p);
        let servo_angle_cmd = p.brake.angle_for_torque(tau_b);

        let mut tau2 = fc.k * (self.v_ref - v0);
        if fc.em2_feedforward {
            let realized = p.brake.torque_from_angle(servo_angle);
            tau2 += (tau_b - realized).max(0.0);
        }
        self.v_ref = (self.v_ref + fc.a_d * dt).min(0.0);

        let limit = match fc.em2_limit {
            TorqueRating::Nominal => p.em2.nominal_torque,
            TorqueRating::Peak => p.em2.peak_torque,
        };
        FallCommand {
            servo_angle: servo_angle_cmd,
            tau2: tau2.clamp(-limit, limit),
            w1_ref,
        }
    }
}
