//! Kinematics, statics and equations of motion of the dual-motor actuator.
//!
//! The integrated coordinates are the strap velocity `v0` and the EM1 speed
//! `w1`; the EM2 speed `w2` is always recovered from the differential
//! kinematics `v0/r = w1/R1 + w2/R2`.
//!
//! The damping matrix uses `-R2²·b2/(R1·r)` in both off-diagonal entries so
//! that it is the symmetric Rayleigh matrix of `b0·v0² + b1·w1² + b2·w2²`.

use nalgebra::{Matrix2, Matrix2x3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ActuatorParams, FrictionParams};

/// Dynamic state of the actuator. `w2` is derived, never stored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    /// Strap position, up positive (m).
    pub x0: f64,
    /// Strap velocity, up positive (m/s).
    pub v0: f64,
    /// EM1 speed (rad/s).
    pub w1: f64,
    /// Brake torque currently applied by the caliper (N·m).
    pub brake_torque: f64,
    /// EM2 line held at zero speed by the brake and friction.
    pub brake_engaged: bool,
}

impl ActuatorState {
    pub fn w2(&self, p: &ActuatorParams) -> f64 {
        w2_from(self.v0, self.w1, p)
    }

    /// Distance from the differential kinematics, `v0/r - w1/R1 - w2/R2`.
    pub fn kinematic_residual(&self, p: &ActuatorParams) -> f64 {
        self.v0 / p.drum_radius - self.w1 / p.r1 - self.w2(p) / p.r2
    }
}

/// Torques and load acting on the actuator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DynamicsInputs {
    pub tau1: f64,
    pub tau2: f64,
    pub tau_b: f64,
    /// Load force pulling the strap down (N).
    pub f_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaMatrices {
    pub h: Matrix2<f64>,
    pub d: Matrix2<f64>,
    pub b: Matrix2x3<f64>,
}

pub fn output_velocity(w1: f64, w2: f64, p: &ActuatorParams) -> f64 {
    p.drum_radius * (w1 / p.r1 + w2 / p.r2)
}

pub fn w2_from(v0: f64, w1: f64, p: &ActuatorParams) -> f64 {
    p.r2 * (v0 / p.drum_radius - w1 / p.r1)
}

/// Output force held by EM1 with the brake closed.
pub fn static_force(tau1: f64, p: &ActuatorParams) -> f64 {
    p.r1 * tau1 / p.drum_radius
}

/// Output force produced by EM2 against the brake, with `w2_sign` in {-1, 0, 1}.
pub fn static_force_hs(tau2: f64, tau_b: f64, w2_sign: i8, p: &ActuatorParams) -> f64 {
    p.r2 * (tau2 - tau_b * f64::from(w2_sign.signum())) / p.drum_radius
}

pub fn reflected_inertia(inertia: f64, ratio: f64, radius: f64) -> f64 {
    inertia * ratio * ratio / (radius * radius)
}

pub fn smooth_sign(x: f64, sharpness: f64) -> f64 {
    (sharpness * x).tanh()
}

/// Generalized mass, damping and input matrices for a load `m` on the strap.
pub fn build_matrices(m: f64, p: &ActuatorParams) -> Result<InertiaMatrices> {
    if m < 0.0 || m.is_nan() {
        return Err(Error::NegativeMass(m));
    }
    let (r, r1, r2) = (p.drum_radius, p.r1, p.r2);
    let (i1, i2) = (p.em1.rotor_inertia, p.em2.rotor_inertia);
    let (b0, b1, b2) = (p.output_damping, p.em1.viscous_damping, p.em2.viscous_damping);
    let k2 = r2 * r2;

    let h12 = -k2 * i2 / (r1 * r);
    let h = Matrix2::new(m + k2 * i2 / (r * r), h12, h12, i1 + k2 * i2 / (r1 * r1));

    let d12 = -k2 * b2 / (r1 * r);
    let d = Matrix2::new(b0 + k2 * b2 / (r * r), d12, d12, b1 + k2 * b2 / (r1 * r1));

    let b = Matrix2x3::new(0.0, r2 / r, -1.0, 1.0, -r2 / r1, 0.0);
    Ok(InertiaMatrices { h, d, b })
}

impl InertiaMatrices {
    /// Solve `H·a = -D·q + B·u` for the accelerations of `(v0, w1)`.
    pub fn accel(&self, q: Vector2<f64>, u: Vector3<f64>) -> Result<Vector2<f64>> {
        let det = self.h.determinant();
        let scale = self.h.norm().max(f64::MIN_POSITIVE);
        if det.abs() <= 1e-14 * scale * scale {
            return Err(Error::SingularInertia(det));
        }
        let rhs = -self.d * q + self.b * u;
        self.h
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularInertia(det))
    }
}

/// Full two-degree-of-freedom model. Returns `(dv0/dt, dw1/dt)`.
///
/// The brake term uses `tanh(sign_sharpness·w2)` in place of `sign(w2)`.
pub fn full_dynamics(
    state: &ActuatorState,
    inputs: &DynamicsInputs,
    m: f64,
    p: &ActuatorParams,
) -> Result<(f64, f64)> {
    let mats = build_matrices(m, p)?;
    let w2 = state.w2(p);
    let tau2_net = inputs.tau2 - inputs.tau_b * smooth_sign(w2, p.brake.sign_sharpness);
    let a = mats.accel(
        Vector2::new(state.v0, state.w1),
        Vector3::new(inputs.tau1, tau2_net, inputs.f_m),
    )?;
    Ok((a[0], a[1]))
}

/// Full model with the brake holding EM2 still (`w2 = 0` kept by a brake
/// reaction within `[-tau_b, tau_b]`).
///
/// Returns `(dv0/dt, dw1/dt, reaction)` where `reaction` is the brake torque
/// needed. The caller decides whether it fits the brake capacity.
pub fn held_dynamics(
    state: &ActuatorState,
    inputs: &DynamicsInputs,
    m: f64,
    p: &ActuatorParams,
) -> Result<(f64, f64, f64)> {
    let mats = build_matrices(m, p)?;
    let q = Vector2::new(state.v0, state.w1);
    let free = mats.accel(q, Vector3::new(inputs.tau1, inputs.tau2, inputs.f_m))?;
    // unit brake torque enters like -tau2
    let unit = mats.accel(Vector2::zeros(), Vector3::new(0.0, -1.0, 0.0))?;
    let j = Vector2::new(p.r2 / p.drum_radius, -p.r2 / p.r1);
    let reaction = -j.dot(&free) / j.dot(&unit);
    let a = free + unit * reaction;
    Ok((a[0], a[1], reaction))
}

/// Full model with EM1 locked (`w1` constant). Returns `(dv0/dt, reaction)`
/// where `reaction` is the extra EM1 torque that holds it.
pub fn em1_held_dynamics(
    state: &ActuatorState,
    inputs: &DynamicsInputs,
    m: f64,
    p: &ActuatorParams,
) -> Result<(f64, f64)> {
    let mats = build_matrices(m, p)?;
    let w2 = state.w2(p);
    let tau2_net = inputs.tau2 - inputs.tau_b * smooth_sign(w2, p.brake.sign_sharpness);
    let q = Vector2::new(state.v0, state.w1);
    let free = mats.accel(q, Vector3::new(inputs.tau1, tau2_net, inputs.f_m))?;
    let unit = mats.accel(Vector2::zeros(), Vector3::new(1.0, 0.0, 0.0))?;
    let reaction = -free[1] / unit[1];
    Ok((free[0] + unit[0] * reaction, reaction))
}

/// Brake closed: EM1 alone drives the output.
pub fn hf_dynamics(state: &ActuatorState, tau1: f64, f_m: f64, m: f64, p: &ActuatorParams) -> f64 {
    let r = p.drum_radius;
    let mass = m + reflected_inertia(p.em1.rotor_inertia, p.r1, r);
    let drive = p.r1 / r * (tau1 - p.em1.viscous_damping * state.w1);
    (drive - p.output_damping * state.v0 - f_m) / mass
}

/// Brake open, EM1 influence neglected (valid for `R1 >> R2`).
pub fn hs_dynamics(
    state: &ActuatorState,
    tau2: f64,
    tau_b: f64,
    f_m: f64,
    m: f64,
    p: &ActuatorParams,
) -> f64 {
    let r = p.drum_radius;
    let w2 = state.w2(p);
    let mass = m + reflected_inertia(p.em2.rotor_inertia, p.r2, r);
    let brake = tau_b * smooth_sign(w2, p.brake.sign_sharpness);
    let drive = p.r2 / r * (tau2 - brake - p.em2.viscous_damping * w2);
    (drive - p.output_damping * state.v0 - f_m) / mass
}

/// EM2 acceleration implied by the time-differentiated kinematics.
pub fn nullspace_w2_rate(v0_dot: f64, w1_dot: f64, p: &ActuatorParams) -> f64 {
    p.r2 * (v0_dot / p.drum_radius - w1_dot / p.r1)
}

/// Dry + viscous friction on the EM2 line, `(b|w2| + c + d·F_d)·tanh(s·w2)`.
pub fn friction_torque(w2: f64, f_d: f64, fp: &FrictionParams) -> f64 {
    friction_magnitude(w2, f_d, fp) * (fp.tanh_sharpness * w2).tanh()
}

/// Friction level before the direction factor is applied.
pub fn friction_magnitude(w2: f64, f_d: f64, fp: &FrictionParams) -> f64 {
    fp.b_visc * w2.abs() + fp.dry_offset + fp.load_scale * f_d
}
