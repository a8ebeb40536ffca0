//! Output capabilities of a parameter set against declared expectations.

use serde::Serialize;

use crate::model::{reflected_inertia, static_force, static_force_hs};
use crate::params::{ActuatorParams, KGF};

/// Output speed used for the backdrive force estimate (m/s).
pub const BACKDRIVE_SPEED: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapabilityCheck {
    pub name: String,
    pub unit: String,
    pub value: f64,
    pub expected: f64,
    /// Relative tolerance.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapabilityReport {
    pub checks: Vec<CapabilityCheck>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Capabilities {
    /// kgf
    pub hf_max_force: f64,
    pub hs_force_nominal: f64,
    pub hs_force_peak: f64,
    /// m/s
    pub hf_velocity: f64,
    pub hs_velocity: f64,
    pub hs_velocity_at_peak: f64,
    /// kg
    pub hf_reflected_inertia: f64,
    pub hs_reflected_inertia: f64,
    /// Force needed to drag the output down with the brake open and EM1 still (kgf).
    pub backdrive_force: f64,
}

/// Steady backdrive at `v`: output damping plus EM2 damping and friction
/// reflected through R2/r. The load-dependent friction term depends on the
/// force itself, so the balance is solved for F.
pub fn backdrive_force(p: &ActuatorParams, v: f64) -> f64 {
    let k = p.r2 / p.drum_radius;
    let w2 = v * k;
    let fp = &p.friction;
    let dir = (fp.tanh_sharpness * w2).tanh();
    let free = p.output_damping * v
        + k * (p.em2.viscous_damping * w2 + (fp.b_visc * w2.abs() + fp.dry_offset) * dir);
    free / (1.0 - k * fp.load_scale * dir)
}

pub fn capabilities(p: &ActuatorParams) -> Capabilities {
    let r = p.drum_radius;
    Capabilities {
        hf_max_force: static_force(p.em1.nominal_torque, p) / KGF,
        hs_force_nominal: static_force_hs(p.em2.nominal_torque, 0.0, 0, p) / KGF,
        hs_force_peak: static_force_hs(p.em2.peak_torque, 0.0, 0, p) / KGF,
        hf_velocity: p.em1_output_speed(p.em1.max_speed),
        hs_velocity: r * p.em2.max_speed / p.r2,
        hs_velocity_at_peak: r * p.em2.speed_at_peak / p.r2,
        hf_reflected_inertia: reflected_inertia(p.em1.rotor_inertia, p.r1, r),
        hs_reflected_inertia: reflected_inertia(p.em2.rotor_inertia, p.r2, r),
        backdrive_force: backdrive_force(p, BACKDRIVE_SPEED) / KGF,
    }
}

pub fn capability_check(p: &ActuatorParams) -> CapabilityReport {
    let c = capabilities(p);
    let rows = [
        ("hf_max_force", "kgf", c.hf_max_force, 318.0, 0.05),
        ("hs_force_nominal", "kgf", c.hs_force_nominal, 59.0, 0.05),
        ("hs_force_peak", "kgf", c.hs_force_peak, 100.0, 0.05),
        ("hf_velocity", "m/s", c.hf_velocity, 0.05, 0.05),
        ("hs_velocity", "m/s", c.hs_velocity, 0.55, 0.05),
        ("hs_velocity_at_peak", "m/s", c.hs_velocity_at_peak, 0.34, 0.05),
        ("hf_reflected_inertia", "kg", c.hf_reflected_inertia, 3427.0, 0.02),
        ("hs_reflected_inertia", "kg", c.hs_reflected_inertia, 5.1, 0.02),
        ("backdrive_force", "kgf", c.backdrive_force, 3.2, 0.30),
    ];
    let checks: Vec<CapabilityCheck> = rows
        .into_iter()
        .map(|(name, unit, value, expected, tolerance)| CapabilityCheck {
            name: name.to_string(),
            unit: unit.to_string(),
            value,
            expected,
            tolerance,
            pass: ((value - expected) / expected).abs() <= tolerance,
        })
        .collect();
    let all_pass = checks.iter().all(|c| c.pass);
    CapabilityReport { checks, all_pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::design::{evaluate_design, DesignCandidate, Requirements};

    #[test]
    fn prototype_passes() {
        let r = capability_check(&ActuatorParams::prototype());
        for c in &r.checks {
            assert!(c.pass, "{} = {} expected {}", c.name, c.value, c.expected);
        }
    }

    #[test]
    fn agrees_with_design_evaluation() {
        let p = ActuatorParams::prototype();
        let c = capabilities(&p);
        let e = evaluate_design(&DesignCandidate::from_params("prototype", &p), &Requirements::default()).unwrap();
        assert!((e.max_force - c.hf_max_force).abs() < 1e-9);
        assert!((e.hs_force - c.hs_force_nominal).abs() < 1e-9);
        assert!((e.max_speed - c.hs_velocity).abs() < 1e-12);
        assert!((e.hf_speed - c.hf_velocity).abs() < 1e-12);
        assert!((e.reflected_inertia - c.hs_reflected_inertia).abs() < 1e-9);
    }

    #[test]
    fn backdrive_balances_friction() {
        let p = ActuatorParams::prototype();
        let v = BACKDRIVE_SPEED;
        let f = backdrive_force(&p, v);
        let w2 = v * p.r2 / p.drum_radius;
        let resist = p.output_damping * v
            + p.r2 / p.drum_radius
                * (p.em2.viscous_damping * w2 + crate::model::friction_torque(w2, f, &p.friction));
        assert!((f - resist).abs() < 1e-9);
    }
}
