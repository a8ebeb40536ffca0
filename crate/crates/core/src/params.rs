//! Physical parameters of the two motor lines, the drum, the brake and the
//! EM2 friction model.
//!
//! All values are SI. The prototype defaults mirror the bundled
//! `prototype.params` file; rotor inertias are back-solved from the
//! reflected inertias of the prototype rather than read off a datasheet.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gravitational acceleration, also the kgf conversion factor.
pub const G: f64 = 9.81;

/// Newtons per kilogram-force.
pub const KGF: f64 = G;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorParams {
    /// N·m/A
    pub torque_constant: f64,
    /// Continuous torque at the motor shaft (N·m).
    pub nominal_torque: f64,
    /// Saturation limit for torque commands (N·m).
    pub peak_torque: f64,
    /// Loaded speed at nominal torque (rad/s).
    pub max_speed: f64,
    /// Speed reachable while delivering `peak_torque` (rad/s).
    pub speed_at_peak: f64,
    /// kg·m²
    pub rotor_inertia: f64,
    /// N·m·s/rad
    pub viscous_damping: f64,
}

impl MotorParams {
    pub fn validate(&self, name: &str) -> Result<()> {
        let fields = [
            ("torque_constant", self.torque_constant),
            ("nominal_torque", self.nominal_torque),
            ("peak_torque", self.peak_torque),
            ("max_speed", self.max_speed),
            ("speed_at_peak", self.speed_at_peak),
            ("rotor_inertia", self.rotor_inertia),
            ("viscous_damping", self.viscous_damping),
        ];
        for (field, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(
                    format!("{name}.{field}"),
                    format!("must be strictly positive, got {value}"),
                ));
            }
        }
        if self.peak_torque < self.nominal_torque {
            return Err(Error::param(
                format!("{name}.peak_torque"),
                "must be at least nominal_torque",
            ));
        }
        if self.speed_at_peak > self.max_speed {
            return Err(Error::param(
                format!("{name}.speed_at_peak"),
                "must not exceed max_speed",
            ));
        }
        Ok(())
    }

    /// Clamp a torque command to the peak limit.
    pub fn saturate(&self, torque: f64) -> f64 {
        torque.clamp(-self.peak_torque, self.peak_torque)
    }
}

/// Servo-driven series-elastic disk brake on the EM2 line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrakeParams {
    /// N·m/deg
    pub angle_to_torque_slope: f64,
    /// N·m (negative: pads engage after a dead band).
    pub angle_to_torque_offset: f64,
    /// N·m
    pub max_torque: f64,
    /// deg/s
    pub servo_rate_limit: f64,
    /// s
    pub servo_delay: f64,
    /// Smoothing of sign(ω2) in the pure dynamics functions (s/rad).
    pub sign_sharpness: f64,
}

impl BrakeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_to_torque_slope > 0.0) {
            return Err(Error::param("brake.angle_to_torque_slope", "must be > 0"));
        }
        if !(self.max_torque > 0.0) {
            return Err(Error::param("brake.max_torque", "must be > 0"));
        }
        if !(self.servo_rate_limit > 0.0) {
            return Err(Error::param("brake.servo_rate_limit", "must be > 0"));
        }
        if !(self.servo_delay >= 0.0) {
            return Err(Error::param("brake.servo_delay", "must be >= 0"));
        }
        if !(self.sign_sharpness > 0.0) {
            return Err(Error::param("brake.sign_sharpness", "must be > 0"));
        }
        if !self.angle_to_torque_offset.is_finite() {
            return Err(Error::param("brake.angle_to_torque_offset", "must be finite"));
        }
        Ok(())
    }

    /// Linear servo-angle map clamped to `[0, max_torque]`.
    pub fn torque_from_angle(&self, angle_deg: f64) -> f64 {
        (self.angle_to_torque_slope * angle_deg + self.angle_to_torque_offset)
            .clamp(0.0, self.max_torque)
    }

    /// Smallest angle producing `torque` (after clamping to the reachable range).
    pub fn angle_for_torque(&self, torque: f64) -> f64 {
        let torque = torque.clamp(0.0, self.max_torque);
        ((torque - self.angle_to_torque_offset) / self.angle_to_torque_slope).max(0.0)
    }

    /// Servo angle that fully closes the brake.
    pub fn max_angle(&self) -> f64 {
        self.angle_for_torque(self.max_torque)
    }
}

/// Coefficients of the dry + viscous friction law on the EM2 line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionParams {
    /// Viscous coefficient b (N·m·s/rad).
    pub b_visc: f64,
    /// Dry offset c (N·m).
    pub dry_offset: f64,
    /// Load scaling d (N·m/N).
    pub load_scale: f64,
    /// tanh sharpness (s/rad).
    pub tanh_sharpness: f64,
}

impl FrictionParams {
    pub const ZERO: FrictionParams = FrictionParams {
        b_visc: 0.0,
        dry_offset: 0.0,
        load_scale: 0.0,
        tanh_sharpness: 10.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("friction.b_visc", self.b_visc),
            ("friction.dry_offset", self.dry_offset),
            ("friction.load_scale", self.load_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(field, format!("must be >= 0, got {v}")));
            }
        }
        if !(self.tanh_sharpness > 0.0) {
            return Err(Error::param("friction.tanh_sharpness", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorParams {
    pub em1: MotorParams,
    pub em2: MotorParams,
    /// Total reduction EM1 → drum.
    pub r1: f64,
    /// Total reduction EM2 → drum.
    pub r2: f64,
    /// m
    pub drum_radius: f64,
    /// Output viscous damping b0 (N·s/m).
    pub output_damping: f64,
    /// Translational equivalent of the drum and strap (kg).
    pub drum_mass: f64,
    pub brake: BrakeParams,
    pub friction: FrictionParams,
}

impl ActuatorParams {
    /// Prototype values: ratios 600:1 / 18:1 on a 0.04 m drum.
    pub fn prototype() -> Self {
        let r = 0.04;
        let r1 = 600.0;
        let r2 = 18.0;
        ActuatorParams {
            em1: MotorParams {
                torque_constant: 0.0302,
                // 318 kgf at the output, limited by the 66:1 gearbox rating.
                nominal_torque: 0.2080,
                peak_torque: 0.2080,
                // 0.05 m/s loaded
                max_speed: 750.0,
                speed_at_peak: 750.0,
                rotor_inertia: 1.523e-5,
                viscous_damping: 1.0e-5,
            },
            em2: MotorParams {
                torque_constant: 0.43,
                // 59 kgf nominal, 100 kgf peak
                nominal_torque: 59.0 * KGF * r / r2,
                peak_torque: 100.0 * KGF * r / r2,
                // 0.55 m/s loaded, 0.34 m/s at peak force
                max_speed: 0.55 * r2 / r,
                speed_at_peak: 0.34 * r2 / r,
                rotor_inertia: 2.52e-5,
                viscous_damping: 1.0e-5,
            },
            r1,
            r2,
            drum_radius: r,
            output_damping: 1.0,
            drum_mass: 0.5,
            brake: BrakeParams {
                angle_to_torque_slope: 0.1,
                angle_to_torque_offset: -0.5,
                max_torque: 7.0,
                servo_rate_limit: 60.0,
                servo_delay: 0.02,
                sign_sharpness: 50.0,
            },
            friction: FrictionParams {
                b_visc: 8.0e-4,
                // 3.2 kgf backdrive force at the output
                dry_offset: 3.2 * KGF * r / r2,
                load_scale: 1.0e-4,
                tanh_sharpness: 10.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.em1.validate("em1")?;
        self.em2.validate("em2")?;
        self.brake.validate()?;
        self.friction.validate()?;
        if !(self.r2 > 0.0 && self.r1 > self.r2) {
            return Err(Error::param("r1/r2", "requires r1 > r2 > 0"));
        }
        if !(self.drum_radius > 0.0) {
            return Err(Error::param("drum_radius", "must be > 0"));
        }
        if !(self.output_damping >= 0.0) {
            return Err(Error::param("output_damping", "must be >= 0"));
        }
        if !(self.drum_mass >= 0.0) {
            return Err(Error::param("drum_mass", "must be >= 0"));
        }
        Ok(())
    }

    /// Output speed produced by EM1 alone at `w1`.
    pub fn em1_output_speed(&self, w1: f64) -> f64 {
        self.drum_radius * w1 / self.r1
    }
}

impl Default for ActuatorParams {
    fn default() -> Self {
        Self::prototype()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prototype_is_valid() {
        ActuatorParams::prototype().validate().unwrap();
    }

    #[test]
    fn rejects_inverted_ratios() {
        let mut p = ActuatorParams::prototype();
        p.r1 = 10.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_peak_below_nominal() {
        let mut p = ActuatorParams::prototype();
        p.em2.peak_torque = 0.5 * p.em2.nominal_torque;
        assert!(matches!(p.validate(), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn brake_map_is_clamped() {
        let b = ActuatorParams::prototype().brake;
        assert_eq!(b.torque_from_angle(0.0), 0.0);
        assert_eq!(b.torque_from_angle(1e4), b.max_torque);
        let a = b.angle_for_torque(2.0);
        assert!((b.torque_from_angle(a) - 2.0).abs() < 1e-12);
        assert!((b.torque_from_angle(b.max_angle()) - b.max_torque).abs() < 1e-12);
    }

    #[test]
    fn backdrive_offset_matches_3_2_kgf() {
        let p = ActuatorParams::prototype();
        let force = p.friction.dry_offset * p.r2 / p.drum_radius;
        assert!((force / KGF - 3.2).abs() < 1e-9);
    }
}
