//! Load attached to the strap: a dead weight or a scripted patient.
//!
//! The patient is a point mass whose legs push with whatever force keeps
//! the centre of mass on a reference trajectory (feed-forward on the
//! reference acceleration and on the measured strap force, plus a PD
//! correction). Legs can only push, and a fall removes the leg force.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::G;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantVariant {
    DeadLoad {
        mass: f64,
    },
    Patient {
        mass: f64,
        profile: LegForceProfile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fall_time: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub variant: PlantVariant,
    /// N/m
    pub strap_stiffness: f64,
    /// N·s/m
    pub strap_damping: f64,
    /// Initial load height (m). Patients start at their profile height.
    pub initial_height: f64,
    /// Strap tension at t = 0 (N). Unset: full weight for a dead load or a
    /// hanging patient, otherwise the assistance setpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_strap_force: Option<f64>,
}

impl Default for PlantSpec {
    fn default() -> Self {
        PlantSpec {
            variant: PlantVariant::DeadLoad { mass: 68.0 },
            strap_stiffness: 5.0e4,
            strap_damping: 500.0,
            initial_height: 1.0,
            initial_strap_force: None,
        }
    }
}

impl PlantSpec {
    pub fn dead_load(mass: f64) -> Self {
        PlantSpec {
            variant: PlantVariant::DeadLoad { mass },
            ..Default::default()
        }
    }

    pub fn patient(mass: f64, profile: LegForceProfile, fall_time: Option<f64>) -> Self {
        PlantSpec {
            variant: PlantVariant::Patient { mass, profile, fall_time },
            ..Default::default()
        }
    }

    pub fn mass(&self) -> f64 {
        match &self.variant {
            PlantVariant::DeadLoad { mass } | PlantVariant::Patient { mass, .. } => *mass,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass() > 0.0 && self.mass().is_finite()) {
            return Err(Error::param("plant.mass", "must be > 0"));
        }
        if !(self.strap_stiffness > 0.0 && self.strap_damping >= 0.0) {
            return Err(Error::param("plant.strap", "stiffness > 0, damping >= 0"));
        }
        if let PlantVariant::Patient { profile, .. } = &self.variant {
            profile.validate()?;
        }
        Ok(())
    }

    /// Unilateral strap tension. `x0` is the strap end, `xp` the load, both up positive.
    pub fn strap_force(&self, x0: f64, v0: f64, xp: f64, vp: f64) -> f64 {
        let stretch = x0 - xp;
        if stretch <= 0.0 {
            return 0.0;
        }
        (self.strap_stiffness * stretch + self.strap_damping * (v0 - vp)).max(0.0)
    }

    /// Leg force of the load at time `t`.
    pub fn leg_force(&self, t: f64, xp: f64, vp: f64, f_strap: f64, fallen: bool) -> f64 {
        match &self.variant {
            PlantVariant::DeadLoad { .. } => 0.0,
            PlantVariant::Patient { mass, profile, fall_time } => {
                if fallen || fall_time.is_some_and(|tf| t >= tf) {
                    0.0
                } else {
                    profile.leg_force(t, *mass, xp, vp, f_strap)
                }
            }
        }
    }
}

/// One piece of a scripted centre-of-mass trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    /// Standing or sitting still.
    Hold { duration: f64 },
    /// Legs off, hanging in the harness.
    Hang { duration: f64 },
    /// Minimum-jerk height change (sit-to-stand when positive).
    MinJerk { duration: f64, delta: f64 },
    /// Vertical oscillation while walking, starting and ending at rest.
    Walk { duration: f64, amplitude: f64, frequency: f64 },
    /// Standing or sitting with postural sway.
    Sway { duration: f64, amplitude: f64, frequency: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Hold { duration }
            | Segment::Hang { duration }
            | Segment::MinJerk { duration, .. }
            | Segment::Walk { duration, .. }
            | Segment::Sway { duration, .. } => duration,
        }
    }

    fn net_delta(&self) -> f64 {
        match *self {
            Segment::MinJerk { delta, .. } => delta,
            _ => 0.0,
        }
    }
}

/// Reference point of the centre-of-mass trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub x: f64,
    pub v: f64,
    pub a: f64,
    pub hanging: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegForceProfile {
    pub start_height: f64,
    pub segments: Vec<Segment>,
    /// N/m
    pub tracking_kp: f64,
    /// N·s/m
    pub tracking_kd: f64,
}

impl LegForceProfile {
    pub fn validate(&self) -> Result<()> {
        if self.segments.iter().any(|s| !(s.duration() > 0.0)) {
            return Err(Error::param("plant.profile.segments", "durations must be > 0"));
        }
        if !(self.tracking_kp >= 0.0 && self.tracking_kd >= 0.0) {
            return Err(Error::param("plant.profile", "tracking gains must be >= 0"));
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    pub fn starts_hanging(&self) -> bool {
        matches!(self.segments.first(), Some(Segment::Hang { .. }))
    }

    /// Reference trajectory at `t`; holds the final height after the last segment.
    pub fn reference(&self, t: f64) -> ReferencePoint {
        let mut t0 = 0.0;
        let mut x0 = self.start_height;
        for seg in &self.segments {
            let d = seg.duration();
            if t < t0 + d {
                return segment_point(seg, t - t0, x0);
            }
            t0 += d;
            x0 += seg.net_delta();
        }
        ReferencePoint { x: x0, v: 0.0, a: 0.0, hanging: false }
    }

    pub fn leg_force(&self, t: f64, mass: f64, x: f64, v: f64, f_strap: f64) -> f64 {
        let r = self.reference(t);
        if r.hanging {
            return 0.0;
        }
        let f = mass * (G + r.a) - f_strap
            + self.tracking_kp * (r.x - x)
            + self.tracking_kd * (r.v - v);
        f.max(0.0)
    }
}

fn segment_point(seg: &Segment, tau: f64, x0: f64) -> ReferencePoint {
    match *seg {
        Segment::Hold { .. } => ReferencePoint { x: x0, v: 0.0, a: 0.0, hanging: false },
        Segment::Hang { .. } => ReferencePoint { x: x0, v: 0.0, a: 0.0, hanging: true },
        Segment::MinJerk { duration, delta } => {
            let s = (tau / duration).clamp(0.0, 1.0);
            let (s2, s3) = (s * s, s * s * s);
            let pos = 10.0 * s3 - 15.0 * s3 * s + 6.0 * s3 * s2;
            let vel = 30.0 * s2 - 60.0 * s3 + 30.0 * s2 * s2;
            let acc = 60.0 * s - 180.0 * s2 + 120.0 * s3;
            ReferencePoint {
                x: x0 + delta * pos,
                v: delta * vel / duration,
                a: delta * acc / (duration * duration),
                hanging: false,
            }
        }
        Segment::Walk { duration, amplitude, frequency }
        | Segment::Sway { duration, amplitude, frequency } => {
            // whole number of cycles so the segment ends at rest where it began
            let cycles = (duration * frequency).round().max(1.0);
            let w = 2.0 * std::f64::consts::PI * cycles / duration;
            let (s, c) = (w * tau).sin_cos();
            ReferencePoint {
                x: x0 + amplitude * (c - 1.0),
                v: -amplitude * w * s,
                a: -amplitude * w * w * c,
                hanging: false,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    SitToStand,
    Walk,
    /// Sit, stand up, walk, sit back down.
    Course,
}

/// Timing of the scripted activities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileTiming {
    /// Seated centre-of-mass height (m).
    pub sit_height: f64,
    /// Centre-of-mass rise from sitting to standing (m).
    pub rise: f64,
    /// Peak vertical centre-of-mass speed of a sit-to-stand (m/s).
    pub peak_speed: f64,
    /// Still periods between activities (s).
    pub pause: f64,
    /// m
    pub walk_distance: f64,
    /// m/s
    pub walk_speed: f64,
    /// Vertical oscillation amplitude while walking (m).
    pub walk_amplitude: f64,
    /// Hz
    pub walk_frequency: f64,
    /// Postural sway amplitude during still periods (m).
    pub sway_amplitude: f64,
    /// Hz
    pub sway_frequency: f64,
}

impl Default for ProfileTiming {
    fn default() -> Self {
        ProfileTiming {
            sit_height: 0.60,
            rise: 0.35,
            peak_speed: 0.35,
            pause: 1.5,
            walk_distance: 4.0,
            walk_speed: 1.0,
            walk_amplitude: 0.02,
            walk_frequency: 2.0,
            sway_amplitude: 0.002,
            sway_frequency: 0.7,
        }
    }
}

/// Peak of the normalized minimum-jerk velocity profile.
const MIN_JERK_PEAK: f64 = 1.875;

pub fn make_patient_profile(kind: ProfileKind, mass: f64, timing: &ProfileTiming) -> Result<LegForceProfile> {
    if !(mass > 0.0) {
        return Err(Error::param("mass", "must be > 0"));
    }
    let rise_time = MIN_JERK_PEAK * timing.rise / timing.peak_speed;
    let walk_time = timing.walk_distance / timing.walk_speed;
    let pause = if timing.sway_amplitude > 0.0 {
        Segment::Sway {
            duration: timing.pause,
            amplitude: timing.sway_amplitude,
            frequency: timing.sway_frequency,
        }
    } else {
        Segment::Hold { duration: timing.pause }
    };
    let stand = Segment::MinJerk { duration: rise_time, delta: timing.rise };
    let sit = Segment::MinJerk { duration: rise_time, delta: -timing.rise };
    let walk = Segment::Walk {
        duration: walk_time,
        amplitude: timing.walk_amplitude,
        frequency: timing.walk_frequency,
    };
    let (start_height, segments) = match kind {
        ProfileKind::SitToStand => (timing.sit_height, vec![pause, stand, pause]),
        ProfileKind::Walk => (timing.sit_height + timing.rise, vec![pause, walk, pause]),
        ProfileKind::Course => (
            timing.sit_height,
            vec![pause, stand, pause, walk, pause, sit, pause],
        ),
    };
    // critically damped-ish tracking around a 1.2 Hz bandwidth
    let wn = 2.0 * std::f64::consts::PI * 1.2;
    Ok(LegForceProfile {
        start_height,
        segments,
        tracking_kp: mass * wn * wn,
        tracking_kd: 2.0 * 0.8 * mass * wn,
    })
}
