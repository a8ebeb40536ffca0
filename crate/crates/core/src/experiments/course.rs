//! Assistance course: sit, stand up, walk, sit back down under a constant
//! unloading setpoint, scored by force-tracking error per phase.

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{ForceVariant, Mode};
use crate::error::{Error, Result};
use crate::experiments::stats::{mann_whitney_u, MannWhitney};
use crate::identify::{identify_friction, FrictionFit, FrictionSample};
use crate::model::friction_torque;
use crate::params::{ActuatorParams, FrictionParams};
use crate::sim::{make_patient_profile, run, PlantSpec, ProfileKind, ProfileTiming, Scenario, TelemetryRecord, Termination};

/// Output speed separating the standing/sitting phase from the walking phase (m/s).
pub const PHASE_SPEED: f64 = 0.3;
pub const DEFAULT_F_D: f64 = 200.0;
pub const STANDARD_MASS: f64 = 68.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    StandingSitting,
    Walking,
}

pub fn phase_of(v0: f64) -> Phase {
    if v0.abs() >= PHASE_SPEED {
        Phase::StandingSitting
    } else {
        Phase::Walking
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseStats {
    /// Mean |F_strap - F_d| (N).
    pub mae: f64,
    /// MAE as a percentage of F_d.
    pub relative_error: f64,
    pub samples: usize,
}

/// Contiguous run of ticks in one phase, `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseInterval {
    pub phase: Phase,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CourseReport {
    pub variant: String,
    pub mass: f64,
    pub f_d: f64,
    pub standing_sitting: PhaseStats,
    pub walking: PhaseStats,
    pub phases: Vec<PhaseInterval>,
}

pub fn phase_intervals(tel: &[TelemetryRecord], control_dt: f64) -> Vec<PhaseInterval> {
    let mut out: Vec<PhaseInterval> = Vec::new();
    for r in tel {
        let ph = phase_of(r.v0);
        match out.last_mut() {
            Some(last) if last.phase == ph => last.t_end = r.t + control_dt,
            _ => out.push(PhaseInterval { phase: ph, t_start: r.t, t_end: r.t + control_dt }),
        }
    }
    out
}

fn phase_stats(tel: &[TelemetryRecord], phase: Phase, f_d: f64) -> PhaseStats {
    let errs: Vec<f64> = tel
        .iter()
        .filter(|r| phase_of(r.v0) == phase)
        .map(|r| (r.f_strap - f_d).abs())
        .collect();
    let mae = if errs.is_empty() { 0.0 } else { errs.iter().sum::<f64>() / errs.len() as f64 };
    PhaseStats { mae, relative_error: 100.0 * mae / f_d, samples: errs.len() }
}

/// A simulated course participant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subject {
    /// kg
    pub mass: f64,
    pub timing: ProfileTiming,
    /// Seed of the load-cell noise.
    pub seed: u64,
}

impl Subject {
    pub fn standard(seed: u64) -> Self {
        Subject { mass: STANDARD_MASS, timing: ProfileTiming::default(), seed }
    }
}

pub fn course_scenario(
    variant: ForceVariant,
    subject: &Subject,
    f_d: f64,
    friction_model: Option<FrictionParams>,
    base: &Scenario,
) -> Result<Scenario> {
    let mass = subject.mass;
    let profile = make_patient_profile(ProfileKind::Course, mass, &subject.timing)?;
    let mut s = base.clone();
    s.duration = profile.total_duration();
    s.plant = PlantSpec {
        strap_stiffness: base.plant.strap_stiffness,
        strap_damping: base.plant.strap_damping,
        ..PlantSpec::patient(mass, profile, None)
    };
    s.initial_mode = Mode::AssistanceHs;
    s.controller.variant = variant;
    s.controller.f_desired = f_d;
    s.controller.friction_model = friction_model;
    s.events.clear();
    s.seed = subject.seed;
    Ok(s)
}

pub fn run_course(
    variant: ForceVariant,
    subject: &Subject,
    f_d: f64,
    friction_model: Option<FrictionParams>,
    base: &Scenario,
) -> Result<(CourseReport, Vec<TelemetryRecord>)> {
    if !(f_d > 0.0) {
        return Err(Error::param("F_d", "must be > 0"));
    }
    let s = course_scenario(variant, subject, f_d, friction_model, base)?;
    let result = run(&s)?;
    if let Termination::Fault { t, reason } = &result.summary.termination {
        return Err(Error::Fault { t: *t, reason: reason.clone() });
    }
    let tel = result.telemetry;
    let control_dt = s.physics_dt * s.substeps() as f64;
    let report = CourseReport {
        variant: variant.label().to_string(),
        mass: subject.mass,
        f_d,
        standing_sitting: phase_stats(&tel, Phase::StandingSitting, f_d),
        walking: phase_stats(&tel, Phase::Walking, f_d),
        phases: phase_intervals(&tel, control_dt),
    };
    Ok((report, tel))
}

/// EM2 friction measured at constant speeds and loads, then fitted.
///
/// Each sample is the friction law of the actuator plus Gaussian torque
/// noise of standard deviation `noise` (N·m).
pub fn identify_from_measurements(p: &ActuatorParams, noise: f64, seed: u64) -> Result<FrictionFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, noise).map_err(|e| Error::param("noise", e.to_string()))?;
    let speeds = [2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 150.0, 200.0];
    let loads = [50.0, 100.0, 200.0, 300.0, 400.0];
    let mut samples = Vec::new();
    for &w in &speeds {
        for sign in [1.0, -1.0] {
            for &f in &loads {
                let w2 = sign * w;
                let tau_f = friction_torque(w2, f, &p.friction) + dist.sample(&mut rng);
                samples.push(FrictionSample { w2, f_d: f, tau_f });
            }
        }
    }
    identify_friction(&samples, p.friction.tanh_sharpness)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: String,
    /// Standard subject.
    pub standard: CourseReport,
    /// Per-subject MAE, one entry per simulated subject.
    pub subjects_walking_mae: Vec<f64>,
    pub subjects_standing_mae: Vec<f64>,
    /// Telemetry of the standard subject.
    #[serde(skip)]
    pub standard_telemetry: Vec<TelemetryRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub phase: Phase,
    pub test: MannWhitney,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CourseSuiteReport {
    pub f_d: f64,
    pub friction_fit: FrictionFit,
    pub subjects: Vec<Subject>,
    pub variants: Vec<VariantSummary>,
    /// Friction compensation with EM1 against every other variant.
    pub comparisons: Vec<Comparison>,
}

/// Subjects with mass uniform in [45, 100] kg and gait spread around the
/// standard timing: cadence 1.6 to 2.2 Hz, step bounce 15 to 25 mm,
/// sway 1 to 3 mm.
pub fn subjects(n: usize, seed: u64) -> Vec<Subject> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = ProfileTiming::default();
    let round = |v: f64, q: f64| (v / q).round() * q;
    (0..n)
        .map(|i| Subject {
            mass: round(rng.random_range(45.0..100.0), 0.1),
            timing: ProfileTiming {
                walk_frequency: round(rng.random_range(1.6..2.2), 0.01),
                walk_amplitude: round(rng.random_range(0.015..0.025), 1e-4),
                sway_amplitude: round(rng.random_range(0.001..0.003), 1e-4),
                ..base
            },
            seed: seed.wrapping_add(1 + i as u64),
        })
        .collect()
}

pub const SUBJECTS: usize = 8;
/// Torque noise of the simulated friction measurement (N·m).
pub const ID_NOISE: f64 = 1e-3;

/// All five variants on the standard subject plus a simulated cohort.
pub fn run_course_suite(base: &Scenario, f_d: f64, seed: u64) -> Result<CourseSuiteReport> {
    let p = base.params;
    let fit = identify_from_measurements(&p, ID_NOISE, seed)?;
    let cohort = subjects(SUBJECTS, seed);
    let fit_params = fit.params;
    let cohort_ref = &cohort;
    // one worker per variant, collected in variant order
    let variants: Vec<Result<VariantSummary>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ForceVariant::all(p.em2.peak_torque)
            .into_iter()
            .map(|v| {
                scope.spawn(move || -> Result<VariantSummary> {
                    let (standard, standard_telemetry) =
                        run_course(v, &Subject::standard(seed), f_d, Some(fit_params), base)?;
                    let mut walking = Vec::new();
                    let mut standing = Vec::new();
                    for subject in cohort_ref {
                        let (r, _) = run_course(v, subject, f_d, Some(fit_params), base)?;
                        walking.push(r.walking.mae);
                        standing.push(r.standing_sitting.mae);
                    }
                    Ok(VariantSummary {
                        variant: v.label().to_string(),
                        standard,
                        subjects_walking_mae: walking,
                        subjects_standing_mae: standing,
                        standard_telemetry,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Config("course worker panicked".into()))))
            .collect()
    });
    let variants = variants.into_iter().collect::<Result<Vec<_>>>()?;
    let mut comparisons = Vec::new();
    let reference = variants
        .iter()
        .find(|v| v.variant == ForceVariant::FrictionCompWithEm1 { w1_ref: None }.label())
        .expect("variant c present");
    for other in variants.iter().filter(|v| v.variant != reference.variant) {
        for (phase, a, b) in [
            (Phase::Walking, &reference.subjects_walking_mae, &other.subjects_walking_mae),
            (Phase::StandingSitting, &reference.subjects_standing_mae, &other.subjects_standing_mae),
        ] {
            comparisons.push(Comparison {
                a: reference.variant.clone(),
                b: other.variant.clone(),
                phase,
                test: mann_whitney_u(a, b)?,
            });
        }
    }
    Ok(CourseSuiteReport {
        f_d,
        friction_fit: fit,
        subjects: cohort,
        variants,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_split_at_threshold() {
        assert_eq!(phase_of(0.3), Phase::StandingSitting);
        assert_eq!(phase_of(-0.31), Phase::StandingSitting);
        assert_eq!(phase_of(0.299), Phase::Walking);
    }

    #[test]
    fn identification_recovers_friction() {
        let p = ActuatorParams::prototype();
        let fit = identify_from_measurements(&p, ID_NOISE, 1).unwrap();
        assert!((fit.params.dry_offset - p.friction.dry_offset).abs() < 2e-3);
        assert!((fit.params.load_scale - p.friction.load_scale).abs() < 1e-5);
        assert!(fit.residual_rms < 2.0 * ID_NOISE);
    }

    #[test]
    fn subjects_are_seeded() {
        assert_eq!(subjects(8, 3), subjects(8, 3));
        assert_ne!(subjects(8, 3), subjects(8, 4));
        for s in subjects(8, 3) {
            assert!((45.0..=100.0).contains(&s.mass));
            assert!((1.6..=2.2).contains(&s.timing.walk_frequency));
        }
    }
}
