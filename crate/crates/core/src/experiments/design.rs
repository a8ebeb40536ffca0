//! Design-space comparison of ceiling-lift actuator architectures.
//!
//! Each candidate is a list of rotating components with the reduction that
//! couples them to the drum in each mode. `None` means decoupled (or held
//! still) in that mode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::reflected_inertia;
use crate::params::{ActuatorParams, KGF};

/// Frameless motors are weighed with their housing by this factor.
pub const HOUSING_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    SmallMotor,
    BigMotor,
    DualClutch,
    DualMotorBrake,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Motor,
    Clutch,
    Brake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub name: String,
    pub kind: ComponentKind,
    /// Nominal torque, motors only (N·m).
    #[serde(default)]
    pub torque: f64,
    /// Loaded speed, motors only (rad/s).
    #[serde(default)]
    pub max_speed: f64,
    /// Rotating inertia on the drum side of any slip element (kg·m²).
    pub inertia: f64,
    /// Frameless mass for motors, full mass otherwise (kg).
    pub mass: f64,
    /// Reduction to the drum in high-force mode.
    #[serde(default)]
    pub hf_ratio: Option<f64>,
    /// Reduction to the drum in high-speed mode.
    #[serde(default)]
    pub hs_ratio: Option<f64>,
}

impl Component {
    fn added_mass(&self) -> f64 {
        match self.kind {
            ComponentKind::Motor => self.mass * HOUSING_FACTOR,
            _ => self.mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignCandidate {
    pub name: String,
    pub architecture: Architecture,
    /// Where the component data comes from, e.g. "external" for datasheet
    /// estimates.
    pub source: String,
    /// m
    pub drum_radius: f64,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Requirements {
    /// Patient-transfer force (kgf).
    pub hf_force_kgf: f64,
    /// Patient-assistance speed (m/s).
    pub hs_speed: f64,
}

impl Default for Requirements {
    fn default() -> Self {
        Requirements { hf_force_kgf: 272.0, hs_speed: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignEvaluation {
    pub name: String,
    pub architecture: Architecture,
    /// kgf
    pub max_force: f64,
    /// kgf
    pub hs_force: f64,
    /// High-speed mode (m/s).
    pub max_speed: f64,
    /// Load velocity in high-force mode (m/s).
    pub hf_speed: f64,
    /// Output-referred inertia in high-speed mode (kg).
    pub reflected_inertia: f64,
    /// kg
    pub added_mass: f64,
    pub transition: bool,
    pub meets_requirements: bool,
}

impl DesignCandidate {
    pub fn validate(&self) -> Result<()> {
        if !(self.drum_radius > 0.0) {
            return Err(Error::param(format!("{}.drum_radius", self.name), "must be > 0"));
        }
        for c in &self.components {
            let field = |f: &str| format!("{}.{}.{}", self.name, c.name, f);
            for (f, r) in [("hf_ratio", c.hf_ratio), ("hs_ratio", c.hs_ratio)] {
                if let Some(r) = r {
                    if !(r > 0.0 && r.is_finite()) {
                        return Err(Error::param(field(f), "ratios must be > 0"));
                    }
                }
            }
            if c.inertia < 0.0 || c.mass < 0.0 || c.torque < 0.0 || c.max_speed < 0.0 {
                return Err(Error::param(field("values"), "must be >= 0"));
            }
        }
        Ok(())
    }

    /// The built prototype, from its parameter set. Masses are unknown and left at zero.
    pub fn from_params(name: &str, p: &ActuatorParams) -> Self {
        DesignCandidate {
            name: name.to_string(),
            architecture: Architecture::DualMotorBrake,
            source: "prototype parameters".to_string(),
            drum_radius: p.drum_radius,
            components: vec![
                Component {
                    name: "EM1".into(),
                    kind: ComponentKind::Motor,
                    torque: p.em1.nominal_torque,
                    max_speed: p.em1.max_speed,
                    inertia: p.em1.rotor_inertia,
                    mass: 0.0,
                    hf_ratio: Some(p.r1),
                    hs_ratio: None,
                },
                Component {
                    name: "EM2".into(),
                    kind: ComponentKind::Motor,
                    torque: p.em2.nominal_torque,
                    max_speed: p.em2.max_speed,
                    inertia: p.em2.rotor_inertia,
                    mass: 0.0,
                    hf_ratio: None,
                    hs_ratio: Some(p.r2),
                },
                Component {
                    name: "brake".into(),
                    kind: ComponentKind::Brake,
                    torque: 0.0,
                    max_speed: 0.0,
                    // lumped into the EM2 rotor inertia
                    inertia: 0.0,
                    mass: 0.0,
                    hf_ratio: None,
                    hs_ratio: Some(p.r2),
                },
            ],
        }
    }
}

pub fn evaluate_design(c: &DesignCandidate, req: &Requirements) -> Result<DesignEvaluation> {
    c.validate()?;
    let r = c.drum_radius;
    let motors = || c.components.iter().filter(|k| k.kind == ComponentKind::Motor);
    let force = |ratio: fn(&Component) -> Option<f64>| {
        motors().filter_map(|m| ratio(m).map(|n| m.torque * n / r)).sum::<f64>() / KGF
    };
    let speed = |ratio: fn(&Component) -> Option<f64>| {
        motors()
            .filter_map(|m| ratio(m).map(|n| m.max_speed * r / n))
            .fold(0.0, f64::max)
    };
    let max_force = force(|k| k.hf_ratio);
    let max_speed = speed(|k| k.hs_ratio);
    let reflected = c
        .components
        .iter()
        .filter_map(|k| k.hs_ratio.map(|n| reflected_inertia(k.inertia, n, r)))
        .sum();
    let transition = c.components.iter().any(|k| k.kind != ComponentKind::Motor);
    Ok(DesignEvaluation {
        name: c.name.clone(),
        architecture: c.architecture,
        max_force,
        hs_force: force(|k| k.hs_ratio),
        max_speed,
        hf_speed: speed(|k| k.hf_ratio),
        reflected_inertia: reflected,
        added_mass: c.components.iter().map(Component::added_mass).sum(),
        transition,
        meets_requirements: max_force >= req.hf_force_kgf - 1e-9 && max_speed >= req.hs_speed - 1e-9,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignCatalog {
    #[serde(default)]
    pub requirements: Requirements,
    #[serde(rename = "candidate")]
    pub candidates: Vec<DesignCandidate>,
}

pub const BUNDLED_CATALOG: &str = include_str!("../../data/design_catalog.toml");

impl DesignCatalog {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("design catalog: {e}")))
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CATALOG).expect("bundled catalog parses")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub requirements: Requirements,
    pub evaluations: Vec<DesignEvaluation>,
    /// Transition-capable design meeting the requirements with the lowest
    /// high-speed reflected inertia.
    pub selected: Option<String>,
}

pub fn compare_designs(catalog: &DesignCatalog) -> Result<DesignReport> {
    let evaluations = catalog
        .candidates
        .iter()
        .map(|c| evaluate_design(c, &catalog.requirements))
        .collect::<Result<Vec<_>>>()?;
    let selected = evaluations
        .iter()
        .filter(|e| e.meets_requirements && e.transition)
        .min_by(|a, b| a.reflected_inertia.total_cmp(&b.reflected_inertia))
        .map(|e| e.name.clone());
    Ok(DesignReport { requirements: catalog.requirements, evaluations, selected })
}
