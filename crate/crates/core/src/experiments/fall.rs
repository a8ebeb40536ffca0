//! Fall comparison: analytic stopping distances and simulated drops.

use serde::{Deserialize, Serialize};

use crate::control::{FallTarget, ForceVariant, Mode};
use crate::error::{Error, Result};
use crate::params::{ActuatorParams, G};
use crate::sim::{run, FallEvents, PlantSpec, Scenario, TelemetryRecord, Termination, TimedEvent};

/// Deceleration goal of a fall test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FallGoal {
    Deceleration { a_d: f64 },
    /// Brake fully closed. `budget` is the total braking force (N); unset
    /// means brake max torque plus EM2 peak torque.
    MaxForce {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FallTestSpec {
    /// kg
    pub mass: f64,
    pub goal: FallGoal,
    /// Speed at detection (m/s).
    pub v_i: f64,
}

/// Average deceleration (m/s²), stopping distance (m) and average force (N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallNumbers {
    pub acc: f64,
    pub dist: f64,
    pub force: f64,
}

impl FallNumbers {
    fn from_acc(mass: f64, v_i: f64, acc: f64) -> Self {
        FallNumbers { acc, dist: v_i * v_i / (2.0 * acc), force: mass * (G + acc) }
    }

    fn from_dist(mass: f64, v_i: f64, dist: f64) -> Self {
        let acc = v_i * v_i / (2.0 * dist);
        FallNumbers { acc, dist, force: mass * (G + acc) }
    }
}

/// One row of the reference fall table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub spec: FallTestSpec,
    pub theoretical: FallNumbers,
    pub measured: FallNumbers,
}

/// Travel that a stopped fall must stay within (m).
pub const SAFE_FALL_DISTANCE: f64 = 0.40;
pub const DEFAULT_DETECT_SPEED: f64 = 0.90;

fn row(mass: f64, goal: FallGoal, th: [f64; 3], me: [f64; 3]) -> ReferenceRow {
    ReferenceRow {
        spec: FallTestSpec { mass, goal, v_i: DEFAULT_DETECT_SPEED },
        theoretical: FallNumbers { acc: th[0], dist: th[1], force: th[2] },
        measured: FallNumbers { acc: me[0], dist: me[1], force: me[2] },
    }
}

/// Prototype fall table as printed: acceleration, distance and force,
/// computed and measured, for three masses and three braking goals.
pub fn reference_table() -> Vec<ReferenceRow> {
    let max = |budget: f64| FallGoal::MaxForce { budget: Some(budget) };
    let dec = |a_d: f64| FallGoal::Deceleration { a_d };
    vec![
        row(68.0, max(951.0), [4.2, 0.10, 951.0], [4.3, 0.09, 961.1]),
        row(68.0, dec(2.0), [2.0, 0.20, 803.1], [2.3, 0.18, 823.0]),
        row(68.0, dec(1.0), [1.0, 0.41, 735.1], [1.5, 0.28, 767.4]),
        row(90.0, max(1191.0), [3.7, 0.12, 1191.0], [2.3, 0.18, 1090.0]),
        row(90.0, dec(2.0), [2.0, 0.20, 1062.0], [1.6, 0.26, 1022.0]),
        row(90.0, dec(1.0), [1.0, 0.41, 972.2], [1.4, 0.30, 1005.0]),
        row(113.0, max(1424.0), [2.8, 0.15, 1424.0], [1.6, 0.25, 1290.0]),
        row(113.0, dec(2.0), [2.0, 0.20, 1334.0], [1.2, 0.34, 1243.0]),
        row(113.0, dec(1.0), [1.0, 0.41, 1221.0], [0.9, 0.45, 1209.0]),
    ]
}

/// Total braking force with the brake closed and EM2 at peak torque (N).
pub fn max_braking_force(p: &ActuatorParams) -> f64 {
    p.r2 / p.drum_radius * (p.brake.max_torque + p.em2.peak_torque)
}

impl FallTestSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass <= 318.0) {
            return Err(Error::param("fall.mass", "must be in (0, 318] kg"));
        }
        if !(self.v_i > 0.0 && self.v_i.is_finite()) {
            return Err(Error::param("fall.v_i", "must be > 0"));
        }
        match self.goal {
            FallGoal::Deceleration { a_d } if !(a_d > 0.0 && a_d.is_finite()) => {
                Err(Error::param("fall.a_d", "must be > 0"))
            }
            FallGoal::MaxForce { budget: Some(b) } if !(b > self.mass * G) => {
                Err(Error::param("fall.budget", "must exceed the load weight"))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self.goal {
            FallGoal::Deceleration { a_d } => format!("{} kg @ {} m/s2", self.mass, a_d),
            FallGoal::MaxForce { .. } => format!("{} kg @ max force", self.mass),
        }
    }
}

pub fn fall_theoretical(spec: &FallTestSpec, p: &ActuatorParams) -> FallNumbers {
    match spec.goal {
        FallGoal::Deceleration { a_d } => FallNumbers::from_acc(spec.mass, spec.v_i, a_d),
        FallGoal::MaxForce { budget } => {
            let force = budget.unwrap_or_else(|| max_braking_force(p));
            let acc = force / spec.mass - G;
            FallNumbers { acc, dist: spec.v_i * spec.v_i / (2.0 * acc), force }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FallReport {
    pub spec: FallTestSpec,
    pub theoretical: FallNumbers,
    pub simulated: Option<FallNumbers>,
    pub events: Option<FallEvents>,
    /// Back in transfer mode, stopped, at the detection height.
    pub recovered: bool,
    pub termination: Termination,
}

/// Time at which assistance is requested and the load starts to drop (s).
pub const DROP_TIME: f64 = 1.0;

/// Dead-load drop: hang in transfer mode, then switch to assistance with an
/// open-loop setpoint of half the weight so the load falls.
pub fn fall_scenario(spec: &FallTestSpec, base: &Scenario) -> Scenario {
    let mut s = base.clone();
    s.plant = PlantSpec {
        initial_height: 1.0,
        initial_strap_force: None,
        ..PlantSpec::dead_load(spec.mass)
    };
    s.initial_mode = Mode::TransferHf;
    s.controller.variant = ForceVariant::OpenLoopCurrent;
    s.controller.f_desired = 0.5 * spec.mass * G;
    s.controller.fall.detect_speed = spec.v_i;
    match spec.goal {
        FallGoal::Deceleration { a_d } => {
            s.controller.fall.target = FallTarget::Deceleration;
            s.controller.fall.a_d = a_d;
        }
        FallGoal::MaxForce { .. } => s.controller.fall.target = FallTarget::MaxForce,
    }
    s.events = vec![TimedEvent::RequestMode { t: DROP_TIME, mode: Mode::AssistanceHs }];
    s.duration = 16.0;
    s
}

pub fn run_fall_test(spec: &FallTestSpec, base: &Scenario) -> Result<FallReport> {
    run_fall_test_full(spec, base).map(|(report, _)| report)
}

/// As [`run_fall_test`], also returning the telemetry of the drop.
pub fn run_fall_test_full(spec: &FallTestSpec, base: &Scenario) -> Result<(FallReport, Vec<TelemetryRecord>)> {
    spec.validate()?;
    let scenario = fall_scenario(spec, base);
    let result = run(&scenario)?;
    if let Termination::Fault { t, reason } = &result.summary.termination {
        return Err(Error::Fault { t: *t, reason: reason.clone() });
    }
    let events = result.summary.falls.first().copied();
    let simulated = events
        .filter(|e| e.distance > 0.0)
        .map(|e| FallNumbers::from_dist(spec.mass, e.v_i, e.distance));
    let recovered = match (events, result.telemetry.last()) {
        (Some(e), Some(last)) => {
            e.e_recovered.is_some()
                && last.mode == Mode::TransferHf
                && last.v0.abs() < 1e-3
                && (last.x0 - e.x_detect).abs() < 5e-3
        }
        _ => false,
    };
    let report = FallReport {
        spec: *spec,
        theoretical: fall_theoretical(spec, &scenario.params),
        simulated,
        events,
        recovered,
        termination: result.summary.termination,
    };
    Ok((report, result.telemetry))
}

/// Printed precision of the fall table: m/s², m, N.
pub const TABLE_PRECISION: FallNumbers = FallNumbers { acc: 0.05, dist: 0.005, force: 0.5 };

fn within(a: &FallNumbers, b: &FallNumbers, tol: &FallNumbers) -> bool {
    // one ulp of slack for values printed exactly on the rounding boundary
    let eps = 1e-9;
    (a.acc - b.acc).abs() <= tol.acc + eps
        && (a.dist - b.dist).abs() <= tol.dist + eps
        && (a.force - b.force).abs() <= tol.force + eps
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FallTableRow {
    pub label: String,
    pub reference: ReferenceRow,
    pub report: FallReport,
    /// Theoretical numbers agree with the reference row to printed precision.
    pub theoretical_matches: bool,
}

/// Braking force implied by a max-force row, against the model's own limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetRow {
    pub mass: f64,
    /// Force behind the printed acceleration, `m·(g + acc)` (N).
    pub from_acc: f64,
    /// Force printed in the row (N).
    pub printed: f64,
    /// Brake max torque plus EM2 peak, reflected to the strap (N).
    pub model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FallTableReport {
    pub rows: Vec<FallTableRow>,
    pub budgets: Vec<BudgetRow>,
    /// All max-force rows imply the same force within 1%.
    pub budgets_consistent: bool,
    pub theoretical_all_match: bool,
    /// Telemetry of each row's drop, in row order.
    #[serde(skip)]
    pub telemetry: Vec<Vec<TelemetryRecord>>,
}

/// Back-solve the braking force of each max-force reference row.
pub fn max_force_budgets(rows: &[ReferenceRow], p: &ActuatorParams) -> (Vec<BudgetRow>, bool) {
    let budgets: Vec<BudgetRow> = rows
        .iter()
        .filter(|r| matches!(r.spec.goal, FallGoal::MaxForce { .. }))
        .map(|r| BudgetRow {
            mass: r.spec.mass,
            from_acc: r.spec.mass * (G + r.theoretical.acc),
            printed: r.theoretical.force,
            model: max_braking_force(p),
        })
        .collect();
    let (lo, hi) = budgets.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
        (lo.min(b.from_acc).min(b.printed), hi.max(b.from_acc).max(b.printed))
    });
    let consistent = budgets.is_empty() || (hi - lo) <= 0.01 * hi;
    if !consistent {
        log::warn!("max-force rows imply braking forces from {lo:.0} to {hi:.0} N");
    }
    (budgets, consistent)
}

/// Run the reference rows accepted by `filter`, one thread per row. Rows
/// come back in table order.
pub fn run_fall_table(
    base: &Scenario,
    filter: impl Fn(&FallTestSpec) -> bool,
) -> Result<FallTableReport> {
    let reference: Vec<ReferenceRow> = reference_table().into_iter().filter(|r| filter(&r.spec)).collect();
    let reports: Vec<Result<(FallReport, Vec<TelemetryRecord>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = reference
            .iter()
            .map(|r| scope.spawn(move || run_fall_test_full(&r.spec, base)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Config("fall test thread panicked".into()))))
            .collect()
    });
    let mut rows = Vec::with_capacity(reference.len());
    let mut telemetry = Vec::with_capacity(reference.len());
    for (r, outcome) in reference.iter().zip(reports) {
        let (report, tel) = outcome?;
        telemetry.push(tel);
        rows.push(FallTableRow {
            label: r.spec.label(),
            theoretical_matches: within(&report.theoretical, &r.theoretical, &TABLE_PRECISION),
            reference: *r,
            report,
        });
    }
    let (budgets, budgets_consistent) = max_force_budgets(&reference, &base.params);
    Ok(FallTableReport {
        theoretical_all_match: rows.iter().all(|r| r.theoretical_matches),
        rows,
        budgets,
        budgets_consistent,
        telemetry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theoretical_is_self_consistent() {
        let p = ActuatorParams::prototype();
        for r in reference_table() {
            let th = fall_theoretical(&r.spec, &p);
            assert!((th.dist * 2.0 * th.acc - r.spec.v_i * r.spec.v_i).abs() < 1e-12);
            assert!((th.force / r.spec.mass - G - th.acc).abs() < 1e-12);
        }
    }

    #[test]
    fn light_mass_one_g_row() {
        let p = ActuatorParams::prototype();
        let spec = FallTestSpec {
            mass: 68.0,
            goal: FallGoal::Deceleration { a_d: 1.0 },
            v_i: 0.9,
        };
        let th = fall_theoretical(&spec, &p);
        assert!((th.dist - 0.405).abs() < 1e-12);
        assert!((th.force - 735.08).abs() < 1e-9);
    }

    #[test]
    fn max_force_from_params() {
        let p = ActuatorParams::prototype();
        let spec = FallTestSpec { mass: 68.0, goal: FallGoal::MaxForce { budget: None }, v_i: 0.9 };
        let th = fall_theoretical(&spec, &p);
        assert_eq!(th.force, max_braking_force(&p));
        assert!(th.acc > 0.0);
    }

    #[test]
    fn rejects_out_of_range_mass() {
        let spec = FallTestSpec { mass: 400.0, goal: FallGoal::Deceleration { a_d: 1.0 }, v_i: 0.9 };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn reference_budgets_disagree_across_masses() {
        let (budgets, consistent) = max_force_budgets(&reference_table(), &ActuatorParams::prototype());
        assert_eq!(budgets.len(), 3);
        assert!(!consistent);
        // 68 kg row is self-consistent at printed precision
        assert!((budgets[0].from_acc - budgets[0].printed).abs() < 4.0);
    }

    #[test]
    fn table_rows_stay_in_order() {
        let t = run_fall_table(&Scenario::default(), |s| s.mass != 90.0).unwrap();
        let masses: Vec<f64> = t.rows.iter().map(|r| r.reference.spec.mass).collect();
        assert_eq!(masses, [68.0, 68.0, 68.0, 113.0, 113.0, 113.0]);
        assert!(t.rows.iter().all(|r| r.report.recovered));
    }
}
