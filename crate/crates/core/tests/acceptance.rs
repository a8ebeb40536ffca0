//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use duolift_core::config::{load_scenario, parse_params, BUNDLED_PARAMS};
use duolift_core::control::ForceVariant;
use duolift_core::experiments::capability::capability_check;
use duolift_core::experiments::course::{run_course_suite, DEFAULT_F_D};
use duolift_core::experiments::fall::{fall_theoretical, reference_table, run_fall_test, FallGoal, SAFE_FALL_DISTANCE};
use duolift_core::experiments::stats::mann_whitney_u;
use duolift_core::identify::{identify_friction, synthetic_samples};
use duolift_core::model::{
    em1_held_dynamics, friction_torque, held_dynamics, hf_dynamics, hs_dynamics, ActuatorState, DynamicsInputs,
};
use duolift_core::sim::{run, AppliedTorques, Scenario};
use duolift_core::{ActuatorParams, G};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(failures: Vec<String>, ok: String) -> Self {
        if failures.is_empty() {
            Outcome { pass: true, detail: ok }
        } else if ok.is_empty() {
            Outcome { pass: false, detail: failures.join("; ") }
        } else {
            Outcome { pass: false, detail: format!("{} (other checks: {ok})", failures.join("; ")) }
        }
    }
}

fn fall_table_theoretical() -> Outcome {
    let p = ActuatorParams::prototype();
    let start = Instant::now();
    let rows: Vec<_> = reference_table()
        .into_iter()
        .map(|r| (r.spec, r.theoretical, fall_theoretical(&r.spec, &p)))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let mut failures = Vec::new();
    for (spec, printed, got) in &rows {
        let mut bad = Vec::new();
        if (got.acc - printed.acc).abs() > 0.05 + 1e-9 {
            bad.push(format!("acc {:.3} vs {}", got.acc, printed.acc));
        }
        if (got.dist - printed.dist).abs() > 0.005 + 1e-9 {
            bad.push(format!("dist {:.4} vs {}", got.dist, printed.dist));
        }
        if (got.force - printed.force).abs() > 0.5 + 1e-9 {
            bad.push(format!("force {:.2} vs {}", got.force, printed.force));
        }
        if !bad.is_empty() {
            failures.push(format!("{}: {}", spec.label(), bad.join(", ")));
        }
    }
    if elapsed >= 1.0 {
        failures.push(format!("runtime {elapsed:.3} s"));
    }
    Outcome::new(failures, format!("runtime {elapsed:.4} s"))
}

fn fall_simulation() -> Outcome {
    let base = Scenario::default();
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut dists = Vec::new();
    for r in reference_table() {
        let label = r.spec.label();
        let report = match run_fall_test(&r.spec, &base) {
            Ok(rep) => rep,
            Err(e) => {
                failures.push(format!("{label}: {e}"));
                continue;
            }
        };
        let Some(ev) = report.events else {
            failures.push(format!("{label}: no fall detected"));
            continue;
        };
        let d = ev.distance;
        dists.push(format!("{d:.3}"));
        let heavy_slow = r.spec.mass == 113.0 && r.spec.goal == FallGoal::Deceleration { a_d: 1.0 };
        if r.spec.mass == 68.0 && r.spec.goal == (FallGoal::Deceleration { a_d: 1.0 }) && d > 0.41 {
            failures.push(format!("{label}: {d:.3} m > 0.41 m"));
        }
        if heavy_slow && d <= SAFE_FALL_DISTANCE {
            failures.push(format!("{label}: {d:.3} m should exceed 0.40 m"));
        }
        if !heavy_slow && d >= SAFE_FALL_DISTANCE {
            failures.push(format!("{label}: {d:.3} m reaches 0.40 m"));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 60.0 {
        failures.push(format!("suite took {elapsed:.1} s"));
    }
    Outcome::new(failures, format!("distances [{}] m, suite {elapsed:.2} s", dists.join(", ")))
}

fn capabilities() -> Outcome {
    let p = match parse_params(BUNDLED_PARAMS) {
        Ok(p) => p,
        Err(e) => return Outcome::new(vec![format!("bundled params: {e}")], String::new()),
    };
    let report = capability_check(&p);
    let failures = report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} = {:.4} {} vs {}", c.name, c.value, c.unit, c.expected))
        .collect();
    let summary = report
        .checks
        .iter()
        .map(|c| format!("{} {:.3}", c.name, c.value))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(failures, summary)
}

fn kinematic_residual_on_trials() -> Result<f64, String> {
    let p = ActuatorParams::prototype();
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/full_trial.scn");
    let full = load_scenario(Some(&path), &[]).map_err(|e| e.to_string())?.scenario;
    let mut worst: f64 = 0.0;
    for s in [full, Scenario::default()] {
        let r = run(&s).map_err(|e| e.to_string())?;
        for rec in &r.telemetry {
            let w2 = p.r2 * (rec.v0 / p.drum_radius - rec.w1 / p.r1);
            worst = worst.max((w2 - rec.w2).abs());
        }
    }
    Ok(worst)
}

fn dynamics_invariants() -> Outcome {
    let p = ActuatorParams::prototype();
    let mut failures = Vec::new();
    let mut notes = Vec::new();

    match kinematic_residual_on_trials() {
        Ok(k) if k < 1e-9 => notes.push(format!("kinematic {k:.1e}")),
        Ok(k) => failures.push(format!("kinematic residual {k:.2e} rad/s")),
        Err(e) => failures.push(format!("trial run: {e}")),
    }

    // dead load at its static stretch, brake released, motors off
    let energy = common::drop_energy_residual(68.0, AppliedTorques::default(), 1000, 1e-3);
    if energy < 1e-6 {
        notes.push(format!("energy {energy:.1e} J/step"));
    } else {
        failures.push(format!("energy residual {energy:.2e} J/step on the 68 kg drop"));
    }

    let masses = [68.0, 90.0, 113.0, 272.0];
    let mut worst_a: f64 = 0.0;
    for &m in &masses {
        for k in -2..=2 {
            let tau1 = 0.5 * k as f64 * p.em1.nominal_torque;
            let inputs = DynamicsInputs { tau1, tau2: 0.0, tau_b: 0.0, f_m: m * G };
            let state = ActuatorState::default();
            let (full, _, reaction) = held_dynamics(&state, &inputs, m, &p).unwrap();
            let hf = hf_dynamics(&state, tau1, m * G, m, &p);
            worst_a = worst_a.max(((full - hf) / hf).abs());
            if reaction.abs() > p.brake.max_torque + p.friction.dry_offset {
                failures.push(format!("brake cannot hold m={m} tau1={tau1}: {reaction:.2} N·m"));
            }
        }
    }
    let mut worst_b: f64 = 0.0;
    for &m in &masses {
        for k in -2..=2 {
            for v0 in [-0.5, 0.0, 0.5] {
                let tau2 = 0.5 * k as f64 * p.em2.peak_torque;
                let inputs = DynamicsInputs { tau1: 0.0, tau2, tau_b: 0.0, f_m: m * G };
                let state = ActuatorState { v0, ..Default::default() };
                let (full, _) = em1_held_dynamics(&state, &inputs, m, &p).unwrap();
                let hs = hs_dynamics(&state, tau2, 0.0, m * G, m, &p);
                worst_b = worst_b.max(((full - hs) / hs).abs());
            }
        }
    }
    if worst_a <= 0.02 {
        notes.push(format!("HF oracle {worst_a:.1e}"));
    } else {
        failures.push(format!("HF oracle off by {:.2}%", 100.0 * worst_a));
    }
    if worst_b <= 0.02 {
        notes.push(format!("HS oracle {worst_b:.1e}"));
    } else {
        failures.push(format!("HS oracle off by {:.2}%", 100.0 * worst_b));
    }

    let t_end = 0.5;
    let x = [1e-3, 5e-4, 2.5e-4].map(|dt| common::drop_position(68.0, t_end, dt));
    let (d1, d2) = ((x[0] - x[1]).abs(), (x[1] - x[2]).abs());
    let ratio = d1 / d2;
    if d1 < 1e-5 && ratio > 8.0 {
        notes.push(format!("convergence {d1:.1e} m, ratio {ratio:.1}"));
    } else {
        failures.push(format!("convergence: halving dt moves x0 by {d1:.2e} m, ratio {ratio:.1}"));
    }
    Outcome::new(failures, notes.join(", "))
}

fn controller_ordering() -> Outcome {
    let suite = match run_course_suite(&Scenario::default(), DEFAULT_F_D, 0) {
        Ok(s) => s,
        Err(e) => return Outcome::new(vec![e.to_string()], String::new()),
    };
    let peak = ActuatorParams::prototype().em2.peak_torque;
    let mae: Vec<f64> = ForceVariant::all(peak)
        .iter()
        .map(|v| {
            suite
                .variants
                .iter()
                .find(|s| s.variant == v.label())
                .map(|s| s.standard.walking.mae)
                .unwrap_or(f64::NAN)
        })
        .collect();
    let [a, b, c, d, e] = [mae[0], mae[1], mae[2], mae[3], mae[4]];
    let mut failures = Vec::new();
    if !(a > b && b > c) {
        failures.push(format!("ordering a {a:.2} > b {b:.2} > c {c:.2} broken"));
    }
    let gain = 1.0 - c / b;
    if gain < 0.30 {
        failures.push(format!("c improves on b by {:.1}%", 100.0 * gain));
    }
    for (name, v) in [("d", d), ("e", e)] {
        if ((v - c) / c).abs() > 0.30 {
            failures.push(format!("{name} {v:.2} N outside 30% of c {c:.2} N"));
        }
    }
    Outcome::new(
        failures,
        format!("walking MAE a {a:.2}, b {b:.2}, c {c:.2}, d {d:.2}, e {e:.2} N"),
    )
}

fn friction_model() -> Outcome {
    let fp = ActuatorParams::prototype().friction;
    let mut failures = Vec::new();
    for i in 0..100 {
        let w = -300.0 + 600.0 * i as f64 / 99.0;
        let f = 50.0 + 10.0 * i as f64;
        if friction_torque(-w, f, &fp) != -friction_torque(w, f, &fp) {
            failures.push(format!("not odd at w={w}"));
        }
    }
    let speeds = [-250.0, -100.0, -20.0, -2.0, 2.0, 20.0, 100.0, 250.0];
    let loads = [0.0, 200.0, 500.0, 900.0];
    match identify_friction(&synthetic_samples(&fp, &speeds, &loads), fp.tanh_sharpness) {
        Ok(fit) => {
            let errs = [
                (fit.params.b_visc - fp.b_visc).abs(),
                (fit.params.dry_offset - fp.dry_offset).abs(),
                (fit.params.load_scale - fp.load_scale).abs(),
            ];
            if errs.iter().any(|e| *e > 1e-6) {
                failures.push(format!("round trip errors {errs:?}"));
            }
        }
        Err(e) => failures.push(format!("identification: {e}")),
    }
    Outcome::new(failures, "odd on 100 points, (b, c, d) recovered to 1e-6".to_string())
}

fn statistics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    for case in 0..200 {
        let na = rng.random_range(1..=10);
        let nb = rng.random_range(1..=10);
        let a: Vec<f64> = (0..na).map(|_| f64::from(rng.random_range(0..8u8))).collect();
        let b: Vec<f64> = (0..nb).map(|_| f64::from(rng.random_range(0..8u8))).collect();
        match mann_whitney_u(&a, &b) {
            Ok(r) if (r.u - common::brute_u(&a, &b)).abs() < 1e-9 => {}
            Ok(r) => failures.push(format!("case {case}: U {} vs {}", r.u, common::brute_u(&a, &b))),
            Err(e) => failures.push(format!("case {case}: {e}")),
        }
    }
    Outcome::new(failures, "200 random cases with ties match pair counting".to_string())
}

fn state_machine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    let cases = 24;
    for case in 0..cases {
        let n = rng.random_range(1..8);
        let sched = (0..n)
            .map(|_| {
                let t = rng.random_range(0.0..8.0);
                let ev = match rng.random_range(0..3) {
                    0 => common::Ev::Mode(rng.random_range(0..4)),
                    1 => common::Ev::Force(rng.random_range(0.0..900.0)),
                    _ => common::Ev::Input(rng.random_range(0..3)),
                };
                (t, ev)
            })
            .collect();
        let mass = rng.random_range(45.0..120.0);
        if let Err(e) = common::check_supervisor(common::build_events(sched), mass) {
            failures.push(format!("case {case}: {e}"));
        }
    }
    Outcome::new(failures, format!("{cases} random schedules"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("fall table, theoretical", fall_table_theoretical),
        ("fall simulation properties", fall_simulation),
        ("capability checks", capabilities),
        ("dynamics invariant suite", dynamics_invariants),
        ("controller ordering", controller_ordering),
        ("friction model", friction_model),
        ("statistics oracle", statistics_oracle),
        ("state machine", state_machine),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
