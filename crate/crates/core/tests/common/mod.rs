#![allow(dead_code)]

use duolift_core::control::{ForceVariant, Mode, UserInput};
use duolift_core::experiments::stats::mann_whitney_u;
use duolift_core::model::ActuatorState;
use duolift_core::sim::physics::{mechanical_energy, net_energy_input};
use duolift_core::sim::{
    initial_state, run, step_physics, AppliedTorques, PhysicsState, PlantSpec, Scenario, Servo, TimedEvent,
};
use duolift_core::ActuatorParams;

/// Dead load hanging at rest with the brake released: gravity backdrives EM2.
pub fn gravity_drop(mass: f64) -> (Scenario, PhysicsState) {
    let s = Scenario {
        plant: PlantSpec::dead_load(mass),
        initial_mode: Mode::TransferHf,
        ..Default::default()
    };
    let mut st = initial_state(&s);
    st.servo = Servo::new(0.0);
    st.actuator.brake_torque = 0.0;
    (s, st)
}

/// Largest per-step energy residual (J) over `steps` steps of the drop.
pub fn drop_energy_residual(mass: f64, cmd: AppliedTorques, steps: usize, dt: f64) -> f64 {
    let (s, mut st) = gravity_drop(mass);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let before = mechanical_energy(&st, &s.params, &s.plant).unwrap() - net_energy_input(&st);
        step_physics(&mut st, &cmd, &s.params, &s.plant, dt).unwrap();
        let after = mechanical_energy(&st, &s.params, &s.plant).unwrap() - net_energy_input(&st);
        worst = worst.max((after - before).abs());
    }
    worst
}

/// Output position after falling for `t_end` with physics step `dt`.
pub fn drop_position(mass: f64, t_end: f64, dt: f64) -> f64 {
    let (s, mut st) = gravity_drop(mass);
    let n = (t_end / dt).round() as usize;
    for _ in 0..n {
        step_physics(&mut st, &AppliedTorques::default(), &s.params, &s.plant, dt).unwrap();
    }
    st.actuator.x0
}

pub fn residual(a: &ActuatorState, p: &ActuatorParams) -> f64 {
    a.kinematic_residual(p).abs()
}

/// U by counting pairs, ties as one half.
pub fn brute_u(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Returns whether `mann_whitney_u` agrees with pair counting.
pub fn u_matches(a: &[f64], b: &[f64]) -> bool {
    mann_whitney_u(a, b).map(|r| (r.u - brute_u(a, b)).abs() < 1e-9).unwrap_or(false)
}

/// Scripted event for random schedules.
#[derive(Debug, Clone)]
pub enum Ev {
    Mode(usize),
    Force(f64),
    Input(usize),
}

const MODES: [Mode; 4] = [Mode::TransferHf, Mode::AssistanceHs, Mode::FallPrevention, Mode::FallRecovery];
const INPUTS: [UserInput; 3] = [UserInput::Up, UserInput::Down, UserInput::Stop];

/// Events snapped to control ticks and sorted by time.
pub fn build_events(sched: Vec<(f64, Ev)>) -> Vec<TimedEvent> {
    let mut events: Vec<TimedEvent> = sched
        .into_iter()
        .map(|(t, e)| {
            let t = (t * 250.0).round() / 250.0;
            match e {
                Ev::Mode(i) => TimedEvent::RequestMode { t, mode: MODES[i] },
                Ev::Force(value) => TimedEvent::SetForce { t, value },
                Ev::Input(i) => TimedEvent::UserInput { t, input: INPUTS[i] },
            }
        })
        .collect();
    events.sort_by(|a, b| a.t().total_cmp(&b.t()));
    events
}

/// Runs a dead load through the schedule and checks that every transition
/// is legal and every detected fall ends back in transfer mode at the
/// detection height.
pub fn check_supervisor(events: Vec<TimedEvent>, mass: f64) -> Result<(), String> {
    let mut s = Scenario {
        plant: PlantSpec::dead_load(mass),
        initial_mode: Mode::TransferHf,
        duration: 24.0,
        events,
        ..Default::default()
    };
    s.controller.variant = ForceVariant::OpenLoopCurrent;
    let r = run(&s).map_err(|e| e.to_string())?;
    if !r.completed() {
        return Err(format!("terminated: {:?}", r.summary.termination));
    }
    let mut mode = Mode::TransferHf;
    for tr in &r.summary.mode_log {
        if tr.from != mode || !tr.from.can_transition_to(tr.to) {
            return Err(format!("illegal transition {tr:?} from {mode:?}"));
        }
        mode = tr.to;
    }
    for fall in &r.summary.falls {
        let t_done = fall
            .e_recovered
            .ok_or_else(|| format!("fall at {} never recovered", fall.b_detect))?;
        let at = r
            .telemetry
            .iter()
            .find(|rec| rec.t >= t_done - 1e-9)
            .ok_or("no record after recovery")?;
        let err = (at.x0 - fall.x_detect).abs();
        if at.mode != Mode::TransferHf || err >= 5e-3 {
            return Err(format!("fall at {}: ended in {:?}, {err:.4} m off", fall.b_detect, at.mode));
        }
    }
    Ok(())
}
