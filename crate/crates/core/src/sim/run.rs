use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::control::{Controller, Measurements, Mode, Requests, Transition};
use crate::error::{Error, Result};
use crate::model::ActuatorState;
use crate::params::G;
use crate::sim::physics::{step_physics, AppliedTorques, EnergyLedger, LoadState, PhysicsState, Servo};
use crate::sim::plant::PlantVariant;
use crate::sim::scenario::{Scenario, TimedEvent};
use crate::sim::telemetry::TelemetryRecord;

/// EM1 counts as stopped below this fraction of its max speed.
const EM1_STOPPED_FRACTION: f64 = 0.05;
/// Output speed below which the load is considered not yet falling (m/s).
const FALL_ONSET_SPEED: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Fault { t: f64, reason: String },
}

/// Timeline of one fall, times in s, positions in m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FallEvents {
    /// Load starts moving down.
    pub a_fall_start: f64,
    /// Fall detected, fall prevention engaged.
    pub b_detect: f64,
    /// EM2 stopped, switched to recovery.
    pub c_em2_stopped: Option<f64>,
    /// EM1 stopped.
    pub d_em1_stopped: Option<f64>,
    /// Back at the detection height in transfer mode.
    pub e_recovered: Option<f64>,
    pub x_detect: f64,
    pub v_i: f64,
    pub x_min: f64,
    /// Travel below the detection height.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub termination: Termination,
    pub duration: f64,
    pub mode_log: Vec<Transition>,
    pub time_in_mode: BTreeMap<String, f64>,
    pub falls: Vec<FallEvents>,
    pub mass_estimate: Option<f64>,
    pub mass_fallback: bool,
    /// Mean |F_strap - F_desired| over assistance ticks (N).
    pub assistance_force_mae: Option<f64>,
    pub max_kinematic_residual: f64,
    pub final_energy: EnergySummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySummary {
    pub motor_work: f64,
    pub leg_work: f64,
    pub dissipated: f64,
}

impl From<EnergyLedger> for EnergySummary {
    fn from(e: EnergyLedger) -> Self {
        EnergySummary { motor_work: e.motor_work, leg_work: e.leg_work, dissipated: e.dissipated }
    }
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub telemetry: Vec<TelemetryRecord>,
    pub summary: RunSummary,
    pub final_state: PhysicsState,
}

impl SimResult {
    pub fn completed(&self) -> bool {
        self.summary.termination == Termination::Completed
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}

/// Plant state at t = 0 for a scenario.
pub fn initial_state(s: &Scenario) -> PhysicsState {
    let p = &s.params;
    let plant = &s.plant;
    let m = plant.mass();
    let (xp, hanging) = match &plant.variant {
        PlantVariant::DeadLoad { .. } => (plant.initial_height, true),
        PlantVariant::Patient { profile, .. } => (profile.start_height, profile.starts_hanging()),
    };
    let f0 = plant.initial_strap_force.unwrap_or(if hanging {
        m * G
    } else if s.initial_mode == Mode::AssistanceHs {
        s.controller.f_desired
    } else {
        0.0
    });
    let angle = match s.initial_mode {
        Mode::AssistanceHs => p.brake.angle_for_torque(0.0),
        _ => p.brake.max_angle(),
    };
    PhysicsState {
        t: 0.0,
        actuator: ActuatorState {
            x0: xp + f0 / plant.strap_stiffness,
            v0: 0.0,
            w1: 0.0,
            brake_torque: p.brake.torque_from_angle(angle),
            brake_engaged: true,
        },
        load: LoadState { x: xp, v: 0.0 },
        servo: Servo::new(angle),
        energy: EnergyLedger::default(),
        fallen: false,
    }
}

pub fn run(scenario: &Scenario) -> Result<SimResult> {
    scenario.validate()?;
    let p = scenario.params;
    let plant = &scenario.plant;
    let substeps = scenario.substeps();
    let dt = scenario.physics_dt;
    let control_dt = dt * substeps as f64;
    let n_ticks = (scenario.duration / control_dt).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = Normal::new(0.0, scenario.load_cell_noise)
        .map_err(|e| Error::param("load_cell_noise", e.to_string()))?;
    let mut controller = Controller::new(
        scenario.controller.clone(),
        p,
        scenario.initial_mode,
        control_dt,
    )?;

    let mut events = scenario.events.clone();
    events.sort_by(|a, b| a.t().total_cmp(&b.t()));
    let mut next_event = 0;

    let mut state = initial_state(scenario);
    let mut telemetry = Vec::with_capacity(n_ticks);
    let mut mode_log = Vec::new();
    let mut termination = Termination::Completed;
    let mut max_residual: f64 = 0.0;

    'ticks: for k in 0..n_ticks {
        let t = k as f64 * control_dt;
        state.t = t;
        let mut req = Requests::default();
        while next_event < events.len() && events[next_event].t() <= t + 1e-9 {
            match events[next_event] {
                TimedEvent::RequestMode { mode, .. } => req.mode = Some(mode),
                TimedEvent::Fall { .. } => state.fallen = true,
                TimedEvent::SetForce { value, .. } => req.f_desired = Some(value),
                TimedEvent::UserInput { input, .. } => req.user_input = Some(input),
            }
            next_event += 1;
        }

        let a = state.actuator;
        let f_true = plant.strap_force(a.x0, a.v0, state.load.x, state.load.v);
        let f_meas = scenario
            .controller
            .force_sensor
            .then(|| f_true + noise.sample(&mut rng));
        let meas = Measurements {
            t,
            x0: a.x0,
            v0: a.v0,
            w1: a.w1,
            w2: a.w2(&p),
            f_strap: f_meas,
            servo_angle: state.servo.angle,
        };
        let mode_before = controller.mode();
        let (cmd, transition) = match controller.tick(&meas, &req) {
            Ok(out) => out,
            Err(e) => {
                termination = Termination::Fault { t, reason: e.to_string() };
                break;
            }
        };
        if let Some(tr) = transition {
            mode_log.push(tr);
        }
        state.servo.command(t, cmd.servo_angle);
        telemetry.push(TelemetryRecord {
            t,
            x0: a.x0,
            v0: a.v0,
            w1: a.w1,
            w2: meas.w2,
            tau1: cmd.tau1,
            tau2: cmd.tau2,
            tau_b: a.brake_torque,
            f_strap: f_true,
            f_desired: cmd.f_desired,
            mode: if transition.is_some() { controller.mode() } else { mode_before },
            servo_angle: state.servo.angle,
            patient_x: state.load.x,
            patient_v: state.load.v,
        });

        let torques = AppliedTorques { tau1: cmd.tau1, tau2: cmd.tau2 };
        for i in 0..substeps {
            state.t = t + i as f64 * dt;
            if let Err(e) = step_physics(&mut state, &torques, &p, plant, dt) {
                termination = Termination::Fault { t: state.t, reason: e.to_string() };
                break 'ticks;
            }
            max_residual = max_residual.max(state.actuator.kinematic_residual(&p).abs());
        }
    }

    let summary = summarize(
        scenario,
        &telemetry,
        mode_log,
        termination,
        &controller,
        max_residual,
        state.energy,
    );
    Ok(SimResult { telemetry, summary, final_state: state })
}

fn summarize(
    scenario: &Scenario,
    tel: &[TelemetryRecord],
    mode_log: Vec<Transition>,
    termination: Termination,
    controller: &Controller,
    max_residual: f64,
    energy: EnergyLedger,
) -> RunSummary {
    let control_dt = scenario.physics_dt * scenario.substeps() as f64;
    let mut time_in_mode = BTreeMap::new();
    for r in tel {
        *time_in_mode.entry(r.mode.as_str().to_string()).or_insert(0.0) += control_dt;
    }
    let assist: Vec<f64> = tel
        .iter()
        .filter(|r| r.mode == Mode::AssistanceHs)
        .map(|r| (r.f_strap - r.f_desired).abs())
        .collect();
    let mae = (!assist.is_empty()).then(|| assist.iter().sum::<f64>() / assist.len() as f64);
    let mass = controller.mass_estimate();
    RunSummary {
        termination,
        duration: tel.len() as f64 * control_dt,
        falls: fall_events(tel, &mode_log, scenario),
        mode_log,
        time_in_mode,
        mass_estimate: mass.map(|m| m.mass),
        mass_fallback: mass.is_some_and(|m| m.fallback),
        assistance_force_mae: mae,
        max_kinematic_residual: max_residual,
        final_energy: energy.into(),
    }
}

fn index_at(tel: &[TelemetryRecord], t: f64) -> usize {
    tel.partition_point(|r| r.t < t - 1e-9).min(tel.len().saturating_sub(1))
}

fn fall_events(tel: &[TelemetryRecord], log: &[Transition], scenario: &Scenario) -> Vec<FallEvents> {
    let em1_stopped = EM1_STOPPED_FRACTION * scenario.params.em1.max_speed;
    let mut out = Vec::new();
    for (n, tr) in log.iter().enumerate() {
        if tr.to != Mode::FallPrevention || tel.is_empty() {
            continue;
        }
        let ib = index_at(tel, tr.t);
        let later = &log[n + 1..];
        let c = later.iter().find(|x| x.to == Mode::FallRecovery).map(|x| x.t);
        let e = c.and_then(|c| {
            later
                .iter()
                .find(|x| x.from == Mode::FallRecovery && x.t >= c)
                .map(|x| x.t)
        });
        let d = c.and_then(|c| {
            tel[index_at(tel, c)..]
                .iter()
                .find(|r| r.w1.abs() < em1_stopped)
                .map(|r| r.t)
        });
        let mut a = tel[..=ib]
            .iter()
            .rev()
            .find(|r| r.v0 >= -FALL_ONSET_SPEED)
            .map_or(tel[0].t, |r| r.t);
        if let Some(TimedEvent::Fall { t }) = scenario
            .events
            .iter()
            .rev()
            .find(|ev| matches!(ev, TimedEvent::Fall { t } if *t <= tr.t))
        {
            a = a.min(*t);
        }
        let end = e.map_or(tel.len(), |e| index_at(tel, e) + 1);
        let x_detect = tel[ib].x0;
        let x_min = tel[ib..end].iter().map(|r| r.x0).fold(f64::INFINITY, f64::min);
        out.push(FallEvents {
            a_fall_start: a,
            b_detect: tr.t,
            c_em2_stopped: c,
            d_em1_stopped: d,
            e_recovered: e,
            x_detect,
            v_i: -tel[ib].v0,
            x_min,
            distance: x_detect - x_min,
        });
    }
    out
}
