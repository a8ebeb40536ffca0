//! Fixed-step plant integration.
//!
//! The EM2 line is integrated as a stick-slip system. While stuck, the
//! brake and dry friction hold `w2 = 0` and the actuator moves on the EM1
//! line as a single degree of freedom. The line breaks free when the
//! torque needed to hold it exceeds brake plus static friction, and sticks
//! again when `w2` crosses zero with holding torque available. Each physics
//! step is one RK4 step with the regime frozen.
//!
//! Work done by the motors and the legs and every dissipative term are
//! integrated alongside the state, so the energy balance can be checked
//! step by step.

use std::collections::VecDeque;

use nalgebra::{Matrix2, RowVector2, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::model::{build_matrices, friction_magnitude, ActuatorState, InertiaMatrices};
use crate::params::{ActuatorParams, G};
use crate::sim::plant::PlantSpec;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoadState {
    pub x: f64,
    pub v: f64,
}

/// Running totals of the energy flows (J).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyLedger {
    pub motor_work: f64,
    pub leg_work: f64,
    pub dissipated: f64,
}

/// Brake servo: a transport delay followed by a rate limit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Servo {
    pub angle: f64,
    target: f64,
    pending: VecDeque<(f64, f64)>,
}

impl Servo {
    pub fn new(angle: f64) -> Self {
        Servo { angle, target: angle, pending: VecDeque::new() }
    }

    /// Queue a new angle setpoint issued at time `t`.
    pub fn command(&mut self, t: f64, angle: f64) {
        self.pending.push_back((t, angle));
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    fn advance(&mut self, t: f64, dt: f64, p: &ActuatorParams) {
        let delay = p.brake.servo_delay;
        while let Some(&(t_issue, angle)) = self.pending.front() {
            if t_issue + delay <= t + 1e-9 {
                self.target = angle;
                self.pending.pop_front();
            } else {
                break;
            }
        }
        let step = p.brake.servo_rate_limit * dt;
        let target = self.target.clamp(0.0, p.brake.max_angle());
        self.angle += (target - self.angle).clamp(-step, step);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsState {
    pub t: f64,
    pub actuator: ActuatorState,
    pub load: LoadState,
    pub servo: Servo,
    pub energy: EnergyLedger,
    /// Leg force permanently removed.
    pub fallen: bool,
}

/// Motor torques held over a physics step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AppliedTorques {
    pub tau1: f64,
    pub tau2: f64,
}

/// Diagnostics of one physics step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    pub f_strap: f64,
    pub f_leg: f64,
    /// Energy removed by an inelastic re-stick at the end of the step (J).
    pub impact_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Regime {
    Stuck,
    /// Slipping; friction opposes motion in direction `dir`.
    Slip { dir: f64 },
}

/// Integrated vector: x0, v0, w1, xp, vp, motor work, leg work, dissipation.
type Y = [f64; 8];

struct Stage<'a> {
    mats: &'a InertiaMatrices,
    h_inv: Matrix2<f64>,
    j: RowVector2<f64>,
    p: &'a ActuatorParams,
    plant: &'a PlantSpec,
    cmd: AppliedTorques,
    tau_b: f64,
    regime: Regime,
    fallen: bool,
    m_p: f64,
}

impl Stage<'_> {
    fn deriv(&self, t: f64, y: &Y) -> Y {
        let p = self.p;
        let [x0, v0, w1, xp, vp, ..] = *y;
        let f = self.plant.strap_force(x0, v0, xp, vp);
        let f_leg = self.plant.leg_force(t, xp, vp, f, self.fallen);
        let sdot = v0 - vp;
        let k_stretch = self.plant.strap_stiffness * (x0 - xp).max(0.0);
        let strap_loss = f * sdot - k_stretch * sdot;

        let (dv0, dw1, p_motor, p_fric, q) = match self.regime {
            Regime::Stuck => {
                let n = Vector2::new(1.0, p.r1 / p.drum_radius);
                let q = n * v0;
                let u = Vector3::new(self.cmd.tau1, 0.0, f);
                let m_eff = (n.transpose() * self.mats.h * n)[0];
                let gen = -self.mats.d * q + self.mats.b * u;
                let a = n.dot(&gen) / m_eff;
                (a, n[1] * a, self.cmd.tau1 * q[1], 0.0, q)
            }
            Regime::Slip { dir } => {
                let q = Vector2::new(v0, w1);
                let w2 = (self.j * q)[0];
                let resist = self.tau_b + friction_magnitude(w2, f, &p.friction);
                let u = Vector3::new(self.cmd.tau1, self.cmd.tau2 - dir * resist, f);
                let a = self.h_inv * (-self.mats.d * q + self.mats.b * u);
                let p_motor = self.cmd.tau1 * w1 + self.cmd.tau2 * w2;
                (a[0], a[1], p_motor, dir * resist * w2, q)
            }
        };
        let p_visc = (q.transpose() * self.mats.d * q)[0];
        let dvp = (f + f_leg) / self.m_p - G;
        [
            v0,
            dv0,
            dw1,
            vp,
            dvp,
            p_motor,
            f_leg * vp,
            p_visc + p_fric + strap_loss,
        ]
    }
}

fn axpy(y: &Y, h: f64, k: &Y) -> Y {
    std::array::from_fn(|i| y[i] + h * k[i])
}

/// Mechanical energy stored in the actuator, the strap and the load (J).
pub fn mechanical_energy(s: &PhysicsState, p: &ActuatorParams, plant: &PlantSpec) -> Result<f64> {
    let mats = build_matrices(p.drum_mass, p)?;
    let q = Vector2::new(s.actuator.v0, s.actuator.w1);
    let kin_act = 0.5 * (q.transpose() * mats.h * q)[0];
    let m_p = plant.mass();
    let stretch = (s.actuator.x0 - s.load.x).max(0.0);
    Ok(kin_act
        + 0.5 * m_p * s.load.v * s.load.v
        + m_p * G * s.load.x
        + 0.5 * plant.strap_stiffness * stretch * stretch)
}

/// Energy input minus dissipation accumulated so far (J).
pub fn net_energy_input(s: &PhysicsState) -> f64 {
    s.energy.motor_work + s.energy.leg_work - s.energy.dissipated
}

/// Advance the plant by one step of length `dt` with the torques held.
pub fn step_physics(
    state: &mut PhysicsState,
    cmd: &AppliedTorques,
    p: &ActuatorParams,
    plant: &PlantSpec,
    dt: f64,
) -> Result<StepInfo> {
    state.servo.advance(state.t, dt, p);
    let tau_b = p.brake.torque_from_angle(state.servo.angle);

    let mats = build_matrices(p.drum_mass, p)?;
    let h_inv = mats
        .h
        .try_inverse()
        .ok_or(Error::SingularInertia(mats.h.determinant()))?;
    let j = RowVector2::new(p.r2 / p.drum_radius, -p.r2 / p.r1);
    let j_hinv_jt = (j * h_inv * j.transpose())[0];

    let a = state.actuator;
    let f0 = plant.strap_force(a.x0, a.v0, state.load.x, state.load.v);
    let q0 = Vector2::new(a.v0, a.w1);
    let w2_0 = (j * q0)[0];
    let hold_capacity = tau_b + friction_magnitude(0.0, f0, &p.friction);

    let regime = if a.brake_engaged || w2_0 == 0.0 {
        // torque the brake would have to supply to keep w2 at zero
        let u = Vector3::new(cmd.tau1, cmd.tau2, f0);
        let a_free = h_inv * (-mats.d * q0 + mats.b * u);
        let w2_acc = (j * a_free)[0];
        let hold = -w2_acc / j_hinv_jt;
        if hold.abs() <= hold_capacity {
            Regime::Stuck
        } else {
            Regime::Slip { dir: w2_acc.signum() }
        }
    } else {
        Regime::Slip { dir: if w2_0 >= 0.0 { 1.0 } else { -1.0 } }
    };

    let stage = Stage {
        mats: &mats,
        h_inv,
        j,
        p,
        plant,
        cmd: *cmd,
        tau_b,
        regime,
        fallen: state.fallen,
        m_p: plant.mass(),
    };
    let en = state.energy;
    let y0: Y = [
        a.x0,
        a.v0,
        a.w1,
        state.load.x,
        state.load.v,
        en.motor_work,
        en.leg_work,
        en.dissipated,
    ];
    let t = state.t;
    let k1 = stage.deriv(t, &y0);
    let k2 = stage.deriv(t + 0.5 * dt, &axpy(&y0, 0.5 * dt, &k1));
    let k3 = stage.deriv(t + 0.5 * dt, &axpy(&y0, 0.5 * dt, &k2));
    let k4 = stage.deriv(t + dt, &axpy(&y0, dt, &k3));
    let y: Y = std::array::from_fn(|i| {
        y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    });

    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Fault {
            t,
            reason: format!("non-finite plant state (component {i})"),
        });
    }

    let [x0, mut v0, mut w1, xp, vp, motor_work, leg_work, mut dissipated] = y;
    let mut engaged = matches!(regime, Regime::Stuck);
    let mut impact_loss = 0.0;
    match regime {
        Regime::Stuck => w1 = v0 * p.r1 / p.drum_radius,
        Regime::Slip { dir } => {
            let q = Vector2::new(v0, w1);
            let w2 = (j * q)[0];
            let f1 = plant.strap_force(x0, v0, xp, vp);
            let capacity = tau_b + friction_magnitude(0.0, f1, &p.friction);
            if w2 * dir <= 0.0 && capacity > 0.0 {
                // momentum-consistent projection onto w2 = 0
                let qn = q - h_inv * j.transpose() * (w2 / j_hinv_jt);
                impact_loss = 0.5 * w2 * w2 / j_hinv_jt;
                dissipated += impact_loss;
                v0 = qn[0];
                w1 = qn[1];
                engaged = true;
            }
        }
    }

    state.t = t + dt;
    state.actuator = ActuatorState {
        x0,
        v0,
        w1,
        brake_torque: tau_b,
        brake_engaged: engaged,
    };
    state.load = LoadState { x: xp, v: vp };
    state.energy = EnergyLedger { motor_work, leg_work, dissipated };

    let f_strap = plant.strap_force(x0, v0, xp, vp);
    let f_leg = plant.leg_force(state.t, xp, vp, f_strap, state.fallen);
    Ok(StepInfo { f_strap, f_leg, impact_loss })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hanging_state(m: f64, plant: &PlantSpec, p: &ActuatorParams) -> PhysicsState {
        let xp = 1.0;
        PhysicsState {
            t: 0.0,
            actuator: ActuatorState {
                x0: xp + m * G / plant.strap_stiffness,
                brake_engaged: true,
                ..Default::default()
            },
            load: LoadState { x: xp, v: 0.0 },
            servo: Servo::new(p.brake.max_angle()),
            energy: EnergyLedger::default(),
            fallen: false,
        }
    }

    #[test]
    fn servo_delay_and_rate_limit() {
        let p = ActuatorParams::prototype();
        let mut s = Servo::new(0.0);
        s.command(0.0, 60.0);
        let dt = 1e-3;
        let mut t = 0.0;
        while t < p.brake.servo_delay - 1.5 * dt {
            s.advance(t, dt, &p);
            assert_eq!(s.angle, 0.0);
            t += dt;
        }
        for _ in 0..10 {
            s.advance(t, dt, &p);
            t += dt;
        }
        assert!(s.angle > 0.0);
        assert!(s.angle <= 11.0 * p.brake.servo_rate_limit * dt + 1e-9);
    }

    #[test]
    fn brake_holds_static_load_with_em1_feedforward() {
        let p = ActuatorParams::prototype();
        let m = 68.0;
        let plant = PlantSpec::dead_load(m);
        let mut s = hanging_state(m, &plant, &p);
        let tau1 = m * G * p.drum_radius / p.r1;
        for _ in 0..500 {
            step_physics(&mut s, &AppliedTorques { tau1, tau2: 0.0 }, &p, &plant, 1e-3).unwrap();
        }
        assert!(s.actuator.brake_engaged);
        assert!(s.actuator.v0.abs() < 1e-3);
        assert!(s.actuator.kinematic_residual(&p).abs() < 1e-9);
    }

    #[test]
    fn open_brake_lets_load_fall() {
        let p = ActuatorParams::prototype();
        let m = 68.0;
        let plant = PlantSpec::dead_load(m);
        let mut s = hanging_state(m, &plant, &p);
        s.servo = Servo::new(0.0);
        for _ in 0..300 {
            step_physics(&mut s, &AppliedTorques::default(), &p, &plant, 1e-3).unwrap();
        }
        assert!(!s.actuator.brake_engaged);
        assert!(s.actuator.v0 < -0.5, "{}", s.actuator.v0);
        assert!(s.actuator.w2(&p) < 0.0);
    }

    #[test]
    fn energy_balance_closes() {
        let p = ActuatorParams::prototype();
        let m = 68.0;
        let plant = PlantSpec::dead_load(m);
        let mut s = hanging_state(m, &plant, &p);
        s.servo = Servo::new(0.0);
        let e0 = mechanical_energy(&s, &p, &plant).unwrap();
        for i in 0..2000 {
            let cmd = AppliedTorques { tau1: 0.05, tau2: 0.5 + 1e-3 * i as f64 };
            let before = mechanical_energy(&s, &p, &plant).unwrap() - net_energy_input(&s);
            step_physics(&mut s, &cmd, &p, &plant, 1e-3).unwrap();
            let after = mechanical_energy(&s, &p, &plant).unwrap() - net_energy_input(&s);
            assert!((after - before).abs() < 1e-6, "step {i}: {}", after - before);
        }
        let e1 = mechanical_energy(&s, &p, &plant).unwrap();
        assert!((e1 - e0 - net_energy_input(&s)).abs() < 1e-3);
    }
}
