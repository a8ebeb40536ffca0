//! Control stack invoked once per control tick: supervisor, EM1 velocity
//! loop, assistance force controllers and the fall controller.

pub mod fall;
pub mod force;
pub mod mass;
pub mod mode;
pub mod pid;
pub mod spec;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ActuatorParams;

pub use fall::{brake_torque_for, FallCommand, FallController};
pub use force::{ForceCommand, ForceController, ForceMeasurements};
pub use mass::{estimate_mass, MassEstimate, StrapSample};
pub use mode::{FallCapture, Mode, Supervisor, SupervisorInputs, Transition};
pub use pid::Pid;
pub use spec::{ControllerSpec, FallConfig, FallTarget, ForceVariant, TorqueRating};

/// Remote control input in transfer mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserInput {
    Up,
    Down,
    #[default]
    Stop,
}

/// Everything the controller can observe at a control tick.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Measurements {
    pub t: f64,
    pub x0: f64,
    pub v0: f64,
    pub w1: f64,
    pub w2: f64,
    pub f_strap: Option<f64>,
    pub servo_angle: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Requests {
    pub mode: Option<Mode>,
    pub user_input: Option<UserInput>,
    pub f_desired: Option<f64>,
}

/// Commands issued at the control rate and held until the next tick.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ControllerCommand {
    pub tau1: f64,
    pub tau2: f64,
    pub servo_angle: f64,
    pub w1_ref: f64,
    pub f_desired: f64,
}

/// Transfer-mode output speed (m/s).
pub const TRANSFER_SPEED: f64 = 0.05;
/// Strap-force history kept for weighing (s).
const HISTORY_SPAN: f64 = 5.0;

pub struct Controller {
    spec: ControllerSpec,
    params: ActuatorParams,
    supervisor: Supervisor,
    em1: Pid,
    force: ForceController,
    fall: FallController,
    user_input: UserInput,
    f_desired: f64,
    history: VecDeque<StrapSample>,
    mass: Option<MassEstimate>,
    dt: f64,
}

impl Controller {
    pub fn new(
        spec: ControllerSpec,
        params: ActuatorParams,
        initial: Mode,
        control_dt: f64,
    ) -> Result<Self> {
        spec.validate()?;
        let friction = spec.friction_model.unwrap_or(params.friction);
        let peak1 = params.em1.peak_torque;
        Ok(Controller {
            supervisor: Supervisor::new(initial, &spec.fall),
            em1: Pid::new(spec.em1_kp, spec.em1_ki, 0.0, peak1, peak1),
            force: ForceController::new(spec.variant, params, friction),
            fall: FallController::new(),
            user_input: UserInput::Stop,
            f_desired: spec.f_desired,
            history: VecDeque::new(),
            mass: None,
            dt: control_dt,
            spec,
            params,
        })
    }

    pub fn mode(&self) -> Mode {
        self.supervisor.mode()
    }

    pub fn fall_capture(&self) -> Option<FallCapture> {
        self.supervisor.fall_capture()
    }

    pub fn mass_estimate(&self) -> Option<MassEstimate> {
        self.mass
    }

    pub fn spec(&self) -> &ControllerSpec {
        &self.spec
    }

    fn brake_closed(&self, angle: f64) -> bool {
        angle >= self.params.brake.max_angle() - mode::BRAKE_CLOSED_TOLERANCE
    }

    fn weigh(&mut self) -> f64 {
        let hist: Vec<StrapSample> = self.history.iter().copied().collect();
        let est = estimate_mass(&hist, self.spec.fallback_mass);
        self.mass = Some(est);
        est.mass
    }

    pub fn tick(
        &mut self,
        m: &Measurements,
        req: &Requests,
    ) -> Result<(ControllerCommand, Option<Transition>)> {
        let p = self.params;
        if let Some(f) = req.f_desired {
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::param("F_desired", format!("invalid setpoint {f}")));
            }
            self.f_desired = f;
        }
        if let Some(u) = req.user_input {
            self.user_input = u;
        }
        // only transfer mode hangs the full weight on the strap
        if let (Some(f), Mode::TransferHf) = (m.f_strap, self.supervisor.mode()) {
            self.history.push_back(StrapSample { t: m.t, f_strap: f, v0: m.v0 });
            while self.history.front().is_some_and(|s| m.t - s.t > HISTORY_SPAN) {
                self.history.pop_front();
            }
        }

        let inputs = SupervisorInputs {
            t: m.t,
            x0: m.x0,
            v0: m.v0,
            w2: m.w2,
            f_strap: m.f_strap,
            brake_closed: self.brake_closed(m.servo_angle),
        };
        let transition = self.supervisor.tick(&inputs, req.mode);
        if let Some(tr) = transition {
            match tr.to {
                Mode::AssistanceHs => {
                    if tr.from == Mode::TransferHf {
                        self.weigh();
                    }
                    self.force.reset();
                    self.em1.reset();
                }
                Mode::FallPrevention => {
                    if self.mass.is_none() {
                        self.weigh();
                    }
                    let cap = self.supervisor.fall_capture().expect("capture at detection");
                    self.fall.start(&cap);
                }
                Mode::TransferHf => self.user_input = UserInput::Stop,
                Mode::FallRecovery => {}
            }
        }

        let dt = self.dt;
        let max_angle = p.brake.max_angle();
        let (tau2, servo_angle, w1_ref) = match self.supervisor.mode() {
            Mode::TransferHf => {
                let dir = match self.user_input {
                    UserInput::Up => 1.0,
                    UserInput::Down => -1.0,
                    UserInput::Stop => 0.0,
                };
                (0.0, max_angle, self.output_speed_to_w1(dir * TRANSFER_SPEED))
            }
            Mode::AssistanceHs => {
                let fm = ForceMeasurements {
                    v0: m.v0,
                    w1: m.w1,
                    w2: m.w2,
                    f_strap: m.f_strap,
                };
                let cmd = self.force.command(self.f_desired, &fm, dt)?;
                (cmd.tau2, p.brake.angle_for_torque(0.0), cmd.w1_ref)
            }
            Mode::FallPrevention => {
                let m_est = self.mass.map(|e| e.mass).unwrap_or(self.spec.fallback_mass);
                let cmd = self
                    .fall
                    .command(&self.spec.fall, m_est, m.v0, m.servo_angle, &p, dt);
                (cmd.tau2, cmd.servo_angle, cmd.w1_ref)
            }
            Mode::FallRecovery => {
                let w1_ref = if self.brake_closed(m.servo_angle) {
                    let target = self.supervisor.fall_capture().map_or(m.x0, |c| c.x_detect);
                    let lim = self.spec.fall.recovery_speed;
                    let v = (self.spec.recovery_gain * (target - m.x0)).clamp(-lim, lim);
                    self.output_speed_to_w1(v)
                } else {
                    0.0
                };
                (0.0, max_angle, w1_ref)
            }
        };
        self.force.applied(tau2);

        let hf = matches!(self.supervisor.mode(), Mode::TransferHf | Mode::FallRecovery);
        let feedforward = if hf {
            m.f_strap.unwrap_or(0.0) * p.drum_radius / p.r1
        } else {
            p.r2 / p.r1 * tau2
        };
        let tau1 = p.em1.saturate(feedforward + self.em1.update(w1_ref - m.w1, dt));

        let cmd = ControllerCommand {
            tau1,
            tau2,
            servo_angle,
            w1_ref,
            f_desired: self.f_desired,
        };
        if ![cmd.tau1, cmd.tau2, cmd.servo_angle].iter().all(|v| v.is_finite()) {
            return Err(Error::Fault {
                t: m.t,
                reason: format!("non-finite controller command {cmd:?}"),
            });
        }
        Ok((cmd, transition))
    }

    fn output_speed_to_w1(&self, v: f64) -> f64 {
        let p = &self.params;
        (v * p.r1 / p.drum_radius).clamp(-p.em1.max_speed, p.em1.max_speed)
    }
}
