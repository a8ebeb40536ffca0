//! Operating-mode supervisor.
//!
//! Legal transitions:
//!
//! ```text
//! TransferHf  <-> AssistanceHs     manual, only with |v0| < MANUAL_SHIFT_SPEED
//! AssistanceHs -> FallPrevention   v0 < -detect_speed
//! FallPrevention -> FallRecovery   |w2| < W2_ZERO
//! FallRecovery -> TransferHf       back at the detection height
//! ```

use serde::{Deserialize, Serialize};

use crate::control::spec::FallConfig;

/// Manual shifts are refused above this output speed (m/s).
pub const MANUAL_SHIFT_SPEED: f64 = 0.02;
/// EM2 is considered stopped below this speed (rad/s).
pub const W2_ZERO: f64 = 0.1;
/// Recovery ends within this distance of the detection height (m).
pub const RECOVERY_TOLERANCE: f64 = 0.002;
/// ... and below this output speed (m/s).
pub const RECOVERY_SETTLE_SPEED: f64 = 0.005;
/// Brake counts as fully closed within this many degrees of its max angle.
pub const BRAKE_CLOSED_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[serde(alias = "transfer")]
    TransferHf,
    #[serde(alias = "assistance")]
    AssistanceHs,
    FallPrevention,
    FallRecovery,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::TransferHf => "transfer_hf",
            Mode::AssistanceHs => "assistance_hs",
            Mode::FallPrevention => "fall_prevention",
            Mode::FallRecovery => "fall_recovery",
        }
    }

    /// Whether `self -> to` appears in the transition table.
    pub fn can_transition_to(self, to: Mode) -> bool {
        use Mode::*;
        matches!(
            (self, to),
            (TransferHf, AssistanceHs)
                | (AssistanceHs, TransferHf)
                | (AssistanceHs, FallPrevention)
                | (FallPrevention, FallRecovery)
                | (FallRecovery, TransferHf)
        )
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Signals the supervisor reads every control tick.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SupervisorInputs {
    pub t: f64,
    pub x0: f64,
    pub v0: f64,
    pub w2: f64,
    pub f_strap: Option<f64>,
    /// Brake servo at its fully-closed angle.
    pub brake_closed: bool,
}

/// Capture made at fall detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallCapture {
    pub t_detect: f64,
    pub x_detect: f64,
    pub v_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: f64,
    pub from: Mode,
    pub to: Mode,
}

#[derive(Debug, Clone)]
pub struct Supervisor {
    mode: Mode,
    fall: Option<FallCapture>,
    detect_speed: f64,
}

impl Supervisor {
    pub fn new(initial: Mode, fc: &FallConfig) -> Self {
        Supervisor {
            mode: initial,
            fall: None,
            detect_speed: fc.detect_speed,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn fall_capture(&self) -> Option<FallCapture> {
        self.fall
    }

    /// Advance the state machine by one tick. Returns the transition taken, if any.
    pub fn tick(&mut self, m: &SupervisorInputs, request: Option<Mode>) -> Option<Transition> {
        let from = self.mode;
        let next = match self.mode {
            Mode::TransferHf => self.manual(m, request),
            Mode::AssistanceHs => {
                if m.v0 < -self.detect_speed {
                    self.fall = Some(FallCapture {
                        t_detect: m.t,
                        x_detect: m.x0,
                        v_i: m.v0.abs(),
                    });
                    Some(Mode::FallPrevention)
                } else {
                    self.manual(m, request)
                }
            }
            Mode::FallPrevention => {
                self.reject(request);
                (m.w2.abs() < W2_ZERO).then_some(Mode::FallRecovery)
            }
            Mode::FallRecovery => {
                self.reject(request);
                let x_detect = self.fall.map(|f| f.x_detect).unwrap_or(m.x0);
                let back = (m.x0 - x_detect).abs() < RECOVERY_TOLERANCE
                    && m.v0.abs() < RECOVERY_SETTLE_SPEED
                    && m.brake_closed;
                back.then_some(Mode::TransferHf)
            }
        };
        let to = next?;
        debug_assert!(from.can_transition_to(to));
        self.mode = to;
        Some(Transition { t: m.t, from, to })
    }

    fn manual(&self, m: &SupervisorInputs, request: Option<Mode>) -> Option<Mode> {
        let to = request.filter(|&r| r != self.mode)?;
        let legal = matches!(
            (self.mode, to),
            (Mode::TransferHf, Mode::AssistanceHs) | (Mode::AssistanceHs, Mode::TransferHf)
        );
        if !legal {
            log::warn!("ignoring illegal manual request {} -> {}", self.mode, to);
            return None;
        }
        if m.v0.abs() >= MANUAL_SHIFT_SPEED {
            log::warn!(
                "ignoring manual shift {} -> {} at |v0| = {:.3} m/s",
                self.mode,
                to,
                m.v0.abs()
            );
            return None;
        }
        Some(to)
    }

    fn reject(&self, request: Option<Mode>) {
        if let Some(r) = request {
            log::warn!("ignoring manual request {} during {}", r, self.mode);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup(mode: Mode) -> Supervisor {
        Supervisor::new(mode, &FallConfig::default())
    }

    #[test]
    fn fall_detected_in_assistance() {
        let mut s = sup(Mode::AssistanceHs);
        let m = SupervisorInputs {
            t: 3.0,
            x0: 1.2,
            v0: -0.95,
            w2: -400.0,
            ..Default::default()
        };
        let tr = s.tick(&m, None).unwrap();
        assert_eq!(tr.to, Mode::FallPrevention);
        let cap = s.fall_capture().unwrap();
        assert_eq!(cap.x_detect, 1.2);
        assert_eq!(cap.v_i, 0.95);
    }

    #[test]
    fn slow_descent_is_not_a_fall() {
        let mut s = sup(Mode::AssistanceHs);
        let m = SupervisorInputs { v0: -0.85, ..Default::default() };
        assert!(s.tick(&m, None).is_none());
    }

    #[test]
    fn manual_shift_gated_by_speed() {
        let mut s = sup(Mode::TransferHf);
        let moving = SupervisorInputs { v0: 0.05, ..Default::default() };
        assert!(s.tick(&moving, Some(Mode::AssistanceHs)).is_none());
        let still = SupervisorInputs { v0: 0.01, ..Default::default() };
        assert_eq!(s.tick(&still, Some(Mode::AssistanceHs)).unwrap().to, Mode::AssistanceHs);
        assert_eq!(s.tick(&still, Some(Mode::TransferHf)).unwrap().to, Mode::TransferHf);
    }

    #[test]
    fn illegal_requests_ignored() {
        let mut s = sup(Mode::TransferHf);
        assert!(s.tick(&SupervisorInputs::default(), Some(Mode::FallRecovery)).is_none());
        assert_eq!(s.mode(), Mode::TransferHf);
        let mut s = sup(Mode::FallPrevention);
        let m = SupervisorInputs { w2: -50.0, ..Default::default() };
        assert!(s.tick(&m, Some(Mode::TransferHf)).is_none());
        assert_eq!(s.mode(), Mode::FallPrevention);
    }

    #[test]
    fn downshift_when_em2_stops() {
        let mut s = sup(Mode::FallPrevention);
        let m = SupervisorInputs { w2: 0.05, ..Default::default() };
        assert_eq!(s.tick(&m, None).unwrap().to, Mode::FallRecovery);
    }

    #[test]
    fn recovery_requires_height_and_closed_brake() {
        let mut s = sup(Mode::AssistanceHs);
        s.tick(&SupervisorInputs { x0: 1.0, v0: -1.0, ..Default::default() }, None);
        s.tick(&SupervisorInputs { w2: 0.0, ..Default::default() }, None);
        assert_eq!(s.mode(), Mode::FallRecovery);
        let low = SupervisorInputs { x0: 0.7, brake_closed: true, ..Default::default() };
        assert!(s.tick(&low, None).is_none());
        let open = SupervisorInputs { x0: 0.999, brake_closed: false, ..Default::default() };
        assert!(s.tick(&open, None).is_none());
        let back = SupervisorInputs { x0: 0.999, brake_closed: true, ..Default::default() };
        assert_eq!(s.tick(&back, None).unwrap().to, Mode::TransferHf);
    }

    #[test]
    fn transition_table() {
        use Mode::*;
        let all = [TransferHf, AssistanceHs, FallPrevention, FallRecovery];
        let legal: usize = all
            .iter()
            .flat_map(|a| all.iter().map(move |b| a.can_transition_to(*b) as usize))
            .sum();
        assert_eq!(legal, 5);
        assert!(!TransferHf.can_transition_to(FallPrevention));
    }
}
