/// PID with a clamp on the integral contribution and on the total output.
#[derive(Debug, Clone)]
pub struct Pid {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on `ki * integral`.
    pub integral_limit: f64,
    pub output_limit: f64,
    integral: f64,
    prev_error: Option<f64>,
}

impl Pid {
    pub fn new(kp: f64, ki: f64, kd: f64, integral_limit: f64, output_limit: f64) -> Self {
        Pid {
            kp,
            ki,
            kd,
            integral_limit: integral_limit.abs(),
            output_limit: output_limit.abs(),
            integral: 0.0,
            prev_error: None,
        }
    }

    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        if self.ki != 0.0 {
            let bound = self.integral_limit / self.ki.abs();
            self.integral = (self.integral + error * dt).clamp(-bound, bound);
        }
        let deriv = match self.prev_error {
            Some(prev) if dt > 0.0 => (error - prev) / dt,
            _ => 0.0,
        };
        self.prev_error = Some(error);
        let out = self.kp * error + self.ki * self.integral + self.kd * deriv;
        out.clamp(-self.output_limit, self.output_limit)
    }

    /// Current integral contribution, `ki * integral`.
    pub fn integral_term(&self) -> f64 {
        self.ki * self.integral
    }

    /// Seed the integral so that its contribution equals `term` (clamped).
    pub fn preload(&mut self, term: f64) {
        if self.ki != 0.0 {
            let term = term.clamp(-self.integral_limit, self.integral_limit);
            self.integral = term / self.ki;
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }
}
