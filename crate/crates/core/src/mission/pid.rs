//! A scalar PID controller with anti-windup clamping.

use serde::{Deserialize, Serialize};

/// Gains and clamps of one PID loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Command magnitude clamp.
    pub output_limit: f64,
    /// Anti-windup clamp on the accumulated integral.
    pub integral_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
            output_limit: 1.0,
            integral_limit: 1.0,
        }
    }
}

/// One PID loop instance; create one per controlled axis.
#[derive(Debug, Clone)]
pub struct PidController {
    pub gains: PidGains,
    integral: f64,
    prev_error: Option<f64>,
}

impl PidController {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            integral: 0.0,
            prev_error: None,
        }
    }

    /// Advances the loop by `dt` and returns the clamped command
    /// `kp * e + ki * integral + kd * de/dt`.
    pub fn step(&mut self, error: f64, dt: f64) -> f64 {
        assert!(dt > 0.0, "pid step needs dt > 0");
        self.integral = (self.integral + error * dt)
            .clamp(-self.gains.integral_limit, self.gains.integral_limit);
        let derivative = match self.prev_error {
            Some(prev) => (error - prev) / dt,
            None => 0.0,
        };
        self.prev_error = Some(error);
        (self.gains.kp * error + self.gains.ki * self.integral + self.gains.kd * derivative)
            .clamp(-self.gains.output_limit, self.gains.output_limit)
    }

    /// Clears the integral and derivative history, e.g. on setpoint changes.
    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_error_zero_command() {
        let mut pid = PidController::new(PidGains {
            kp: 2.0,
            ki: 0.5,
            kd: 0.1,
            ..Default::default()
        });
        assert_eq!(pid.step(0.0, 0.1), 0.0);
        assert_eq!(pid.step(0.0, 0.1), 0.0);
    }

    #[test]
    fn pure_proportional() {
        let gains = PidGains {
            kp: 2.0,
            ki: 0.0,
            kd: 0.0,
            output_limit: 10.0,
            integral_limit: 1.0,
        };
        let mut pid = PidController::new(gains);
        assert_relative_eq!(pid.step(0.5, 0.1), 1.0);
    }

    #[test]
    fn integral_grows_until_clamp() {
        let gains = PidGains {
            kp: 0.0,
            ki: 1.0,
            kd: 0.0,
            output_limit: 10.0,
            integral_limit: 0.3,
        };
        let mut pid = PidController::new(gains);
        let mut last = 0.0;
        for step in 0..3 {
            let out = pid.step(1.0, 0.1);
            assert!(out > last, "step {step}: {out} vs {last}");
            last = out;
        }
        for _ in 0..10 {
            last = pid.step(1.0, 0.1);
        }
        assert_relative_eq!(last, 0.3);
    }

    #[test]
    fn derivative_reacts_to_error_change() {
        let gains = PidGains {
            kp: 0.0,
            ki: 0.0,
            kd: 1.0,
            output_limit: 100.0,
            integral_limit: 1.0,
        };
        let mut pid = PidController::new(gains);
        assert_eq!(pid.step(1.0, 0.1), 0.0);
        assert_relative_eq!(pid.step(2.0, 0.1), 10.0);
    }

    #[test]
    fn output_clamp_applies() {
        let gains = PidGains {
            kp: 100.0,
            ki: 0.0,
            kd: 0.0,
            output_limit: 0.5,
            integral_limit: 1.0,
        };
        let mut pid = PidController::new(gains);
        assert_eq!(pid.step(1.0, 0.1), 0.5);
        assert_eq!(pid.step(-1.0, 0.1), -0.5);
    }

    #[test]
    fn reset_clears_history() {
        let gains = PidGains {
            kp: 0.0,
            ki: 1.0,
            kd: 1.0,
            output_limit: 100.0,
            integral_limit: 5.0,
        };
        let mut pid = PidController::new(gains);
        pid.step(1.0, 0.1);
        pid.step(1.0, 0.1);
        pid.reset();
        assert_relative_eq!(pid.step(1.0, 0.1), 0.1);
    }
}
