/// PID gains with a symmetric or asymmetric output clamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub out_min: f64,
    pub out_max: f64,
}

impl PidGains {
    pub fn pi(kp: f64, ki: f64, out_min: f64, out_max: f64) -> Self {
        PidGains { kp, ki, kd: 0.0, out_min, out_max }
    }
}

/// Integrator and last error. The integral is stored as the sum of
/// `error * dt`, so changing `ki` does not rescale past accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

impl PidState {
    /// Plain PID on `error` with output clamping and conditional integration:
    /// the integrator holds its value on any step whose output saturates.
    pub fn update(&mut self, error: f64, gains: &PidGains, dt: f64) -> f64 {
        let derivative = match self.prev_error {
            Some(prev) if dt > 0.0 => (error - prev) / dt,
            _ => 0.0,
        };
        self.prev_error = Some(error);
        let candidate = self.integral + error * dt;
        let raw = gains.kp * error + gains.ki * candidate + gains.kd * derivative;
        let clamped = raw.clamp(gains.out_min, gains.out_max);
        if clamped == raw {
            self.integral = candidate;
            raw
        } else {
            (gains.kp * error + gains.ki * self.integral + gains.kd * derivative).clamp(gains.out_min, gains.out_max)
        }
    }

    pub fn reset(&mut self) {
        *self = PidState::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportional_only() {
        let g = PidGains::pi(2.0, 0.0, -1.0, 1.0);
        let mut s = PidState::default();
        assert!((s.update(0.1, &g, 0.01) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn integrator_frozen_in_saturation() {
        let g = PidGains::pi(10.0, 5.0, -1.0, 1.0);
        let mut s = PidState::default();
        s.update(1.0, &g, 0.01);
        let held = s.integral;
        for _ in 0..100 {
            assert_eq!(s.update(1.0, &g, 0.01), 1.0);
            assert_eq!(s.integral, held);
        }
    }

    #[test]
    fn derivative_zero_on_constant_error() {
        let g = PidGains { kp: 0.0, ki: 0.0, kd: 1.0, out_min: -10.0, out_max: 10.0 };
        let mut s = PidState::default();
        assert_eq!(s.update(0.3, &g, 0.01), 0.0);
        assert_eq!(s.update(0.3, &g, 0.01), 0.0);
    }
}
