use std::f64::consts::FRAC_PI_2;

use super::DynamicsError;
use crate::params::VehicleParameters;

/// Magnitudes of the road-load forces (N).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResistiveForces {
    pub aero: f64,
    pub rolling: f64,
    /// Grade (hill-climbing) force, positive uphill.
    pub grade: f64,
}

impl ResistiveForces {
    pub fn total(&self) -> f64 {
        self.aero + self.rolling + self.grade
    }
}

pub fn resistive_forces(params: &VehicleParameters, speed: f64, grade: f64) -> Result<ResistiveForces, DynamicsError> {
    if !speed.is_finite() || !grade.is_finite() {
        return Err(DynamicsError::NonFinite("resistive force input"));
    }
    if speed < 0.0 {
        return Err(DynamicsError::InputDomain(format!("speed {speed} < 0")));
    }
    if grade.abs() >= FRAC_PI_2 {
        return Err(DynamicsError::InputDomain(format!("grade {grade} rad not in (-pi/2, pi/2)")));
    }
    let weight = params.mass * params.gravity;
    let aero = 0.5 * params.frontal_area * params.air_density * params.drag_coefficient * speed * speed;
    let rolling = if speed < params.velocity_epsilon { 0.0 } else { params.rolling_resistance * weight * grade.cos() };
    Ok(ResistiveForces { aero, rolling, grade: weight * grade.sin() })
}

/// Static axle loads `(front, rear)`; no load transfer.
pub fn normal_loads(params: &VehicleParameters) -> (f64, f64) {
    let weight = params.mass * params.gravity;
    let l = params.lf + params.lr;
    (weight * params.lr / l, weight * params.lf / l)
}

/// Spin acceleration of one lumped axle.
///
/// Brake torque always opposes rotation. A stopped wheel is held by the brake
/// until the remaining torque exceeds it, so braking never spins it backwards.
pub fn wheel_acceleration(params: &VehicleParameters, omega: f64, drive: f64, brake: f64, fx: f64) -> f64 {
    wheel_acceleration_with_spin(params, spin_direction(omega), drive, brake, fx)
}

pub(crate) fn spin_direction(omega: f64) -> f64 {
    if omega > 0.0 {
        1.0
    } else if omega < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// As [`wheel_acceleration`] with the brake direction given explicitly, so an
/// integration step can hold it fixed across its stages.
pub(crate) fn wheel_acceleration_with_spin(
    params: &VehicleParameters,
    spin: f64,
    drive: f64,
    brake: f64,
    fx: f64,
) -> f64 {
    let brake = brake.max(0.0);
    let net = drive - fx * params.wheel_radius;
    let torque = if spin != 0.0 {
        net - brake * spin
    } else if net.abs() <= brake {
        0.0
    } else {
        net - brake.copysign(net)
    };
    torque / params.wheel_inertia
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> VehicleParameters {
        let mut p = VehicleParameters::nominal();
        p.frontal_area = 2.5;
        p.air_density = 1.225;
        p.drag_coefficient = 0.35;
        p.mass = 2000.0;
        p.gravity = 9.81;
        p
    }

    #[test]
    fn flat_standstill_is_zero() {
        let f = resistive_forces(&params(), 0.0, 0.0).unwrap();
        assert_eq!(f, ResistiveForces::default());
    }

    #[test]
    fn drag_at_twenty() {
        // 0.5 * 2.5 * 1.225 * 0.35 * 400
        let f = resistive_forces(&params(), 20.0, 0.0).unwrap();
        assert!((f.aero - 214.375).abs() < 1e-9, "{}", f.aero);
    }

    #[test]
    fn grade_force() {
        let f = resistive_forces(&params(), 0.0, 0.05).unwrap();
        let expected = 2000.0 * 9.81 * 0.05f64.sin();
        assert!((f.grade - expected).abs() < 1e-9);
        let down = resistive_forces(&params(), 0.0, -0.05).unwrap();
        assert!(down.grade < 0.0);
    }

    #[test]
    fn rolling_only_when_moving() {
        let p = params();
        assert_eq!(resistive_forces(&p, 0.05, 0.0).unwrap().rolling, 0.0);
        let f = resistive_forces(&p, 5.0, 0.1).unwrap();
        assert!((f.rolling - p.rolling_resistance * 2000.0 * 9.81 * 0.1f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(resistive_forces(&params(), f64::NAN, 0.0).is_err());
        assert!(resistive_forces(&params(), 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn static_loads() {
        let mut p = params();
        p.lf = 1.2;
        p.lr = 1.8;
        let (f, r) = normal_loads(&p);
        assert!((f - 11772.0).abs() < 1e-9);
        assert!((f + r - 19620.0).abs() < 1e-9);
        p.lr = 1.2;
        let (f, r) = normal_loads(&p);
        assert!((f - r).abs() < 1e-9);
    }

    #[test]
    fn wheel_moment_balance() {
        let mut p = params();
        p.wheel_inertia = 1.5;
        p.wheel_radius = 0.3;
        assert!((wheel_acceleration(&p, 10.0, 300.0, 0.0, 500.0) - 100.0).abs() < 1e-12);
        assert_eq!(wheel_acceleration(&p, 10.0, 150.0, 0.0, 500.0), 0.0);
    }

    #[test]
    fn brake_holds_stopped_wheel() {
        let p = params();
        assert_eq!(wheel_acceleration(&p, 0.0, 0.0, 500.0, 0.0), 0.0);
        assert!(wheel_acceleration(&p, 5.0, 0.0, 500.0, 0.0) < 0.0);
        assert!(wheel_acceleration(&p, -5.0, 0.0, 500.0, 0.0) > 0.0);
        // drive torque beyond the brake still turns a stopped wheel
        assert!(wheel_acceleration(&p, 0.0, 800.0, 500.0, 0.0) > 0.0);
    }
}
