//! Lower-level by-wire actuation: throttle through the inverse engine map,
//! brake duty cycle for the vacuum booster, and the steering position servo.

use crate::dynamics::{engine_speed_rpm, powertrain_torque, resistive_forces, DynamicsError, VehicleState};
use crate::params::{Axle, VehicleParameters};
use crate::pid::{PidGains, PidState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationConfig {
    /// Brake map slope, % duty per m/s^2 of requested deceleration.
    pub brake_slope: f64,
    /// Brake map offset, % duty.
    pub brake_offset: f64,
    /// Total brake torque at 100 % duty (N*m).
    pub max_brake_torque: f64,
    pub accel_deadband: f64,
    pub steer_kp: f64,
    pub steer_ki: f64,
    /// Motor command saturation (normalized).
    pub steer_command_limit: f64,
    /// Road-wheel slew limit (rad/s).
    pub steer_rate_limit: f64,
    /// Road-wheel angle limit (rad).
    pub steer_angle_limit: f64,
    pub steer_time_constant: f64,
    /// Steering-wheel degrees per road-wheel radian.
    pub steering_ratio: f64,
}

impl Default for ActuationConfig {
    fn default() -> Self {
        ActuationConfig {
            brake_slope: 20.0,
            brake_offset: 0.0,
            max_brake_torque: 3100.0,
            accel_deadband: 0.05,
            steer_kp: 8.0,
            steer_ki: 20.0,
            steer_command_limit: 1.0,
            steer_rate_limit: 0.6,
            steer_angle_limit: 0.6,
            steer_time_constant: 0.03,
            steering_ratio: 1000.0,
        }
    }
}

impl ActuationConfig {
    pub fn validate(&self) -> Result<(), String> {
        let non_negative = [
            ("steer_kp", self.steer_kp),
            ("steer_ki", self.steer_ki),
            ("accel_deadband", self.accel_deadband),
            ("brake_k", self.brake_slope),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) {
                return Err(format!("`{name}` must be >= 0"));
            }
        }
        let positive = [
            ("brake_torque_max", self.max_brake_torque),
            ("steer_cmd_limit", self.steer_command_limit),
            ("steer_rate_limit", self.steer_rate_limit),
            ("steer_angle_limit", self.steer_angle_limit),
            ("steer_tau", self.steer_time_constant),
            ("steering_ratio", self.steering_ratio),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(format!("`{name}` must be > 0"));
            }
        }
        Ok(())
    }

    fn steer_gains(&self) -> PidGains {
        PidGains::pi(self.steer_kp, self.steer_ki, -self.steer_command_limit, self.steer_command_limit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Authority {
    #[default]
    Automated,
    DriverOverride,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    pub throttle: f64,
    /// PWM duty cycle of the booster valve, percent.
    pub brake_duty: f64,
    pub steer_command: f64,
    pub authority: Authority,
}

impl ControlCommand {
    /// Total brake torque the booster produces at this duty.
    pub fn brake_torque(&self, config: &ActuationConfig) -> f64 {
        self.brake_duty / 100.0 * config.max_brake_torque
    }
}

/// Duty cycle for a requested deceleration magnitude.
pub fn brake_duty(config: &ActuationConfig, decel: f64) -> f64 {
    (config.brake_slope * decel.abs() + config.brake_offset).clamp(0.0, 100.0)
}

/// Wheel force available from the driven axle at `throttle`.
fn wheel_force(params: &VehicleParameters, throttle: f64, rpm: f64, gear: usize) -> Result<f64, DynamicsError> {
    Ok(powertrain_torque(params, throttle, rpm, gear)? / params.wheel_radius)
}

/// Smallest throttle whose wheel force reaches `required` (N), by bisection at
/// fixed engine speed. Stops once the force is within 0.1 % above the request.
/// Returns 1 when full throttle cannot reach it.
pub fn invert_engine_map(
    params: &VehicleParameters,
    required: f64,
    engine_rpm: f64,
    gear: usize,
) -> Result<f64, DynamicsError> {
    if required <= 0.0 {
        return Ok(0.0);
    }
    if wheel_force(params, 1.0, engine_rpm, gear)? < required {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..64 {
        let f_hi = wheel_force(params, hi, engine_rpm, gear)?;
        if f_hi - required <= 1e-3 * required {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if wheel_force(params, mid, engine_rpm, gear)? >= required {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Maps a desired acceleration onto throttle or brake duty.
///
/// Any driver pedal input hands authority to the driver and zeroes both
/// automated outputs.
pub fn longitudinal_actuation(
    a_desired: f64,
    state: &VehicleState,
    grade: f64,
    gear: usize,
    params: &VehicleParameters,
    config: &ActuationConfig,
    driver_pedal: f64,
) -> Result<ControlCommand, DynamicsError> {
    if driver_pedal > 0.0 {
        return Ok(ControlCommand { authority: Authority::DriverOverride, ..Default::default() });
    }
    let mut cmd = ControlCommand::default();
    if a_desired > config.accel_deadband {
        let resist = resistive_forces(params, state.speed(), grade)?;
        let required = params.mass * a_desired + resist.total();
        let omega = match params.driven_axle {
            Axle::Front => state.omega_front,
            Axle::Rear => state.omega_rear,
        };
        let rpm = engine_speed_rpm(params, omega.max(0.0), gear)?;
        cmd.throttle = invert_engine_map(params, required, rpm, gear)?;
    } else if a_desired < -config.accel_deadband {
        cmd.brake_duty = brake_duty(config, a_desired);
    }
    Ok(cmd)
}

/// PI position loop closed on the steering angle sensor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SteeringServo {
    pub pid: PidState,
}

impl SteeringServo {
    /// Motor command in `[-limit, limit]` for a road-wheel angle target.
    pub fn steering_pi(&mut self, target: f64, measured: f64, config: &ActuationConfig, dt: f64) -> f64 {
        self.pid.update(target - measured, &config.steer_gains(), dt)
    }
}

/// Motor and column: first-order lag toward `command * angle_limit`, slew
/// limited, clamped to the angle limit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SteeringActuator {
    pub angle: f64,
}

impl SteeringActuator {
    pub fn steering_plant(&mut self, command: f64, config: &ActuationConfig, dt: f64) -> f64 {
        let limit = config.steer_angle_limit;
        let target = command.clamp(-1.0, 1.0) * limit;
        let max_delta = config.steer_rate_limit * dt;
        let delta = ((target - self.angle) * dt / config.steer_time_constant).clamp(-max_delta, max_delta);
        self.angle = (self.angle + delta).clamp(-limit, limit);
        self.angle
    }
}
