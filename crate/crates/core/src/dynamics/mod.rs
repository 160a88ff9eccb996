//! Nonlinear single-track plant: equations of motion, resistive forces,
//! driveline, wheel spin dynamics, slip and Dugoff tire forces.
//!
//! Body frame: x forward, y left, yaw counter-clockwise positive. Global
//! frame: x east, y north, heading measured counter-clockwise from east.
//! The rear axle is never steered.

mod forces;
mod integrator;
mod powertrain;
mod tire;

use thiserror::Error;

pub use forces::{normal_loads, resistive_forces, wheel_acceleration, ResistiveForces};
pub use integrator::{integrate_step, PlantStepper, MAX_STEP};
pub use powertrain::{engine_speed_rpm, gear_ratio, powertrain_torque, select_gear, EngineMap};
pub use tire::{compute_slip, dugoff_axle, dugoff_forces, AxleForce, SlipState, TireForces};

use crate::params::{Axle, VehicleParameters};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("input out of domain: {0}")]
    InputDomain(String),
    #[error("gear index {gear} invalid, vehicle has {count} gears")]
    InvalidGear { gear: usize, count: usize },
    #[error("integration step {0} s outside (0, 0.01]")]
    InvalidStep(f64),
    #[error("numerical divergence at plant step {step}")]
    Divergence { step: u64 },
}

/// Planar pose, body velocities and axle spin speeds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
    pub omega_front: f64,
    pub omega_rear: f64,
}

impl VehicleState {
    /// Rolling straight ahead at `speed` with free-rolling wheels.
    pub fn rolling(params: &VehicleParameters, speed: f64) -> Self {
        let omega = speed / params.wheel_radius;
        VehicleState { vx: speed, omega_front: omega, omega_rear: omega, ..Default::default() }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    /// Body sideslip, undefined at standstill.
    pub fn sideslip(&self, velocity_epsilon: f64) -> Option<f64> {
        (self.speed() > velocity_epsilon).then(|| self.vy.atan2(self.vx))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub(crate) fn to_array(self) -> [f64; 8] {
        [self.x, self.y, self.heading, self.vx, self.vy, self.yaw_rate, self.omega_front, self.omega_rear]
    }

    pub(crate) fn from_array(a: [f64; 8]) -> Self {
        VehicleState {
            x: a[0],
            y: a[1],
            heading: a[2],
            vx: a[3],
            vy: a[4],
            yaw_rate: a[5],
            omega_front: a[6],
            omega_rear: a[7],
        }
    }
}

/// Time derivative of [`VehicleState`], field for field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
    pub omega_front: f64,
    pub omega_rear: f64,
}

impl StateDerivative {
    pub(crate) fn to_array(self) -> [f64; 8] {
        [self.x, self.y, self.heading, self.vx, self.vy, self.yaw_rate, self.omega_front, self.omega_rear]
    }

    /// Accelerations an IMU at the CG would read: `(dVx/dt - r Vy, dVy/dt + r Vx)`.
    pub fn body_acceleration(&self, state: &VehicleState) -> (f64, f64) {
        (self.vx - state.yaw_rate * state.vy, self.vy + state.yaw_rate * state.vx)
    }
}

/// Plant inputs held constant over one integration step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantInputs {
    /// Front road-wheel angle (rad).
    pub steer: f64,
    /// Throttle fraction in [0, 1].
    pub throttle: f64,
    pub brake_front: f64,
    pub brake_rear: f64,
    /// Road grade (rad), positive uphill.
    pub grade: f64,
    /// Zero-based gear index.
    pub gear: usize,
}

impl PlantInputs {
    /// Splits a total brake torque between the axles.
    pub fn with_brake(mut self, params: &VehicleParameters, total: f64) -> Self {
        self.brake_front = total * params.brake_front_share;
        self.brake_rear = total * (1.0 - params.brake_front_share);
        self
    }
}

/// All intermediate quantities of one derivative evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantEvaluation {
    pub slip: SlipState,
    pub tires: TireForces,
    pub resistive: ResistiveForces,
    pub drive_torque: f64,
    pub derivative: StateDerivative,
}

pub fn evaluate(
    state: &VehicleState,
    inputs: &PlantInputs,
    params: &VehicleParameters,
) -> Result<PlantEvaluation, DynamicsError> {
    let spin = (forces::spin_direction(state.omega_front), forces::spin_direction(state.omega_rear));
    evaluate_with_spin(state, inputs, params, spin)
}

/// `spin` fixes the direction the brakes act in for each axle.
pub(crate) fn evaluate_with_spin(
    state: &VehicleState,
    inputs: &PlantInputs,
    params: &VehicleParameters,
    spin: (f64, f64),
) -> Result<PlantEvaluation, DynamicsError> {
    let slip = compute_slip(state, inputs, params);
    let tires = dugoff_forces(params, &slip, normal_loads(params));
    let resistive = resistive_forces(params, state.speed(), inputs.grade)?;

    let driven_omega = match params.driven_axle {
        Axle::Front => state.omega_front,
        Axle::Rear => state.omega_rear,
    };
    let rpm = engine_speed_rpm(params, driven_omega.max(0.0), inputs.gear)?;
    let drive_torque = powertrain_torque(params, inputs.throttle, rpm, inputs.gear)?;
    let (drive_front, drive_rear) = match params.driven_axle {
        Axle::Front => (drive_torque, 0.0),
        Axle::Rear => (0.0, drive_torque),
    };

    let (sin_d, cos_d) = inputs.steer.sin_cos();
    let (fxf, fyf) = (tires.front.fx, tires.front.fy);
    let (fxr, fyr) = (tires.rear.fx, tires.rear.fy);

    // drag and rolling resistance oppose the direction of travel, grade does not
    let travel = if state.vx > 0.0 {
        1.0
    } else if state.vx < 0.0 {
        -1.0
    } else {
        0.0
    };
    let resist_x = travel * (resistive.aero + resistive.rolling) + resistive.grade;

    let m = params.mass;
    let fx_body = fxf * cos_d - fyf * sin_d + fxr - resist_x;
    let fy_body = fxf * sin_d + fyf * cos_d + fyr;
    let yaw_moment = params.lf * (fyf * cos_d + fxf * sin_d) - params.lr * fyr;

    let (sin_h, cos_h) = state.heading.sin_cos();
    let derivative = StateDerivative {
        x: state.vx * cos_h - state.vy * sin_h,
        y: state.vx * sin_h + state.vy * cos_h,
        heading: state.yaw_rate,
        vx: state.yaw_rate * state.vy + fx_body / m,
        vy: -state.yaw_rate * state.vx + fy_body / m,
        yaw_rate: yaw_moment / params.yaw_inertia,
        omega_front: forces::wheel_acceleration_with_spin(params, spin.0, drive_front, inputs.brake_front, fxf),
        omega_rear: forces::wheel_acceleration_with_spin(params, spin.1, drive_rear, inputs.brake_rear, fxr),
    };
    Ok(PlantEvaluation { slip, tires, resistive, drive_torque, derivative })
}

pub fn state_derivative(
    state: &VehicleState,
    inputs: &PlantInputs,
    params: &VehicleParameters,
) -> Result<StateDerivative, DynamicsError> {
    evaluate(state, inputs, params).map(|e| e.derivative)
}
