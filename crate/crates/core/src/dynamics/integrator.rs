//! Fixed-step classical Runge-Kutta integration of the plant.

use super::forces::spin_direction;
use super::{evaluate_with_spin, DynamicsError, PlantInputs, VehicleState};
use crate::params::VehicleParameters;

/// Largest accepted plant step (s).
pub const MAX_STEP: f64 = 0.01;

fn axpy(base: &[f64; 8], k: &[f64; 8], h: f64) -> [f64; 8] {
    std::array::from_fn(|i| base[i] + h * k[i])
}

fn deriv(
    s: [f64; 8],
    inputs: &PlantInputs,
    params: &VehicleParameters,
    spin: (f64, f64),
) -> Result<[f64; 8], DynamicsError> {
    evaluate_with_spin(&VehicleState::from_array(s), inputs, params, spin).map(|e| e.derivative.to_array())
}

/// One RK4 step with inputs held constant.
///
/// Brake direction is taken from the wheel spin at the start of the step and
/// held through all four stages; a braked wheel that crosses zero is stopped
/// at zero rather than reversed.
pub fn integrate_step(
    state: &VehicleState,
    inputs: &PlantInputs,
    params: &VehicleParameters,
    dt: f64,
) -> Result<VehicleState, DynamicsError> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let y0 = state.to_array();
    let spin = (spin_direction(state.omega_front), spin_direction(state.omega_rear));
    let k1 = deriv(y0, inputs, params, spin)?;
    let k2 = deriv(axpy(&y0, &k1, 0.5 * dt), inputs, params, spin)?;
    let k3 = deriv(axpy(&y0, &k2, 0.5 * dt), inputs, params, spin)?;
    let k4 = deriv(axpy(&y0, &k3, dt), inputs, params, spin)?;
    let y1: [f64; 8] = std::array::from_fn(|i| y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));

    let mut next = VehicleState::from_array(y1);
    if inputs.brake_front > 0.0 && crossed_zero(state.omega_front, next.omega_front) {
        next.omega_front = 0.0;
    }
    if inputs.brake_rear > 0.0 && crossed_zero(state.omega_rear, next.omega_rear) {
        next.omega_rear = 0.0;
    }
    if !next.is_finite() {
        return Err(DynamicsError::NonFinite("state after integration"));
    }
    Ok(next)
}

fn crossed_zero(before: f64, after: f64) -> bool {
    (before >= 0.0 && after < 0.0) || (before <= 0.0 && after > 0.0)
}

/// Steps a plant at a fixed `dt`, counting steps so that a divergence can be
/// reported with its index.
#[derive(Debug, Clone)]
pub struct PlantStepper {
    dt: f64,
    steps: u64,
}

impl PlantStepper {
    pub fn new(dt: f64) -> Result<Self, DynamicsError> {
        if !(dt > 0.0 && dt <= MAX_STEP) {
            return Err(DynamicsError::InvalidStep(dt));
        }
        Ok(PlantStepper { dt, steps: 0 })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(
        &mut self,
        state: &VehicleState,
        inputs: &PlantInputs,
        params: &VehicleParameters,
    ) -> Result<VehicleState, DynamicsError> {
        let step = self.steps;
        self.steps += 1;
        integrate_step(state, inputs, params, self.dt).map_err(|e| match e {
            DynamicsError::NonFinite(_) => DynamicsError::Divergence { step },
            other => other,
        })
    }
}
