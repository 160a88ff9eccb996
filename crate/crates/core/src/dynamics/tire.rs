//! Slip kinematics and the Dugoff combined-slip tire.

use super::{PlantInputs, VehicleState};
use crate::params::VehicleParameters;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlipState {
    pub alpha_front: f64,
    pub alpha_rear: f64,
    /// Contact-patch speed along each wheel's heading.
    pub v_front: f64,
    pub v_rear: f64,
    pub s_front: f64,
    pub s_rear: f64,
}

pub fn compute_slip(state: &VehicleState, inputs: &PlantInputs, params: &VehicleParameters) -> SlipState {
    let eps = params.velocity_epsilon;
    let vy_front = state.vy + params.lf * state.yaw_rate;
    let vy_rear = state.vy - params.lr * state.yaw_rate;

    let (mut alpha_front, mut alpha_rear) = if state.vx.abs() >= eps {
        (inputs.steer - (vy_front / state.vx).atan(), -(vy_rear / state.vx).atan())
    } else {
        (0.0, 0.0)
    };
    let v_front = state.vx.hypot(vy_front) * alpha_front.cos();
    let v_rear = state.vx.hypot(vy_rear) * alpha_rear.cos();

    let r = params.wheel_radius;
    let floor = params.slip_speed_floor;
    let s_front = slip_ratio(r * state.omega_front, v_front, eps, floor);
    let s_rear = slip_ratio(r * state.omega_rear, v_rear, eps, floor);
    if (r * state.omega_front).abs().max(v_front.abs()) < eps {
        alpha_front = 0.0;
    }
    if (r * state.omega_rear).abs().max(v_rear.abs()) < eps {
        alpha_rear = 0.0;
    }
    SlipState { alpha_front, alpha_rear, v_front, v_rear, s_front, s_rear }
}

/// Braking branch divides by the contact-patch speed, traction branch by the
/// wheel surface speed. Denominators are floored at `floor` and the result
/// clamped to [-1, 1].
fn slip_ratio(surface: f64, patch: f64, eps: f64, floor: f64) -> f64 {
    if surface.abs().max(patch.abs()) < eps {
        return 0.0;
    }
    let diff = surface - patch;
    let s = if diff < 0.0 {
        diff / patch.abs().max(floor)
    } else if diff > 0.0 {
        diff / surface.abs().max(floor)
    } else {
        0.0
    };
    s.clamp(-1.0, 1.0)
}

/// Dugoff output for one axle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxleForce {
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    /// Saturation factor in (0, 1].
    pub saturation: f64,
    /// Unsaturated combined demand.
    pub demand: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TireForces {
    pub front: AxleForce,
    pub rear: AxleForce,
}

/// Dugoff forces for one axle given its stiffnesses, slips and load.
pub fn dugoff_axle(cx: f64, cy: f64, slip: f64, alpha: f64, mu: f64, fz: f64) -> AxleForce {
    let lx = cx * slip;
    let ly = cy * alpha;
    let demand = lx.hypot(ly);
    let half_cap = 0.5 * mu * fz;
    let saturation = if demand <= half_cap {
        1.0
    } else {
        let u = half_cap / demand;
        (2.0 - u) * u
    };
    AxleForce { fx: saturation * lx, fy: saturation * ly, fz, saturation, demand }
}

pub fn dugoff_forces(params: &VehicleParameters, slip: &SlipState, loads: (f64, f64)) -> TireForces {
    let mu = params.friction;
    TireForces {
        front: dugoff_axle(params.cx_front, params.cy_front, slip.s_front, slip.alpha_front, mu, loads.0),
        rear: dugoff_axle(params.cx_rear, params.cy_rear, slip.s_rear, slip.alpha_rear, mu, loads.1),
    }
}
