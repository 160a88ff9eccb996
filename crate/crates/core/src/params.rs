//! Vehicle parameter file: plant constants plus the actuation settings that
//! live alongside them.

use std::path::{Path, PathBuf};

use crate::actuation::ActuationConfig;
use crate::config::{ConfigError, Document, Fields};
use crate::dynamics::EngineMap;

const NOMINAL_PARAMS: &str = include_str!("../data/nominal_lcv.params");
const NOMINAL_ENGINE: &str = include_str!("../data/nominal_engine.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axle {
    Front,
    Rear,
}

/// Plant constants for the single-track model. Tire stiffnesses and the wheel
/// inertia are per lumped axle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParameters {
    pub mass: f64,
    pub yaw_inertia: f64,
    pub lf: f64,
    pub lr: f64,
    pub frontal_area: f64,
    pub air_density: f64,
    pub drag_coefficient: f64,
    pub rolling_resistance: f64,
    pub gravity: f64,
    pub wheel_inertia: f64,
    pub wheel_radius: f64,
    pub cx_front: f64,
    pub cx_rear: f64,
    pub cy_front: f64,
    pub cy_rear: f64,
    pub friction: f64,
    pub driveline_efficiency: f64,
    /// Overall ratio (gearbox x final drive) per gear.
    pub gear_ratios: Vec<f64>,
    /// Upshift speeds in m/s, one fewer than gears.
    pub shift_speeds: Vec<f64>,
    pub engine_map: EngineMap,
    pub driven_axle: Axle,
    /// Fraction of total brake torque sent to the front axle.
    pub brake_front_share: f64,
    /// Below this speed slips are zeroed and rolling resistance vanishes.
    pub velocity_epsilon: f64,
    /// Lower bound on the slip-ratio denominator.
    pub slip_speed_floor: f64,
    /// Body footprint, used by sensors and the corridor check.
    pub length: f64,
    pub width: f64,
}

/// Everything one parameter file describes.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleConfig {
    pub vehicle: VehicleParameters,
    pub actuation: ActuationConfig,
}

impl VehicleParameters {
    /// The shipped nominal van. Values are illustrative, not measured.
    pub fn nominal() -> Self {
        VehicleConfig::nominal().vehicle
    }

    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("m", self.mass),
            ("I_z", self.yaw_inertia),
            ("l_f", self.lf),
            ("l_r", self.lr),
            ("A", self.frontal_area),
            ("rho", self.air_density),
            ("C_d", self.drag_coefficient),
            ("g", self.gravity),
            ("I_w", self.wheel_inertia),
            ("R_w", self.wheel_radius),
            ("C_xf", self.cx_front),
            ("C_xr", self.cx_rear),
            ("C_yf", self.cy_front),
            ("C_yr", self.cy_rear),
            ("v_eps", self.velocity_epsilon),
            ("length", self.length),
            ("width", self.width),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("`{name}` must be strictly positive, got {v}"));
            }
        }
        if !(self.driveline_efficiency > 0.0 && self.driveline_efficiency <= 1.0) {
            return Err("`eta_t` must lie in (0, 1]".into());
        }
        if !(0.0..1.0).contains(&self.rolling_resistance) {
            return Err("`C_rr` must lie in [0, 1)".into());
        }
        if !(self.friction > 0.0 && self.friction <= 2.0) {
            return Err("`mu` must lie in (0, 2]".into());
        }
        if self.gear_ratios.is_empty() || self.gear_ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err("`i_t` needs at least one positive ratio".into());
        }
        if self.shift_speeds.len() + 1 != self.gear_ratios.len() {
            return Err("`shift_speeds` must have one entry fewer than `i_t`".into());
        }
        if self.shift_speeds.windows(2).any(|w| w[1] <= w[0]) {
            return Err("`shift_speeds` must be strictly increasing".into());
        }
        if !(0.0..=1.0).contains(&self.brake_front_share) {
            return Err("`brake_split_front` must lie in [0, 1]".into());
        }
        if !(self.slip_speed_floor.is_finite() && self.slip_speed_floor >= 0.0) {
            return Err("`v_slip_floor` must be non-negative".into());
        }
        Ok(())
    }
}

impl VehicleConfig {
    pub fn nominal() -> Self {
        let doc = Document::parse(NOMINAL_PARAMS, "nominal_lcv.params", Path::new(""))
            .expect("shipped parameter file parses");
        let map = EngineMap::parse(NOMINAL_ENGINE).expect("shipped engine map parses");
        Self::from_document(doc, |_| Ok(map.clone())).expect("shipped parameter file is valid")
    }

    /// Reads a parameter file; the engine map path is resolved relative to it.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let doc = Document::read(path)?;
        let base = doc.base_dir().to_path_buf();
        let origin = doc.origin().to_string();
        Self::from_document(doc, |rel| {
            let p: PathBuf = base.join(rel);
            if !p.exists() {
                return Err(ConfigError::DanglingReference { path: origin.clone(), target: p.display().to_string() });
            }
            let text = std::fs::read_to_string(&p).map_err(|e| ConfigError::io(&p, e))?;
            EngineMap::parse(&text).map_err(|msg| ConfigError::Parse { path: p.display().to_string(), line: 0, msg })
        })
    }

    fn from_document(
        mut doc: Document,
        load_map: impl FnOnce(&str) -> Result<EngineMap, ConfigError>,
    ) -> Result<Self, ConfigError> {
        let mut f = doc.take("").expect("root section always exists");
        let vehicle = read_vehicle(&mut f, load_map)?;
        let actuation = read_actuation(&mut f)?;
        f.finish()?;
        doc.finish()?;
        Ok(VehicleConfig { vehicle, actuation })
    }
}

fn read_vehicle(
    f: &mut Fields,
    load_map: impl FnOnce(&str) -> Result<EngineMap, ConfigError>,
) -> Result<VehicleParameters, ConfigError> {
    let map_ref = f.string("engine_map").ok_or_else(|| f.missing("engine_map"))?;
    let driven_axle = match f.string("driven_axle").as_deref() {
        None | Some("front") => Axle::Front,
        Some("rear") => Axle::Rear,
        Some(other) => return Err(f.reject("driven_axle", format!("`{other}` is not front|rear"))),
    };
    let p = VehicleParameters {
        mass: f.req_f64("m")?,
        yaw_inertia: f.req_f64("I_z")?,
        lf: f.req_f64("l_f")?,
        lr: f.req_f64("l_r")?,
        frontal_area: f.req_f64("A")?,
        air_density: f.f64_or("rho", 1.225)?,
        drag_coefficient: f.req_f64("C_d")?,
        rolling_resistance: f.req_f64("C_rr")?,
        gravity: f.f64_or("g", 9.81)?,
        wheel_inertia: f.req_f64("I_w")?,
        wheel_radius: f.req_f64("R_w")?,
        cx_front: f.req_f64("C_xf")?,
        cx_rear: f.req_f64("C_xr")?,
        cy_front: f.req_f64("C_yf")?,
        cy_rear: f.req_f64("C_yr")?,
        friction: f.req_f64("mu")?,
        driveline_efficiency: f.req_f64("eta_t")?,
        gear_ratios: f.f64_list("i_t")?.ok_or_else(|| f.missing("i_t"))?,
        shift_speeds: f.f64_list("shift_speeds")?.unwrap_or_default(),
        engine_map: load_map(&map_ref)?,
        driven_axle,
        brake_front_share: f.f64_or("brake_split_front", 0.7)?,
        velocity_epsilon: f.f64_or("v_eps", 0.1)?,
        slip_speed_floor: f.f64_or("v_slip_floor", 3.0)?,
        length: f.f64_or("length", 4.4)?,
        width: f.f64_or("width", 1.83)?,
    };
    p.validate().map_err(|msg| f.reject("vehicle parameters", msg))?;
    Ok(p)
}

fn read_actuation(f: &mut Fields) -> Result<ActuationConfig, ConfigError> {
    let d = ActuationConfig::default();
    let a = ActuationConfig {
        brake_slope: f.f64_or("brake_k", d.brake_slope)?,
        brake_offset: f.f64_or("brake_b", d.brake_offset)?,
        max_brake_torque: f.f64_or("brake_torque_max", d.max_brake_torque)?,
        accel_deadband: f.f64_or("accel_deadband", d.accel_deadband)?,
        steer_kp: f.f64_or("steer_kp", d.steer_kp)?,
        steer_ki: f.f64_or("steer_ki", d.steer_ki)?,
        steer_command_limit: f.f64_or("steer_cmd_limit", d.steer_command_limit)?,
        steer_rate_limit: f.f64_or("steer_rate_limit", d.steer_rate_limit)?,
        steer_angle_limit: f.f64_or("steer_angle_limit", d.steer_angle_limit)?,
        steer_time_constant: f.f64_or("steer_tau", d.steer_time_constant)?,
        steering_ratio: f.f64_or("steering_ratio", d.steering_ratio)?,
    };
    a.validate().map_err(|msg| f.reject("actuation parameters", msg))?;
    Ok(a)
}
