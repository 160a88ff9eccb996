//! Static engine map, driveline torque and gear schedule.

use std::f64::consts::PI;

use super::DynamicsError;
use crate::params::VehicleParameters;

/// Engine torque over a rectangular (rpm x throttle) grid.
///
/// `torque[i][j]` is the torque at `rpm[i]` and `throttle[j]`. Queries outside
/// the grid are clamped to the edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineMap {
    rpm: Vec<f64>,
    throttle: Vec<f64>,
    torque: Vec<Vec<f64>>,
}

impl EngineMap {
    pub fn new(rpm: Vec<f64>, throttle: Vec<f64>, torque: Vec<Vec<f64>>) -> Result<Self, String> {
        if rpm.len() < 2 || throttle.len() < 2 {
            return Err("engine map needs at least two breakpoints per axis".into());
        }
        if !strictly_increasing(&rpm) {
            return Err("rpm breakpoints must be strictly increasing".into());
        }
        if !strictly_increasing(&throttle) {
            return Err("throttle breakpoints must be strictly increasing".into());
        }
        if torque.len() != rpm.len() || torque.iter().any(|row| row.len() != throttle.len()) {
            return Err(format!("engine map must be {} x {}", rpm.len(), throttle.len()));
        }
        if torque.iter().flatten().any(|t| !t.is_finite()) {
            return Err("engine map contains non-finite torque".into());
        }
        Ok(EngineMap { rpm, throttle, torque })
    }

    /// Parses the delimited grid: a header row `rpm,<throttle breakpoints...>`
    /// followed by one row per rpm breakpoint. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or("empty engine map")?;
        let mut cells = header.split(',').map(str::trim);
        cells.next();
        let throttle = cells
            .map(|c| c.parse::<f64>().map_err(|_| format!("line {hline}: bad throttle breakpoint `{c}`")))
            .collect::<Result<Vec<_>, _>>()?;
        let mut rpm = Vec::new();
        let mut torque = Vec::new();
        for (n, line) in lines {
            let vals = line
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|_| format!("line {n}: bad number `{}`", c.trim())))
                .collect::<Result<Vec<_>, _>>()?;
            if vals.len() != throttle.len() + 1 {
                return Err(format!("line {n}: expected {} fields, found {}", throttle.len() + 1, vals.len()));
            }
            rpm.push(vals[0]);
            torque.push(vals[1..].to_vec());
        }
        Self::new(rpm, throttle, torque)
    }

    pub fn rpm_range(&self) -> (f64, f64) {
        (self.rpm[0], *self.rpm.last().unwrap())
    }

    /// Bilinear interpolation with edge clamping.
    pub fn torque(&self, rpm: f64, throttle: f64) -> f64 {
        let (i, u) = locate(&self.rpm, rpm);
        let (j, v) = locate(&self.throttle, throttle);
        let t00 = self.torque[i][j];
        let t01 = self.torque[i][j + 1];
        let t10 = self.torque[i + 1][j];
        let t11 = self.torque[i + 1][j + 1];
        let lo = t00 + (t01 - t00) * v;
        let hi = t10 + (t11 - t10) * v;
        lo + (hi - lo) * u
    }
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[1] > w[0])
}

/// Cell index and fractional position inside it, clamped to the grid.
fn locate(axis: &[f64], x: f64) -> (usize, f64) {
    let last = axis.len() - 1;
    if x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[last] {
        return (last - 1, 1.0);
    }
    let i = axis.partition_point(|&b| b <= x) - 1;
    let i = i.min(last - 1);
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

/// Engine speed in rpm seen through the selected gear.
pub fn engine_speed_rpm(params: &VehicleParameters, wheel_speed: f64, gear: usize) -> Result<f64, DynamicsError> {
    Ok(wheel_speed * gear_ratio(params, gear)? * 60.0 / (2.0 * PI))
}

pub fn gear_ratio(params: &VehicleParameters, gear: usize) -> Result<f64, DynamicsError> {
    params.gear_ratios.get(gear).copied().ok_or(DynamicsError::InvalidGear { gear, count: params.gear_ratios.len() })
}

/// Driveline torque at the driven wheels: `T_d = eta_t * i_t(gear) * T_ice(rpm, throttle)`.
pub fn powertrain_torque(
    params: &VehicleParameters,
    throttle: f64,
    engine_rpm: f64,
    gear: usize,
) -> Result<f64, DynamicsError> {
    let ratio = gear_ratio(params, gear)?;
    if !throttle.is_finite() || !engine_rpm.is_finite() {
        return Err(DynamicsError::NonFinite("powertrain input"));
    }
    let throttle = throttle.clamp(0.0, 1.0);
    Ok(params.driveline_efficiency * ratio * params.engine_map.torque(engine_rpm, throttle))
}

/// Zero-based gear from the upshift schedule: gear `k` is used while
/// `speed < shift_speeds[k]`.
pub fn select_gear(params: &VehicleParameters, speed: f64) -> usize {
    let top = params.gear_ratios.len().saturating_sub(1);
    params.shift_speeds.iter().take_while(|&&s| speed >= s).count().min(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_map() -> EngineMap {
        EngineMap::new(vec![1000.0, 2000.0], vec![0.0, 1.0], vec![vec![0.0, 100.0], vec![0.0, 200.0]]).unwrap()
    }

    #[test]
    fn zero_throttle_on_zero_row() {
        let mut p = VehicleParameters::nominal();
        p.engine_map = small_map();
        assert_eq!(powertrain_torque(&p, 0.0, 1500.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn grid_node_through_driveline() {
        let mut p = VehicleParameters::nominal();
        p.engine_map = small_map();
        p.driveline_efficiency = 0.9;
        p.gear_ratios = vec![10.0];
        let td = powertrain_torque(&p, 1.0, 1000.0, 0).unwrap();
        assert!((td - 900.0).abs() < 1e-9, "{td}");
    }

    #[test]
    fn midpoint_interpolates() {
        let m = small_map();
        assert!((m.torque(1500.0, 1.0) - 150.0).abs() < 1e-12);
        assert!((m.torque(1000.0, 0.5) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn edges_clamp() {
        let m = small_map();
        assert_eq!(m.torque(100.0, 1.0), 100.0);
        assert_eq!(m.torque(9000.0, 2.0), 200.0);
    }

    #[test]
    fn invalid_gear_is_config_error() {
        let p = VehicleParameters::nominal();
        let n = p.gear_ratios.len();
        assert!(matches!(powertrain_torque(&p, 0.5, 2000.0, n), Err(DynamicsError::InvalidGear { .. })));
    }

    #[test]
    fn parse_rejects_non_monotone_axis() {
        let txt = "rpm,0,1\n2000,0,1\n1000,0,2\n";
        assert!(EngineMap::parse(txt).is_err());
    }

    #[test]
    fn parse_shipped_map() {
        let m = EngineMap::parse(include_str!("../../data/nominal_engine.csv")).unwrap();
        assert_eq!(m.rpm_range(), (800.0, 5000.0));
        assert_eq!(m.torque(2000.0, 1.0), 320.0);
    }

    #[test]
    fn gear_schedule() {
        let p = VehicleParameters::nominal();
        assert_eq!(select_gear(&p, 0.0), 0);
        assert_eq!(select_gear(&p, 13.9), 2);
        assert_eq!(select_gear(&p, 100.0), p.gear_ratios.len() - 1);
    }
}
