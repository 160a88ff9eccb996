//! Browser bindings for three interactive views: the Dugoff force surface,
//! a two-vehicle CACC run and the double lane change.
//!
//! Each binding is a thin wrapper over a plain function returning JSON text,
//! so the same code is exercised by native tests.

use lcv_core::dynamics::dugoff_axle;
use lcv_core::harness::{parse_scenario, run_scenario, HarnessError, Metrics, Scenario, Trace};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Trace rows kept per second in the returned series.
const SERIES_RATE: f64 = 20.0;

#[derive(Debug, Serialize)]
struct Surface {
    slip: Vec<f64>,
    alpha: Vec<f64>,
    /// Row-major `alpha x slip` grid of |F| / (mu Fz).
    utilisation: Vec<f64>,
    /// Saturation factor on the same grid.
    saturation: Vec<f64>,
}

/// Combined-slip force magnitude over a `n x n` grid of longitudinal slip in
/// `[-slip_max, slip_max]` and slip angle in `[-alpha_max, alpha_max]`.
pub fn dugoff_surface_json(
    mu: f64,
    fz: f64,
    cx: f64,
    cy: f64,
    slip_max: f64,
    alpha_max: f64,
    n: usize,
) -> Result<String, String> {
    let inputs = [("mu", mu), ("fz", fz), ("cx", cx), ("cy", cy), ("slip_max", slip_max), ("alpha_max", alpha_max)];
    if let Some((name, v)) = inputs.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
        return Err(format!("{name} must be a positive number, got {v}"));
    }
    if !(2..=400).contains(&n) {
        return Err(format!("grid size {n} outside [2, 400]"));
    }
    let axis = |max: f64| (0..n).map(|i| -max + 2.0 * max * i as f64 / (n - 1) as f64).collect::<Vec<_>>();
    let slip = axis(slip_max);
    let alpha = axis(alpha_max);
    let mut utilisation = Vec::with_capacity(n * n);
    let mut saturation = Vec::with_capacity(n * n);
    for a in &alpha {
        for s in &slip {
            let f = dugoff_axle(cx, cy, *s, *a, mu, fz);
            utilisation.push(f.fx.hypot(f.fy) / (mu * fz));
            saturation.push(f.saturation);
        }
    }
    Ok(serde_json::to_string(&Surface { slip, alpha, utilisation, saturation }).expect("surface serializes"))
}

#[derive(Debug, Serialize)]
struct Run {
    passed: bool,
    metrics: Metrics,
    series: Series,
}

#[derive(Debug, Serialize)]
struct Series {
    columns: Vec<String>,
    /// One array per column.
    values: Vec<Vec<f64>>,
}

fn series(trace: &Trace, columns: &[&str], dt: f64) -> Result<Series, HarnessError> {
    let stride = ((1.0 / SERIES_RATE) / dt).round().max(1.0) as usize;
    let values = columns
        .iter()
        .map(|c| trace.column(c).map(|v| v.into_iter().step_by(stride).collect()))
        .collect::<Result<_, _>>()?;
    Ok(Series { columns: columns.iter().map(|c| c.to_string()).collect(), values })
}

fn run_json(scenario: &Scenario, columns: &[&str]) -> Result<String, String> {
    let run = run_scenario(scenario).map_err(|e| e.to_string())?;
    let series = series(&run.trace, columns, scenario.timing.control_dt).map_err(|e| e.to_string())?;
    let out = Run { passed: run.result.passed, metrics: run.result.metrics, series };
    Ok(serde_json::to_string(&out).expect("run serializes"))
}

fn set(section: &str, key: &str, value: f64) -> (String, String, String) {
    (section.to_string(), key.to_string(), value.to_string())
}

const CACC_TEXT: &str = "\
[scenario]
name = cacc_demo
kind = cacc-follow
duration = 40

[ego]
speed = 10

[lead]
speed_profile = 0:10, 5:10, 7:15, 40:15

[longitudinal]

[channel]
";

pub const CACC_COLUMNS: [&str; 7] = ["t", "vx", "lead_vx", "delta_v", "spacing_error", "range", "feed_fresh"];

/// Lead steps from 10 to 15 m/s over 2 s; the ego follows with the given
/// gains over a link with the given latency (s) and loss fraction.
#[allow(clippy::too_many_arguments)]
pub fn run_cacc_json(
    kp: f64,
    kd: f64,
    headway: f64,
    feedforward: f64,
    latency: f64,
    loss: f64,
    seed: u64,
) -> Result<String, String> {
    let overrides = [
        set("longitudinal", "acc_kp", kp),
        set("longitudinal", "acc_kd", kd),
        set("longitudinal", "headway", headway),
        set("longitudinal", "feedforward", feedforward),
        set("channel", "latency", latency),
        set("channel", "loss", loss),
    ];
    let scenario = parse_scenario(CACC_TEXT, "cacc_demo", &overrides).map_err(|e| e.to_string())?.with_seed(seed);
    run_json(&scenario, &CACC_COLUMNS)
}

const DLC_TEXT: &str = "\
[scenario]
name = dlc_demo
kind = double-lane-change
duration = 14

[ego]

[path]

[sensing]
gps_error_bound = 0
";

pub const DLC_COLUMNS: [&str; 6] = ["t", "x", "y", "heading", "steer", "ay"];

#[derive(Debug, Serialize)]
struct Corridor {
    /// `[x_start, x_end, lower, upper]` for each constrained lane.
    lanes: Vec<[f64; 4]>,
    vehicle_length: f64,
    vehicle_width: f64,
}

#[derive(Debug, Serialize)]
struct DlcRun {
    run: serde_json::Value,
    corridor: Corridor,
}

/// Lane change through the ISO 3888-1 corridor at `speed_kmh` with the given
/// waypoint switch radius and heading gain.
pub fn run_dlc_json(speed_kmh: f64, switch_radius: f64, kp: f64, seed: u64) -> Result<String, String> {
    let speed = speed_kmh / 3.6;
    let overrides = [
        set("ego", "speed", speed),
        set("path", "speed", speed),
        set("path", "switch_radius", switch_radius),
        set("path", "kp", kp),
    ];
    let scenario = parse_scenario(DLC_TEXT, "dlc_demo", &overrides).map_err(|e| e.to_string())?.with_seed(seed);
    let corridor = scenario.corridor.as_ref().ok_or("scenario has no corridor")?;
    let mut lanes = Vec::new();
    let mut x = corridor.start;
    for section in &corridor.sections {
        if let Some((lo, hi)) = section.bounds {
            lanes.push([x, x + section.length, lo, hi]);
        }
        x += section.length;
    }
    let vehicle = &scenario.ego.config.vehicle;
    let corridor = Corridor { lanes, vehicle_length: vehicle.length, vehicle_width: vehicle.width };
    let run: serde_json::Value = serde_json::from_str(&run_json(&scenario, &DLC_COLUMNS)?).expect("own output parses");
    Ok(serde_json::to_string(&DlcRun { run, corridor }).expect("run serializes"))
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn dugoff_surface(
    mu: f64,
    fz: f64,
    cx: f64,
    cy: f64,
    slip_max: f64,
    alpha_max: f64,
    n: usize,
) -> Result<String, JsValue> {
    js(dugoff_surface_json(mu, fz, cx, cy, slip_max, alpha_max, n))
}

#[wasm_bindgen]
pub fn run_cacc(
    kp: f64,
    kd: f64,
    headway: f64,
    feedforward: f64,
    latency: f64,
    loss: f64,
    seed: u32,
) -> Result<String, JsValue> {
    js(run_cacc_json(kp, kd, headway, feedforward, latency, loss, u64::from(seed)))
}

#[wasm_bindgen]
pub fn run_dlc(speed_kmh: f64, switch_radius: f64, kp: f64, seed: u32) -> Result<String, JsValue> {
    js(run_dlc_json(speed_kmh, switch_radius, kp, u64::from(seed)))
}
