//! Acceptance suite: one verdict line per criterion, tolerances pinned below.
//!
//! Runs without the libtest harness so the verdict lines are always shown.
//! The process fails if any criterion fails, except for criteria listed in
//! `KNOWN_FAILURES`, whose remaining clauses are still enforced.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lcv_core::comms::{
    can_to_udp, decode_v2v, encode_v2v, udp_to_can, CanMapping, UdpPackage, V2VMessage, DATAGRAM_LEN,
};
use lcv_core::dynamics::{dugoff_axle, evaluate, integrate_step, PlantInputs, VehicleState};
use lcv_core::guidance::wrap_angle;
use lcv_core::harness::{emit_outputs, load_scenario, load_scenario_with, run_scenario, CaccMetrics, Metrics};
use lcv_core::sensing::{heading_fusion, GpsModel, NoiseModelParams};
use lcv_core::VehicleParameters;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DUGOFF_SAMPLES: usize = 1_000_000;
const DUGOFF_CONTINUITY_TOL: f64 = 1e-6;
const DUGOFF_CONE_TOL: f64 = 1e-9;
const DUGOFF_BUDGET: Duration = Duration::from_secs(10);

const COAST_SPEED: f64 = 30.0;
const COAST_HORIZON: f64 = 10.0;
const COAST_DT: f64 = 0.001;
const COAST_TOL: f64 = 1e-6;
const RICHARDSON_RANGE: (f64, f64) = (12.0, 20.0);
const INTEGRATOR_BUDGET: Duration = Duration::from_secs(5);

const SYMMETRY_SAMPLES: usize = 10_000;
const SYMMETRY_TOL: f64 = 1e-9;

const DLC_BUDGET: Duration = Duration::from_secs(30);

const SETTLE_LIMIT: f64 = 15.0;
const CACC_BUDGET: Duration = Duration::from_secs(30);

const GPS_FIXES: usize = 10_000;
const GPS_QUANTILE: f64 = 0.99;
const GPS_LIMIT: f64 = 2.0;

const CODEC_CASES: u32 = 10_000;

const FUSION_CASES: u32 = 10_000;
const FUSION_TOL: f64 = 1e-9;
/// Pairs closer than this to antipodal are excluded.
const ANTIPODAL_MARGIN: f64 = 1e-6;

/// Criteria that fail for a documented reason. Their other clauses are
/// asserted separately and still fail the run.
const KNOWN_FAILURES: &[&str] = &["channel degradation"];

struct Verdict {
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn criterion(name: &'static str, f: impl FnOnce() -> (bool, String)) -> Verdict {
    let start = Instant::now();
    let (passed, detail) = f();
    let v = Verdict { name, passed, detail, elapsed: start.elapsed() };
    println!(
        "{} {:<22} {} [{:.2} s]",
        if v.passed { "PASS" } else { "FAIL" },
        v.name,
        v.detail,
        v.elapsed.as_secs_f64()
    );
    v
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn cacc(m: &Metrics) -> &CaccMetrics {
    match m {
        Metrics::Cacc(c) => c,
        other => panic!("expected CACC metrics, got {other:?}"),
    }
}

fn dugoff() -> (bool, String) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xD06_0FF);
    let mut worst_jump: f64 = 0.0;
    let mut worst_cone: f64 = 0.0;
    for _ in 0..DUGOFF_SAMPLES {
        let s: f64 = rng.gen_range(-1.0..1.0);
        let alpha: f64 = rng.gen_range(-0.6..0.6);
        let fz: f64 = rng.gen_range(500.0..20_000.0);
        let mu: f64 = rng.gen_range(0.05..1.3);
        let cx: f64 = rng.gen_range(1e4..3e5);
        let cy: f64 = rng.gen_range(1e4..3e5);

        let f = dugoff_axle(cx, cy, s, alpha, mu, fz);
        if f.demand > 0.5 * mu * fz {
            let excess = f.fx.hypot(f.fy) / (mu * fz) - 1.0;
            worst_cone = worst_cone.max(excess);
        }

        // scale the slips so the demand lands on the saturation boundary
        let demand = (cx * s).hypot(cy * alpha);
        if demand == 0.0 {
            continue;
        }
        let k = 0.5 * mu * fz / demand;
        let below = dugoff_axle(cx, cy, s * k * (1.0 - 1e-12), alpha * k * (1.0 - 1e-12), mu, fz);
        let above = dugoff_axle(cx, cy, s * k * (1.0 + 1e-12), alpha * k * (1.0 + 1e-12), mu, fz);
        let jump = (below.fx - above.fx).hypot(below.fy - above.fy) / (mu * fz);
        worst_jump = worst_jump.max(jump);
    }
    let elapsed = start.elapsed();
    let passed = worst_jump <= DUGOFF_CONTINUITY_TOL && worst_cone <= DUGOFF_CONE_TOL && elapsed < DUGOFF_BUDGET;
    (
        passed,
        format!(
            "{DUGOFF_SAMPLES} samples: max jump at boundary {worst_jump:.2e} (tol {DUGOFF_CONTINUITY_TOL:e}), \
             max cone excess {worst_cone:.2e} (tol {DUGOFF_CONE_TOL:e})"
        ),
    )
}

/// Body with tires and rolling resistance switched off, so only drag acts.
fn drag_only(mut p: VehicleParameters) -> VehicleParameters {
    p.rolling_resistance = 0.0;
    p.cx_front = 0.0;
    p.cx_rear = 0.0;
    p.cy_front = 0.0;
    p.cy_rear = 0.0;
    p
}

fn coast(p: &VehicleParameters, dt: f64, horizon: f64) -> f64 {
    let mut s = VehicleState::rolling(p, COAST_SPEED);
    let inputs = PlantInputs::default();
    let steps = (horizon / dt).round() as usize;
    for _ in 0..steps {
        s = integrate_step(&s, &inputs, p, dt).expect("coasting step");
    }
    s.vx
}

/// m dV/dt = -k' V^2 has V(t) = V0 / (1 + k V0 t) with k = rho Cd A / (2 m).
fn coast_closed_form(p: &VehicleParameters, t: f64) -> f64 {
    let k = p.air_density * p.drag_coefficient * p.frontal_area / (2.0 * p.mass);
    COAST_SPEED / (1.0 + k * COAST_SPEED * t)
}

fn integrator() -> (bool, String) {
    let start = Instant::now();
    let nominal = drag_only(VehicleParameters::nominal());
    let v = coast(&nominal, COAST_DT, COAST_HORIZON);
    let exact = coast_closed_form(&nominal, COAST_HORIZON);
    let rel = ((v - exact) / exact).abs();

    // At the nominal drag the truncation error at 1 ms is below rounding, so
    // the convergence order is measured on a body whose drag time constant is
    // comparable to the step.
    let mut heavy = nominal.clone();
    heavy.drag_coefficient *= 2000.0;
    let horizon = 1.0;
    let reference = coast(&heavy, COAST_DT / 64.0, horizon);
    let e1 = (coast(&heavy, COAST_DT, horizon) - reference).abs();
    let e2 = (coast(&heavy, COAST_DT / 2.0, horizon) - reference).abs();
    let ratio = e1 / e2;

    let elapsed = start.elapsed();
    let passed =
        rel <= COAST_TOL && ratio >= RICHARDSON_RANGE.0 && ratio <= RICHARDSON_RANGE.1 && elapsed < INTEGRATOR_BUDGET;
    (
        passed,
        format!(
            "coast rel. error {rel:.2e} (tol {COAST_TOL:e}); Richardson ratio {ratio:.2} \
             (errors {e1:.2e} / {e2:.2e}, accepted [{}, {}])",
            RICHARDSON_RANGE.0, RICHARDSON_RANGE.1
        ),
    )
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0)
}

fn symmetry() -> (bool, String) {
    let p = VehicleParameters::nominal();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5E77);
    let mut failures = 0;
    for _ in 0..SYMMETRY_SAMPLES {
        let vx: f64 = rng.gen_range(1.0..35.0);
        let state = VehicleState {
            x: rng.gen_range(-100.0..100.0),
            y: rng.gen_range(-100.0..100.0),
            heading: rng.gen_range(-PI..PI),
            vx,
            vy: rng.gen_range(-2.0..2.0),
            yaw_rate: rng.gen_range(-0.8..0.8),
            omega_front: vx / p.wheel_radius * rng.gen_range(0.85..1.15),
            omega_rear: vx / p.wheel_radius * rng.gen_range(0.85..1.15),
        };
        let inputs = PlantInputs {
            steer: rng.gen_range(-0.5..0.5),
            throttle: rng.gen_range(0.0..1.0),
            gear: rng.gen_range(0..p.gear_ratios.len()),
            ..Default::default()
        }
        .with_brake(&p, rng.gen_range(0.0..2000.0));
        let mirrored_state = VehicleState { vy: -state.vy, yaw_rate: -state.yaw_rate, ..state };
        let mirrored_inputs = PlantInputs { steer: -inputs.steer, ..inputs };

        let a = evaluate(&state, &inputs, &p).expect("evaluation").derivative;
        let b = evaluate(&mirrored_state, &mirrored_inputs, &p).expect("evaluation").derivative;
        let (ax_a, ay_a) = a.body_acceleration(&state);
        let (ax_b, ay_b) = b.body_acceleration(&mirrored_state);
        if !(close(ay_a, -ay_b) && close(a.yaw_rate, -b.yaw_rate) && close(ax_a, ax_b)) {
            failures += 1;
        }
    }
    (failures == 0, format!("{SYMMETRY_SAMPLES} states, {failures} violations (tol {SYMMETRY_TOL:e} relative)"))
}

fn dlc() -> (bool, String) {
    let start = Instant::now();
    let scenario = load_scenario(&data("scenarios/dlc_50kmh.ini")).expect("dlc scenario");
    let run = run_scenario(&scenario).expect("dlc run");
    let elapsed = start.elapsed();
    match &run.result.metrics {
        Metrics::DoubleLaneChange { dlc, .. } => (
            dlc.passed && dlc.completed && dlc.max_exceedance <= 0.0 && elapsed < DLC_BUDGET,
            format!(
                "ISO 3888-1 corridor at {:.1} km/h: exceedance {:.3} m, completed {}",
                scenario.ego.speed * 3.6,
                dlc.max_exceedance,
                dlc.completed
            ),
        ),
        other => (false, format!("unexpected metrics {other:?}")),
    }
}

fn cacc_pair() -> (CaccMetrics, CaccMetrics) {
    let path = data("scenarios/cacc_step.ini");
    let on = run_scenario(&load_scenario(&path).expect("scenario")).expect("run");
    let off_scenario =
        load_scenario_with(&path, &[("longitudinal".into(), "feedforward".into(), "0".into())]).expect("scenario");
    let off = run_scenario(&off_scenario).expect("run");
    (*cacc(&on.result.metrics), *cacc(&off.result.metrics))
}

fn cacc_feedforward(on: &CaccMetrics, off: &CaccMetrics, elapsed: Duration) -> (bool, String) {
    let settled = on.settling_time.is_some_and(|t| t <= SETTLE_LIMIT);
    let passed = settled
        && off.peak_delta_v >= on.peak_delta_v
        && off.peak_spacing_error >= on.peak_spacing_error
        && elapsed < CACC_BUDGET;
    (
        passed,
        format!(
            "settling {} (limit {SETTLE_LIMIT} s); peak |dv| off/on {:.3}/{:.3} m/s; \
             peak spacing error off/on {:.3}/{:.3} m",
            on.settling_time.map_or("never".to_string(), |t| format!("{t:.2} s")),
            off.peak_delta_v,
            on.peak_delta_v,
            off.peak_spacing_error,
            on.peak_spacing_error
        ),
    )
}

/// Returns the verdict and whether the clauses other than the spacing
/// comparison hold.
fn degradation(ideal: &CaccMetrics) -> ((bool, String), bool) {
    let scenario = load_scenario(&data("scenarios/cacc_step_degraded.ini")).expect("scenario");
    assert!(scenario.channel.latency == 0.2 && scenario.channel.loss == 0.2, "degraded link is 200 ms / 20 %");
    let run = run_scenario(&scenario).expect("run");
    let d = *cacc(&run.result.metrics);
    let converged = d.settling_time.is_some() && d.final_delta_v.abs() < 0.2;
    let fallback = d.stale_fallbacks > 0;
    let worse = d.peak_spacing_error > ideal.peak_spacing_error;
    (
        (
            converged && fallback && worse,
            format!(
                "converged {converged} (settling {}), stale fallbacks {}, dropped {}/{}; \
                 peak spacing error degraded/ideal {:.3}/{:.3} m",
                d.settling_time.map_or("never".to_string(), |t| format!("{t:.2} s")),
                d.stale_fallbacks,
                d.comms.dropped,
                d.comms.sent,
                d.peak_spacing_error,
                ideal.peak_spacing_error
            ),
        ),
        converged && fallback,
    )
}

fn gps() -> (bool, String) {
    let params = NoiseModelParams::default();
    let truth = VehicleState::default();
    let fixes = |params: &NoiseModelParams| {
        let mut model = GpsModel::new(params);
        (0..GPS_FIXES).map(|i| model.gps_model(&truth, params, i as f64 / params.gps_rate)).collect::<Vec<_>>()
    };
    let a = fixes(&params);
    let b = fixes(&params);
    let identical = a.iter().zip(&b).all(|(p, q)| {
        p.x.to_bits() == q.x.to_bits() && p.y.to_bits() == q.y.to_bits() && p.heading.to_bits() == q.heading.to_bits()
    });
    let mut errors: Vec<f64> = a.iter().map(|f| f.x.hypot(f.y)).collect();
    errors.sort_by(f64::total_cmp);
    let q = errors[((GPS_QUANTILE * GPS_FIXES as f64).ceil() as usize).min(GPS_FIXES) - 1];
    (
        q <= GPS_LIMIT && identical,
        format!(
            "{GPS_FIXES} fixes: 99th percentile error {q:.3} m (limit {GPS_LIMIT} m), max {:.3} m; \
             same-seed identical {identical}",
            errors[GPS_FIXES - 1]
        ),
    )
}

fn message() -> impl Strategy<Value = V2VMessage> {
    (-20.0..20.0f64, -90.0..=90.0f64, -180.0..=180.0f64, 0.0..1e6f64, any::<u64>()).prop_map(
        |(acceleration, latitude, longitude, timestamp, sender)| V2VMessage {
            acceleration,
            latitude,
            longitude,
            timestamp,
            sender,
        },
    )
}

fn codec() -> (bool, String) {
    let mapping = CanMapping::parse(&std::fs::read_to_string(data("can_map.txt")).expect("can map")).expect("can map");
    let mut runner = TestRunner::new(Config { cases: CODEC_CASES, failure_persistence: None, ..Config::default() });
    let result = runner.run(&message(), |msg| {
        let packages = encode_v2v(&msg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let mut received = Vec::new();
        for pkg in &packages {
            let datagram = pkg.to_datagram();
            prop_assert_eq!(datagram.len(), DATAGRAM_LEN);
            let udp = UdpPackage::from_datagram(&datagram).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let frame = udp_to_can(&udp, &mapping).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(frame.data(), &datagram[1..]);
            prop_assert_eq!(usize::from(frame.dlc()) + 1, DATAGRAM_LEN);
            received.push(can_to_udp(&frame, &mapping).map_err(|e| TestCaseError::fail(e.to_string()))?);
        }
        prop_assert_eq!(&received, &packages);
        let decoded = decode_v2v(&received).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(decoded.message(), Some(&msg));
        Ok(())
    });
    match result {
        Ok(()) => (true, format!("{CODEC_CASES} random messages, 0 failures")),
        Err(e) => (false, format!("failure: {e}")),
    }
}

/// Circular mean as the bisector of the short arc from `a` to `b`.
fn bisector(a: f64, b: f64) -> f64 {
    wrap_angle(a + 0.5 * wrap_angle(b - a))
}

fn fusion() -> (bool, String) {
    let fixed = [(350f64, 10f64, 0f64), (10.0, 350.0, 0.0), (170.0, -170.0, 180.0), (90.0, 0.0, 45.0)];
    let fixed_ok = fixed.iter().all(|&(a, b, want)| {
        let got = heading_fusion(a.to_radians(), b.to_radians()).heading;
        wrap_angle(got - want.to_radians()).abs() <= FUSION_TOL
    });
    let mut runner = TestRunner::new(Config { cases: FUSION_CASES, failure_persistence: None, ..Config::default() });
    let result = runner.run(&(-4.0 * PI..4.0 * PI, -4.0 * PI..4.0 * PI), |(a, b)| {
        prop_assume!(wrap_angle(b - a).abs() < PI - ANTIPODAL_MARGIN);
        let fused = heading_fusion(a, b);
        prop_assert!(!fused.degenerate);
        let err = wrap_angle(fused.heading - bisector(a, b)).abs();
        prop_assert!(err <= FUSION_TOL, "({a}, {b}): off by {err}");
        Ok(())
    });
    match (result, fixed_ok) {
        (Ok(()), true) => (true, format!("{FUSION_CASES} random pairs and wrap cases within {FUSION_TOL:e} rad")),
        (Ok(()), false) => (false, "wrap cases disagree with the circular mean".into()),
        (Err(e), _) => (false, format!("failure: {e}")),
    }
}

fn determinism() -> (bool, String) {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut scenarios: Vec<PathBuf> = std::fs::read_dir(data("scenarios"))
        .expect("scenario dir")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "ini"))
        .collect();
    scenarios.sort();
    let mut mismatched = Vec::new();
    for path in &scenarios {
        let scenario = load_scenario(path).expect("scenario");
        let mut outputs = Vec::new();
        for attempt in 0..2 {
            let out = dir.path().join(format!("{}_{attempt}", scenario.name));
            let run = run_scenario(&scenario).expect("run");
            let files = emit_outputs(&out, &run.trace, &run.result, &scenario.output, scenario.corridor.as_ref())
                .expect("outputs");
            let read = |p: Option<PathBuf>| p.map(|p| std::fs::read(p).expect("read back"));
            outputs.push((read(files.csv), read(files.metrics)));
        }
        if outputs[0] != outputs[1] || outputs[0].0.is_none() || outputs[0].1.is_none() {
            mismatched.push(scenario.name.clone());
        }
    }
    (
        mismatched.is_empty(),
        format!("{} scenarios run twice, byte-identical CSV and metrics; mismatches: {mismatched:?}", scenarios.len()),
    )
}

fn main() -> ExitCode {
    let mut verdicts = vec![
        criterion("dugoff", dugoff),
        criterion("integrator", integrator),
        criterion("plant symmetry", symmetry),
        criterion("double lane change", dlc),
    ];

    let mut ideal = None;
    verdicts.push(criterion("cacc feedforward", || {
        let start = Instant::now();
        let (on, off) = cacc_pair();
        let verdict = cacc_feedforward(&on, &off, start.elapsed());
        ideal = Some(on);
        verdict
    }));
    let ideal = ideal.expect("ideal-channel run");

    let mut degradation_clauses = false;
    verdicts.push(criterion("channel degradation", || {
        let (verdict, clauses) = degradation(&ideal);
        degradation_clauses = clauses;
        verdict
    }));

    verdicts.push(criterion("gps bound", gps));
    verdicts.push(criterion("codec and bridge", codec));
    verdicts.push(criterion("heading fusion", fusion));
    verdicts.push(criterion("determinism", determinism));

    let passed = verdicts.iter().filter(|v| v.passed).count();
    println!("{passed}/{} criteria passed", verdicts.len());

    let unexpected: Vec<&str> =
        verdicts.iter().filter(|v| !v.passed && !KNOWN_FAILURES.contains(&v.name)).map(|v| v.name).collect();
    let mut ok = unexpected.is_empty();
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
    }
    for v in verdicts.iter().filter(|v| KNOWN_FAILURES.contains(&v.name)) {
        if v.passed {
            println!("note: `{}` is listed as a known failure but passed", v.name);
        }
    }
    if !degradation_clauses {
        println!("channel degradation: convergence or stale-fallback clause failed");
        ok = false;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
