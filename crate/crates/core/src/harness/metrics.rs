use serde::Serialize;

use super::scenario::Scenario;
use super::{DlcResult, HarnessError, Trace};

/// |delta v| below which the follower counts as settled (m/s).
pub const SETTLE_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CommsCounters {
    pub sent: u64,
    pub dropped: u64,
    pub delivered: u64,
    pub decoded: u64,
    pub decode_failures: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaccMetrics {
    pub peak_delta_v: f64,
    /// From the first to the last sample with |delta v| at or above the
    /// threshold; `None` if still unsettled at the end of the trace.
    pub settling_time: Option<f64>,
    pub peak_spacing_error: f64,
    pub rms_spacing_error: f64,
    pub final_delta_v: f64,
    /// Control periods that ran without a fresh V2V acceleration.
    pub stale_fallbacks: u64,
    pub min_range: f64,
    pub comms: CommsCounters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathMetrics {
    pub completed: bool,
    pub completion_time: Option<f64>,
    pub max_cross_track: f64,
    pub rms_cross_track: f64,
    pub max_lateral_accel: f64,
    pub max_yaw_rate: f64,
    pub max_steer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplayMetrics {
    pub final_speed: f64,
    pub distance: f64,
    pub max_speed: f64,
    pub max_lateral_accel: f64,
    pub max_yaw_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Metrics {
    Cacc(CaccMetrics),
    DoubleLaneChange { dlc: DlcResult, path: PathMetrics },
    Path(PathMetrics),
    Replay(ReplayMetrics),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub scenario: String,
    pub kind: &'static str,
    pub seed: u64,
    pub duration: f64,
    pub passed: bool,
    pub metrics: Metrics,
}

impl RunResult {
    pub(crate) fn new(sc: &Scenario, metrics: Metrics) -> Self {
        let passed = match &metrics {
            Metrics::Cacc(m) => m.settling_time.is_some() && m.min_range > 0.0,
            Metrics::DoubleLaneChange { dlc, .. } => dlc.passed,
            Metrics::Path(p) => p.completed,
            Metrics::Replay(_) => true,
        };
        RunResult {
            scenario: sc.name.clone(),
            kind: sc.kind.as_str(),
            seed: sc.seed,
            duration: sc.duration,
            passed,
            metrics,
        }
    }
}

fn peak_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Settling time of `|y| < threshold` measured from its first violation.
pub fn settling_time(t: &[f64], y: &[f64], threshold: f64) -> Option<f64> {
    let first = y.iter().position(|v| v.abs() >= threshold);
    let Some(first) = first else { return Some(0.0) };
    let last = y.iter().rposition(|v| v.abs() >= threshold).expect("first exists");
    if last + 1 == y.len() {
        return None;
    }
    Some(t[last] - t[first])
}

/// Follower metrics from the `delta_v` and `spacing_error` columns. Run
/// counters (fallbacks, link statistics) are filled in by the runner.
pub fn cacc_metrics(trace: &Trace) -> Result<CaccMetrics, HarnessError> {
    let t = trace.column("t")?;
    let dv = trace.column("delta_v")?;
    let e = trace.column("spacing_error")?;
    let min_range = if trace.has("range") {
        trace.column("range")?.into_iter().fold(f64::INFINITY, f64::min)
    } else {
        f64::INFINITY
    };
    Ok(CaccMetrics {
        peak_delta_v: peak_abs(&dv),
        settling_time: settling_time(&t, &dv, SETTLE_THRESHOLD),
        peak_spacing_error: peak_abs(&e),
        rms_spacing_error: rms(&e),
        final_delta_v: dv.last().copied().unwrap_or(0.0),
        stale_fallbacks: 0,
        min_range,
        comms: CommsCounters::default(),
    })
}

pub fn path_metrics(trace: &Trace, completion_time: Option<f64>) -> Result<PathMetrics, HarnessError> {
    let xt = trace.column("cross_track")?;
    Ok(PathMetrics {
        completed: completion_time.is_some(),
        completion_time,
        max_cross_track: peak_abs(&xt),
        rms_cross_track: rms(&xt),
        max_lateral_accel: peak_abs(&trace.column("ay")?),
        max_yaw_rate: peak_abs(&trace.column("yaw_rate")?),
        max_steer: peak_abs(&trace.column("steer")?),
    })
}

pub fn replay_metrics(trace: &Trace) -> Result<ReplayMetrics, HarnessError> {
    let x = trace.column("x")?;
    let y = trace.column("y")?;
    let vx = trace.column("vx")?;
    let distance = x.windows(2).zip(y.windows(2)).map(|(a, b)| (a[1] - a[0]).hypot(b[1] - b[0])).sum();
    Ok(ReplayMetrics {
        final_speed: vx.last().copied().unwrap_or(0.0),
        distance,
        max_speed: peak_abs(&vx),
        max_lateral_accel: peak_abs(&trace.column("ay")?),
        max_yaw_rate: peak_abs(&trace.column("yaw_rate")?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn follow_trace(dv: impl Fn(f64) -> f64, e: impl Fn(f64) -> f64) -> Trace {
        let mut tr = Trace::new(["t", "delta_v", "spacing_error"]);
        for i in 0..3000 {
            let t = i as f64 * 0.01;
            tr.push(vec![t, dv(t), e(t)]);
        }
        tr
    }

    #[test]
    fn identical_vehicles_all_zero() {
        let m = cacc_metrics(&follow_trace(|_| 0.0, |_| 0.0)).unwrap();
        assert_eq!(m.peak_delta_v, 0.0);
        assert_eq!(m.settling_time, Some(0.0));
        assert_eq!(m.peak_spacing_error, 0.0);
        assert_eq!(m.rms_spacing_error, 0.0);
    }

    #[test]
    fn exponential_decay_settling() {
        let step = 3.0;
        let tau = 2.0;
        let m = cacc_metrics(&follow_trace(|t| step * (-t / tau).exp(), |_| 0.0)).unwrap();
        let expected = tau * (step / 0.2f64).ln();
        assert!((m.settling_time.unwrap() - expected).abs() <= 0.01, "{:?} vs {expected}", m.settling_time);
        assert_eq!(m.peak_delta_v, step);
    }

    #[test]
    fn unsettled_is_none() {
        let m = cacc_metrics(&follow_trace(|_| 1.0, |_| 0.0)).unwrap();
        assert_eq!(m.settling_time, None);
    }

    #[test]
    fn rms_of_constant() {
        let m = cacc_metrics(&follow_trace(|_| 0.0, |_| -2.0)).unwrap();
        assert!((m.rms_spacing_error - 2.0).abs() < 1e-12);
        assert_eq!(m.peak_spacing_error, 2.0);
    }
}
