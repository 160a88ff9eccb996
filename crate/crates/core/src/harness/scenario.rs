//! Scenario files: flat sectioned `key = value` text, every key checked.
//!
//! ```text
//! [scenario]   name, kind, duration, seed, grade, plant_dt, control_dt,
//!              origin_lat, origin_lon
//! [ego]        params, speed, x, y, heading
//! [lead]       params, speed_profile, gap, sender_id          (cacc-follow)
//! [longitudinal] cc_kp, cc_ki, acc_kp, acc_kd, standstill, headway,
//!              feedforward, a_min, a_max, stale_timeout
//! [path]       waypoints, format, switch_radius, speed, kp, ki, kd, steer_limit
//! [obstacles]  points, speed_threshold, corridor_length, corridor_half_width,
//!              side_length, side_distance, gain, max_correction
//! [sensing]    noise model fields and sample rates
//! [channel]    latency, jitter, loss, can_map
//! [replay]     throttle, brake, steer                          (open-loop-replay)
//! [dlc]        corridor, start                                 (double-lane-change)
//! [output]     csv, metrics, plots
//! ```
//!
//! Relative file references resolve against the scenario file's directory.

use std::path::{Path, PathBuf};

use crate::comms::{CanMapping, ChannelParams};
use crate::config::{ConfigError, Document, Fields};
use crate::guidance::{LongitudinalGains, ObstacleConfig, PathFollowerGains};
use crate::params::VehicleConfig;
use crate::sensing::NoiseModelParams;

use super::corridor::DlcCorridor;
use super::geo::{read_waypoints, WaypointFormat};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    DoubleLaneChange,
    CaccFollow,
    WaypointFollow,
    OpenLoopReplay,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::DoubleLaneChange,
        ScenarioKind::CaccFollow,
        ScenarioKind::WaypointFollow,
        ScenarioKind::OpenLoopReplay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::DoubleLaneChange => "double-lane-change",
            ScenarioKind::CaccFollow => "cacc-follow",
            ScenarioKind::WaypointFollow => "waypoint-follow",
            ScenarioKind::OpenLoopReplay => "open-loop-replay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    fn uses_path(self) -> bool {
        matches!(self, ScenarioKind::DoubleLaneChange | ScenarioKind::WaypointFollow)
    }
}

/// Piecewise-linear time series, held constant beyond its end points.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile(Vec<(f64, f64)>);

impl Profile {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, String> {
        if points.is_empty() {
            return Err("profile needs at least one point".into());
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err("profile times must be strictly increasing".into());
        }
        Ok(Profile(points))
    }

    pub fn constant(v: f64) -> Self {
        Profile(vec![(0.0, v)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn at(&self, t: f64) -> f64 {
        let p = &self.0;
        if t <= p[0].0 {
            return p[0].1;
        }
        for w in p.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        p[p.len() - 1].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub plant_dt: f64,
    pub control_dt: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing { plant_dt: 0.001, control_dt: 0.01 }
    }
}

impl Timing {
    /// Plant steps per control period.
    pub fn ratio(&self) -> usize {
        (self.control_dt / self.plant_dt).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct EgoSpec {
    pub config: VehicleConfig,
    pub speed: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone)]
pub struct LeadSpec {
    pub config: VehicleConfig,
    /// Reference speed for the lead's cruise controller; the lead starts at
    /// its value at t = 0.
    pub speed_profile: Profile,
    /// Initial bumper-to-bumper gap (m); defaults to the desired spacing.
    pub gap: Option<f64>,
    pub sender_id: u64,
}

#[derive(Debug, Clone)]
pub struct PathSpec {
    pub waypoints: Vec<(f64, f64)>,
    pub switch_radius: f64,
    /// Cruise speed along the path (m/s).
    pub speed: f64,
    pub gains: PathFollowerGains,
    /// World-frame obstacle points seen by the lidar.
    pub obstacles: Vec<(f64, f64)>,
    pub obstacle: ObstacleConfig,
}

#[derive(Debug, Clone)]
pub struct ReplaySpec {
    pub throttle: Profile,
    /// Brake duty (%).
    pub brake: Profile,
    /// Road-wheel angle target (rad) for the steering servo.
    pub steer: Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputOptions {
    pub csv: bool,
    pub metrics: bool,
    pub plots: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions { csv: true, metrics: true, plots: true }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub duration: f64,
    pub seed: u64,
    /// Road grade (rad), positive uphill.
    pub grade: f64,
    pub timing: Timing,
    /// Geodetic reference of the local frame, used for V2V positions.
    pub origin: (f64, f64),
    pub ego: EgoSpec,
    pub lead: Option<LeadSpec>,
    pub longitudinal: LongitudinalGains,
    pub stale_timeout: f64,
    pub path: Option<PathSpec>,
    pub replay: Option<ReplaySpec>,
    pub corridor: Option<DlcCorridor>,
    /// Noise model; its seed is derived from [`Scenario::seed`].
    pub noise: NoiseModelParams,
    /// Link impairments; its seed is derived from [`Scenario::seed`].
    pub channel: ChannelParams,
    pub can_mapping: CanMapping,
    pub output: OutputOptions,
}

impl Scenario {
    /// Replaces the seed and every seed derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.noise.seed = seed;
        self.channel.seed = seed ^ 0x5EED_C4A7;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Invalid(format!("scenario `{}`: {m}", self.name)));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be > 0".into());
        }
        let Timing { plant_dt, control_dt } = self.timing;
        if !(plant_dt > 0.0 && plant_dt <= crate::dynamics::MAX_STEP) {
            return bad(format!("plant_dt must lie in (0, {}]", crate::dynamics::MAX_STEP));
        }
        let ratio = control_dt / plant_dt;
        if !(ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9) {
            return bad("control_dt must be a whole multiple of plant_dt".into());
        }
        if !(self.grade.abs() < 0.5) {
            return bad("grade must lie in (-0.5, 0.5) rad".into());
        }
        if !(self.ego.speed >= 0.0) {
            return bad("ego speed must be >= 0".into());
        }
        if !(self.stale_timeout > 0.0) {
            return bad("stale_timeout must be > 0".into());
        }
        self.longitudinal.validate().or_else(bad)?;
        self.noise.validate().or_else(bad)?;
        self.channel.validate().or_else(bad)?;
        self.ego.config.vehicle.validate().or_else(bad)?;
        self.ego.config.actuation.validate().or_else(bad)?;
        if let Some(lead) = &self.lead {
            lead.config.vehicle.validate().or_else(bad)?;
            if lead.speed_profile.points().iter().any(|(_, v)| *v < 0.0) {
                return bad("lead speed profile must be >= 0".into());
            }
            if lead.gap.is_some_and(|g| !(g > 0.0)) {
                return bad("lead gap must be > 0".into());
            }
        }
        if let Some(path) = &self.path {
            if !(path.speed >= 0.0) {
                return bad("path speed must be >= 0".into());
            }
            if !(path.gains.steer_limit > 0.0) {
                return bad("steer_limit must be > 0".into());
            }
        }
        if let Some(c) = &self.corridor {
            c.validate().or_else(bad)?;
        }
        match self.kind {
            ScenarioKind::CaccFollow if self.lead.is_none() => bad("cacc-follow needs a [lead] section".into()),
            ScenarioKind::DoubleLaneChange | ScenarioKind::WaypointFollow if self.path.is_none() => {
                bad(format!("{} needs waypoints", self.kind.as_str()))
            }
            ScenarioKind::DoubleLaneChange if self.corridor.is_none() => {
                bad("double-lane-change needs a corridor".into())
            }
            _ => Ok(()),
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, HarnessError> {
    load_scenario_with(path, &[])
}

/// Loads a scenario with `(section, key, value)` overrides applied to the
/// file text before validation.
pub fn load_scenario_with(path: &Path, overrides: &[(String, String, String)]) -> Result<Scenario, HarnessError> {
    let mut doc = Document::read(path)?;
    for (section, key, value) in overrides {
        doc.set(section, key, value);
    }
    let scenario = from_document(doc)?;
    scenario.validate()?;
    Ok(scenario)
}

/// Parses scenario text that refers to no other files: the nominal vehicle,
/// the default CAN mapping and the built-in corridor are used. `origin` names
/// the text in error messages.
pub fn parse_scenario(
    text: &str,
    origin: &str,
    overrides: &[(String, String, String)],
) -> Result<Scenario, HarnessError> {
    let mut doc = Document::parse(text, origin, Path::new(""))?;
    for (section, key, value) in overrides {
        doc.set(section, key, value);
    }
    let scenario = from_document(doc)?;
    scenario.validate()?;
    Ok(scenario)
}

fn resolve(doc_base: &Path, origin: &str, rel: &str) -> Result<PathBuf, ConfigError> {
    let p = doc_base.join(rel);
    if !p.exists() {
        return Err(ConfigError::DanglingReference { path: origin.to_string(), target: p.display().to_string() });
    }
    Ok(p)
}

fn vehicle(f: &mut Fields, base: &Path, origin: &str) -> Result<VehicleConfig, HarnessError> {
    match f.string("params") {
        None => Ok(VehicleConfig::nominal()),
        Some(rel) => Ok(VehicleConfig::load(&resolve(base, origin, &rel)?)?),
    }
}

fn profile(f: &mut Fields, key: &str) -> Result<Option<Profile>, HarnessError> {
    match f.series(key)? {
        None => Ok(None),
        Some(points) => Profile::new(points).map(Some).map_err(|m| f.reject(key, m).into()),
    }
}

fn section_forbidden(doc: &mut Document, name: &str, kind: ScenarioKind) -> Result<(), HarnessError> {
    match doc.take(name) {
        Some(_) => Err(HarnessError::Invalid(format!(
            "{}: section [{name}] is not used by kind {}",
            doc.origin(),
            kind.as_str()
        ))),
        None => Ok(()),
    }
}

fn from_document(mut doc: Document) -> Result<Scenario, HarnessError> {
    let base = doc.base_dir().to_path_buf();
    let origin = doc.origin().to_string();

    let root = doc.take("").expect("root section always exists");
    root.finish()?;

    let mut s = doc.take("scenario").ok_or_else(|| ConfigError::Missing {
        path: origin.clone(),
        section: "scenario".into(),
        key: "kind".into(),
    })?;
    let kind_str = s.string("kind").ok_or_else(|| s.missing("kind"))?;
    let kind = ScenarioKind::parse(&kind_str).ok_or_else(|| {
        s.reject(
            "kind",
            format!("`{kind_str}` is not one of {}", ScenarioKind::ALL.map(ScenarioKind::as_str).join(", ")),
        )
    })?;
    let name = s.string("name").unwrap_or_else(|| {
        Path::new(&origin).file_stem().map_or_else(|| kind.as_str().to_string(), |n| n.to_string_lossy().into_owned())
    });
    let duration = s.req_f64("duration")?;
    let seed = s.u64("seed")?.unwrap_or(1);
    let grade = s.f64_or("grade", 0.0)?;
    let defaults = Timing::default();
    let timing = Timing {
        plant_dt: s.f64_or("plant_dt", defaults.plant_dt)?,
        control_dt: s.f64_or("control_dt", defaults.control_dt)?,
    };
    let origin_ll = (s.f64_or("origin_lat", 0.0)?, s.f64_or("origin_lon", 0.0)?);
    s.finish()?;

    let ego = match doc.take("ego") {
        None => EgoSpec { config: VehicleConfig::nominal(), speed: 0.0, x: 0.0, y: 0.0, heading: 0.0 },
        Some(mut f) => {
            let e = EgoSpec {
                config: vehicle(&mut f, &base, &origin)?,
                speed: f.f64_or("speed", 0.0)?,
                x: f.f64_or("x", 0.0)?,
                y: f.f64_or("y", 0.0)?,
                heading: f.f64_or("heading", 0.0)?,
            };
            f.finish()?;
            e
        }
    };

    let lead = if kind == ScenarioKind::CaccFollow {
        match doc.take("lead") {
            None => None,
            Some(mut f) => {
                let l = LeadSpec {
                    config: vehicle(&mut f, &base, &origin)?,
                    speed_profile: profile(&mut f, "speed_profile")?.ok_or_else(|| f.missing("speed_profile"))?,
                    gap: f.f64("gap")?,
                    sender_id: f.u64("sender_id")?.unwrap_or(2),
                };
                f.finish()?;
                Some(l)
            }
        }
    } else {
        section_forbidden(&mut doc, "lead", kind)?;
        None
    };

    let lg = LongitudinalGains::default();
    let (longitudinal, stale_timeout) = match doc.take("longitudinal") {
        None => (lg, 0.5),
        Some(mut f) => {
            let g = LongitudinalGains {
                cc_kp: f.f64_or("cc_kp", lg.cc_kp)?,
                cc_ki: f.f64_or("cc_ki", lg.cc_ki)?,
                acc_kp: f.f64_or("acc_kp", lg.acc_kp)?,
                acc_kd: f.f64_or("acc_kd", lg.acc_kd)?,
                standstill: f.f64_or("standstill", lg.standstill)?,
                headway: f.f64_or("headway", lg.headway)?,
                feedforward: f.f64_or("feedforward", lg.feedforward)?,
                a_min: f.f64_or("a_min", lg.a_min)?,
                a_max: f.f64_or("a_max", lg.a_max)?,
            };
            let stale = f.f64_or("stale_timeout", 0.5)?;
            f.finish()?;
            (g, stale)
        }
    };

    let corridor = if kind == ScenarioKind::DoubleLaneChange {
        let (file, start) = match doc.take("dlc") {
            None => (None, 30.0),
            Some(mut f) => {
                let file = f.string("corridor");
                let start = f.f64_or("start", 30.0)?;
                f.finish()?;
                (file, start)
            }
        };
        Some(match file {
            None => DlcCorridor::iso3888(ego.config.vehicle.width, start),
            Some(rel) => DlcCorridor::read(&resolve(&base, &origin, &rel)?, start)?,
        })
    } else {
        section_forbidden(&mut doc, "dlc", kind)?;
        None
    };

    let path = if kind.uses_path() {
        let pg = PathFollowerGains::default();
        let mut f = doc.take("path");
        let mut waypoints = None;
        let mut spec = PathSpec {
            waypoints: Vec::new(),
            switch_radius: 3.0,
            speed: if kind == ScenarioKind::DoubleLaneChange { 50.0 / 3.6 } else { 5.0 },
            gains: pg,
            obstacles: Vec::new(),
            obstacle: ObstacleConfig::default(),
        };
        if let Some(f) = f.as_mut() {
            let format = match f.string("format") {
                None => WaypointFormat::Local,
                Some(v) => {
                    WaypointFormat::parse(&v).ok_or_else(|| f.reject("format", format!("`{v}` is not local|latlon")))?
                }
            };
            if let Some(rel) = f.string("waypoints") {
                waypoints = Some(read_waypoints(&resolve(&base, &origin, &rel)?, format)?);
            }
            spec.switch_radius = f.f64_or("switch_radius", spec.switch_radius)?;
            spec.speed = f.f64_or("speed", spec.speed)?;
            spec.gains = PathFollowerGains {
                kp: f.f64_or("kp", pg.kp)?,
                ki: f.f64_or("ki", pg.ki)?,
                kd: f.f64_or("kd", pg.kd)?,
                steer_limit: f.f64_or("steer_limit", pg.steer_limit)?,
            };
        }
        if let Some(f) = f {
            f.finish()?;
        }
        spec.waypoints = match (waypoints, &corridor) {
            (Some(w), _) => w,
            (None, Some(c)) => c.centerline(c.start - ego.x, 30.0, 1.0),
            (None, None) => {
                return Err(
                    ConfigError::Missing { path: origin, section: "path".into(), key: "waypoints".into() }.into()
                )
            }
        };
        if let Some(mut f) = doc.take("obstacles") {
            let o = ObstacleConfig::default();
            spec.obstacles = f.series("points")?.unwrap_or_default();
            spec.obstacle = ObstacleConfig {
                speed_threshold: f.f64_or("speed_threshold", o.speed_threshold)?,
                corridor_length: f.f64_or("corridor_length", o.corridor_length)?,
                corridor_half_width: f.f64_or("corridor_half_width", o.corridor_half_width)?,
                side_length: f.f64_or("side_length", o.side_length)?,
                side_distance: f.f64_or("side_distance", o.side_distance)?,
                gain: f.f64_or("gain", o.gain)?,
                max_correction: f.f64_or("max_correction", o.max_correction)?,
            };
            f.finish()?;
        }
        Some(spec)
    } else {
        section_forbidden(&mut doc, "path", kind)?;
        section_forbidden(&mut doc, "obstacles", kind)?;
        None
    };

    let replay = if kind == ScenarioKind::OpenLoopReplay {
        let mut r = ReplaySpec {
            throttle: Profile::constant(0.0),
            brake: Profile::constant(0.0),
            steer: Profile::constant(0.0),
        };
        if let Some(mut f) = doc.take("replay") {
            if let Some(p) = profile(&mut f, "throttle")? {
                r.throttle = p;
            }
            if let Some(p) = profile(&mut f, "brake")? {
                r.brake = p;
            }
            if let Some(p) = profile(&mut f, "steer")? {
                r.steer = p;
            }
            f.finish()?;
        }
        Some(r)
    } else {
        section_forbidden(&mut doc, "replay", kind)?;
        None
    };

    let d = NoiseModelParams::default();
    let noise = match doc.take("sensing") {
        None => d,
        Some(mut f) => {
            let n = NoiseModelParams {
                gps_error_bound: f.f64_or("gps_error_bound", d.gps_error_bound)?,
                gps_correlation_time: f.f64_or("gps_correlation_time", d.gps_correlation_time)?,
                gps_heading_sigma: f.f64_or("gps_heading_sigma", d.gps_heading_sigma)?,
                gps_speed_sigma: f.f64_or("gps_speed_sigma", d.gps_speed_sigma)?,
                compass_bias: f.f64_or("compass_bias", d.compass_bias)?,
                compass_sigma: f.f64_or("compass_sigma", d.compass_sigma)?,
                compass_burst_probability: f.f64_or("compass_burst_probability", d.compass_burst_probability)?,
                compass_burst_magnitude: f.f64_or("compass_burst_magnitude", d.compass_burst_magnitude)?,
                radar_range_sigma: f.f64_or("radar_range_sigma", d.radar_range_sigma)?,
                radar_rate_sigma: f.f64_or("radar_rate_sigma", d.radar_rate_sigma)?,
                radar_max_range: f.f64_or("radar_max_range", d.radar_max_range)?,
                radar_fov: f.f64_or("radar_fov", d.radar_fov)?,
                lidar_range: f.f64_or("lidar_range", d.lidar_range)?,
                lidar_fov: f.f64_or("lidar_fov", d.lidar_fov)?,
                lidar_sigma: f.f64_or("lidar_sigma", d.lidar_sigma)?,
                gps_rate: f.f64_or("gps_rate", d.gps_rate)?,
                compass_rate: f.f64_or("compass_rate", d.compass_rate)?,
                radar_rate: f.f64_or("radar_rate", d.radar_rate)?,
                lidar_rate: f.f64_or("lidar_rate", d.lidar_rate)?,
                seed: d.seed,
            };
            f.finish()?;
            n
        }
    };

    let (channel, can_mapping) = match doc.take("channel") {
        None => (ChannelParams::ideal(), CanMapping::default()),
        Some(mut f) => {
            let c = ChannelParams {
                latency: f.f64_or("latency", 0.0)?,
                jitter: f.f64_or("jitter", 0.0)?,
                loss: f.f64_or("loss", 0.0)?,
                seed: 0,
            };
            let mapping = match f.string("can_map") {
                None => CanMapping::default(),
                Some(rel) => {
                    let p = resolve(&base, &origin, &rel)?;
                    let text = std::fs::read_to_string(&p).map_err(|e| HarnessError::io(&p, e))?;
                    CanMapping::parse(&text)?
                }
            };
            f.finish()?;
            (c, mapping)
        }
    };

    let output = match doc.take("output") {
        None => OutputOptions::default(),
        Some(mut f) => {
            let d = OutputOptions::default();
            let o = OutputOptions {
                csv: f.bool("csv")?.unwrap_or(d.csv),
                metrics: f.bool("metrics")?.unwrap_or(d.metrics),
                plots: f.bool("plots")?.unwrap_or(d.plots),
            };
            f.finish()?;
            o
        }
    };

    doc.finish()?;

    Ok(Scenario {
        name,
        kind,
        duration,
        seed,
        grade,
        timing,
        origin: origin_ll,
        ego,
        lead,
        longitudinal,
        stale_timeout,
        path,
        replay,
        corridor,
        noise,
        channel,
        can_mapping,
        output,
    }
    .with_seed(seed))
}
