//! Simulated sensor suite: GPS with correlated meter-level error, digital
//! compass, compass/GPS heading fusion, forward radar and lidar.
//!
//! Every model owns a seeded ChaCha stream, so a sensor trace is a pure
//! function of the seed and the truth trace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::VehicleState;
use crate::guidance::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModelParams {
    /// Bound on GPS position error magnitude (m): the 99 % quantile of the
    /// stationary error, and a hard clip on the reported offset.
    pub gps_error_bound: f64,
    pub gps_correlation_time: f64,
    pub gps_heading_sigma: f64,
    pub gps_speed_sigma: f64,
    pub compass_bias: f64,
    pub compass_sigma: f64,
    /// Per-sample probability of a magnetic interference burst.
    pub compass_burst_probability: f64,
    pub compass_burst_magnitude: f64,
    pub radar_range_sigma: f64,
    pub radar_rate_sigma: f64,
    pub radar_max_range: f64,
    /// Full horizontal field of view (rad).
    pub radar_fov: f64,
    pub lidar_range: f64,
    pub lidar_fov: f64,
    pub lidar_sigma: f64,
    pub gps_rate: f64,
    pub compass_rate: f64,
    pub radar_rate: f64,
    pub lidar_rate: f64,
    pub seed: u64,
}

impl Default for NoiseModelParams {
    fn default() -> Self {
        NoiseModelParams {
            gps_error_bound: 1.5,
            gps_correlation_time: 60.0,
            gps_heading_sigma: 0.01,
            gps_speed_sigma: 0.05,
            compass_bias: 0.0,
            compass_sigma: 0.01,
            compass_burst_probability: 0.0,
            compass_burst_magnitude: 0.2,
            radar_range_sigma: 0.1,
            radar_rate_sigma: 0.05,
            radar_max_range: 150.0,
            radar_fov: 0.35,
            lidar_range: 50.0,
            lidar_fov: 1.9,
            lidar_sigma: 0.03,
            gps_rate: 10.0,
            compass_rate: 50.0,
            radar_rate: 20.0,
            lidar_rate: 12.5,
            seed: 1,
        }
    }
}

impl NoiseModelParams {
    /// All noise switched off; rates and geometry unchanged.
    pub fn noiseless(self) -> Self {
        NoiseModelParams {
            gps_error_bound: 0.0,
            gps_heading_sigma: 0.0,
            gps_speed_sigma: 0.0,
            compass_bias: 0.0,
            compass_sigma: 0.0,
            compass_burst_probability: 0.0,
            radar_range_sigma: 0.0,
            radar_rate_sigma: 0.0,
            lidar_sigma: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let non_negative = [
            self.gps_error_bound,
            self.gps_heading_sigma,
            self.gps_speed_sigma,
            self.compass_sigma,
            self.compass_burst_magnitude,
            self.radar_range_sigma,
            self.radar_rate_sigma,
            self.lidar_sigma,
        ];
        if non_negative.iter().any(|v| !(*v >= 0.0)) {
            return Err("noise magnitudes must be >= 0".into());
        }
        let positive = [
            self.gps_correlation_time,
            self.radar_max_range,
            self.radar_fov,
            self.lidar_range,
            self.lidar_fov,
            self.gps_rate,
            self.compass_rate,
            self.radar_rate,
            self.lidar_rate,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err("ranges, fields of view, correlation time and rates must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.compass_burst_probability) {
            return Err("burst probability must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Per-axis stationary standard deviation putting the 99 % quantile of the
    /// 2-D error magnitude at the bound (Rayleigh: sigma * sqrt(2 ln 100)).
    pub fn gps_axis_sigma(&self) -> f64 {
        self.gps_error_bound / (2.0 * 100f64.ln()).sqrt()
    }
}

fn stream(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsFix {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub t: f64,
    pub valid: bool,
}

/// First-order Gauss-Markov position offset per axis.
#[derive(Debug, Clone)]
pub struct GpsModel {
    rng: ChaCha8Rng,
    offset: (f64, f64),
    last_t: Option<f64>,
}

impl GpsModel {
    pub fn new(params: &NoiseModelParams) -> Self {
        let mut rng = stream(params.seed, 1);
        let sigma = params.gps_axis_sigma();
        let offset = (sigma * normal(&mut rng), sigma * normal(&mut rng));
        GpsModel { rng, offset, last_t: None }
    }

    /// Current correlated offset after clipping to the bound.
    pub fn offset(&self, params: &NoiseModelParams) -> (f64, f64) {
        let (ox, oy) = self.offset;
        let mag = ox.hypot(oy);
        if mag > params.gps_error_bound && mag > 0.0 {
            let k = params.gps_error_bound / mag;
            (ox * k, oy * k)
        } else {
            (ox, oy)
        }
    }

    pub fn gps_model(&mut self, truth: &VehicleState, params: &NoiseModelParams, t: f64) -> GpsFix {
        let sigma = params.gps_axis_sigma();
        if let Some(last) = self.last_t {
            let phi = (-(t - last).max(0.0) / params.gps_correlation_time).exp();
            let drive = sigma * (1.0 - phi * phi).sqrt();
            self.offset.0 = phi * self.offset.0 + drive * normal(&mut self.rng);
            self.offset.1 = phi * self.offset.1 + drive * normal(&mut self.rng);
        }
        self.last_t = Some(t);
        let (ox, oy) = self.offset(params);
        let heading_noise = params.gps_heading_sigma * normal(&mut self.rng);
        let speed_noise = params.gps_speed_sigma * normal(&mut self.rng);
        GpsFix {
            x: truth.x + ox,
            y: truth.y + oy,
            heading: wrap_angle(truth.heading + heading_noise),
            speed: (truth.speed() + speed_noise).max(0.0),
            t,
            valid: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompassModel {
    rng: ChaCha8Rng,
}

impl CompassModel {
    pub fn new(params: &NoiseModelParams) -> Self {
        CompassModel { rng: stream(params.seed, 2) }
    }

    pub fn compass_model(&mut self, truth: &VehicleState, params: &NoiseModelParams) -> f64 {
        let noise = params.compass_sigma * normal(&mut self.rng);
        let burst_draw: f64 = self.rng.gen();
        let burst_sign: f64 = if self.rng.gen::<bool>() { 1.0 } else { -1.0 };
        let burst = if burst_draw < params.compass_burst_probability {
            burst_sign * params.compass_burst_magnitude
        } else {
            0.0
        };
        wrap_angle(truth.heading + params.compass_bias + noise + burst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedHeading {
    pub heading: f64,
    /// The inputs were antipodal; `heading` is the GPS value.
    pub degenerate: bool,
}

/// Circular mean of the compass and GPS headings.
pub fn heading_fusion(compass_heading: f64, gps_heading: f64) -> FusedHeading {
    let s = compass_heading.sin() + gps_heading.sin();
    let c = compass_heading.cos() + gps_heading.cos();
    if s.hypot(c) < 1e-12 {
        return FusedHeading { heading: wrap_angle(gps_heading), degenerate: true };
    }
    FusedHeading { heading: wrap_angle(s.atan2(c)), degenerate: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RadarTrack {
    pub range: f64,
    /// Positive when the gap is opening.
    pub range_rate: f64,
    pub valid: bool,
    pub t: f64,
}

/// Geometry needed to turn two vehicle states into a bumper-to-bumper gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarGeometry {
    pub ego_half_length: f64,
    pub lead_half_length: f64,
}

#[derive(Debug, Clone)]
pub struct RadarModel {
    rng: ChaCha8Rng,
}

fn world_velocity(s: &VehicleState) -> (f64, f64) {
    let (sin_h, cos_h) = s.heading.sin_cos();
    (s.vx * cos_h - s.vy * sin_h, s.vx * sin_h + s.vy * cos_h)
}

/// Position of a world point in the ego body frame.
pub fn to_ego_frame(ego: &VehicleState, p: (f64, f64)) -> (f64, f64) {
    let (dx, dy) = (p.0 - ego.x, p.1 - ego.y);
    let (sin_h, cos_h) = ego.heading.sin_cos();
    (dx * cos_h + dy * sin_h, -dx * sin_h + dy * cos_h)
}

/// Inverse of [`to_ego_frame`].
pub fn from_ego_frame(ego: &VehicleState, p: (f64, f64)) -> (f64, f64) {
    let (sin_h, cos_h) = ego.heading.sin_cos();
    (ego.x + p.0 * cos_h - p.1 * sin_h, ego.y + p.0 * sin_h + p.1 * cos_h)
}

impl RadarModel {
    pub fn new(params: &NoiseModelParams) -> Self {
        RadarModel { rng: stream(params.seed, 3) }
    }

    pub fn radar_model(
        &mut self,
        ego: &VehicleState,
        lead: &VehicleState,
        geometry: &RadarGeometry,
        params: &NoiseModelParams,
        t: f64,
    ) -> RadarTrack {
        let range_noise = params.radar_range_sigma * normal(&mut self.rng);
        let rate_noise = params.radar_rate_sigma * normal(&mut self.rng);

        let (lx, ly) = to_ego_frame(ego, (lead.x, lead.y));
        let centre = lx.hypot(ly);
        let gap = centre - geometry.ego_half_length - geometry.lead_half_length;
        let in_view = lx > 0.0 && ly.atan2(lx).abs() <= 0.5 * params.radar_fov && gap <= params.radar_max_range;

        let (sin_h, cos_h) = ego.heading.sin_cos();
        let (vlx, vly) = world_velocity(lead);
        let (vex, vey) = world_velocity(ego);
        let rate = (vlx - vex) * cos_h + (vly - vey) * sin_h;

        let range = gap + range_noise;
        if !in_view || range <= 0.0 {
            return RadarTrack { range: 0.0, range_rate: 0.0, valid: false, t };
        }
        RadarTrack { range, range_rate: rate + rate_noise, valid: true, t }
    }
}

/// One lidar return in the ego frame (x forward, y left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarObject {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct LidarModel {
    rng: ChaCha8Rng,
}

impl LidarModel {
    pub fn new(params: &NoiseModelParams) -> Self {
        LidarModel { rng: stream(params.seed, 4) }
    }

    pub fn lidar_model(
        &mut self,
        ego: &VehicleState,
        world_objects: &[(f64, f64)],
        params: &NoiseModelParams,
        t: f64,
    ) -> Vec<LidarObject> {
        let mut out = Vec::new();
        for &obj in world_objects {
            let nx = params.lidar_sigma * normal(&mut self.rng);
            let ny = params.lidar_sigma * normal(&mut self.rng);
            let (x, y) = to_ego_frame(ego, obj);
            let range = x.hypot(y);
            let visible = range <= params.lidar_range && range > 0.0 && y.atan2(x).abs() <= 0.5 * params.lidar_fov;
            if visible {
                out.push(LidarObject { x: x + nx, y: y + ny, t });
            }
        }
        out
    }
}
