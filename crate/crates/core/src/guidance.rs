//! Upper-level controllers: cruise control, ACC with a constant-time-headway
//! spacing policy, CACC feedforward, and the bearing-vector waypoint follower
//! with low-speed lidar steering correction.

use std::f64::consts::PI;

use thiserror::Error;

use crate::pid::{PidGains, PidState};
use crate::sensing::LidarObject;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error("sensor fault: {0}")]
    SensorFault(String),
    #[error("degenerate geometry: target coincides with vehicle position")]
    DegenerateGeometry,
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongitudinalGains {
    pub cc_kp: f64,
    pub cc_ki: f64,
    pub acc_kp: f64,
    pub acc_kd: f64,
    /// Standstill distance d0 (m).
    pub standstill: f64,
    /// Time headway h (s).
    pub headway: f64,
    pub feedforward: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for LongitudinalGains {
    fn default() -> Self {
        LongitudinalGains {
            cc_kp: 0.5,
            cc_ki: 0.1,
            acc_kp: 0.5,
            acc_kd: 0.05,
            standstill: 5.0,
            headway: 1.5,
            feedforward: 1.0,
            a_min: -4.0,
            a_max: 2.5,
        }
    }
}

impl LongitudinalGains {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.headway > 0.0) {
            return Err("time headway must be > 0".into());
        }
        if !(self.standstill >= 0.0) {
            return Err("standstill distance must be >= 0".into());
        }
        if !(self.a_min < 0.0 && self.a_max > 0.0) {
            return Err("acceleration limits must satisfy a_min < 0 < a_max".into());
        }
        if [self.cc_kp, self.cc_ki, self.acc_kp, self.acc_kd, self.feedforward].iter().any(|g| !(*g >= 0.0)) {
            return Err("gains must be >= 0".into());
        }
        Ok(())
    }

    pub fn desired_spacing(&self, ego_v: f64) -> f64 {
        self.standstill + self.headway * ego_v
    }

    pub fn spacing_error(&self, range: f64, ego_v: f64) -> f64 {
        range - self.desired_spacing(ego_v)
    }
}

/// PI speed tracking.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CruiseController {
    pub pid: PidState,
}

impl CruiseController {
    pub fn cc_control(&mut self, v_ref: f64, v: f64, gains: &LongitudinalGains, dt: f64) -> f64 {
        let g = PidGains::pi(gains.cc_kp, gains.cc_ki, gains.a_min, gains.a_max);
        self.pid.update(v_ref - v, &g, dt)
    }
}

/// PD on spacing error and range rate.
pub fn acc_control(range: f64, range_rate: f64, ego_v: f64, gains: &LongitudinalGains) -> Result<f64, GuidanceError> {
    if !(range > 0.0) || !range_rate.is_finite() {
        return Err(GuidanceError::SensorFault(format!("range {range}, range rate {range_rate}")));
    }
    let e = gains.spacing_error(range, ego_v);
    Ok((gains.acc_kp * e + gains.acc_kd * range_rate).clamp(gains.a_min, gains.a_max))
}

/// Adds the lead vehicle's acceleration; `None` (stale or missing feed)
/// falls back to plain ACC.
pub fn cacc_control(acc_output: f64, lead_accel: Option<f64>, gains: &LongitudinalGains) -> f64 {
    let ff = lead_accel.filter(|a| a.is_finite()).map_or(0.0, |a| gains.feedforward * a);
    (acc_output + ff).clamp(gains.a_min, gains.a_max)
}

/// Latest lead acceleration received over V2V with its receive time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LeadFeed {
    latest: Option<(f64, f64)>,
}

impl LeadFeed {
    pub fn update(&mut self, accel: f64, received_at: f64) {
        self.latest = Some((accel, received_at));
    }

    /// The value if it is younger than `timeout`.
    pub fn fresh(&self, now: f64, timeout: f64) -> Option<f64> {
        self.latest.filter(|(_, t)| now - t <= timeout).map(|(a, _)| a)
    }
}

/// Signed angle from the heading vector to the bearing vector, positive when
/// the target lies to the left.
pub fn bearing_error(position: (f64, f64), heading: f64, target: (f64, f64)) -> Result<f64, GuidanceError> {
    let dx = target.0 - position.0;
    let dy = target.1 - position.1;
    if dx == 0.0 && dy == 0.0 {
        return Err(GuidanceError::DegenerateGeometry);
    }
    Ok(wrap_angle(dy.atan2(dx) - heading))
}

/// Ordered waypoints in local metres with the current target.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPath {
    points: Vec<(f64, f64)>,
    pub switch_radius: f64,
    target: usize,
    complete: bool,
}

impl WaypointPath {
    pub fn new(points: Vec<(f64, f64)>, switch_radius: f64) -> Result<Self, GuidanceError> {
        if points.len() < 2 {
            return Err(GuidanceError::InvalidPath("need at least two waypoints".into()));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(GuidanceError::InvalidPath(format!("waypoints {i} and {} coincide", i + 1)));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(GuidanceError::InvalidPath("non-finite waypoint".into()));
        }
        if !(switch_radius > 0.0) {
            return Err(GuidanceError::InvalidPath("switch radius must be > 0".into()));
        }
        Ok(WaypointPath { points, switch_radius, target: 0, complete: false })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn target(&self) -> (f64, f64) {
        self.points[self.target]
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    /// Advances past every waypoint inside the switch radius; the last one is
    /// held and flags completion.
    pub fn select_waypoint(&mut self, position: (f64, f64)) -> usize {
        let last = self.points.len() - 1;
        loop {
            let (tx, ty) = self.points[self.target];
            let inside = (tx - position.0).hypot(ty - position.1) < self.switch_radius;
            if !inside {
                break;
            }
            if self.target == last {
                self.complete = true;
                break;
            }
            self.target += 1;
        }
        self.target
    }

    /// Distance from `p` to the nearest segment of the polyline.
    pub fn cross_track_distance(&self, p: (f64, f64)) -> f64 {
        self.points.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
    }
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / len2).clamp(0.0, 1.0);
    (p.0 - a.0 - t * abx).hypot(p.1 - a.1 - t * aby)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathFollowerGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Road-wheel angle limit (rad).
    pub steer_limit: f64,
}

impl Default for PathFollowerGains {
    fn default() -> Self {
        PathFollowerGains { kp: 0.8, ki: 0.0, kd: 0.05, steer_limit: 0.5 }
    }
}

/// PID driving the bearing error to zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathFollower {
    pub pid: PidState,
}

impl PathFollower {
    pub fn path_follow_pid(&mut self, bearing_err: f64, gains: &PathFollowerGains, dt: f64) -> f64 {
        let g = PidGains {
            kp: gains.kp,
            ki: gains.ki,
            kd: gains.kd,
            out_min: -gains.steer_limit,
            out_max: gains.steer_limit,
        };
        self.pid.update(bearing_err, &g, dt)
    }
}

/// Lidar-triggered low-speed steering correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleConfig {
    /// Correction only acts below this speed (m/s).
    pub speed_threshold: f64,
    /// Forward corridor length and half-width (m).
    pub corridor_length: f64,
    pub corridor_half_width: f64,
    /// Objects alongside the vehicle (|x| <= side_length) closer than
    /// `side_distance` laterally push the steering away from their side.
    pub side_length: f64,
    pub side_distance: f64,
    /// rad of correction per metre of intrusion.
    pub gain: f64,
    pub max_correction: f64,
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        ObstacleConfig {
            speed_threshold: 3.0,
            corridor_length: 12.0,
            corridor_half_width: 1.2,
            side_length: 2.5,
            side_distance: 1.5,
            gain: 0.15,
            max_correction: 0.25,
        }
    }
}

/// Adds the steering correction for objects intruding into the forward
/// corridor or the side zones. Objects on or left of the centreline push
/// the steering right (negative) and vice versa.
pub fn obstacle_correction(desired_steer: f64, objects: &[LidarObject], ego_v: f64, config: &ObstacleConfig) -> f64 {
    if ego_v >= config.speed_threshold || objects.is_empty() {
        return desired_steer;
    }
    let mut correction = 0.0;
    for o in objects {
        let away = if o.y >= 0.0 { -1.0 } else { 1.0 };
        let lateral = o.y.abs();
        if o.x > 0.0 && o.x <= config.corridor_length && lateral <= config.corridor_half_width {
            correction += away * config.gain * (config.corridor_half_width - lateral);
        } else if o.x.abs() <= config.side_length && lateral <= config.side_distance {
            correction += away * config.gain * (config.side_distance - lateral);
        }
    }
    desired_steer + correction.clamp(-config.max_correction, config.max_correction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    const NORTH: f64 = FRAC_PI_2;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(wrap_angle(0.0), 0.0);
    }

    #[test]
    fn cc_zero_error_and_proportional() {
        let mut g = LongitudinalGains::default();
        let mut cc = CruiseController::default();
        assert_eq!(cc.cc_control(10.0, 10.0, &g, 0.01), 0.0);
        g.cc_kp = 0.5;
        g.cc_ki = 0.0;
        let mut cc = CruiseController::default();
        assert!((cc.cc_control(12.0, 10.0, &g, 0.01) - 1.0).abs() < 1e-15);
        assert_eq!(cc.cc_control(100.0, 0.0, &g, 0.01), g.a_max);
    }

    #[test]
    fn acc_equilibrium_and_pd() {
        let mut g = LongitudinalGains { standstill: 5.0, headway: 1.5, acc_kp: 0.4, ..Default::default() };
        assert_eq!(acc_control(20.0, 0.0, 10.0, &g).unwrap(), 0.0);
        g.a_max = 3.0;
        assert!((acc_control(25.0, 0.0, 10.0, &g).unwrap() - 2.0).abs() < 1e-12);
        g.a_max = 1.5;
        assert_eq!(acc_control(25.0, 0.0, 10.0, &g).unwrap(), 1.5);
        g.a_max = 3.0;
        assert!(acc_control(25.0, -5.0, 10.0, &g).unwrap() < acc_control(25.0, 0.0, 10.0, &g).unwrap());
    }

    #[test]
    fn acc_rejects_non_positive_range() {
        let g = LongitudinalGains::default();
        assert!(matches!(acc_control(0.0, 0.0, 10.0, &g), Err(GuidanceError::SensorFault(_))));
        assert!(acc_control(-1.0, 0.0, 10.0, &g).is_err());
    }

    #[test]
    fn cacc_feedforward() {
        let g = LongitudinalGains { feedforward: 1.0, ..Default::default() };
        assert_eq!(cacc_control(0.5, Some(0.0), &g), 0.5);
        assert!((cacc_control(0.5, Some(-1.2), &g) + 0.7).abs() < 1e-12);
        assert_eq!(cacc_control(0.5, None, &g), 0.5);
    }

    #[test]
    fn lead_feed_staleness() {
        let mut f = LeadFeed::default();
        assert_eq!(f.fresh(0.0, 0.5), None);
        f.update(1.0, 1.0);
        assert_eq!(f.fresh(1.4, 0.5), Some(1.0));
        assert_eq!(f.fresh(1.6, 0.5), None);
    }

    #[test]
    fn bearing_cardinal_cases() {
        assert_eq!(bearing_error((0.0, 0.0), NORTH, (0.0, 10.0)).unwrap(), 0.0);
        assert!((bearing_error((0.0, 0.0), NORTH, (-10.0, 0.0)).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((bearing_error((0.0, 0.0), NORTH, (0.0, -10.0)).unwrap() - PI).abs() < 1e-15);
        assert_eq!(bearing_error((1.0, 1.0), 0.0, (1.0, 1.0)), Err(GuidanceError::DegenerateGeometry));
    }

    #[test]
    fn waypoint_switching() {
        let mut p = WaypointPath::new(vec![(0.0, 0.0), (50.0, 0.0), (100.0, 0.0)], 3.0).unwrap();
        assert_eq!(p.select_waypoint((-40.0, 20.0)), 0);
        assert_eq!(p.select_waypoint((1.0, 0.0)), 1);
        assert!(!p.is_complete());
        assert_eq!(p.select_waypoint((99.0, 1.0)), 1);
        assert_eq!(p.select_waypoint((49.0, 1.0)), 2);
        assert_eq!(p.select_waypoint((98.5, 0.5)), 2);
        assert!(p.is_complete());
    }

    #[test]
    fn path_validation() {
        assert!(WaypointPath::new(vec![(0.0, 0.0)], 3.0).is_err());
        assert!(WaypointPath::new(vec![(0.0, 0.0), (0.0, 0.0)], 3.0).is_err());
        assert!(WaypointPath::new(vec![(0.0, 0.0), (1.0, 0.0)], 0.0).is_err());
    }

    #[test]
    fn cross_track() {
        let p = WaypointPath::new(vec![(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)], 3.0).unwrap();
        assert!((p.cross_track_distance((5.0, 2.0)) - 2.0).abs() < 1e-12);
        assert!((p.cross_track_distance((12.0, 5.0)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn path_follower_pid() {
        let mut f = PathFollower::default();
        let g = PathFollowerGains { kp: 1.0, ki: 0.0, kd: 0.0, steer_limit: 0.5 };
        assert_eq!(f.path_follow_pid(0.0, &g, 0.01), 0.0);
        assert!((f.path_follow_pid(0.2, &g, 0.01) - 0.2).abs() < 1e-15);
        assert_eq!(f.path_follow_pid(2.0, &g, 0.01), 0.5);
    }

    #[test]
    fn obstacle_cases() {
        let c = ObstacleConfig::default();
        assert_eq!(obstacle_correction(0.1, &[], 1.0, &c), 0.1);
        let ahead_left = [LidarObject { x: 5.0, y: 0.2, t: 0.0 }];
        assert!(obstacle_correction(0.0, &ahead_left, 1.0, &c) < 0.0);
        let ahead_right = [LidarObject { x: 5.0, y: -0.2, t: 0.0 }];
        assert!(obstacle_correction(0.0, &ahead_right, 1.0, &c) > 0.0);
        assert_eq!(obstacle_correction(0.1, &ahead_left, 10.0, &c), 0.1);
        let beside_right = [LidarObject { x: 0.5, y: -1.4, t: 0.0 }];
        assert!(obstacle_correction(0.0, &beside_right, 1.0, &c) > 0.0);
        let far = [LidarObject { x: 40.0, y: 0.0, t: 0.0 }];
        assert_eq!(obstacle_correction(0.0, &far, 1.0, &c), 0.0);
    }

    proptest! {
        #[test]
        fn bearing_wrap_invariance(px in -100.0f64..100.0, py in -100.0f64..100.0,
                                    tx in -100.0f64..100.0, ty in -100.0f64..100.0, h in -PI..PI) {
            prop_assume!((tx - px).hypot(ty - py) > 1e-3);
            let a = bearing_error((px, py), h, (tx, ty)).unwrap();
            let b = bearing_error((px, py), h + 2.0 * PI, (tx, ty)).unwrap();
            prop_assume!(PI - a.abs() > 1e-9);
            prop_assert!((a - b).abs() < 1e-12, "{} {}", a, b);
            prop_assert!(a > -PI && a <= PI);
        }

        #[test]
        fn bearing_mirror_antisymmetry(h in -PI..PI, d in 0.1f64..100.0, ang in -3.0f64..3.0) {
            let target = (d * (h + ang).cos(), d * (h + ang).sin());
            let mirror = (d * (h - ang).cos(), d * (h - ang).sin());
            let a = bearing_error((0.0, 0.0), h, target).unwrap();
            let b = bearing_error((0.0, 0.0), h, mirror).unwrap();
            prop_assert!((a + b).abs() < 1e-9, "{} {}", a, b);
        }

        #[test]
        fn controller_outputs_clamped(v_ref in 0.0f64..40.0, v in 0.0f64..40.0,
                                     range in 0.1f64..200.0, rate in -20.0f64..20.0, lead in -10.0f64..10.0) {
            let g = LongitudinalGains::default();
            let mut cc = CruiseController::default();
            for _ in 0..50 {
                let a = cc.cc_control(v_ref, v, &g, 0.01);
                prop_assert!(a >= g.a_min && a <= g.a_max);
            }
            let acc = acc_control(range, rate, v, &g).unwrap();
            prop_assert!(acc >= g.a_min && acc <= g.a_max);
            let cacc = cacc_control(acc, Some(lead), &g);
            prop_assert!(cacc >= g.a_min && cacc <= g.a_max);
            let no_ff = LongitudinalGains { feedforward: 0.0, ..g };
            prop_assert_eq!(cacc_control(acc, Some(lead), &no_ff), acc);
        }
    }
}
