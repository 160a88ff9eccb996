//! Multi-rate scheduler.
//!
//! Per plant tick, in order: sensors due at this instant sample the current
//! truth; on control ticks the lead controller runs and broadcasts, the
//! channel delivers what is due, the ego controller runs and a trace row is
//! recorded; finally the steering servo and both plants advance one step.
//! Controller outputs are held between control ticks.

use crate::actuation::{longitudinal_actuation, ControlCommand, SteeringActuator, SteeringServo};
use crate::comms::{
    can_to_udp, decode_v2v, encode_v2v, udp_to_can, Channel, ChannelStats, Envelope, UdpPackage, V2VMessage,
    DATAGRAM_LEN,
};
use crate::dynamics::{evaluate, select_gear, DynamicsError, PlantInputs, PlantStepper, VehicleState};
use crate::guidance::{
    acc_control, bearing_error, cacc_control, obstacle_correction, CruiseController, LeadFeed, PathFollower,
    WaypointPath,
};
use crate::params::VehicleConfig;
use crate::sensing::{
    heading_fusion, CompassModel, GpsFix, GpsModel, LidarModel, LidarObject, NoiseModelParams, RadarGeometry,
    RadarModel, RadarTrack,
};

use super::geo::LocalTangentPlane;
use super::metrics::{cacc_metrics, path_metrics, replay_metrics, CommsCounters, Metrics, RunResult};
use super::scenario::{Scenario, ScenarioKind};
use super::{evaluate_dlc, HarnessError, Trace};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub result: RunResult,
}

/// One simulated vehicle: plant, steering loop and held commands.
#[derive(Debug, Clone)]
struct SimVehicle {
    config: VehicleConfig,
    state: VehicleState,
    stepper: PlantStepper,
    servo: SteeringServo,
    actuator: SteeringActuator,
    command: ControlCommand,
    steer_target: f64,
    gear: usize,
}

impl SimVehicle {
    fn new(config: VehicleConfig, state: VehicleState, dt: f64) -> Result<Self, DynamicsError> {
        let gear = select_gear(&config.vehicle, state.speed());
        Ok(SimVehicle {
            config,
            state,
            stepper: PlantStepper::new(dt)?,
            servo: SteeringServo::default(),
            actuator: SteeringActuator::default(),
            command: ControlCommand::default(),
            steer_target: 0.0,
            gear,
        })
    }

    fn inputs(&self, grade: f64) -> PlantInputs {
        PlantInputs {
            steer: self.actuator.angle,
            throttle: self.command.throttle,
            grade,
            gear: self.gear,
            ..Default::default()
        }
        .with_brake(&self.config.vehicle, self.command.brake_torque(&self.config.actuation))
    }

    fn shift(&mut self) {
        self.gear = select_gear(&self.config.vehicle, self.state.vx.max(0.0));
    }

    fn actuate(&mut self, a_desired: f64, grade: f64) -> Result<(), DynamicsError> {
        self.shift();
        let cmd = longitudinal_actuation(
            a_desired,
            &self.state,
            grade,
            self.gear,
            &self.config.vehicle,
            &self.config.actuation,
            0.0,
        )?;
        self.command.throttle = cmd.throttle;
        self.command.brake_duty = cmd.brake_duty;
        self.command.authority = cmd.authority;
        Ok(())
    }

    /// Body-frame accelerations under the current inputs.
    fn acceleration(&self, grade: f64) -> Result<(f64, f64), DynamicsError> {
        let e = evaluate(&self.state, &self.inputs(grade), &self.config.vehicle)?;
        Ok(e.derivative.body_acceleration(&self.state))
    }

    fn tick(&mut self, grade: f64) -> Result<(), DynamicsError> {
        let dt = self.stepper.dt();
        let act = &self.config.actuation;
        self.command.steer_command = self.servo.steering_pi(self.steer_target, self.actuator.angle, act, dt);
        self.actuator.steering_plant(self.command.steer_command, act, dt);
        let inputs = self.inputs(grade);
        self.state = self.stepper.step(&self.state, &inputs, &self.config.vehicle)?;
        Ok(())
    }

    fn common_row(&self, t: f64, grade: f64) -> Result<Vec<f64>, DynamicsError> {
        let s = &self.state;
        let (ax, ay) = self.acceleration(grade)?;
        let eps = self.config.vehicle.velocity_epsilon;
        Ok(vec![
            t,
            s.x,
            s.y,
            s.heading,
            s.vx,
            s.vy,
            s.yaw_rate,
            s.omega_front,
            s.omega_rear,
            ax,
            ay,
            s.sideslip(eps).unwrap_or(0.0),
            self.gear as f64,
            self.command.throttle,
            self.command.brake_duty,
            self.steer_target,
            self.actuator.angle,
            self.command.steer_command,
        ])
    }
}

const COMMON_COLUMNS: [&str; 18] = [
    "t",
    "x",
    "y",
    "heading",
    "vx",
    "vy",
    "yaw_rate",
    "omega_front",
    "omega_rear",
    "ax",
    "ay",
    "sideslip",
    "gear",
    "throttle",
    "brake_duty",
    "steer_target",
    "steer",
    "steer_command",
];

const PATH_COLUMNS: [&str; 9] = [
    "gps_x",
    "gps_y",
    "heading_estimate",
    "target_index",
    "bearing_error",
    "cross_track",
    "v_ref",
    "a_desired",
    "lidar_objects",
];

const CACC_COLUMNS: [&str; 19] = [
    "a_desired",
    "acc_output",
    "feedforward_accel",
    "feed_fresh",
    "radar_range",
    "radar_range_rate",
    "radar_valid",
    "lead_x",
    "lead_y",
    "lead_vx",
    "lead_v_ref",
    "lead_ax",
    "lead_throttle",
    "lead_brake_duty",
    "range",
    "desired_spacing",
    "spacing_error",
    "delta_v",
    "v2v_received",
];

/// Trace columns for a scenario kind.
pub fn trace_columns(kind: ScenarioKind) -> Vec<&'static str> {
    let mut cols = COMMON_COLUMNS.to_vec();
    match kind {
        ScenarioKind::DoubleLaneChange | ScenarioKind::WaypointFollow => cols.extend(PATH_COLUMNS),
        ScenarioKind::CaccFollow => cols.extend(CACC_COLUMNS),
        ScenarioKind::OpenLoopReplay => {}
    }
    cols
}

/// Sample clock for a sensor with rate `hz` on a plant grid of `dt`.
#[derive(Debug, Clone, Copy)]
struct SampleClock {
    period: f64,
    next: u64,
}

impl SampleClock {
    fn new(hz: f64) -> Self {
        SampleClock { period: 1.0 / hz, next: 0 }
    }

    fn due(&mut self, t: f64) -> bool {
        if t + 1e-9 >= self.next as f64 * self.period {
            while self.next as f64 * self.period <= t + 1e-9 {
                self.next += 1;
            }
            true
        } else {
            false
        }
    }
}

struct EgoSensors {
    noise: NoiseModelParams,
    gps: GpsModel,
    compass: CompassModel,
    radar: RadarModel,
    lidar: LidarModel,
    clocks: [SampleClock; 4],
    fix: Option<GpsFix>,
    compass_heading: Option<f64>,
    track: RadarTrack,
    objects: Vec<LidarObject>,
}

impl EgoSensors {
    fn new(noise: NoiseModelParams) -> Self {
        EgoSensors {
            gps: GpsModel::new(&noise),
            compass: CompassModel::new(&noise),
            radar: RadarModel::new(&noise),
            lidar: LidarModel::new(&noise),
            clocks: [
                SampleClock::new(noise.gps_rate),
                SampleClock::new(noise.compass_rate),
                SampleClock::new(noise.radar_rate),
                SampleClock::new(noise.lidar_rate),
            ],
            noise,
            fix: None,
            compass_heading: None,
            track: RadarTrack::default(),
            objects: Vec::new(),
        }
    }

    fn sample(&mut self, t: f64, ego: &SimVehicle, lead: Option<&SimVehicle>, obstacles: &[(f64, f64)]) {
        let s = &ego.state;
        if self.clocks[0].due(t) {
            self.fix = Some(self.gps.gps_model(s, &self.noise, t));
        }
        if self.clocks[1].due(t) {
            self.compass_heading = Some(self.compass.compass_model(s, &self.noise));
        }
        if let Some(lead) = lead {
            if self.clocks[2].due(t) {
                let geometry = RadarGeometry {
                    ego_half_length: 0.5 * ego.config.vehicle.length,
                    lead_half_length: 0.5 * lead.config.vehicle.length,
                };
                self.track = self.radar.radar_model(s, &lead.state, &geometry, &self.noise, t);
            }
        }
        if !obstacles.is_empty() && self.clocks[3].due(t) {
            self.objects = self.lidar.lidar_model(s, obstacles, &self.noise, t);
        }
    }

    /// Position and heading estimate. The heading is the fused value when
    /// the compass has reported and the GPS course alone otherwise.
    fn pose(&self) -> Option<((f64, f64), f64)> {
        let fix = self.fix.filter(|f| f.valid)?;
        let heading = match self.compass_heading {
            Some(compass) => heading_fusion(compass, fix.heading).heading,
            None => fix.heading,
        };
        Some(((fix.x, fix.y), heading))
    }
}

struct V2VLink {
    channel: Channel<Vec<[u8; DATAGRAM_LEN]>>,
    ltp: LocalTangentPlane,
    feed: LeadFeed,
    counters: CommsCounters,
    received_this_period: bool,
}

impl V2VLink {
    fn send(&mut self, msg: &V2VMessage, sender: u64) -> Result<(), HarnessError> {
        let datagrams = encode_v2v(msg)?.iter().map(UdpPackage::to_datagram).collect();
        self.channel.submit(Envelope { sender, sent_at: msg.timestamp, payload: datagrams });
        self.counters.sent += 1;
        Ok(())
    }

    /// Delivers everything due: datagram, onto the vehicle CAN bus and back,
    /// then reassembly.
    fn receive(&mut self, now: f64, scenario: &Scenario) -> Result<(), HarnessError> {
        for env in self.channel.channel_step(now, std::iter::empty()) {
            let mut packages = Vec::with_capacity(env.payload.len());
            for d in &env.payload {
                let pkg = UdpPackage::from_datagram(d)?;
                let frame = udp_to_can(&pkg, &scenario.can_mapping)?;
                packages.push(can_to_udp(&frame, &scenario.can_mapping)?);
            }
            match decode_v2v(&packages) {
                Ok(outcome) => match outcome.message() {
                    Some(m) => {
                        self.feed.update(m.acceleration, now);
                        self.counters.decoded += 1;
                        self.received_this_period = true;
                    }
                    None => self.counters.decode_failures += 1,
                },
                Err(_) => self.counters.decode_failures += 1,
            }
        }
        Ok(())
    }

    fn finish(&mut self, stats: ChannelStats) {
        self.counters.dropped = stats.dropped;
        self.counters.delivered = stats.delivered;
    }
}

/// Runs a validated scenario to completion.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, HarnessError> {
    scenario.validate()?;
    let mut trace = Trace::new(trace_columns(scenario.kind));
    match simulate(scenario, &mut trace) {
        Ok(result) => Ok(RunOutput { trace, result }),
        Err((time, source)) => match source {
            HarnessError::Dynamics(source) => Err(HarnessError::Divergence { time, source, trace: Box::new(trace) }),
            other => Err(other),
        },
    }
}

fn simulate(sc: &Scenario, trace: &mut Trace) -> Result<RunResult, (f64, HarnessError)> {
    let timing = sc.timing;
    let dt = timing.plant_dt;
    let ratio = timing.ratio();
    let n_ticks = (sc.duration / dt).round() as u64;
    let grade = sc.grade;
    let gains = &sc.longitudinal;
    let at = |t: f64| move |e: HarnessError| (t, e);
    let dyn_at = |t: f64| move |e: DynamicsError| (t, HarnessError::Dynamics(e));

    let ego_params = &sc.ego.config.vehicle;
    let ego_state = VehicleState {
        x: sc.ego.x,
        y: sc.ego.y,
        heading: sc.ego.heading,
        ..VehicleState::rolling(ego_params, sc.ego.speed)
    };
    let mut ego = SimVehicle::new(sc.ego.config.clone(), ego_state, dt).map_err(dyn_at(0.0))?;

    let mut lead = match &sc.lead {
        None => None,
        Some(l) => {
            let v0 = l.speed_profile.at(0.0);
            let gap = l.gap.unwrap_or_else(|| gains.desired_spacing(sc.ego.speed));
            let centre = 0.5 * ego_params.length + gap + 0.5 * l.config.vehicle.length;
            let (sin_h, cos_h) = sc.ego.heading.sin_cos();
            let state = VehicleState {
                x: sc.ego.x + centre * cos_h,
                y: sc.ego.y + centre * sin_h,
                heading: sc.ego.heading,
                ..VehicleState::rolling(&l.config.vehicle, v0)
            };
            Some(SimVehicle::new(l.config.clone(), state, dt).map_err(dyn_at(0.0))?)
        }
    };
    let mut lead_cc = CruiseController::default();
    let mut lead_v_ref = 0.0;
    let mut lead_accel = 0.0;

    let mut sensors = EgoSensors::new(sc.noise);
    let mut link = V2VLink {
        channel: Channel::new(sc.channel),
        ltp: LocalTangentPlane::new(sc.origin.0, sc.origin.1),
        feed: LeadFeed::default(),
        counters: CommsCounters::default(),
        received_this_period: false,
    };

    let mut path = match &sc.path {
        Some(p) => Some(
            WaypointPath::new(p.waypoints.clone(), p.switch_radius)
                .map_err(|e| (0.0, HarnessError::Invalid(format!("scenario `{}`: {e}", sc.name))))?,
        ),
        None => None,
    };
    let mut follower = PathFollower::default();
    let mut cruise = CruiseController::default();
    let mut steer_cmd = 0.0;
    let mut bearing = 0.0;
    let mut completion_time = None;
    let mut stale_fallbacks = 0u64;
    let mut min_range = f64::INFINITY;

    let control_dt = timing.control_dt;
    for i in 0..=n_ticks {
        let t = i as f64 * dt;
        let obstacles = sc.path.as_ref().map_or(&[][..], |p| &p.obstacles[..]);
        sensors.sample(t, &ego, lead.as_ref(), obstacles);

        if i % ratio as u64 == 0 {
            // lead: cruise control on its speed profile, then broadcast
            if let (Some(l), Some(spec)) = (lead.as_mut(), sc.lead.as_ref()) {
                lead_v_ref = spec.speed_profile.at(t);
                let a = lead_cc.cc_control(lead_v_ref, l.state.vx, gains, control_dt);
                l.actuate(a, grade).map_err(dyn_at(t))?;
                lead_accel = l.acceleration(grade).map_err(dyn_at(t))?.0;
                let (lat, lon) = link.ltp.to_geodetic(l.state.x, l.state.y);
                let msg = V2VMessage {
                    acceleration: lead_accel,
                    latitude: lat,
                    longitude: lon,
                    timestamp: t,
                    sender: spec.sender_id,
                };
                link.send(&msg, spec.sender_id).map_err(at(t))?;
            }
        }
        link.receive(t, sc).map_err(at(t))?;

        if i % ratio as u64 == 0 {
            let v = ego.state.vx;
            let row = match sc.kind {
                ScenarioKind::CaccFollow => {
                    let l = lead.as_ref().expect("validated: cacc-follow has a lead");
                    let track = sensors.track;
                    let acc =
                        if track.valid { acc_control(track.range, track.range_rate, v, gains).ok() } else { None };
                    let fresh = link.feed.fresh(t, sc.stale_timeout);
                    if fresh.is_none() {
                        stale_fallbacks += 1;
                    }
                    let a_des = match acc {
                        Some(a) => cacc_control(a, fresh, gains),
                        // no target: hold speed
                        None => cruise.cc_control(sc.ego.speed, v, gains, control_dt),
                    };
                    ego.steer_target = 0.0;
                    ego.actuate(a_des, grade).map_err(dyn_at(t))?;
                    let mut row = ego.common_row(t, grade).map_err(dyn_at(t))?;

                    let half = 0.5 * (ego.config.vehicle.length + l.config.vehicle.length);
                    let range = (l.state.x - ego.state.x).hypot(l.state.y - ego.state.y) - half;
                    min_range = min_range.min(range);
                    let desired = gains.desired_spacing(v);
                    row.extend([
                        a_des,
                        acc.unwrap_or(0.0),
                        fresh.map_or(0.0, |a| gains.feedforward * a),
                        fresh.is_some() as u8 as f64,
                        track.range,
                        track.range_rate,
                        track.valid as u8 as f64,
                        l.state.x,
                        l.state.y,
                        l.state.vx,
                        lead_v_ref,
                        lead_accel,
                        l.command.throttle,
                        l.command.brake_duty,
                        range,
                        desired,
                        range - desired,
                        l.state.vx - v,
                        link.received_this_period as u8 as f64,
                    ]);
                    link.received_this_period = false;
                    row
                }
                ScenarioKind::DoubleLaneChange | ScenarioKind::WaypointFollow => {
                    let spec = sc.path.as_ref().expect("validated: path kinds have a path");
                    let wp = path.as_mut().expect("path built for path kinds");
                    let mut v_ref = spec.speed;
                    let mut pose_xy = (f64::NAN, f64::NAN);
                    let mut heading_est = f64::NAN;
                    if let Some((pos, heading)) = sensors.pose() {
                        pose_xy = pos;
                        heading_est = heading;
                        wp.select_waypoint(pos);
                        if wp.is_complete() {
                            completion_time.get_or_insert(t);
                        }
                        if let Ok(b) = bearing_error(pos, heading, wp.target()) {
                            bearing = b;
                            steer_cmd = follower.path_follow_pid(b, &spec.gains, control_dt);
                        }
                    }
                    if wp.is_complete() {
                        v_ref = 0.0;
                    }
                    let steer = obstacle_correction(steer_cmd, &sensors.objects, v, &spec.obstacle)
                        .clamp(-spec.gains.steer_limit, spec.gains.steer_limit);
                    ego.steer_target = steer;
                    let a_des = cruise.cc_control(v_ref, v, gains, control_dt);
                    ego.actuate(a_des, grade).map_err(dyn_at(t))?;
                    let mut row = ego.common_row(t, grade).map_err(dyn_at(t))?;
                    row.extend([
                        if pose_xy.0.is_nan() { ego.state.x } else { pose_xy.0 },
                        if pose_xy.1.is_nan() { ego.state.y } else { pose_xy.1 },
                        if heading_est.is_nan() { ego.state.heading } else { heading_est },
                        wp.target_index() as f64,
                        bearing,
                        wp.cross_track_distance((ego.state.x, ego.state.y)),
                        v_ref,
                        a_des,
                        sensors.objects.len() as f64,
                    ]);
                    row
                }
                ScenarioKind::OpenLoopReplay => {
                    let r = sc.replay.as_ref().expect("validated: replay kind has profiles");
                    ego.shift();
                    ego.command.throttle = r.throttle.at(t).clamp(0.0, 1.0);
                    ego.command.brake_duty = r.brake.at(t).clamp(0.0, 100.0);
                    ego.steer_target = r.steer.at(t);
                    ego.common_row(t, grade).map_err(dyn_at(t))?
                }
            };
            trace.push(row);
        }

        if i < n_ticks {
            ego.tick(grade).map_err(dyn_at(t))?;
            if let Some(l) = lead.as_mut() {
                l.tick(grade).map_err(dyn_at(t))?;
            }
        }
    }
    link.finish(link.channel.stats());

    let err = |e| (sc.duration, e);
    let metrics = match sc.kind {
        ScenarioKind::CaccFollow => {
            let mut m = cacc_metrics(trace).map_err(err)?;
            m.stale_fallbacks = stale_fallbacks;
            m.min_range = min_range;
            m.comms = link.counters;
            Metrics::Cacc(m)
        }
        ScenarioKind::DoubleLaneChange => {
            let corridor = sc.corridor.as_ref().expect("validated: dlc has a corridor");
            let p = &sc.ego.config.vehicle;
            let dlc = evaluate_dlc(trace, corridor, p.length, p.width).map_err(err)?;
            let path = path_metrics(trace, completion_time).map_err(err)?;
            Metrics::DoubleLaneChange { dlc, path }
        }
        ScenarioKind::WaypointFollow => Metrics::Path(path_metrics(trace, completion_time).map_err(err)?),
        ScenarioKind::OpenLoopReplay => Metrics::Replay(replay_metrics(trace).map_err(err)?),
    };
    Ok(RunResult::new(sc, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_clock_hits_each_period_once() {
        let mut c = SampleClock::new(12.5);
        let hits: Vec<u64> = (0..=1000u64).filter(|i| c.due(*i as f64 * 0.001)).collect();
        assert_eq!(hits, vec![0, 80, 160, 240, 320, 400, 480, 560, 640, 720, 800, 880, 960]);
    }

    #[test]
    fn schema_is_pure_function_of_kind() {
        for k in ScenarioKind::ALL {
            assert_eq!(trace_columns(k), trace_columns(k));
            assert_eq!(&trace_columns(k)[..COMMON_COLUMNS.len()], &COMMON_COLUMNS[..]);
        }
    }
}
