//! Deterministic closed-loop simulation of a full grasping mission.
//!
//! The world is kinematic: the drone tracks velocity commands through a
//! first-order lag, the arm and battery slider follow rate-limited set
//! points, and a downward pinhole camera feeds the detection, localization
//! and waypoint pipeline every control tick. A mission walks the phase
//! sequence search, approach, grasp, deliver, drop, done, and records one
//! log row per tick. Runs are reproducible bit for bit for a given
//! configuration and seed.
//!
//! Frame conventions: the world frame has z up; the body frame has x
//! forward, y left, z up and differs from the world by yaw and position.
//! The arm plane maps into the body through the mount translation followed
//! by a quarter turn about x, so arm x points forward and negative arm y
//! hangs below the airframe. The camera looks straight down with image up
//! aligned to body forward.

mod config;
mod pid;

pub use config::{
    CameraConfig, DroneConfig, GraspConfig, MissionConfig, NoiseConfig, SearchConfig, SliderConfig,
    TargetConfig, WaypointConfig,
};
pub use pid::{PidController, PidGains};

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::cog::{
    battery_position_clamped, link_cog_in_body, link_transforms, max_compensation_speed, CogError,
    MassModel, RigidTransform,
};
use crate::detection::Detection;
use crate::geometry::{canonical_angle, wrapped_angle_diff, GeometryError, OrientedBox};
use crate::kinematics::{forward, inverse, plan_trajectory, JointState, KinematicsError};
use crate::localization::{grasp_waypoint, localize, LocalizationError, PatchPoint, PointPatch};

/// Errors raised while loading, validating or initializing a mission.
#[derive(Debug, Error)]
pub enum MissionError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Cog(#[from] CogError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
}

/// Mission state machine phases, in nominal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Search,
    Approach,
    Grasp,
    Deliver,
    Drop,
    Done,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Phase::Search => "search",
            Phase::Approach => "approach",
            Phase::Grasp => "grasp",
            Phase::Deliver => "deliver",
            Phase::Drop => "drop",
            Phase::Done => "done",
        };
        f.write_str(name)
    }
}

/// The pick-up object as simulated, ground truth the controllers never see.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetState {
    pub position: [f64; 3],
    pub yaw: f64,
    pub size: [f64; 2],
    pub mass: f64,
    pub grasped: bool,
    pub released: bool,
}

/// Complete simulated state at one tick.
#[derive(Debug, Clone, Serialize)]
pub struct WorldState {
    pub tick: u64,
    pub clock: f64,
    pub drone_position: [f64; 3],
    pub drone_velocity: [f64; 3],
    pub drone_yaw: f64,
    pub joints: JointState,
    pub battery_position: f64,
    pub phase: Phase,
    pub target: Option<TargetState>,
}

/// One synthetic camera frame: an oriented detection in pixel coordinates
/// plus the aligned point patch.
#[derive(Debug, Clone)]
pub struct SensorFrame {
    pub detection: Detection,
    pub patch: PointPatch,
}

/// Body-to-world transform of the drone at the given pose.
pub fn body_to_world(position: [f64; 3], yaw: f64) -> RigidTransform {
    RigidTransform::translation(position[0], position[1], position[2])
        * RigidTransform::rotation_z(yaw)
}

/// Fixed-arm-frame-to-body transform: mount offset then a quarter turn
/// about x, mapping the arm plane into the body x-z plane.
pub fn arm_to_body(mount: [f64; 3]) -> RigidTransform {
    RigidTransform::translation(mount[0], mount[1], mount[2])
        * RigidTransform::rotation_x(FRAC_PI_2)
}

/// Camera-to-body transform of the nadir camera: image right is body -y,
/// image down is body -x, optical axis is body -z.
pub fn camera_to_body(camera: &CameraConfig) -> RigidTransform {
    RigidTransform::translation(camera.offset[0], camera.offset[1], camera.offset[2])
        * RigidTransform::rotation_z(-FRAC_PI_2)
        * RigidTransform::rotation_x(PI)
}

/// World position of the arm's end effector for a drone pose and joint state.
pub fn end_effector_world(
    config: &MissionConfig,
    position: [f64; 3],
    yaw: f64,
    q: &JointState,
) -> [f64; 3] {
    let pose = forward(&config.arm, q);
    (body_to_world(position, yaw) * arm_to_body(config.arm_mount))
        .transform_point([pose.x, pose.y, 0.0])
}

/// Renders what the downward camera sees of the target, if anything.
///
/// Returns `None` when there is no target, the target is held by the
/// gripper, it projects outside the image, or it appears smaller than one
/// pixel. Center and angle noise are drawn from `rng` even at zero standard
/// deviation, keeping the random stream aligned across noise settings.
pub fn sense(
    world: &WorldState,
    config: &MissionConfig,
    rng: &mut impl Rng,
) -> Option<SensorFrame> {
    let target = world.target.as_ref()?;
    if target.grasped || target.released {
        return None;
    }
    let camera = &config.camera;
    let t_wc =
        (body_to_world(world.drone_position, world.drone_yaw) * camera_to_body(camera)).inverse();
    let p_c = t_wc.transform_point(target.position);
    let depth = p_c[2];
    if depth < camera.min_depth {
        return None;
    }
    let width = camera.width as f64;
    let height = camera.height as f64;
    let (cx0, cy0) = (width / 2.0, height / 2.0);
    let nu: f64 = rng.sample(StandardNormal);
    let nv: f64 = rng.sample(StandardNormal);
    let ntheta: f64 = rng.sample(StandardNormal);
    let u = cx0 + camera.focal_px * p_c[0] / depth + config.noise.sigma_px * nu;
    let v = cy0 + camera.focal_px * p_c[1] / depth + config.noise.sigma_px * nv;
    if u.round() < 0.0 || u.round() >= width || v.round() < 0.0 || v.round() >= height {
        return None;
    }
    let w_px = camera.focal_px * target.size[0] / depth;
    let h_px = camera.focal_px * target.size[1] / depth;
    if w_px.min(h_px) < 1.0 {
        return None;
    }
    let theta = canonical_angle(target.yaw - world.drone_yaw + config.noise.sigma_theta * ntheta);
    let bbox = OrientedBox::new(u, v, w_px, h_px, theta).expect("projected box is valid");
    let detection = Detection {
        bbox,
        class_id: 0,
        score: 0.95,
    };

    let cols = camera.width as usize;
    let rows = camera.height as usize;
    let mut points = vec![PatchPoint::INVALID; cols * rows];
    let window = 8i64;
    let uc = u.round() as i64;
    let vc = v.round() as i64;
    let col_lo = (uc - window).max(0) as usize;
    let col_hi = (uc + window).min(cols as i64 - 1) as usize;
    let row_lo = (vc - window).max(0) as usize;
    let row_hi = (vc + window).min(rows as i64 - 1) as usize;
    for row in row_lo..=row_hi {
        for col in col_lo..=col_hi {
            let x = (col as f64 - cx0) * depth / camera.focal_px;
            let y = (row as f64 - cy0) * depth / camera.focal_px;
            points[row * cols + col] = PatchPoint::new(x, y, depth);
        }
    }
    let patch = PointPatch::new(cols, rows, points).expect("patch dimensions are valid");
    Some(SensorFrame { detection, patch })
}

/// How a mission ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionOutcome {
    Done,
    TimedOut,
}

/// One log row, written every tick after the state update.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TickRecord {
    pub time: f64,
    pub phase: Phase,
    pub position: [f64; 3],
    pub yaw: f64,
    pub error: [f64; 3],
    pub joints: JointState,
    pub battery_position: f64,
}

/// A phase transition and when it happened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseChange {
    pub time: f64,
    pub phase: Phase,
}

/// End-of-run metrics.
#[derive(Debug, Clone, Serialize)]
pub struct MissionSummary {
    pub success: bool,
    pub outcome: MissionOutcome,
    pub grasp_time: Option<f64>,
    pub grasp_position_error: Option<f64>,
    pub grasp_theta3_error: Option<f64>,
    pub tick_count: u64,
    pub sim_time: f64,
    pub phase_changes: Vec<PhaseChange>,
}

/// Full mission record: per-tick rows plus the summary.
#[derive(Debug, Clone, Serialize)]
pub struct MissionLog {
    pub outcome: MissionOutcome,
    pub records: Vec<TickRecord>,
    pub summary: MissionSummary,
}

impl MissionLog {
    /// Per-tick rows as CSV with a fixed header and fixed-precision fields,
    /// identical bytes for identical runs.
    pub fn csv(&self) -> String {
        let mut out =
            String::from("time,phase,x,y,z,yaw,err_x,err_y,err_z,theta1,theta2,theta3,p_b\n");
        for r in &self.records {
            out.push_str(&format!(
                "{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                r.time,
                r.phase,
                r.position[0],
                r.position[1],
                r.position[2],
                r.yaw,
                r.error[0],
                r.error[1],
                r.error[2],
                r.joints.theta1,
                r.joints.theta2,
                r.joints.theta3,
                r.battery_position,
            ));
        }
        out
    }

    /// The summary as pretty-printed JSON with a stable field order.
    pub fn summary_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        text.push('\n');
        text
    }
}

struct ArmPlan {
    states: Vec<JointState>,
    index: usize,
    goal: JointState,
}

impl ArmPlan {
    fn complete(&self, joints: &JointState, tolerance: f64) -> bool {
        self.index >= self.states.len()
            && (joints.theta1 - self.goal.theta1).abs() <= tolerance
            && (joints.theta2 - self.goal.theta2).abs() <= tolerance
            && (joints.theta3 - self.goal.theta3).abs() <= tolerance
    }
}

struct GraspStats {
    time: f64,
    position_error: f64,
    theta3_error: f64,
}

/// A mission in progress. Create with [`Mission::new`], advance with
/// [`Mission::step`] or drive to completion with [`Mission::run`].
pub struct Mission {
    config: MissionConfig,
    world: WorldState,
    rng: ChaCha8Rng,
    pid_x: PidController,
    pid_y: PidController,
    pid_z: PidController,
    pid_slider: PidController,
    waypoint: Option<[f64; 3]>,
    last_fix: Option<(u64, f64)>,
    arm_plan: Option<ArmPlan>,
    search_y: f64,
    grasp_stats: Option<GraspStats>,
    records: Vec<TickRecord>,
    phase_changes: Vec<PhaseChange>,
}

impl Mission {
    /// Validates the configuration, solves the initial hold pose and seeds
    /// the random stream.
    pub fn new(config: MissionConfig, seed: u64) -> Result<Self, MissionError> {
        config.validate()?;
        let hold = config.waypoints.hold_point;
        let joints = inverse(&config.arm, hold[0], hold[1])?;
        let battery_position = initial_battery_position(&config, &joints)?;
        let target = config.target.as_ref().map(|t| TargetState {
            position: t.position,
            yaw: t.yaw,
            size: t.size,
            mass: t.mass,
            grasped: false,
            released: false,
        });
        let world = WorldState {
            tick: 0,
            clock: 0.0,
            drone_position: config.drone.start_position,
            drone_velocity: [0.0; 3],
            drone_yaw: config.drone.yaw,
            joints,
            battery_position,
            phase: Phase::Search,
            target,
        };
        let position_pid = config.drone.position_pid;
        let slider_pid = config.slider.pid;
        let search_y = config.drone.start_position[1];
        let mut mission = Self {
            config,
            world,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pid_x: PidController::new(position_pid),
            pid_y: PidController::new(position_pid),
            pid_z: PidController::new(position_pid),
            pid_slider: PidController::new(slider_pid),
            waypoint: None,
            last_fix: None,
            arm_plan: None,
            search_y,
            grasp_stats: None,
            records: Vec::new(),
            phase_changes: Vec::new(),
        };
        mission.phase_changes.push(PhaseChange {
            time: 0.0,
            phase: Phase::Search,
        });
        mission.push_record(0.0, [0.0; 3]);
        Ok(mission)
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn config(&self) -> &MissionConfig {
        &self.config
    }

    /// Advances the simulation by one control period. Does nothing once the
    /// mission is done.
    pub fn step(&mut self) -> &WorldState {
        if self.world.phase == Phase::Done {
            return &self.world;
        }
        let dt = self.config.dt;
        let tick = self.world.tick + 1;
        let time = tick as f64 * dt;

        if matches!(
            self.world.phase,
            Phase::Search | Phase::Approach | Phase::Grasp
        ) {
            if let Some(frame) = sense(&self.world, &self.config, &mut self.rng) {
                if let Ok(fix) = localize(&frame.patch, &frame.detection) {
                    let t_bw = body_to_world(self.world.drone_position, self.world.drone_yaw);
                    let t_cb = camera_to_body(&self.config.camera);
                    let t_0b = arm_to_body(self.config.arm_mount);
                    self.waypoint = Some(grasp_waypoint(
                        self.world.drone_position,
                        &t_bw,
                        &t_cb,
                        &t_0b,
                        &fix,
                        (
                            self.config.waypoints.grasp_point[0],
                            self.config.waypoints.grasp_point[1],
                        ),
                    ));
                    self.last_fix = Some((tick, fix.theta));
                }
            }
        }

        self.advance_phase(time, tick);
        let error = self.drone_control(dt);
        self.arm_control(dt);
        self.slider_control(dt);
        if let Some(target) = &mut self.world.target {
            if target.grasped {
                target.position = end_effector_world(
                    &self.config,
                    self.world.drone_position,
                    self.world.drone_yaw,
                    &self.world.joints,
                );
                target.yaw = self.world.drone_yaw + self.world.joints.theta3;
            }
        }
        self.world.tick = tick;
        self.world.clock = time;
        self.push_record(time, error);
        &self.world
    }

    /// Runs until the mission is done or the time cap is exceeded and
    /// returns the full log.
    pub fn run(mut self) -> MissionLog {
        let max_ticks = (self.config.time_cap / self.config.dt).ceil() as u64;
        while self.world.phase != Phase::Done && self.world.tick < max_ticks {
            self.step();
        }
        self.finish()
    }

    /// Closes out the log at the current state.
    pub fn finish(self) -> MissionLog {
        let outcome = if self.world.phase == Phase::Done {
            MissionOutcome::Done
        } else {
            MissionOutcome::TimedOut
        };
        let summary = MissionSummary {
            success: outcome == MissionOutcome::Done,
            outcome,
            grasp_time: self.grasp_stats.as_ref().map(|g| g.time),
            grasp_position_error: self.grasp_stats.as_ref().map(|g| g.position_error),
            grasp_theta3_error: self.grasp_stats.as_ref().map(|g| g.theta3_error),
            tick_count: self.world.tick,
            sim_time: self.world.clock,
            phase_changes: self.phase_changes.clone(),
        };
        MissionLog {
            outcome,
            records: self.records,
            summary,
        }
    }

    fn set_phase(&mut self, time: f64, phase: Phase) {
        self.world.phase = phase;
        self.phase_changes.push(PhaseChange { time, phase });
    }

    fn at_waypoint(&self) -> bool {
        match self.waypoint {
            Some(wp) => {
                let p = self.world.drone_position;
                let d2 = (wp[0] - p[0]).powi(2) + (wp[1] - p[1]).powi(2) + (wp[2] - p[2]).powi(2);
                d2.sqrt() <= self.config.drone.position_tolerance
            }
            None => false,
        }
    }

    fn plan_arm_to(&mut self, point: [f64; 2], theta3: f64) {
        let mut goal = inverse(&self.config.arm, point[0], point[1]).expect("validated at start");
        goal.theta3 = theta3;
        let states = plan_trajectory(
            &self.world.joints,
            &goal,
            self.config.grasp.arm_speed,
            self.config.dt,
        )
        .expect("positive speed and dt");
        self.arm_plan = Some(ArmPlan {
            states,
            index: 0,
            goal,
        });
    }

    fn advance_phase(&mut self, time: f64, tick: u64) {
        match self.world.phase {
            Phase::Search => {
                if matches!(self.last_fix, Some((t, _)) if t == tick) {
                    self.set_phase(time, Phase::Approach);
                }
            }
            Phase::Approach => {
                let lost = match self.last_fix {
                    Some((t, _)) => tick.saturating_sub(t) > self.config.loss_ticks,
                    None => true,
                };
                if self.config.regress_on_loss && lost {
                    self.waypoint = None;
                    self.set_phase(time, Phase::Search);
                } else if self.at_waypoint() {
                    let theta = self.last_fix.map(|(_, theta)| theta).unwrap_or(0.0);
                    let theta3 = canonical_angle(theta + self.config.grasp.wrist_offset);
                    self.plan_arm_to(self.config.waypoints.grasp_point, theta3);
                    self.set_phase(time, Phase::Grasp);
                }
            }
            Phase::Grasp => {
                let settled = self.arm_plan.as_ref().is_some_and(|p| {
                    p.complete(&self.world.joints, self.config.grasp.settle_tolerance)
                });
                if settled {
                    if let Some(target) = &mut self.world.target {
                        let effector = end_effector_world(
                            &self.config,
                            self.world.drone_position,
                            self.world.drone_yaw,
                            &self.world.joints,
                        );
                        let dist = ((effector[0] - target.position[0]).powi(2)
                            + (effector[1] - target.position[1]).powi(2)
                            + (effector[2] - target.position[2]).powi(2))
                        .sqrt();
                        if dist <= self.config.grasp.alignment {
                            let relative_yaw = canonical_angle(target.yaw - self.world.drone_yaw);
                            self.grasp_stats = Some(GraspStats {
                                time,
                                position_error: dist,
                                theta3_error: wrapped_angle_diff(
                                    self.world.joints.theta3,
                                    relative_yaw,
                                ),
                            });
                            target.grasped = true;
                            self.arm_plan = None;
                            self.waypoint = Some(self.config.waypoints.drop_waypoint);
                            self.set_phase(time, Phase::Deliver);
                        }
                    }
                }
            }
            Phase::Deliver => {
                if self.at_waypoint() {
                    self.plan_arm_to(self.config.waypoints.drop_point, 0.0);
                    self.set_phase(time, Phase::Drop);
                }
            }
            Phase::Drop => {
                let settled = self.arm_plan.as_ref().is_some_and(|p| {
                    p.complete(&self.world.joints, self.config.grasp.settle_tolerance)
                });
                if settled {
                    if let Some(target) = &mut self.world.target {
                        target.grasped = false;
                        target.released = true;
                    }
                    self.arm_plan = None;
                    self.set_phase(time, Phase::Done);
                }
            }
            Phase::Done => {}
        }
    }

    fn current_waypoint(&self) -> [f64; 3] {
        match self.world.phase {
            Phase::Search => {
                let p = self.world.drone_position;
                [
                    p[0] + self.config.search.speed * self.config.search.lookahead,
                    self.search_y,
                    self.config.search.altitude,
                ]
            }
            _ => self.waypoint.unwrap_or(self.world.drone_position),
        }
    }

    fn drone_control(&mut self, dt: f64) -> [f64; 3] {
        if self.world.phase == Phase::Done {
            return [0.0; 3];
        }
        let wp = self.current_waypoint();
        let p = self.world.drone_position;
        let error = [wp[0] - p[0], wp[1] - p[1], wp[2] - p[2]];
        let command = [
            self.pid_x.step(error[0], dt),
            self.pid_y.step(error[1], dt),
            self.pid_z.step(error[2], dt),
        ];
        let lag = (-dt / self.config.drone.velocity_tau).exp();
        for (axis, &cmd) in command.iter().enumerate() {
            let v = cmd + (self.world.drone_velocity[axis] - cmd) * lag;
            self.world.drone_velocity[axis] = v;
            self.world.drone_position[axis] += v * dt;
        }
        error
    }

    fn arm_control(&mut self, dt: f64) {
        let Some(plan) = &mut self.arm_plan else {
            return;
        };
        if plan.index >= plan.states.len() {
            return;
        }
        let next = plan.states[plan.index];
        let model = payload_model(&self.config, &self.world);
        let mut arrived = true;
        let q = self.world.joints;
        let mut updated = q;
        let targets = [next.theta1, next.theta2, next.theta3];
        let current = [q.theta1, q.theta2, q.theta3];
        let mut moved = [0.0; 3];
        for joint in 0..3 {
            let bound = max_compensation_speed(
                self.config.slider.speed,
                &self.config.arm,
                &model,
                &q,
                joint + 1,
            )
            .expect("validated configuration");
            let limit = self.config.grasp.arm_speed.min(bound) * dt;
            let desired = targets[joint] - current[joint];
            if desired.abs() <= limit {
                moved[joint] = targets[joint];
            } else {
                moved[joint] = current[joint] + limit.copysign(desired);
                arrived = false;
            }
        }
        updated.theta1 = moved[0];
        updated.theta2 = moved[1];
        updated.theta3 = moved[2];
        self.world.joints = updated;
        if arrived {
            plan.index += 1;
        }
    }

    fn slider_control(&mut self, dt: f64) {
        let model = payload_model(&self.config, &self.world);
        let target = battery_target(&self.config, &model, &self.world.joints)
            .expect("validated configuration");
        let error = target - self.world.battery_position;
        let speed = self
            .pid_slider
            .step(error, dt)
            .clamp(-self.config.slider.speed, self.config.slider.speed);
        self.world.battery_position += speed * dt;
    }

    fn push_record(&mut self, time: f64, error: [f64; 3]) {
        self.records.push(TickRecord {
            time,
            phase: self.world.phase,
            position: self.world.drone_position,
            yaw: self.world.drone_yaw,
            error,
            joints: self.world.joints,
            battery_position: self.world.battery_position,
        });
    }
}

fn payload_model(config: &MissionConfig, world: &WorldState) -> MassModel {
    let mut model = config.mass.clone();
    if let Some(target) = &world.target {
        if target.grasped {
            let last = model.link_masses.len() - 1;
            model.link_masses[last] += target.mass;
        }
    }
    model
}

fn battery_target(
    config: &MissionConfig,
    model: &MassModel,
    joints: &JointState,
) -> Result<f64, CogError> {
    let transforms = link_transforms(&config.arm, joints);
    let t_0b = arm_to_body(config.arm_mount);
    let cogs: Vec<[f64; 3]> = transforms
        .iter()
        .zip(&model.link_cogs)
        .map(|(t, &cog)| link_cog_in_body(&t_0b, t, cog))
        .collect();
    Ok(battery_position_clamped(model, &cogs, config.slider.range)?.0)
}

fn initial_battery_position(
    config: &MissionConfig,
    joints: &JointState,
) -> Result<f64, MissionError> {
    Ok(battery_target(config, &config.mass, joints)?)
}
