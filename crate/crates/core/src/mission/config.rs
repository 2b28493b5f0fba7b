//! Mission configuration, loadable from TOML.
//!
//! Every section has defaults, so a config file only needs the fields it
//! overrides. A typical file adds a `[target]` section and tweaks waypoints.

use serde::{Deserialize, Serialize};

use crate::cog::MassModel;
use crate::kinematics::{inverse, ArmGeometry, FlowModel};

use super::pid::PidGains;
use super::MissionError;

/// Drone rigid-body and outer-loop control parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroneConfig {
    /// World-frame position at mission start, metres.
    pub start_position: [f64; 3],
    /// Fixed heading for the whole mission, radians.
    pub yaw: f64,
    /// First-order velocity-response time constant, seconds.
    pub velocity_tau: f64,
    /// Shared gains of the three per-axis position loops.
    pub position_pid: PidGains,
    /// Waypoint acceptance radius, metres.
    pub position_tolerance: f64,
}

impl Default for DroneConfig {
    fn default() -> Self {
        Self {
            start_position: [0.0, 0.0, 1.2],
            yaw: 0.0,
            velocity_tau: 0.3,
            position_pid: PidGains {
                kp: 1.2,
                ki: 0.0,
                kd: 0.0,
                output_limit: 0.5,
                integral_limit: 0.5,
            },
            position_tolerance: 0.03,
        }
    }
}

/// Downward-looking pinhole camera intrinsics and mounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    /// Focal length in pixels.
    pub focal_px: f64,
    /// Image width in pixels.
    pub width: u32,
    /// Image height in pixels.
    pub height: u32,
    /// Camera position in the body frame, metres.
    pub offset: [f64; 3],
    /// Closest depth at which the camera still reports the target, metres.
    pub min_depth: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            focal_px: 120.0,
            width: 128,
            height: 96,
            offset: [0.0, 0.0, 0.0],
            min_depth: 0.05,
        }
    }
}

/// Battery-slider geometry and its tracking loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliderConfig {
    /// Travel limit either side of center, metres.
    pub range: f64,
    /// Slider speed limit, metres per second.
    pub speed: f64,
    /// Gains of the slider position loop.
    pub pid: PidGains,
}

impl Default for SliderConfig {
    fn default() -> Self {
        Self {
            range: 0.2,
            speed: 0.15,
            pid: PidGains {
                kp: 8.0,
                ki: 0.0,
                kd: 0.0,
                output_limit: 0.15,
                integral_limit: 0.1,
            },
        }
    }
}

/// Straight-line search sweep parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Cruise speed along the world x axis, metres per second.
    pub speed: f64,
    /// Sweep altitude, metres.
    pub altitude: f64,
    /// Carrot look-ahead horizon, seconds.
    pub lookahead: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            speed: 0.3,
            altitude: 1.2,
            lookahead: 1.0,
        }
    }
}

/// Arm set points, all expressed in the arm plane (x forward, y up, metres).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaypointConfig {
    /// End-effector point used to pick the target up.
    pub grasp_point: [f64; 2],
    /// Tucked cruise pose held while flying.
    pub hold_point: [f64; 2],
    /// End-effector point at which the payload is released.
    pub drop_point: [f64; 2],
    /// World-frame hover point for the delivery leg.
    pub drop_waypoint: [f64; 3],
}

impl Default for WaypointConfig {
    fn default() -> Self {
        Self {
            grasp_point: [0.05, -0.35],
            hold_point: [0.10, -0.15],
            drop_point: [0.30, -0.25],
            drop_waypoint: [0.0, -1.5, 0.6],
        }
    }
}

/// Grasp-execution gates and arm motion limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspConfig {
    /// Greatest end-effector-to-target distance at which the gripper closes, metres.
    pub alignment: f64,
    /// Constant added to the sensed wrist angle, radians.
    pub wrist_offset: f64,
    /// Joint speed cap for planned arm moves, radians per second.
    pub arm_speed: f64,
    /// Joint-settle gate on planned moves, radians.
    pub settle_tolerance: f64,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            alignment: 0.008,
            wrist_offset: 0.0,
            arm_speed: 0.6,
            settle_tolerance: 1e-9,
        }
    }
}

/// Standard deviations of the synthetic detector noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Detection center noise, pixels.
    pub sigma_px: f64,
    /// Detection angle noise, radians.
    pub sigma_theta: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_px: 0.0,
            sigma_theta: 0.0,
        }
    }
}

/// The object to pick up. A mission without one searches until the time cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// Grasp-surface position in the world frame, metres.
    pub position: [f64; 3],
    /// In-plane rotation in the world frame, radians.
    pub yaw: f64,
    /// Footprint (length, width) seen by the camera, metres.
    #[serde(default = "default_target_size")]
    pub size: [f64; 2],
    /// Payload mass added to the arm tip once grasped, kilograms.
    #[serde(default = "default_target_mass")]
    pub mass: f64,
}

fn default_target_size() -> [f64; 2] {
    [0.10, 0.03]
}

fn default_target_mass() -> f64 {
    0.05
}

/// Full mission description. See the module docs for the frame conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    /// Control period, seconds.
    pub dt: f64,
    /// Simulated-time budget before the mission is declared timed out, seconds.
    pub time_cap: f64,
    /// Arm mounting point in the body frame, metres.
    pub arm_mount: [f64; 3],
    /// Re-enter search when the target has been lost; off keeps the last fix.
    pub regress_on_loss: bool,
    /// Consecutive fixless ticks tolerated before regressing.
    pub loss_ticks: u64,
    pub arm: ArmGeometry,
    pub flow: FlowModel,
    pub mass: MassModel,
    pub drone: DroneConfig,
    pub camera: CameraConfig,
    pub slider: SliderConfig,
    pub search: SearchConfig,
    pub waypoints: WaypointConfig,
    pub grasp: GraspConfig,
    pub noise: NoiseConfig,
    pub target: Option<TargetConfig>,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            time_cap: 120.0,
            arm_mount: [0.0, 0.0, 0.0],
            regress_on_loss: false,
            loss_ticks: 25,
            arm: ArmGeometry::default(),
            flow: FlowModel::default(),
            mass: MassModel::default(),
            drone: DroneConfig::default(),
            camera: CameraConfig::default(),
            slider: SliderConfig::default(),
            search: SearchConfig::default(),
            waypoints: WaypointConfig::default(),
            grasp: GraspConfig::default(),
            noise: NoiseConfig::default(),
            target: None,
        }
    }
}

impl MissionConfig {
    /// Parses a TOML document and validates it.
    pub fn from_toml(text: &str) -> Result<Self, MissionError> {
        let config: Self = toml::from_str(text).map_err(|e| MissionError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Serializes the full configuration, defaults included, to TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("mission config serializes")
    }

    /// Rejects configurations the mission could never execute, such as
    /// unreachable arm set points, before any simulation runs.
    pub fn validate(&self) -> Result<(), MissionError> {
        let bad = |msg: String| Err(MissionError::Config(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.time_cap.is_finite() && self.time_cap > self.dt) {
            return bad(format!("time_cap must exceed dt, got {}", self.time_cap));
        }
        if self.arm_mount.iter().any(|v| !v.is_finite()) {
            return bad("arm_mount must be finite".into());
        }
        self.arm.validate()?;
        crate::kinematics::flow_zone(&self.flow, 0.0)
            .map_err(|e| MissionError::Config(e.to_string()))?;
        self.mass
            .validate()
            .map_err(|e| MissionError::Config(e.to_string()))?;
        if self.mass.link_masses.len() != 3 {
            return bad(format!(
                "the arm has 3 links, mass model lists {}",
                self.mass.link_masses.len()
            ));
        }
        if !(self.drone.velocity_tau.is_finite() && self.drone.velocity_tau > 0.0) {
            return bad("drone.velocity_tau must be positive".into());
        }
        if !(self.drone.position_tolerance.is_finite() && self.drone.position_tolerance > 0.0) {
            return bad("drone.position_tolerance must be positive".into());
        }
        if self.drone.start_position.iter().any(|v| !v.is_finite()) || !self.drone.yaw.is_finite() {
            return bad("drone start pose must be finite".into());
        }
        if !(self.camera.focal_px.is_finite() && self.camera.focal_px > 0.0) {
            return bad("camera.focal_px must be positive".into());
        }
        if self.camera.width == 0 || self.camera.height == 0 {
            return bad("camera image must be non-empty".into());
        }
        if !(self.camera.min_depth.is_finite() && self.camera.min_depth > 0.0) {
            return bad("camera.min_depth must be positive".into());
        }
        if !(self.slider.range.is_finite() && self.slider.range > 0.0) {
            return bad("slider.range must be positive".into());
        }
        if !(self.slider.speed.is_finite() && self.slider.speed > 0.0) {
            return bad("slider.speed must be positive".into());
        }
        if !(self.search.speed > 0.0 && self.search.altitude > 0.0 && self.search.lookahead > 0.0) {
            return bad("search speed, altitude and lookahead must be positive".into());
        }
        if !(self.grasp.alignment.is_finite() && self.grasp.alignment > 0.0) {
            return bad("grasp.alignment must be positive".into());
        }
        if !(self.grasp.arm_speed.is_finite() && self.grasp.arm_speed > 0.0) {
            return bad("grasp.arm_speed must be positive".into());
        }
        if !(self.grasp.settle_tolerance.is_finite() && self.grasp.settle_tolerance > 0.0) {
            return bad("grasp.settle_tolerance must be positive".into());
        }
        if !(self.noise.sigma_px >= 0.0 && self.noise.sigma_theta >= 0.0) {
            return bad("noise standard deviations must be non-negative".into());
        }
        for (name, point) in [
            ("grasp_point", self.waypoints.grasp_point),
            ("hold_point", self.waypoints.hold_point),
            ("drop_point", self.waypoints.drop_point),
        ] {
            inverse(&self.arm, point[0], point[1]).map_err(|e| {
                MissionError::Config(format!("waypoints.{name} is not executable: {e}"))
            })?;
        }
        if self.waypoints.drop_waypoint.iter().any(|v| !v.is_finite()) {
            return bad("waypoints.drop_waypoint must be finite".into());
        }
        if let Some(target) = &self.target {
            if target.position.iter().any(|v| !v.is_finite()) || !target.yaw.is_finite() {
                return bad("target pose must be finite".into());
            }
            if !(target.size[0] > 0.0 && target.size[1] > 0.0) {
                return bad("target.size must be positive".into());
            }
            if !(target.mass.is_finite() && target.mass >= 0.0) {
                return bad("target.mass must be non-negative".into());
            }
        }
        Ok(())
    }
}
