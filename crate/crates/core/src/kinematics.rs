//! Planar two-link arm kinematics with a wrist rotation, joint limits,
//! downwash flow zones, and workspace sampling.
//!
//! The arm moves in a vertical plane: joints 1 and 2 position the
//! end-effector, joint 3 only rotates the gripper about the approach axis.
//! The inverse solver always returns the downward-elbow branch
//! (`theta2 in [0, pi]`). Flow zones classify radial distance from the body
//! center into weak or strong rotor-downwash influence.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

/// Errors raised by the kinematics operations.
#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("target ({x}, {y}) is out of the reachable workspace")]
    OutOfWorkspace { x: f64, y: f64 },
    #[error("joint {joint} target {value} outside limits [{min}, {max}]")]
    LimitViolation {
        joint: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("{0}")]
    InvalidInput(String),
}

/// Link lengths and per-joint angle limits of the 3-DoF arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmGeometry {
    pub l1: f64,
    pub l2: f64,
    /// `[min, max]` radians for joints 1..3.
    pub joint_limits: [[f64; 2]; 3],
}

impl ArmGeometry {
    pub fn new(l1: f64, l2: f64, joint_limits: [[f64; 2]; 3]) -> Result<Self, KinematicsError> {
        let geom = Self {
            l1,
            l2,
            joint_limits,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.l1.is_finite() && self.l1 > 0.0 && self.l2.is_finite() && self.l2 > 0.0) {
            return Err(KinematicsError::InvalidInput(format!(
                "link lengths must be positive, got ({}, {})",
                self.l1, self.l2
            )));
        }
        for (i, [lo, hi]) in self.joint_limits.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(KinematicsError::InvalidInput(format!(
                    "joint {} limits [{lo}, {hi}] are inverted",
                    i + 1
                )));
            }
        }
        let [t2_lo, t2_hi] = self.joint_limits[1];
        if t2_lo < 0.0 || t2_hi > PI {
            return Err(KinematicsError::InvalidInput(format!(
                "joint 2 limits [{t2_lo}, {t2_hi}] must stay within [0, pi]"
            )));
        }
        Ok(())
    }

    /// Outer reach `l1 + l2`.
    pub fn reach(&self) -> f64 {
        self.l1 + self.l2
    }

    /// Inner reach `|l1 - l2|`, the radius of the unreachable hole.
    pub fn inner_reach(&self) -> f64 {
        (self.l1 - self.l2).abs()
    }

    /// Checks every joint of `q` against the limits.
    pub fn check_limits(&self, q: &JointState) -> Result<(), KinematicsError> {
        for (i, value) in [q.theta1, q.theta2, q.theta3].into_iter().enumerate() {
            let [min, max] = self.joint_limits[i];
            if value < min || value > max {
                return Err(KinematicsError::LimitViolation {
                    joint: i + 1,
                    value,
                    min,
                    max,
                });
            }
        }
        Ok(())
    }
}

impl Default for ArmGeometry {
    /// A 0.43 m-reach arm with near-symmetric servo ranges.
    fn default() -> Self {
        Self {
            l1: 0.25,
            l2: 0.18,
            joint_limits: [[-3.5, 3.5], [0.0, PI], [-3.5, 3.5]],
        }
    }
}

/// Arm joint angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl JointState {
    pub const ZERO: JointState = JointState {
        theta1: 0.0,
        theta2: 0.0,
        theta3: 0.0,
    };

    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Self {
        Self {
            theta1,
            theta2,
            theta3,
        }
    }
}

/// Planar end-effector position plus the pass-through wrist rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndEffectorPose {
    pub x: f64,
    pub y: f64,
    pub wrist: f64,
}

/// Forward kinematics of the planar pair; the wrist angle is `theta3`
/// unchanged.
pub fn forward(geom: &ArmGeometry, q: &JointState) -> EndEffectorPose {
    let x = geom.l1 * q.theta1.cos() + geom.l2 * (q.theta1 + q.theta2).cos();
    let y = geom.l1 * q.theta1.sin() + geom.l2 * (q.theta1 + q.theta2).sin();
    EndEffectorPose {
        x,
        y,
        wrist: q.theta3,
    }
}

const REACH_TOLERANCE: f64 = 1e-9;

/// Closed-form inverse kinematics, downward-elbow branch.
///
/// `theta2 = +acos((r^2 - l1^2 - l2^2) / (2 l1 l2))` lies in `[0, pi]`;
/// `theta1 = atan2(y, x) - acos((r^2 + l1^2 - l2^2) / (2 l1 r))`. The wrist
/// comes back zeroed; callers set it from the grasp rotation. Targets outside
/// the annulus `[|l1 - l2|, l1 + l2]` (with 1e-9 slack) are rejected, as are
/// solutions violating the joint limits.
pub fn inverse(geom: &ArmGeometry, x: f64, y: f64) -> Result<JointState, KinematicsError> {
    geom.validate()?;
    if !x.is_finite() || !y.is_finite() {
        return Err(KinematicsError::InvalidInput(format!(
            "non-finite target ({x}, {y})"
        )));
    }
    let r2 = x * x + y * y;
    let r = r2.sqrt();
    if r > geom.reach() + REACH_TOLERANCE || r < geom.inner_reach() - REACH_TOLERANCE {
        return Err(KinematicsError::OutOfWorkspace { x, y });
    }
    if r < REACH_TOLERANCE {
        // Only hit when l1 == l2; every theta1 would solve it.
        return Err(KinematicsError::OutOfWorkspace { x, y });
    }
    let cos_t2 =
        ((r2 - geom.l1 * geom.l1 - geom.l2 * geom.l2) / (2.0 * geom.l1 * geom.l2)).clamp(-1.0, 1.0);
    let theta2 = cos_t2.acos();
    let cos_beta =
        ((r2 + geom.l1 * geom.l1 - geom.l2 * geom.l2) / (2.0 * geom.l1 * r)).clamp(-1.0, 1.0);
    let theta1 = y.atan2(x) - cos_beta.acos();
    let q = JointState {
        theta1,
        theta2,
        theta3: 0.0,
    };
    geom.check_limits(&q)?;
    Ok(q)
}

/// Qualitative downwash strength under the airframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowZone {
    Weak,
    Strong,
}

impl fmt::Display for FlowZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowZone::Weak => "weak",
            FlowZone::Strong => "strong",
        })
    }
}

/// Radial thresholds of the downwash profile: flow is weak inside
/// `inner_weak`, peaks near `peak`, and is weak again beyond `outer_weak`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowModel {
    pub inner_weak: f64,
    pub peak: f64,
    pub outer_weak: f64,
}

impl FlowModel {
    pub fn new(inner_weak: f64, peak: f64, outer_weak: f64) -> Result<Self, KinematicsError> {
        let model = Self {
            inner_weak,
            peak,
            outer_weak,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(0.0 < self.inner_weak && self.inner_weak < self.peak && self.peak < self.outer_weak) {
            return Err(KinematicsError::InvalidInput(format!(
                "flow thresholds must satisfy 0 < inner < peak < outer, got ({}, {}, {})",
                self.inner_weak, self.peak, self.outer_weak
            )));
        }
        Ok(())
    }
}

impl Default for FlowModel {
    /// Measured downwash profile of the reference airframe: weak inside
    /// 8 cm, strongest near 21 cm, weak beyond 30 cm.
    fn default() -> Self {
        Self {
            inner_weak: 0.08,
            peak: 0.21,
            outer_weak: 0.30,
        }
    }
}

/// Classifies a radial distance from the body center.
pub fn flow_zone(model: &FlowModel, radial_distance: f64) -> Result<FlowZone, KinematicsError> {
    model.validate()?;
    if radial_distance.is_nan() || radial_distance < 0.0 {
        return Err(KinematicsError::InvalidInput(format!(
            "radial distance must be non-negative, got {radial_distance}"
        )));
    }
    if radial_distance < model.inner_weak || radial_distance > model.outer_weak {
        Ok(FlowZone::Weak)
    } else {
        Ok(FlowZone::Strong)
    }
}

/// One workspace grid point in the arm plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkspaceSample {
    pub x: f64,
    pub y: f64,
    pub zone: FlowZone,
    pub reachable: bool,
}

/// Samples the arm plane on a square grid of the given resolution.
///
/// The grid spans `[-reach, reach]` in both axes. Each point is tagged
/// reachable when [`inverse`] succeeds (annulus and joint limits) and with
/// the flow zone of its distance from the body center, `arm_mount` being the
/// arm base's planar offset from that center. Output order is row-major
/// (y outer, x inner) and deterministic.
pub fn workspace(
    geom: &ArmGeometry,
    model: &FlowModel,
    arm_mount: (f64, f64),
    resolution: f64,
) -> Result<Vec<WorkspaceSample>, KinematicsError> {
    geom.validate()?;
    model.validate()?;
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(KinematicsError::InvalidInput(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let reach = geom.reach();
    let n = ((2.0 * reach) / resolution).floor() as usize + 1;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        let y = -reach + j as f64 * resolution;
        for i in 0..n {
            let x = -reach + i as f64 * resolution;
            let reachable = inverse(geom, x, y).is_ok();
            let body_r = ((x + arm_mount.0).powi(2) + (y + arm_mount.1).powi(2)).sqrt();
            out.push(WorkspaceSample {
                x,
                y,
                zone: flow_zone(model, body_r)?,
                reachable,
            });
        }
    }
    Ok(out)
}

/// Renders workspace samples as CSV with an `x,y,zone,reachable` header.
pub fn workspace_csv(samples: &[WorkspaceSample]) -> String {
    let mut out = String::from("x,y,zone,reachable\n");
    for s in samples {
        out.push_str(&format!("{},{},{},{}\n", s.x, s.y, s.zone, s.reachable));
    }
    out
}

/// Joint-space straight-line trajectory with a shared speed clamp.
///
/// All joints start and finish together: the duration is the slowest
/// joint's `|delta| / max_joint_speed`, split into `ceil(duration / dt)`
/// equal steps. The returned states exclude `from` and end exactly at `to`;
/// `from == to` yields a single element.
pub fn plan_trajectory(
    from: &JointState,
    to: &JointState,
    max_joint_speed: f64,
    dt: f64,
) -> Result<Vec<JointState>, KinematicsError> {
    if !(max_joint_speed.is_finite() && max_joint_speed > 0.0 && dt.is_finite() && dt > 0.0) {
        return Err(KinematicsError::InvalidInput(format!(
            "speed and dt must be positive, got ({max_joint_speed}, {dt})"
        )));
    }
    let deltas = [
        to.theta1 - from.theta1,
        to.theta2 - from.theta2,
        to.theta3 - from.theta3,
    ];
    let duration = deltas.iter().map(|d| d.abs()).fold(0.0f64, f64::max) / max_joint_speed;
    let steps = ((duration / dt).ceil() as usize).max(1);
    let mut out = Vec::with_capacity(steps);
    for i in 1..=steps {
        let s = i as f64 / steps as f64;
        out.push(JointState {
            theta1: from.theta1 + s * deltas[0],
            theta2: from.theta2 + s * deltas[1],
            theta3: from.theta3 + s * deltas[2],
        });
    }
    *out.last_mut().unwrap() = *to;
    Ok(out)
}
