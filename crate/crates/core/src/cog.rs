//! Center-of-gravity bookkeeping: rigid transforms, the arm's link-frame
//! chain, and the battery-counterweight position law.
//!
//! The arm shifts the body's center of gravity along x as it moves; a linear
//! slider carries the battery the other way to cancel the moment. The slider
//! axis points opposite the arm's +x, so a positive battery position `p_b`
//! opposes a positive arm moment and `net_x_moment` vanishes at the
//! commanded position.

use nalgebra::{Matrix3, Matrix4, Vector4};
use std::ops::Mul;
use thiserror::Error;

use crate::kinematics::{ArmGeometry, JointState, KinematicsError};

/// Errors raised by transform construction and mass bookkeeping.
#[derive(Debug, Error, PartialEq)]
pub enum CogError {
    #[error("matrix is not a rigid transform: {0}")]
    NotRigid(String),
    #[error("battery mass must be positive, got {0}")]
    BadBatteryMass(f64),
    #[error("mass model invalid: {0}")]
    BadMassModel(String),
    #[error("joint index {0} outside 1..=3")]
    BadJoint(usize),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// A 4x4 homogeneous transform with an orthonormal, orientation-preserving
/// rotation block; validated at construction so downstream math can trust it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform(Matrix4<f64>);

impl RigidTransform {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    /// Validates and wraps a raw matrix: rotation block orthonormal within
    /// 1e-9 with positive determinant, bottom row `(0, 0, 0, 1)`.
    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self, CogError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(CogError::NotRigid("non-finite entries".into()));
        }
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
        let defect = (r.transpose() * r - Matrix3::identity()).abs().max();
        if defect > 1e-9 {
            return Err(CogError::NotRigid(format!(
                "rotation block orthonormality defect {defect:e}"
            )));
        }
        if r.determinant() <= 0.0 {
            return Err(CogError::NotRigid("rotation block is a reflection".into()));
        }
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)] - 1.0];
        if bottom.iter().any(|v| v.abs() > 1e-9) {
            return Err(CogError::NotRigid("bottom row is not (0, 0, 0, 1)".into()));
        }
        Ok(Self(m))
    }

    pub fn translation(x: f64, y: f64, z: f64) -> Self {
        Self(Matrix4::new_translation(&nalgebra::Vector3::new(x, y, z)))
    }

    pub fn rotation_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        #[rustfmt::skip]
        let m = Matrix4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0,   c,  -s, 0.0,
            0.0,   s,   c, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        Self(m)
    }

    pub fn rotation_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        #[rustfmt::skip]
        let m = Matrix4::new(
              c, 0.0,   s, 0.0,
            0.0, 1.0, 0.0, 0.0,
             -s, 0.0,   c, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        Self(m)
    }

    pub fn rotation_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        #[rustfmt::skip]
        let m = Matrix4::new(
              c,  -s, 0.0, 0.0,
              s,   c, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// Rigid inverse: transposed rotation, back-rotated translation.
    pub fn inverse(&self) -> Self {
        let r: Matrix3<f64> = self.0.fixed_view::<3, 3>(0, 0).into();
        let t = nalgebra::Vector3::new(self.0[(0, 3)], self.0[(1, 3)], self.0[(2, 3)]);
        let rt = r.transpose();
        let ti = -(rt * t);
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        m[(0, 3)] = ti.x;
        m[(1, 3)] = ti.y;
        m[(2, 3)] = ti.z;
        Self(m)
    }

    pub fn transform_point(&self, p: [f64; 3]) -> [f64; 3] {
        let v = self.0 * Vector4::new(p[0], p[1], p[2], 1.0);
        [v.x, v.y, v.z]
    }

    pub fn transform_vector(&self, p: [f64; 3]) -> [f64; 3] {
        let v = self.0 * Vector4::new(p[0], p[1], p[2], 0.0);
        [v.x, v.y, v.z]
    }

    pub fn translation_part(&self) -> [f64; 3] {
        [self.0[(0, 3)], self.0[(1, 3)], self.0[(2, 3)]]
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        RigidTransform(self.0 * rhs.0)
    }
}

impl Mul for &RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: &RigidTransform) -> RigidTransform {
        RigidTransform(self.0 * rhs.0)
    }
}

/// Link-frame transforms `T_i^0` of the 3-DoF arm, in the fixed-arm frame.
///
/// Frames sit at the distal end of each link: joint 1 rotates about z and
/// link 1 extends along x, joint 2 likewise, and joint 3 only rotates the
/// gripper about the link-2 axis. Composing the chain places link 2's end at
/// [`crate::kinematics::forward`]'s planar position.
pub fn link_transforms(geom: &ArmGeometry, q: &JointState) -> [RigidTransform; 3] {
    let t1 = RigidTransform::rotation_z(q.theta1) * RigidTransform::translation(geom.l1, 0.0, 0.0);
    let t2 =
        t1 * RigidTransform::rotation_z(q.theta2) * RigidTransform::translation(geom.l2, 0.0, 0.0);
    let t3 = t2 * RigidTransform::rotation_x(q.theta3);
    [t1, t2, t3]
}

/// Maps a link-frame CoG into the body frame: `T_0^B * T_i^0 * cog`.
pub fn link_cog_in_body(
    t0b: &RigidTransform,
    ti0: &RigidTransform,
    cog_link: [f64; 3],
) -> [f64; 3] {
    (t0b * ti0).transform_point(cog_link)
}

/// Per-link masses and link-frame CoG offsets plus the battery mass.
///
/// The last entry plays the payload: it may be zero (nothing grasped) while
/// all other masses must be positive. Typically three entries: the two arm
/// links and the end-effector payload.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MassModel {
    pub link_masses: Vec<f64>,
    pub link_cogs: Vec<[f64; 3]>,
    pub battery_mass: f64,
}

impl MassModel {
    pub fn validate(&self) -> Result<(), CogError> {
        if self.link_masses.len() != self.link_cogs.len() {
            return Err(CogError::BadMassModel(format!(
                "{} masses but {} CoG offsets",
                self.link_masses.len(),
                self.link_cogs.len()
            )));
        }
        for (i, &m) in self.link_masses.iter().enumerate() {
            let payload = i + 1 == self.link_masses.len();
            if !m.is_finite() || m < 0.0 || (!payload && m == 0.0) {
                return Err(CogError::BadMassModel(format!("link {} mass {m}", i + 1)));
            }
        }
        if self.link_cogs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CogError::BadMassModel("non-finite CoG offset".into()));
        }
        if !(self.battery_mass.is_finite() && self.battery_mass > 0.0) {
            return Err(CogError::BadBatteryMass(self.battery_mass));
        }
        Ok(())
    }
}

impl Default for MassModel {
    /// 0.459 kg arm split evenly over two links with mid-link CoGs, no
    /// payload, 0.525 kg battery.
    fn default() -> Self {
        Self {
            link_masses: vec![0.2295, 0.2295, 0.0],
            link_cogs: vec![[-0.125, 0.0, 0.0], [-0.09, 0.0, 0.0], [0.0, 0.0, 0.0]],
            battery_mass: 0.525,
        }
    }
}

/// Battery slider position canceling the arm's x-moment:
/// `p_b = sum(m_i * x_bi) / m_b` over the body-frame CoG x components.
pub fn battery_position(model: &MassModel, body_cogs: &[[f64; 3]]) -> Result<f64, CogError> {
    model.validate()?;
    assert_eq!(
        model.link_masses.len(),
        body_cogs.len(),
        "one body-frame CoG required per link mass"
    );
    let moment: f64 = model
        .link_masses
        .iter()
        .zip(body_cogs)
        .map(|(m, cog)| m * cog[0])
        .sum();
    Ok(moment / model.battery_mass)
}

/// As [`battery_position`], clamped to the physical slider range
/// `[-range, range]`; the flag reports saturation.
pub fn battery_position_clamped(
    model: &MassModel,
    body_cogs: &[[f64; 3]],
    range: f64,
) -> Result<(f64, bool), CogError> {
    if !(range.is_finite() && range > 0.0) {
        return Err(CogError::BadMassModel(format!(
            "slider range {range} must be positive"
        )));
    }
    let ideal = battery_position(model, body_cogs)?;
    let clamped = ideal.clamp(-range, range);
    Ok((clamped, clamped != ideal))
}

/// Residual x-moment (kg·m) about the body center with the battery at `p_b`:
/// `sum(m_i * x_bi) - m_b * p_b`. Zero exactly when `p_b` comes from
/// [`battery_position`].
pub fn net_x_moment(model: &MassModel, body_cogs: &[[f64; 3]], p_b: f64) -> f64 {
    assert_eq!(
        model.link_masses.len(),
        body_cogs.len(),
        "one body-frame CoG required per link mass"
    );
    let moment: f64 = model
        .link_masses
        .iter()
        .zip(body_cogs)
        .map(|(m, cog)| m * cog[0])
        .sum();
    moment - model.battery_mass * p_b
}

const FD_STEP: f64 = 1e-6;
const SENSITIVITY_FLOOR: f64 = 1e-9;

/// Fastest rotation of one joint (1-based index) that the slider can still
/// compensate: `slider_speed / |d p_b / d theta|`, the sensitivity taken by
/// central finite difference with a 1e-6 rad step.
///
/// The arm frame's x-axis is taken parallel to the slider axis, matching the
/// mounting used by the mission simulator. Poses where `p_b` is stationary
/// return `slider_speed / 1e-9`, effectively unlimited.
pub fn max_compensation_speed(
    slider_speed: f64,
    geom: &ArmGeometry,
    model: &MassModel,
    q: &JointState,
    joint: usize,
) -> Result<f64, CogError> {
    if !(slider_speed.is_finite() && slider_speed > 0.0) {
        return Err(CogError::BadMassModel(format!(
            "slider speed {slider_speed} must be positive"
        )));
    }
    if !(1..=3).contains(&joint) {
        return Err(CogError::BadJoint(joint));
    }
    geom.validate()?;
    model.validate()?;
    let p_b_at = |q: &JointState| -> Result<f64, CogError> {
        let transforms = link_transforms(geom, q);
        let identity = RigidTransform::identity();
        let cogs: Vec<[f64; 3]> = transforms
            .iter()
            .zip(&model.link_cogs)
            .map(|(t, &cog)| link_cog_in_body(&identity, t, cog))
            .collect();
        battery_position(model, &cogs)
    };
    let perturb = |delta: f64| -> JointState {
        let mut p = *q;
        match joint {
            1 => p.theta1 += delta,
            2 => p.theta2 += delta,
            _ => p.theta3 += delta,
        }
        p
    };
    let plus = p_b_at(&perturb(FD_STEP))?;
    let minus = p_b_at(&perturb(-FD_STEP))?;
    let sensitivity = ((plus - minus) / (2.0 * FD_STEP)).abs();
    Ok(slider_speed / sensitivity.max(SENSITIVITY_FLOOR))
}
