//! Toolkit for a vision-guided aerial manipulator: rotated-box geometry,
//! anchor generation, detection post-processing, planar-arm kinematics,
//! center-of-gravity compensation, target localization, and a deterministic
//! grasping-mission simulator.

pub mod anchors;
pub mod cog;
pub mod detection;
pub mod geometry;
pub mod kinematics;
pub mod localization;
pub mod mission;
