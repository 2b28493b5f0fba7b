//! Target localization from an organized point-cloud patch and the
//! frame-chain computation of the grasp waypoint.
//!
//! The detector gives a rotated box in the image; localization averages the
//! camera-frame points of a small window at the box center, skipping pixels
//! with no depth. The grasp waypoint then maps the camera-frame target into
//! the world and subtracts the arm's grasp-point offset, giving the drone
//! position that places the gripper on the target.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use thiserror::Error;

use crate::cog::RigidTransform;
use crate::detection::Detection;

/// Errors raised by patch handling and localization.
#[derive(Debug, Error)]
pub enum LocalizationError {
    #[error("patch needs {expected} points for {width}x{height}, got {got}")]
    BadPatchSize {
        width: usize,
        height: usize,
        expected: usize,
        got: usize,
    },
    #[error("patch dimensions must be at least 1x1")]
    EmptyPatch,
    #[error("detection center ({cx}, {cy}) outside {width}x{height} patch")]
    CenterOutsideBounds {
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    },
    #[error("no valid depth points in the localization window")]
    NoDepth,
    #[error("malformed patch data: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One pixel of an organized point cloud: camera-frame meters plus a flag
/// marking whether the depth source returned a range here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub valid: bool,
}

impl PatchPoint {
    pub const INVALID: PatchPoint = PatchPoint {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        valid: false,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self {
            x,
            y,
            z,
            valid: true,
        }
    }
}

/// A row-major organized point-cloud patch aligned 1:1 with image pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPatch {
    pub width: usize,
    pub height: usize,
    pub points: Vec<PatchPoint>,
}

impl PointPatch {
    pub fn new(
        width: usize,
        height: usize,
        points: Vec<PatchPoint>,
    ) -> Result<Self, LocalizationError> {
        if width == 0 || height == 0 {
            return Err(LocalizationError::EmptyPatch);
        }
        if points.len() != width * height {
            return Err(LocalizationError::BadPatchSize {
                width,
                height,
                expected: width * height,
                got: points.len(),
            });
        }
        Ok(Self {
            width,
            height,
            points,
        })
    }

    pub fn get(&self, col: usize, row: usize) -> &PatchPoint {
        &self.points[row * self.width + col]
    }

    /// Writes the patch as little-endian binary: `width, height` as u32,
    /// then `x, y, z` as f32 plus one validity byte per pixel.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), LocalizationError> {
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        for p in &self.points {
            for v in [p.x as f32, p.y as f32, p.z as f32] {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&[u8::from(p.valid)])?;
        }
        Ok(())
    }

    /// Reads the binary format written by [`PointPatch::write_binary`].
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, LocalizationError> {
        let mut head = [0u8; 8];
        r.read_exact(&mut head)?;
        let width = u32::from_le_bytes([head[0], head[1], head[2], head[3]]) as usize;
        let height = u32::from_le_bytes([head[4], head[5], head[6], head[7]]) as usize;
        let count = width
            .checked_mul(height)
            .ok_or_else(|| LocalizationError::Parse("dimension overflow".into()))?;
        let mut buf = vec![0u8; count * 13];
        r.read_exact(&mut buf)?;
        let mut points = Vec::with_capacity(count);
        for chunk in buf.chunks_exact(13) {
            let f = |o: usize| {
                f32::from_le_bytes([chunk[o], chunk[o + 1], chunk[o + 2], chunk[o + 3]]) as f64
            };
            let valid = match chunk[12] {
                0 => false,
                1 => true,
                other => {
                    return Err(LocalizationError::Parse(format!(
                        "validity byte must be 0 or 1, got {other}"
                    )))
                }
            };
            points.push(PatchPoint {
                x: f(0),
                y: f(4),
                z: f(8),
                valid,
            });
        }
        PointPatch::new(width, height, points)
    }
}

/// Camera-frame target position and in-image rotation recovered from a
/// detection plus depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetFix {
    pub position: [f64; 3],
    pub theta: f64,
}

/// Side length of the averaging window for a `w x h` pixel detection:
/// 5 when `min(w, h) > 5`, otherwise `min(w, h)` (floored to a pixel count,
/// at least 1). Callers pass box sides of at least one pixel.
pub fn subarea_size(w: f64, h: f64) -> usize {
    let m = w.min(h);
    if m > 5.0 {
        5
    } else {
        (m.floor() as usize).max(1)
    }
}

/// Averages the camera-frame points of the window centered on a detection.
///
/// The window is `k x k` with `k = subarea_size(w, h)`, centered at the
/// rounded box center and shrunk at patch borders. Each axis averages over
/// the valid points only; the detection's rotation passes through unchanged.
pub fn localize(patch: &PointPatch, det: &Detection) -> Result<TargetFix, LocalizationError> {
    let (cx, cy) = (det.bbox.cx, det.bbox.cy);
    let col = cx.round();
    let row = cy.round();
    if col < 0.0 || row < 0.0 || col >= patch.width as f64 || row >= patch.height as f64 {
        return Err(LocalizationError::CenterOutsideBounds {
            cx,
            cy,
            width: patch.width,
            height: patch.height,
        });
    }
    let (col, row) = (col as usize, row as usize);
    let k = subarea_size(det.bbox.w, det.bbox.h);
    let half_lo = (k - 1) / 2;
    let half_hi = k / 2;
    let col_lo = col.saturating_sub(half_lo);
    let col_hi = (col + half_hi).min(patch.width - 1);
    let row_lo = row.saturating_sub(half_lo);
    let row_hi = (row + half_hi).min(patch.height - 1);

    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for r in row_lo..=row_hi {
        for c in col_lo..=col_hi {
            let p = patch.get(c, r);
            if !p.valid {
                continue;
            }
            for (axis, value) in [p.x, p.y, p.z].into_iter().enumerate() {
                sums[axis] += value;
                counts[axis] += 1;
            }
        }
    }
    if counts[0] == 0 {
        return Err(LocalizationError::NoDepth);
    }
    Ok(TargetFix {
        position: [
            sums[0] / counts[0] as f64,
            sums[1] / counts[1] as f64,
            sums[2] / counts[2] as f64,
        ],
        theta: det.bbox.theta,
    })
}

/// World-frame drone position that puts the arm's grasp point on the target:
/// `drone_pos + T_B^W T_C^B [target] - T_B^W T_0^B [x0g, y0g, 0]`.
///
/// `t_bw` maps body to world, `t_cb` camera to body, `t_0b` fixed-arm frame
/// to body; `grasp_point` is the grasp position in the arm plane.
pub fn grasp_waypoint(
    drone_pos: [f64; 3],
    t_bw: &RigidTransform,
    t_cb: &RigidTransform,
    t_0b: &RigidTransform,
    fix: &TargetFix,
    grasp_point: (f64, f64),
) -> [f64; 3] {
    let target_world = (t_bw * t_cb).transform_point(fix.position);
    let grasp_world = (t_bw * t_0b).transform_point([grasp_point.0, grasp_point.1, 0.0]);
    [
        drone_pos[0] + target_world[0] - grasp_world[0],
        drone_pos[1] + target_world[1] - grasp_world[1],
        drone_pos[2] + target_world[2] - grasp_world[2],
    ]
}
