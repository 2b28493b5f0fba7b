//! Rotated-rectangle primitives and intersection-over-union computation.
//!
//! An [`OrientedBox`] is a rectangle `(cx, cy, w, h, theta)` in image pixels.
//! Rectangles have period-pi rotational symmetry, so angles are compared in
//! canonical form `[0, pi)`. Three IoU definitions are provided: the exact
//! polygon-clipping one, a plain axis-aligned one that ignores rotation, and
//! a fast approximation that scales the axis-aligned IoU by angular deviation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by box construction and canonicalization.
#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("box field {field} is not finite")]
    NonFinite { field: &'static str },
    #[error("box field {field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("malformed box record: {0}")]
    Parse(String),
}

/// A rotated rectangle: center, side lengths, and in-plane rotation in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

/// Wraps an angle into `[0, pi)`, the canonical range for rectangle rotations.
pub fn canonical_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly pi for tiny negative inputs.
    if a >= PI {
        a -= PI;
    }
    a
}

/// Absolute angular difference between two rectangle rotations, wrapped into
/// `[0, pi/2]` to respect the period-pi symmetry.
pub fn wrapped_angle_diff(theta_a: f64, theta_b: f64) -> f64 {
    let d = (canonical_angle(theta_a) - canonical_angle(theta_b)).abs();
    d.min(PI - d)
}

impl OrientedBox {
    /// Builds a box, rejecting non-finite fields and non-positive sides.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self, GeometryError> {
        let b = Self {
            cx,
            cy,
            w,
            h,
            theta,
        };
        b.validate()?;
        Ok(b)
    }

    /// Checks the box invariants: finite fields, `w > 0`, `h > 0`.
    pub fn validate(&self) -> Result<(), GeometryError> {
        for (field, value) in [
            ("cx", self.cx),
            ("cy", self.cy),
            ("w", self.w),
            ("h", self.h),
            ("theta", self.theta),
        ] {
            if !value.is_finite() {
                return Err(GeometryError::NonFinite { field });
            }
        }
        if self.w <= 0.0 {
            return Err(GeometryError::NonPositive {
                field: "w",
                value: self.w,
            });
        }
        if self.h <= 0.0 {
            return Err(GeometryError::NonPositive {
                field: "h",
                value: self.h,
            });
        }
        Ok(())
    }

    /// Returns the same footprint with `theta` wrapped into `[0, pi)`.
    pub fn canonicalize(&self) -> Result<OrientedBox, GeometryError> {
        self.validate()?;
        Ok(OrientedBox {
            theta: canonical_angle(self.theta),
            ..*self
        })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// The four vertices in counter-clockwise order; their centroid is the
    /// box center.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.theta.sin_cos();
        let (hw, hh) = (0.5 * self.w, 0.5 * self.h);
        let local = [[hw, hh], [-hw, hh], [-hw, -hh], [hw, -hh]];
        local.map(|[x, y]| [self.cx + c * x - s * y, self.cy + s * x + c * y])
    }

    /// True if the point lies inside the rectangle (boundary counts as in).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.theta.sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        // Rotate into the box frame.
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        u.abs() <= 0.5 * self.w && v.abs() <= 0.5 * self.h
    }

    /// CSV record `cx,cy,w,h,theta`.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.cx, self.cy, self.w, self.h, self.theta
        )
    }

    /// Parses a CSV record `cx,cy,w,h,theta`.
    pub fn from_csv_row(line: &str) -> Result<Self, GeometryError> {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(GeometryError::Parse(format!(
                "expected 5 fields cx,cy,w,h,theta, got {}",
                fields.len()
            )));
        }
        let mut v = [0.0f64; 5];
        for (i, f) in fields.iter().enumerate() {
            v[i] = f
                .parse()
                .map_err(|_| GeometryError::Parse(format!("bad number {f:?}")))?;
        }
        OrientedBox::new(v[0], v[1], v[2], v[3], v[4])
    }
}

fn signed_edge_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// One Sutherland-Hodgman pass: keeps the part of `poly` on the left of the
/// directed edge `a -> b`.
fn clip_against_edge(poly: &[[f64; 2]], a: [f64; 2], b: [f64; 2]) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let s = poly[i];
        let e = poly[(i + 1) % n];
        let sd = signed_edge_distance(a, b, s);
        let ed = signed_edge_distance(a, b, e);
        let s_in = sd >= 0.0;
        let e_in = ed >= 0.0;
        if s_in != e_in {
            let denom = sd - ed;
            if denom != 0.0 {
                let t = sd / denom;
                out.push([s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])]);
            }
        }
        if e_in {
            out.push(e);
        }
    }
    out
}

/// Shoelace area of a simple polygon given in counter-clockwise order.
fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        acc += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * acc
}

/// Area of the convex intersection of two rotated rectangles.
///
/// Clips the vertices of `a` against the four half-planes of `b`; both inputs
/// are convex so the result is exact up to floating arithmetic. Edge-touching
/// rectangles come out as (near-)zero area without special casing.
pub fn intersection_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let mut poly: Vec<[f64; 2]> = a.corners().to_vec();
    let clip = b.corners();
    for i in 0..4 {
        if poly.len() < 3 {
            return 0.0;
        }
        poly = clip_against_edge(&poly, clip[i], clip[(i + 1) % 4]);
    }
    polygon_area(&poly).clamp(0.0, a.area().min(b.area()))
}

/// Exact IoU via polygon clipping.
pub fn iou_exact(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

/// Axis-aligned IoU of the `(cx, cy, w, h)` parts, ignoring rotation.
pub fn iou_horizontal(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let ix = (a.cx + 0.5 * a.w).min(b.cx + 0.5 * b.w) - (a.cx - 0.5 * a.w).max(b.cx - 0.5 * b.w);
    let iy = (a.cy + 0.5 * a.h).min(b.cy + 0.5 * b.h) - (a.cy - 0.5 * a.h).max(b.cy - 0.5 * b.h);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a.area() + b.area() - inter)
}

/// Fast approximate IoU: axis-aligned IoU scaled down by angular deviation.
///
/// The deviation factor is `1 - |dtheta| / pi` with `dtheta` wrapped into
/// `[0, pi/2]` after canonicalization, which keeps the factor in `(1/2, 1]`,
/// makes the result symmetric, and respects the rectangle's period-pi
/// symmetry.
pub fn iou_approx(a: &OrientedBox, b: &OrientedBox) -> f64 {
    iou_horizontal(a, b) * (1.0 - wrapped_angle_diff(a.theta, b.theta) / PI)
}
