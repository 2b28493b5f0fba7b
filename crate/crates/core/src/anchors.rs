//! Rotated-anchor grids, k-means shape selection, and the box parameter
//! encode/decode transform.
//!
//! A grid places 81 anchors (9 shapes, 9 fixed angles) at every feature-map
//! cell. Shapes come from k-means over a box corpus using the 1 - IoU
//! distance of co-centered axis-aligned footprints. Ground-truth boxes are
//! regressed against anchors as normalized offsets plus log-scale ratios.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{canonical_angle, GeometryError, OrientedBox};

/// Number of anchor shapes and of anchor angles per grid cell.
pub const SHAPES_PER_CELL: usize = 9;
pub const ANGLES_PER_CELL: usize = 9;
/// Anchors per grid cell: 9 shapes times 9 angles.
pub const ANCHORS_PER_CELL: usize = SHAPES_PER_CELL * ANGLES_PER_CELL;

/// Errors raised by grid construction, clustering, and encoding.
#[derive(Debug, Error, PartialEq)]
pub enum AnchorError {
    #[error("anchor grid needs {expected} shapes, got {got}")]
    ShapeCount { expected: usize, got: usize },
    #[error("anchor shape {index} has non-positive side ({w}, {h})")]
    BadShape { index: usize, w: f64, h: f64 },
    #[error("grid dimensions and stride must be positive")]
    BadGrid,
    #[error("k-means needs at least one box")]
    EmptyBoxes,
    #[error("k-means needs k >= 1")]
    BadK,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// The fixed anchor rotations `{0, pi/9, ..., 8 pi/9}`.
pub fn anchor_angles() -> [f64; ANGLES_PER_CELL] {
    std::array::from_fn(|i| i as f64 * PI / ANGLES_PER_CELL as f64)
}

/// A feature-map-aligned lattice of rotated anchor boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorGrid {
    pub fw: usize,
    pub fh: usize,
    pub stride: f64,
    pub shapes: Vec<(f64, f64)>,
    pub angles: Vec<f64>,
}

impl AnchorGrid {
    /// Builds a grid with the 9 fixed angles; `shapes` must hold 9 positive
    /// `(w, h)` pairs.
    pub fn new(
        fw: usize,
        fh: usize,
        stride: f64,
        shapes: Vec<(f64, f64)>,
    ) -> Result<Self, AnchorError> {
        if fw == 0 || fh == 0 || !(stride.is_finite() && stride > 0.0) {
            return Err(AnchorError::BadGrid);
        }
        if shapes.len() != SHAPES_PER_CELL {
            return Err(AnchorError::ShapeCount {
                expected: SHAPES_PER_CELL,
                got: shapes.len(),
            });
        }
        for (index, &(w, h)) in shapes.iter().enumerate() {
            if !(w.is_finite() && w > 0.0 && h.is_finite() && h > 0.0) {
                return Err(AnchorError::BadShape { index, w, h });
            }
        }
        Ok(Self {
            fw,
            fh,
            stride,
            shapes,
            angles: anchor_angles().to_vec(),
        })
    }

    /// Anchors per cell (81 for a valid grid).
    pub fn anchors_per_cell(&self) -> usize {
        self.shapes.len() * self.angles.len()
    }

    /// Total anchor count `fw * fh * 81`.
    pub fn len(&self) -> usize {
        self.fw * self.fh * self.anchors_per_cell()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Materializes every anchor box.
    ///
    /// Ordering is deterministic: row-major over cells (row, then column),
    /// then shape index, then angle index. Anchor centers sit at cell
    /// centers `((i + 0.5) * stride, (j + 0.5) * stride)`.
    pub fn generate(&self) -> Vec<OrientedBox> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.fh {
            for i in 0..self.fw {
                let cx = (i as f64 + 0.5) * self.stride;
                let cy = (j as f64 + 0.5) * self.stride;
                for &(w, h) in &self.shapes {
                    for &theta in &self.angles {
                        out.push(OrientedBox {
                            cx,
                            cy,
                            w,
                            h,
                            theta,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Regression targets of a ground-truth box against an anchor: normalized
/// center offsets, log-scale side ratios, and a rotation offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodedParams {
    pub vx: f64,
    pub vy: f64,
    pub vw: f64,
    pub vh: f64,
    pub vtheta: f64,
}

/// Encodes `gt` relative to `anchor`.
///
/// `vtheta` is chosen so that `anchor.theta + vtheta` is the canonical
/// rotation of `gt`, which makes [`decode`] land in `[0, pi)` directly.
pub fn encode(gt: &OrientedBox, anchor: &OrientedBox) -> Result<EncodedParams, AnchorError> {
    gt.validate()?;
    anchor.validate()?;
    Ok(EncodedParams {
        vx: (gt.cx - anchor.cx) / anchor.w,
        vy: (gt.cy - anchor.cy) / anchor.h,
        vw: (gt.w / anchor.w).ln(),
        vh: (gt.h / anchor.h).ln(),
        vtheta: canonical_angle(gt.theta) - anchor.theta,
    })
}

/// Algebraic inverse of [`encode`] followed by angle canonicalization.
pub fn decode(v: &EncodedParams, anchor: &OrientedBox) -> OrientedBox {
    OrientedBox {
        cx: anchor.cx + v.vx * anchor.w,
        cy: anchor.cy + v.vy * anchor.h,
        w: anchor.w * v.vw.exp(),
        h: anchor.h * v.vh.exp(),
        theta: canonical_angle(anchor.theta + v.vtheta),
    }
}

/// `1 - IoU` of two `(w, h)` footprints co-centered at the origin with zero
/// rotation, the clustering distance of the YOLO anchor recipe.
pub fn shape_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = a.0.min(b.0) * a.1.min(b.1);
    let union = a.0 * a.1 + b.0 * b.1 - inter;
    1.0 - inter / union
}

/// One accepted Lloyd iteration: the centroids in force and the mean
/// distance they achieve.
#[derive(Debug, Clone, Serialize)]
pub struct KmeansTrace {
    pub shapes: Vec<(f64, f64)>,
    pub objective: Vec<f64>,
}

/// Clusters box `(w, h)` footprints into `k` anchor shapes.
///
/// Seeding is k-means++ driven by a ChaCha stream, so results are
/// reproducible for a fixed seed. Lloyd updates run until the mean
/// `1 - IoU` objective stops improving or 300 iterations pass; an update
/// that would worsen the objective is discarded.
pub fn kmeans_shapes(
    boxes: &[OrientedBox],
    k: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>, AnchorError> {
    kmeans_shapes_with_trace(boxes, k, seed).map(|t| t.shapes)
}

/// As [`kmeans_shapes`], also reporting the per-iteration objective values.
pub fn kmeans_shapes_with_trace(
    boxes: &[OrientedBox],
    k: usize,
    seed: u64,
) -> Result<KmeansTrace, AnchorError> {
    if boxes.is_empty() {
        return Err(AnchorError::EmptyBoxes);
    }
    if k == 0 {
        return Err(AnchorError::BadK);
    }
    for b in boxes {
        b.validate()?;
    }
    let points: Vec<(f64, f64)> = boxes.iter().map(|b| (b.w, b.h)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids: Vec<(f64, f64)> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    while centroids.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .map(|&p| {
                let d = centroids
                    .iter()
                    .map(|&c| shape_distance(p, c))
                    .fold(f64::INFINITY, f64::min);
                d * d
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            // Inverse-CDF draw proportional to squared distance.
            let mut ticket = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in weights.iter().enumerate() {
                ticket -= w;
                if ticket <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[next]);
    }

    let mut objective = Vec::new();
    let mut assignment = vec![0usize; points.len()];
    for _ in 0..300 {
        let mut total = 0.0;
        for (pi, &p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (ci, &c) in centroids.iter().enumerate() {
                let d = shape_distance(p, c);
                if d < best_d {
                    best_d = d;
                    best = ci;
                }
            }
            assignment[pi] = best;
            total += best_d;
        }
        let mean = total / points.len() as f64;
        if let Some(&prev) = objective.last() {
            if mean >= prev {
                break;
            }
        }
        objective.push(mean);

        let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
        for (pi, &ci) in assignment.iter().enumerate() {
            sums[ci].0 += points[pi].0;
            sums[ci].1 += points[pi].1;
            sums[ci].2 += 1;
        }
        let mut next: Vec<(f64, f64)> = Vec::with_capacity(k);
        for (ci, &(sw, sh, n)) in sums.iter().enumerate() {
            if n > 0 {
                next.push((sw / n as f64, sh / n as f64));
            } else {
                // Re-seed an empty cluster to the point farthest from its
                // current centroid; ties resolve to the lowest point index.
                let far = (0..points.len())
                    .max_by(|&ia, &ib| {
                        let da = shape_distance(points[ia], centroids[assignment[ia]]);
                        let db = shape_distance(points[ib], centroids[assignment[ib]]);
                        da.partial_cmp(&db).unwrap().then(ib.cmp(&ia))
                    })
                    .map(|i| points[i])
                    .unwrap_or(centroids[ci]);
                next.push(far);
            }
        }
        if next == centroids {
            break;
        }
        centroids = next;
    }
    if objective.is_empty() {
        // k >= points with an immediate non-improving step still reports the
        // achieved objective.
        let total: f64 = points
            .iter()
            .map(|&p| {
                centroids
                    .iter()
                    .map(|&c| shape_distance(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        objective.push(total / points.len() as f64);
    }
    Ok(KmeansTrace {
        shapes: centroids,
        objective,
    })
}
