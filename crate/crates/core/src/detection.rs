//! Post-network detection pipeline: raw prediction-map decoding, greedy
//! oriented NMS, and single-class average-precision evaluation.
//!
//! A prediction map carries `(5 + c + 1)` values per anchor: five box
//! regression parameters, `c` class logits, and one confidence logit. The
//! detection score composes sigmoid confidence with the best softmax class
//! probability. Evaluation greedily matches detections to ground truths by
//! exact IoU and integrates the precision-recall curve.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchors::{decode, AnchorGrid, EncodedParams};
use crate::geometry::{iou_approx, iou_exact, GeometryError, OrientedBox};

/// Image key used by CSV rows that omit the leading image-id column.
pub const DEFAULT_IMAGE_KEY: &str = "0";

/// Errors raised by the detection pipeline.
#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("prediction map is {map_fw}x{map_fh} with {map_k} anchors, grid is {grid_fw}x{grid_fh} with {grid_k}")]
    DimensionMismatch {
        map_fw: usize,
        map_fh: usize,
        map_k: usize,
        grid_fw: usize,
        grid_fh: usize,
        grid_k: usize,
    },
    #[error("prediction map needs {expected} values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("prediction map needs at least one class")]
    NoClasses,
    #[error("no ground truths in any image, recall is undefined")]
    NoGroundTruth,
    #[error("malformed record: {0}")]
    Parse(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense network output for one feature map.
///
/// `values` is position-major (row, then column), then anchor-major; each
/// anchor contributes `[vx, vy, vw, vh, vtheta | class logits | confidence]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMap {
    pub fw: usize,
    pub fh: usize,
    pub k: usize,
    pub c: usize,
    pub values: Vec<f32>,
}

impl PredictionMap {
    /// Values per anchor: 5 box parameters, `c` class logits, 1 confidence.
    pub fn entry_len(&self) -> usize {
        5 + self.c + 1
    }

    pub fn expected_len(&self) -> usize {
        self.fw * self.fh * self.k * self.entry_len()
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        if self.c == 0 {
            return Err(DetectionError::NoClasses);
        }
        if self.values.len() != self.expected_len() {
            return Err(DetectionError::ValueCount {
                expected: self.expected_len(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    /// Writes the map as little-endian binary: `fw, fh, k, c` as u32 then the
    /// values as f32.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), DetectionError> {
        self.validate()?;
        for n in [self.fw, self.fh, self.k, self.c] {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the binary format written by [`PredictionMap::write_binary`].
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, DetectionError> {
        let mut head = [0u8; 16];
        r.read_exact(&mut head)?;
        let word = |i: usize| {
            u32::from_le_bytes([
                head[4 * i],
                head[4 * i + 1],
                head[4 * i + 2],
                head[4 * i + 3],
            ]) as usize
        };
        let (fw, fh, k, c) = (word(0), word(1), word(2), word(3));
        let mut map = PredictionMap {
            fw,
            fh,
            k,
            c,
            values: Vec::new(),
        };
        let expected = map.expected_len();
        let mut buf = vec![0u8; expected * 4];
        r.read_exact(&mut buf)?;
        map.values = buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        map.validate()?;
        Ok(map)
    }
}

/// One scored, classified, rotated box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: OrientedBox,
    pub class_id: usize,
    pub score: f64,
}

/// Which IoU definition NMS uses for suppression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IouMode {
    Exact,
    Approx,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Largest softmax probability and its index; ties pick the lowest index.
fn softmax_max(logits: &[f32]) -> (usize, f64) {
    let top = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
    let mut denom = 0.0;
    let mut best = 0usize;
    let mut best_logit = f64::NEG_INFINITY;
    for (i, &l) in logits.iter().enumerate() {
        let l = l as f64;
        denom += (l - top).exp();
        if l > best_logit {
            best_logit = l;
            best = i;
        }
    }
    (best, (best_logit - top).exp() / denom)
}

/// Turns a raw prediction map into scored detections.
///
/// Every anchor yields a candidate box via [`decode`]; candidates scoring
/// below `score_floor` are dropped and the rest are returned sorted by
/// descending score (stable, so equal scores keep anchor order).
pub fn decode_map(
    map: &PredictionMap,
    grid: &AnchorGrid,
    score_floor: f64,
) -> Result<Vec<Detection>, DetectionError> {
    map.validate()?;
    if map.fw != grid.fw || map.fh != grid.fh || map.k != grid.anchors_per_cell() {
        return Err(DetectionError::DimensionMismatch {
            map_fw: map.fw,
            map_fh: map.fh,
            map_k: map.k,
            grid_fw: grid.fw,
            grid_fh: grid.fh,
            grid_k: grid.anchors_per_cell(),
        });
    }
    let anchors = grid.generate();
    let entry = map.entry_len();
    let mut out = Vec::new();
    for (anchor, chunk) in anchors.iter().zip(map.values.chunks_exact(entry)) {
        let v = EncodedParams {
            vx: chunk[0] as f64,
            vy: chunk[1] as f64,
            vw: chunk[2] as f64,
            vh: chunk[3] as f64,
            vtheta: chunk[4] as f64,
        };
        let (class_id, class_prob) = softmax_max(&chunk[5..5 + map.c]);
        let score = sigmoid(chunk[5 + map.c] as f64) * class_prob;
        if score < score_floor {
            continue;
        }
        out.push(Detection {
            bbox: decode(&v, anchor),
            class_id,
            score,
        });
    }
    out.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    Ok(out)
}

fn suppression_iou(a: &OrientedBox, b: &OrientedBox, mode: IouMode) -> f64 {
    match mode {
        IouMode::Exact => iou_exact(a, b),
        IouMode::Approx => iou_approx(a, b),
    }
}

/// Greedy per-class non-maximum suppression.
///
/// Detections are visited in descending score order (stable for ties); each
/// kept detection suppresses lower-scored detections of the same class whose
/// IoU with it reaches `iou_threshold`.
pub fn nms(dets: &[Detection], iou_threshold: f64, mode: IouMode) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap());
    let mut suppressed = vec![false; dets.len()];
    let mut kept = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        kept.push(dets[i].clone());
        for &j in &order[pos + 1..] {
            if suppressed[j] || dets[j].class_id != dets[i].class_id {
                continue;
            }
            if suppression_iou(&dets[i].bbox, &dets[j].bbox, mode) >= iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    kept
}

/// Precision-recall integration rule for [`evaluate_ap_interp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Area under the full interpolated curve.
    AllPoints,
    /// Mean of interpolated precision at recalls 0.0, 0.1, ..., 1.0.
    ElevenPoint,
}

/// Single-class average precision with all-points interpolation.
pub fn evaluate_ap(
    dets_per_image: &BTreeMap<String, Vec<Detection>>,
    gts_per_image: &BTreeMap<String, Vec<OrientedBox>>,
    iou_threshold: f64,
) -> Result<f64, DetectionError> {
    evaluate_ap_interp(
        dets_per_image,
        gts_per_image,
        iou_threshold,
        Interpolation::AllPoints,
    )
}

/// Single-class average precision with a selectable interpolation rule.
///
/// Detections across all images are ranked by score (ties broken by image
/// key and then box fields, so input order never matters) and greedily
/// matched to the unmatched ground truth of highest exact IoU in their
/// image; a match requires IoU at or above `iou_threshold`.
pub fn evaluate_ap_interp(
    dets_per_image: &BTreeMap<String, Vec<Detection>>,
    gts_per_image: &BTreeMap<String, Vec<OrientedBox>>,
    iou_threshold: f64,
    interp: Interpolation,
) -> Result<f64, DetectionError> {
    let n_gt: usize = gts_per_image.values().map(Vec::len).sum();
    if n_gt == 0 {
        return Err(DetectionError::NoGroundTruth);
    }

    let mut ranked: Vec<(&String, &Detection)> = dets_per_image
        .iter()
        .flat_map(|(img, dets)| dets.iter().map(move |d| (img, d)))
        .collect();
    ranked.sort_by(|(img_a, a), (img_b, b)| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| img_a.cmp(img_b))
            .then_with(|| {
                let ka = (a.bbox.cx, a.bbox.cy, a.bbox.w, a.bbox.h, a.bbox.theta);
                let kb = (b.bbox.cx, b.bbox.cy, b.bbox.w, b.bbox.h, b.bbox.theta);
                ka.partial_cmp(&kb).unwrap()
            })
            .then_with(|| a.class_id.cmp(&b.class_id))
    });

    let mut matched: BTreeMap<&String, Vec<bool>> = gts_per_image
        .iter()
        .map(|(img, gts)| (img, vec![false; gts.len()]))
        .collect();
    let mut tp_flags = Vec::with_capacity(ranked.len());
    for (img, det) in &ranked {
        let gts = gts_per_image.get(*img).map(Vec::as_slice).unwrap_or(&[]);
        let taken = matched.get_mut(img);
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if taken.as_ref().is_some_and(|t| t[gi]) {
                continue;
            }
            let iou = iou_exact(&det.bbox, gt);
            // Strict greater keeps the lowest index on ties.
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        match (best, taken) {
            (Some((gi, iou)), Some(taken)) if iou >= iou_threshold => {
                taken[gi] = true;
                tp_flags.push(true);
            }
            _ => tp_flags.push(false),
        }
    }

    let mut recalls = Vec::with_capacity(tp_flags.len());
    let mut precisions = Vec::with_capacity(tp_flags.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &is_tp in &tp_flags {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        recalls.push(tp as f64 / n_gt as f64);
        precisions.push(tp as f64 / (tp + fp) as f64);
    }

    Ok(match interp {
        Interpolation::AllPoints => area_under_pr(&recalls, &precisions),
        Interpolation::ElevenPoint => eleven_point(&recalls, &precisions),
    })
}

/// All-points interpolated area: precision envelope from the right, summed
/// over recall increments.
fn area_under_pr(recalls: &[f64], precisions: &[f64]) -> f64 {
    let mut mrec = Vec::with_capacity(recalls.len() + 2);
    mrec.push(0.0);
    mrec.extend_from_slice(recalls);
    mrec.push(1.0);
    let mut mpre = Vec::with_capacity(precisions.len() + 2);
    mpre.push(0.0);
    mpre.extend_from_slice(precisions);
    mpre.push(0.0);
    for i in (0..mpre.len() - 1).rev() {
        mpre[i] = mpre[i].max(mpre[i + 1]);
    }
    let mut ap = 0.0;
    for i in 0..mrec.len() - 1 {
        if mrec[i + 1] != mrec[i] {
            ap += (mrec[i + 1] - mrec[i]) * mpre[i + 1];
        }
    }
    ap
}

fn eleven_point(recalls: &[f64], precisions: &[f64]) -> f64 {
    let mut acc = 0.0;
    for step in 0..=10 {
        let r = step as f64 / 10.0;
        let p = recalls
            .iter()
            .zip(precisions)
            .filter(|(rec, _)| **rec >= r)
            .map(|(_, &p)| p)
            .fold(0.0f64, f64::max);
        acc += p;
    }
    acc / 11.0
}

/// Parses detection CSV rows.
///
/// Rows are either `cx,cy,w,h,theta,class_id,score` (grouped under
/// [`DEFAULT_IMAGE_KEY`]) or `image,cx,cy,w,h,theta,class_id,score`. Blank
/// lines and `#` comments are skipped.
pub fn parse_detections_csv(
    text: &str,
) -> Result<BTreeMap<String, Vec<Detection>>, DetectionError> {
    let mut out: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let (image, rest) = match fields.len() {
            7 => (DEFAULT_IMAGE_KEY.to_string(), &fields[..]),
            8 => (fields[0].to_string(), &fields[1..]),
            n => {
                return Err(DetectionError::Parse(format!(
                    "line {}: expected 7 or 8 fields, got {n}",
                    lineno + 1
                )))
            }
        };
        let num = |s: &str| -> Result<f64, DetectionError> {
            s.parse().map_err(|_| {
                DetectionError::Parse(format!("line {}: bad number {s:?}", lineno + 1))
            })
        };
        let bbox = OrientedBox::new(
            num(rest[0])?,
            num(rest[1])?,
            num(rest[2])?,
            num(rest[3])?,
            num(rest[4])?,
        )?;
        let class_id = rest[5].parse::<usize>().map_err(|_| {
            DetectionError::Parse(format!("line {}: bad class id {:?}", lineno + 1, rest[5]))
        })?;
        let score = num(rest[6])?;
        if !(0.0..=1.0).contains(&score) {
            return Err(DetectionError::Parse(format!(
                "line {}: score {score} outside [0, 1]",
                lineno + 1
            )));
        }
        out.entry(image).or_default().push(Detection {
            bbox,
            class_id,
            score,
        });
    }
    Ok(out)
}

/// Parses ground-truth CSV rows: `cx,cy,w,h,theta` (grouped under
/// [`DEFAULT_IMAGE_KEY`]) or `image,cx,cy,w,h,theta`.
pub fn parse_ground_truth_csv(
    text: &str,
) -> Result<BTreeMap<String, Vec<OrientedBox>>, DetectionError> {
    let mut out: BTreeMap<String, Vec<OrientedBox>> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let (image, rest) = match fields.len() {
            5 => (DEFAULT_IMAGE_KEY.to_string(), &fields[..]),
            6 => (fields[0].to_string(), &fields[1..]),
            n => {
                return Err(DetectionError::Parse(format!(
                    "line {}: expected 5 or 6 fields, got {n}",
                    lineno + 1
                )))
            }
        };
        let row = rest.join(",");
        out.entry(image)
            .or_default()
            .push(OrientedBox::from_csv_row(&row)?);
    }
    Ok(out)
}
