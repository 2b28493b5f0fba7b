//! Runs the full detection post-processing chain on a synthetic prediction
//! map: decode against an anchor grid, oriented NMS, then AP against ground
//! truth.
//!
//! Run with: cargo run --example detect_and_eval

use std::collections::BTreeMap;

use uamkit::anchors::{encode, AnchorGrid};
use uamkit::detection::{
    decode_map, evaluate_ap, nms, Detection, IouMode, PredictionMap, DEFAULT_IMAGE_KEY,
};
use uamkit::geometry::OrientedBox;

fn main() {
    let shapes = vec![
        (12.0, 5.0),
        (16.0, 6.0),
        (20.0, 8.0),
        (24.0, 9.0),
        (28.0, 11.0),
        (32.0, 12.0),
        (40.0, 15.0),
        (48.0, 18.0),
        (56.0, 21.0),
    ];
    let grid = AnchorGrid::new(4, 3, 32.0, shapes).unwrap();
    let anchors = grid.generate();
    println!("Anchor grid 4x3 -> {} anchors", anchors.len());

    // Two planted objects; everything else stays at strongly negative
    // confidence so decoding suppresses it.
    let truths = vec![
        OrientedBox::new(50.0, 40.0, 22.0, 8.5, 0.35).unwrap(),
        OrientedBox::new(100.0, 70.0, 30.0, 12.0, 1.2).unwrap(),
    ];

    let c = 2;
    let entry = 5 + c + 1;
    let mut values = vec![0.0f32; grid.len() * entry];
    for chunk in values.chunks_exact_mut(entry) {
        chunk[entry - 1] = -12.0;
    }
    for (class_id, gt) in truths.iter().enumerate() {
        // Give each object to its two best-matching anchors so NMS has
        // duplicates to merge.
        let mut ranked: Vec<(f64, usize)> = anchors
            .iter()
            .enumerate()
            .map(|(i, a)| (uamkit::geometry::iou_exact(gt, a), i))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (rank, &(iou, index)) in ranked.iter().take(2).enumerate() {
            let params = encode(gt, &anchors[index]).unwrap();
            let chunk = &mut values[index * entry..(index + 1) * entry];
            chunk[0] = params.vx as f32;
            chunk[1] = params.vy as f32;
            chunk[2] = params.vw as f32;
            chunk[3] = params.vh as f32;
            chunk[4] = params.vtheta as f32;
            chunk[5 + class_id] = 6.0;
            chunk[entry - 1] = if rank == 0 { 4.0 } else { 2.0 };
            println!("  planted object {class_id} in anchor {index} (IoU {iou:.3})");
        }
    }

    let map = PredictionMap {
        fw: 4,
        fh: 3,
        k: 81,
        c,
        values,
    };
    let raw = decode_map(&map, &grid, 0.1).unwrap();
    println!("\nDecoded {} raw detections above score 0.1:", raw.len());
    for det in &raw {
        print_det(det);
    }

    let kept = nms(&raw, 0.3, IouMode::Exact);
    println!("\nAfter oriented NMS at 0.3: {} detections", kept.len());
    for det in &kept {
        print_det(det);
    }

    let mut dets = BTreeMap::new();
    dets.insert(DEFAULT_IMAGE_KEY.to_string(), kept);
    let mut gts = BTreeMap::new();
    gts.insert(DEFAULT_IMAGE_KEY.to_string(), truths);
    let ap = evaluate_ap(&dets, &gts, 0.5).unwrap();
    println!("\nAP at IoU 0.5: {ap:.6}");
}

fn print_det(det: &Detection) {
    let b = &det.bbox;
    println!(
        "  class {} score {:.4} box ({:.1}, {:.1}, {:.1}, {:.1}, {:.3})",
        det.class_id, det.score, b.cx, b.cy, b.w, b.h, b.theta
    );
}
