//! Clusters a synthetic box population into anchor shapes, builds the
//! 81-anchor-per-cell grid and round-trips a box through encode/decode.
//!
//! Run with: cargo run --example anchor_shapes

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uamkit::anchors::{
    anchor_angles, decode, encode, kmeans_shapes_with_trace, AnchorGrid, ANCHORS_PER_CELL,
};
use uamkit::geometry::{iou_exact, OrientedBox};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // Three latent size families, mimicking small/medium/large objects.
    let mut boxes = Vec::new();
    for _ in 0..600 {
        let family = rng.random_range(0..3u32);
        let (w0, h0) = match family {
            0 => (8.0, 3.0),
            1 => (18.0, 7.0),
            _ => (34.0, 12.0),
        };
        let w = w0 * rng.random_range(0.8..1.25);
        let h = h0 * rng.random_range(0.8..1.25);
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        boxes.push(
            OrientedBox::new(
                rng.random_range(0.0..400.0),
                rng.random_range(0.0..300.0),
                w,
                h,
                theta,
            )
            .unwrap(),
        );
    }

    let trace = kmeans_shapes_with_trace(&boxes, 9, 42).unwrap();
    println!("k-means objective per accepted iteration (mean 1 - IoU):");
    for (i, value) in trace.objective.iter().enumerate() {
        println!("  iter {i:>2}: {value:.6}");
    }
    println!("\nSelected shapes (w, h), sorted by area:");
    let mut shapes = trace.shapes.clone();
    shapes.sort_by(|a, b| (a.0 * a.1).total_cmp(&(b.0 * b.1)));
    for (w, h) in &shapes {
        println!("  {w:>8.3} x {h:>7.3}");
    }

    println!(
        "\nAnchor angles (radians): {:?}",
        anchor_angles().map(|a| (a * 1000.0).round() / 1000.0)
    );

    let grid = AnchorGrid::new(7, 7, 32.0, shapes.clone()).unwrap();
    let anchors = grid.generate();
    println!(
        "\nGrid 7x7 at stride 32: {} anchors ({} per cell)",
        anchors.len(),
        ANCHORS_PER_CELL
    );

    let gt = OrientedBox::new(107.0, 93.0, 20.0, 8.0, 0.6).unwrap();
    let (best, best_anchor) = anchors
        .iter()
        .map(|a| (iou_exact(&gt, a), a))
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .unwrap();
    println!("\nBest anchor for gt {gt:?}:");
    println!("  anchor {best_anchor:?} (IoU {best:.4})");
    let params = encode(&gt, best_anchor).unwrap();
    let back = decode(&params, best_anchor);
    println!("  encoded {params:?}");
    println!("  decoded {back:?}");
    println!(
        "  roundtrip max field error {:.3e}",
        [
            (back.cx - gt.cx).abs(),
            (back.cy - gt.cy).abs(),
            (back.w - gt.w).abs(),
            (back.h - gt.h).abs(),
            (back.theta - gt.theta).abs()
        ]
        .into_iter()
        .fold(0.0f64, f64::max)
    );
}
