//! Localizes a detected target in an organized point patch and derives the
//! drone waypoint that brings the arm's grasp point onto it.
//!
//! Run with: cargo run --example target_localization

use std::f64::consts::FRAC_PI_2;

use uamkit::cog::RigidTransform;
use uamkit::detection::Detection;
use uamkit::geometry::OrientedBox;
use uamkit::localization::{grasp_waypoint, localize, subarea_size, PatchPoint, PointPatch};

fn main() {
    // A 64x48 organized patch: depth 0.35 m everywhere, with a hole of
    // invalid pixels the averaging window must skip.
    let (width, height, depth, focal) = (64usize, 48usize, 0.35f64, 120.0f64);
    let mut points = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            if (20..24).contains(&col) && (12..15).contains(&row) {
                points.push(PatchPoint::INVALID);
            } else {
                let x = (col as f64 - width as f64 / 2.0) * depth / focal;
                let y = (row as f64 - height as f64 / 2.0) * depth / focal;
                points.push(PatchPoint::new(x, y, depth));
            }
        }
    }
    let patch = PointPatch::new(width, height, points).unwrap();

    let det = Detection {
        bbox: OrientedBox::new(21.3, 13.2, 12.0, 4.0, 0.8).unwrap(),
        class_id: 0,
        score: 0.93,
    };
    println!(
        "Detection at ({:.1}, {:.1}) px, {}x{} px, window side {}",
        det.bbox.cx,
        det.bbox.cy,
        det.bbox.w,
        det.bbox.h,
        subarea_size(det.bbox.w, det.bbox.h)
    );

    let fix = localize(&patch, &det).unwrap();
    println!(
        "Camera-frame fix: ({:.4}, {:.4}, {:.4}) m, theta {:.3} rad",
        fix.position[0], fix.position[1], fix.position[2], fix.theta
    );

    // Frame chain of the simulator: body at 0.6 m altitude, nadir camera,
    // arm hanging in the body x-z plane.
    let drone_pos = [2.0, -1.0, 0.6];
    let t_bw = RigidTransform::translation(drone_pos[0], drone_pos[1], drone_pos[2]);
    let t_cb =
        RigidTransform::rotation_z(-FRAC_PI_2) * RigidTransform::rotation_x(std::f64::consts::PI);
    let t_0b = RigidTransform::rotation_x(FRAC_PI_2);
    let wp = grasp_waypoint(drone_pos, &t_bw, &t_cb, &t_0b, &fix, (0.05, -0.35));
    println!(
        "\nDrone at ({:.2}, {:.2}, {:.2})",
        drone_pos[0], drone_pos[1], drone_pos[2]
    );
    println!("Grasp waypoint: ({:.4}, {:.4}, {:.4})", wp[0], wp[1], wp[2]);
    println!("Flying there puts the end effector on the target.");
}
