//! Shows the battery slider canceling the arm-induced center-of-gravity
//! shift across a sweep of poses.
//!
//! Run with: cargo run --example cog_compensation

use uamkit::cog::{
    battery_position, battery_position_clamped, link_cog_in_body, link_transforms,
    max_compensation_speed, net_x_moment, MassModel, RigidTransform,
};
use uamkit::kinematics::{forward, ArmGeometry, JointState};

fn main() {
    let geom = ArmGeometry::default();
    let model = MassModel::default();
    let t_0b = RigidTransform::identity();

    println!(
        "Arm sweep with the default mass model (battery {} kg):",
        model.battery_mass
    );
    println!(
        "{:>8} {:>8} {:>10} {:>12} {:>12}",
        "theta1", "theta2", "tip_x", "p_b", "net_moment"
    );
    for i in 0..=8 {
        let theta1 = -1.6 + 0.4 * i as f64;
        let q = JointState::new(theta1, 0.9, 0.0);
        if geom.check_limits(&q).is_err() {
            continue;
        }
        let cogs = body_cogs(&geom, &model, &t_0b, &q);
        let p_b = battery_position(&model, &cogs).unwrap();
        let moment = net_x_moment(&model, &cogs, p_b);
        let tip = forward(&geom, &q);
        println!(
            "{:>8.3} {:>8.3} {:>10.4} {:>12.6} {:>12.3e}",
            q.theta1, q.theta2, tip.x, p_b, moment
        );
    }

    let q = JointState::new(0.3, 0.9, 0.0);
    let cogs = body_cogs(&geom, &model, &t_0b, &q);
    let (clamped, saturated) = battery_position_clamped(&model, &cogs, 0.05).unwrap();
    println!(
        "\nSame pose with a 5 cm slider: p_b {:.4} m (saturated: {saturated})",
        clamped
    );
    let residual = net_x_moment(&model, &cogs, clamped);
    println!("residual moment when saturated: {residual:.6} kg m");

    println!("\nFastest joint speeds a 0.15 m/s slider can still compensate:");
    for joint in 1..=3 {
        let speed = max_compensation_speed(0.15, &geom, &model, &q, joint).unwrap();
        if speed > 1e6 {
            println!("  joint {joint}: unconstrained (CoG insensitive to this joint)");
        } else {
            println!("  joint {joint}: {speed:.3} rad/s");
        }
    }
}

fn body_cogs(
    geom: &ArmGeometry,
    model: &MassModel,
    t_0b: &RigidTransform,
    q: &JointState,
) -> Vec<[f64; 3]> {
    link_transforms(geom, q)
        .iter()
        .zip(&model.link_cogs)
        .map(|(t, &cog)| link_cog_in_body(t_0b, t, cog))
        .collect()
}
