//! Exercises the planar arm: FK/IK roundtrips, joint-limit rejection,
//! flow-zone classification and a workspace map summary.
//!
//! Run with: cargo run --example arm_workspace

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uamkit::kinematics::{
    flow_zone, forward, inverse, plan_trajectory, workspace, ArmGeometry, FlowModel, FlowZone,
    JointState,
};

fn main() {
    let geom = ArmGeometry::default();
    println!(
        "Arm: l1 {} m, l2 {} m, reach [{:.3}, {:.3}] m",
        geom.l1,
        geom.l2,
        geom.inner_reach(),
        geom.reach()
    );

    let q = inverse(&geom, 0.05, -0.35).unwrap();
    println!("\nIK to the grasp point (0.05, -0.35):");
    println!("  theta1 {:.6} rad, theta2 {:.6} rad", q.theta1, q.theta2);
    let pose = forward(&geom, &q);
    println!("  FK check -> ({:.9}, {:.9})", pose.x, pose.y);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut solved = 0;
    for _ in 0..2000 {
        let r = rng.random_range(geom.inner_reach().max(1e-3)..geom.reach());
        let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let (x, y) = (r * phi.cos(), r * phi.sin());
        let Ok(q) = inverse(&geom, x, y) else {
            continue;
        };
        solved += 1;
        let p = forward(&geom, &q);
        worst = worst.max((p.x - x).abs().max((p.y - y).abs()));
    }
    println!("\n{solved}/2000 random annulus points solved within joint limits");
    println!("worst FK(IK) roundtrip error: {worst:.3e}");

    println!("\nUnreachable target (0.5, 0.0):");
    println!("  {:?}", inverse(&geom, 0.5, 0.0));

    let flow = FlowModel::default();
    println!("\nDownwash zones under the airframe:");
    for d in [0.04, 0.08, 0.15, 0.21, 0.30, 0.35] {
        println!("  {:>5.2} m -> {}", d, flow_zone(&flow, d).unwrap());
    }

    let samples = workspace(&geom, &flow, (0.0, 0.0), 0.01).unwrap();
    let reachable = samples.iter().filter(|s| s.reachable).count();
    let strong = samples
        .iter()
        .filter(|s| s.reachable && s.zone == FlowZone::Strong)
        .count();
    println!("\nWorkspace grid at 1 cm: {} samples", samples.len());
    println!("  reachable: {reachable}");
    println!(
        "  reachable but in strong downwash: {strong} ({:.1} %)",
        100.0 * strong as f64 / reachable as f64
    );

    let stow = inverse(&geom, 0.10, -0.15).unwrap();
    let plan = plan_trajectory(&stow, &q, 0.6, 0.02).unwrap();
    println!(
        "\nPlanned stow-to-grasp trajectory: {} steps ({:.2} s at 0.6 rad/s)",
        plan.len(),
        plan.len() as f64 * 0.02
    );
    let final_state: JointState = *plan.last().unwrap();
    println!(
        "  final joint error: ({:.1e}, {:.1e})",
        (final_state.theta1 - q.theta1).abs(),
        (final_state.theta2 - q.theta2).abs()
    );
}
