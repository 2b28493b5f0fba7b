//! Runs a complete simulated grasping mission and prints the phase
//! timeline, grasp metrics and a few sampled log rows.
//!
//! Run with: cargo run --example grasp_mission

use std::f64::consts::FRAC_PI_4;

use uamkit::mission::{Mission, MissionConfig, TargetConfig};

fn main() {
    let config = MissionConfig {
        target: Some(TargetConfig {
            position: [1.5, 0.1, 0.05],
            yaw: FRAC_PI_4,
            size: [0.10, 0.03],
            mass: 0.05,
        }),
        ..MissionConfig::default()
    };

    let log = Mission::new(config, 2024).unwrap().run();

    println!("Outcome: {:?}", log.outcome);
    println!("\nPhase timeline:");
    for change in &log.summary.phase_changes {
        println!("  {:>7.2} s  {}", change.time, change.phase);
    }

    println!("\nGrasp metrics:");
    println!(
        "  time            {:>10.2} s",
        log.summary.grasp_time.unwrap()
    );
    println!(
        "  position error  {:>10.4} mm",
        log.summary.grasp_position_error.unwrap() * 1000.0
    );
    println!(
        "  theta3 error    {:>10.3e} rad",
        log.summary.grasp_theta3_error.unwrap()
    );

    println!("\nEvery 100th log row:");
    println!(
        "{:>8} {:>9} {:>8} {:>8} {:>8} {:>8}",
        "time", "phase", "x", "y", "z", "p_b"
    );
    for record in log.records.iter().step_by(100) {
        println!(
            "{:>8.2} {:>9} {:>8.3} {:>8.3} {:>8.3} {:>8.4}",
            record.time,
            record.phase.to_string(),
            record.position[0],
            record.position[1],
            record.position[2],
            record.battery_position
        );
    }

    println!(
        "\nTotal: {} ticks, {:.2} s simulated",
        log.summary.tick_count, log.summary.sim_time
    );
    println!("Re-running with the same seed reproduces this log byte for byte.");
}
