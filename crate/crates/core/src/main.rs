//! Command-line surface over the library: rotated-box IoU, closed-form arm
//! IK, detection evaluation, mission simulation, workspace maps and anchor
//! clustering.
//!
//! Exit codes are stable API: 0 success, 2 parse or configuration errors,
//! 3 out-of-workspace targets, 4 evaluation-input errors, 5 mission timeout.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use uamkit::anchors::kmeans_shapes_with_trace;
use uamkit::detection::{
    evaluate_ap, parse_detections_csv, parse_ground_truth_csv, DetectionError,
};
use uamkit::geometry::{iou_approx, iou_exact, iou_horizontal, OrientedBox};
use uamkit::kinematics::{inverse, workspace, workspace_csv, ArmGeometry, KinematicsError};
use uamkit::mission::{Mission, MissionConfig, MissionOutcome};

const EXIT_PARSE: u8 = 2;
const EXIT_WORKSPACE: u8 = 3;
const EXIT_EVAL: u8 = 4;
const EXIT_TIMEOUT: u8 = 5;

#[derive(Parser)]
#[command(
    name = "uamkit",
    version,
    about = "Desk-scale toolkit for a vision-guided aerial manipulator",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IouMode {
    Exact,
    Approx,
    Horizontal,
}

#[derive(Subcommand)]
enum Command {
    /// Intersection over union of two oriented boxes read from files.
    ///
    /// Each file holds one box, either as JSON ({"cx":..,"cy":..,"w":..,
    /// "h":..,"theta":..}) or as a CSV row "cx,cy,w,h,theta".
    Iou {
        file_a: PathBuf,
        file_b: PathBuf,
        /// IoU definition to apply.
        #[arg(long, value_enum, default_value = "exact")]
        mode: IouMode,
        /// Interpret the theta fields as degrees.
        #[arg(long)]
        degrees: bool,
    },
    /// Closed-form inverse kinematics of the two-link arm, downward elbow.
    Ik {
        /// First link length, metres.
        #[arg(long)]
        l1: f64,
        /// Second link length, metres.
        #[arg(long)]
        l2: f64,
        /// Target x in the arm plane, metres.
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        /// Target y in the arm plane, metres.
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        /// Print the joint angles in degrees instead of radians.
        #[arg(long)]
        degrees: bool,
    },
    /// Average precision of a detection file against ground truth.
    Eval {
        /// Detections CSV: cx,cy,w,h,theta,class_id,score with an optional
        /// leading image column.
        #[arg(long)]
        dets: PathBuf,
        /// Ground-truth CSV: cx,cy,w,h,theta with an optional leading image
        /// column.
        #[arg(long)]
        gts: PathBuf,
        /// IoU matching threshold.
        #[arg(long = "iou", alias = "iou-threshold", default_value_t = 0.5)]
        iou: f64,
    },
    /// Run one grasping mission and report the outcome.
    Simulate {
        /// Mission TOML; omitted means the built-in defaults (no target).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Random-stream seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write <prefix>.csv and <prefix>.json logs.
        #[arg(long)]
        log_out: Option<PathBuf>,
    },
    /// Sample the arm workspace annulus with flow-zone labels as CSV.
    Workspace {
        /// Mission TOML supplying arm geometry, flow model and mount.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Grid spacing, metres.
        #[arg(long, default_value_t = 0.01)]
        resolution: f64,
        /// Output file; omitted prints to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster box footprints into anchor shapes with seeded k-means.
    Anchors {
        /// Boxes CSV: cx,cy,w,h,theta rows, optional leading image column.
        #[arg(long)]
        boxes: PathBuf,
        /// Number of shapes.
        #[arg(long, default_value_t = 9)]
        k: usize,
        /// Random-stream seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; omitted prints to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Iou {
            file_a,
            file_b,
            mode,
            degrees,
        } => cmd_iou(&file_a, &file_b, mode, degrees),
        Command::Ik {
            l1,
            l2,
            x,
            y,
            degrees,
        } => cmd_ik(l1, l2, x, y, degrees),
        Command::Eval { dets, gts, iou } => cmd_eval(&dets, &gts, iou),
        Command::Simulate {
            config,
            seed,
            log_out,
        } => cmd_simulate(config.as_deref(), seed, log_out.as_deref()),
        Command::Workspace {
            config,
            resolution,
            out,
        } => cmd_workspace(config.as_deref(), resolution, out.as_deref()),
        Command::Anchors {
            boxes,
            k,
            seed,
            out,
        } => cmd_anchors(&boxes, k, seed, out.as_deref()),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(path) => fs::write(path, content).map_err(|e| {
            CliError::new(EXIT_PARSE, format!("cannot write {}: {e}", path.display()))
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn read_box(path: &Path, degrees: bool) -> Result<OrientedBox, CliError> {
    let text = read_file(path)?;
    let body = text.trim();
    let parse_err = |e: String| CliError::new(EXIT_PARSE, format!("{}: {e}", path.display()));
    let bbox: OrientedBox = if body.starts_with('{') {
        serde_json::from_str(body).map_err(|e| parse_err(e.to_string()))?
    } else {
        let row = body
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .ok_or_else(|| parse_err("no box row found".into()))?;
        OrientedBox::from_csv_row(row).map_err(|e| parse_err(e.to_string()))?
    };
    let theta = if degrees {
        bbox.theta.to_radians()
    } else {
        bbox.theta
    };
    OrientedBox::new(bbox.cx, bbox.cy, bbox.w, bbox.h, theta).map_err(|e| parse_err(e.to_string()))
}

fn cmd_iou(file_a: &Path, file_b: &Path, mode: IouMode, degrees: bool) -> Result<(), CliError> {
    let a = read_box(file_a, degrees)?;
    let b = read_box(file_b, degrees)?;
    let value = match mode {
        IouMode::Exact => iou_exact(&a, &b),
        IouMode::Approx => iou_approx(&a, &b),
        IouMode::Horizontal => iou_horizontal(&a, &b),
    };
    println!("{value:.6}");
    Ok(())
}

fn cmd_ik(l1: f64, l2: f64, x: f64, y: f64, degrees: bool) -> Result<(), CliError> {
    let geom = ArmGeometry::new(l1, l2, [[-TAU, TAU], [0.0, PI], [-TAU, TAU]])
        .map_err(|e| CliError::new(EXIT_PARSE, e.to_string()))?;
    let q = inverse(&geom, x, y).map_err(|e| match e {
        KinematicsError::OutOfWorkspace { .. } | KinematicsError::LimitViolation { .. } => {
            CliError::new(EXIT_WORKSPACE, e.to_string())
        }
        other => CliError::new(EXIT_PARSE, other.to_string()),
    })?;
    let (theta1, theta2) = if degrees {
        (q.theta1.to_degrees(), q.theta2.to_degrees())
    } else {
        (q.theta1, q.theta2)
    };
    println!("{theta1:.9} {theta2:.9}");
    Ok(())
}

fn cmd_eval(dets_path: &Path, gts_path: &Path, iou: f64) -> Result<(), CliError> {
    if !(iou.is_finite() && (0.0..=1.0).contains(&iou)) {
        return Err(CliError::new(
            EXIT_PARSE,
            format!("iou threshold {iou} not in [0, 1]"),
        ));
    }
    let dets = parse_detections_csv(&read_file(dets_path)?)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", dets_path.display())))?;
    let gts = parse_ground_truth_csv(&read_file(gts_path)?)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", gts_path.display())))?;
    let ap = evaluate_ap(&dets, &gts, iou).map_err(|e| match e {
        DetectionError::NoGroundTruth => CliError::new(EXIT_EVAL, e.to_string()),
        other => CliError::new(EXIT_PARSE, other.to_string()),
    })?;
    println!("{ap:.6}");
    Ok(())
}

fn load_mission_config(path: Option<&Path>) -> Result<MissionConfig, CliError> {
    match path {
        Some(path) => MissionConfig::from_toml(&read_file(path)?)
            .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", path.display()))),
        None => Ok(MissionConfig::default()),
    }
}

fn cmd_simulate(
    config_path: Option<&Path>,
    seed: u64,
    log_out: Option<&Path>,
) -> Result<(), CliError> {
    let config = load_mission_config(config_path)?;
    let mission =
        Mission::new(config, seed).map_err(|e| CliError::new(EXIT_PARSE, e.to_string()))?;
    let log = mission.run();
    if let Some(prefix) = log_out {
        let csv_path = prefix.with_extension("csv");
        let json_path = prefix.with_extension("json");
        fs::write(&csv_path, log.csv()).map_err(|e| {
            CliError::new(
                EXIT_PARSE,
                format!("cannot write {}: {e}", csv_path.display()),
            )
        })?;
        fs::write(&json_path, log.summary_json()).map_err(|e| {
            CliError::new(
                EXIT_PARSE,
                format!("cannot write {}: {e}", json_path.display()),
            )
        })?;
    }
    print!("{}", log.summary_json());
    match log.outcome {
        MissionOutcome::Done => Ok(()),
        MissionOutcome::TimedOut => Err(CliError::new(EXIT_TIMEOUT, "mission timed out")),
    }
}

fn cmd_workspace(
    config_path: Option<&Path>,
    resolution: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let config = load_mission_config(config_path)?;
    let mount = (config.arm_mount[0], config.arm_mount[2]);
    let samples = workspace(&config.arm, &config.flow, mount, resolution)
        .map_err(|e| CliError::new(EXIT_PARSE, e.to_string()))?;
    write_output(out, &workspace_csv(&samples))
}

fn cmd_anchors(boxes_path: &Path, k: usize, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let grouped = parse_ground_truth_csv(&read_file(boxes_path)?)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", boxes_path.display())))?;
    let boxes: Vec<OrientedBox> = grouped.into_values().flatten().collect();
    let trace = kmeans_shapes_with_trace(&boxes, k, seed)
        .map_err(|e| CliError::new(EXIT_PARSE, e.to_string()))?;
    let mut text = serde_json::to_string_pretty(&trace)
        .map_err(|e| CliError::new(EXIT_PARSE, e.to_string()))?;
    text.push('\n');
    write_output(out, &text)
}
