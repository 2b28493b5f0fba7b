//! Release gate: every criterion here must hold, with the tolerances and
//! budgets pinned below. Oracles are implemented inside this file so the
//! checks stay independent of the library internals they validate.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::time::Instant;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uamkit::anchors::{decode, encode, AnchorGrid};
use uamkit::cog::{
    battery_position, link_cog_in_body, link_transforms, net_x_moment, MassModel, RigidTransform,
};
use uamkit::detection::{evaluate_ap, Detection, DetectionError};
use uamkit::geometry::{iou_exact, OrientedBox};
use uamkit::kinematics::{flow_zone, forward, inverse, ArmGeometry, FlowModel, FlowZone};
use uamkit::localization::{localize, subarea_size, PatchPoint, PointPatch};
use uamkit::mission::{Mission, MissionConfig, MissionOutcome, TargetConfig};

#[test]
fn criterion_1_fk_ik_roundtrip_10k_under_1e9() {
    let start = Instant::now();
    let geom = ArmGeometry::new(0.25, 0.18, [[-TAU, TAU], [0.0, PI], [-TAU, TAU]]).unwrap();
    let (inner, outer) = (geom.inner_reach(), geom.reach());
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let r = inner + (outer - inner) * rng.random::<f64>();
        let phi = rng.random_range(-PI..PI);
        let (x, y) = (r * phi.cos(), r * phi.sin());
        let q = inverse(&geom, x, y).expect("annulus target is reachable");
        assert!(
            (0.0..=PI).contains(&q.theta2),
            "theta2 {} outside [0, pi]",
            q.theta2
        );
        let p = forward(&geom, &q);
        worst = worst.max((p.x - x).abs()).max((p.y - y).abs());
        assert!(
            (p.x - x).abs() < 1e-9 && (p.y - y).abs() < 1e-9,
            "roundtrip error at ({x}, {y}): ({:.3e}, {:.3e})",
            (p.x - x).abs(),
            (p.y - y).abs()
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "took {elapsed:?}, budget 1 s (worst {worst:.3e})"
    );
}

fn point_in_box(b: &OrientedBox, x: f64, y: f64) -> bool {
    let (dx, dy) = (x - b.cx, y - b.cy);
    let (c, s) = (b.theta.cos(), b.theta.sin());
    let u = c * dx + s * dy;
    let v = -s * dx + c * dy;
    u.abs() <= b.w / 2.0 && v.abs() <= b.h / 2.0
}

/// Monte-Carlo IoU: 10^6 stratified jittered samples over the smaller box.
fn mc_iou(a: &OrientedBox, b: &OrientedBox, rng: &mut SmallRng) -> f64 {
    const N: usize = 1000;
    let (small, large) = if a.area() <= b.area() { (a, b) } else { (b, a) };
    let (c, s) = (small.theta.cos(), small.theta.sin());
    let mut hits = 0u64;
    for i in 0..N {
        for j in 0..N {
            let u = ((i as f64 + rng.random::<f64>()) / N as f64 - 0.5) * small.w;
            let v = ((j as f64 + rng.random::<f64>()) / N as f64 - 0.5) * small.h;
            let x = small.cx + c * u - s * v;
            let y = small.cy + s * u + c * v;
            if point_in_box(large, x, y) {
                hits += 1;
            }
        }
    }
    let inter = small.area() * hits as f64 / (N * N) as f64;
    inter / (a.area() + b.area() - inter)
}

#[test]
fn criterion_2_iou_exact_matches_monte_carlo_1e3() {
    let start = Instant::now();
    let mut gen = ChaCha8Rng::seed_from_u64(202);
    let mut jitter = SmallRng::seed_from_u64(203);
    let random_box = |rng: &mut ChaCha8Rng| {
        OrientedBox::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(0.4..5.0),
            rng.random_range(0.4..5.0),
            rng.random_range(0.0..PI),
        )
        .unwrap()
    };
    let mut worst = 0.0f64;
    for pair in 0..1000 {
        let a = random_box(&mut gen);
        let b = if pair % 2 == 0 {
            OrientedBox::new(
                a.cx + gen.random_range(-1.5..1.5),
                a.cy + gen.random_range(-1.5..1.5),
                gen.random_range(0.4..5.0),
                gen.random_range(0.4..5.0),
                gen.random_range(0.0..PI),
            )
            .unwrap()
        } else {
            random_box(&mut gen)
        };
        let exact = iou_exact(&a, &b);
        let sampled = mc_iou(&a, &b, &mut jitter);
        let err = (exact - sampled).abs();
        worst = worst.max(err);
        assert!(
            err <= 1e-3,
            "pair {pair}: exact {exact} vs sampled {sampled} (err {err:.2e})"
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 120.0,
        "took {elapsed:?}, budget 2 min (worst {worst:.2e})"
    );
}

#[test]
fn criterion_3_encode_decode_roundtrip_and_grid_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for case in 0..10_000 {
        let gt = OrientedBox::new(
            rng.random_range(-500.0..500.0),
            rng.random_range(-500.0..500.0),
            rng.random_range(0.05..80.0),
            rng.random_range(0.05..80.0),
            rng.random_range(0.0..PI),
        )
        .unwrap();
        let anchor = OrientedBox::new(
            rng.random_range(-500.0..500.0),
            rng.random_range(-500.0..500.0),
            rng.random_range(0.05..80.0),
            rng.random_range(0.05..80.0),
            rng.random_range(0.0..PI),
        )
        .unwrap();
        let params = encode(&gt, &anchor).unwrap();
        let back = decode(&params, &anchor);
        let dtheta = {
            let d = (back.theta - gt.theta).abs();
            d.min(PI - d)
        };
        for (field, err) in [
            ("cx", (back.cx - gt.cx).abs()),
            ("cy", (back.cy - gt.cy).abs()),
            ("w", (back.w - gt.w).abs()),
            ("h", (back.h - gt.h).abs()),
            ("theta", dtheta),
        ] {
            assert!(err < 1e-9, "case {case}: {field} error {err:.3e}");
        }
    }

    let shapes: Vec<(f64, f64)> = (1..=9).map(|i| (4.0 * i as f64, 2.0 * i as f64)).collect();
    for fw in [1usize, 2, 7] {
        for fh in [1usize, 2, 7] {
            let grid = AnchorGrid::new(fw, fh, 16.0, shapes.clone()).unwrap();
            assert_eq!(grid.generate().len(), fw * fh * 81);
            assert_eq!(grid.len(), fw * fh * 81);
        }
    }
}

#[test]
fn criterion_4_cog_identity_and_link_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for case in 0..1000 {
        let geom = ArmGeometry::new(
            rng.random_range(0.1..0.5),
            rng.random_range(0.1..0.5),
            [[-TAU, TAU], [0.0, PI], [-TAU, TAU]],
        )
        .unwrap();
        let q = uamkit::kinematics::JointState::new(
            rng.random_range(-PI..PI),
            rng.random_range(0.0..PI),
            rng.random_range(-PI..PI),
        );
        let model = MassModel {
            link_masses: vec![
                rng.random_range(0.01..1.0),
                rng.random_range(0.01..1.0),
                rng.random_range(0.0..0.5),
            ],
            link_cogs: vec![
                [
                    rng.random_range(-0.4..0.4),
                    rng.random_range(-0.4..0.4),
                    rng.random_range(-0.4..0.4),
                ],
                [
                    rng.random_range(-0.4..0.4),
                    rng.random_range(-0.4..0.4),
                    rng.random_range(-0.4..0.4),
                ],
                [
                    rng.random_range(-0.4..0.4),
                    rng.random_range(-0.4..0.4),
                    rng.random_range(-0.4..0.4),
                ],
            ],
            battery_mass: rng.random_range(0.2..3.0),
        };
        let transforms = link_transforms(&geom, &q);
        let t_0b = RigidTransform::identity();
        let cogs: Vec<[f64; 3]> = transforms
            .iter()
            .zip(&model.link_cogs)
            .map(|(t, &cog)| link_cog_in_body(&t_0b, t, cog))
            .collect();
        let p_b = battery_position(&model, &cogs).unwrap();
        let residual = net_x_moment(&model, &cogs, p_b);
        assert!(
            residual.abs() < 1e-12,
            "case {case}: residual {residual:.3e}"
        );

        let end = transforms[1].translation_part();
        let pose = forward(&geom, &q);
        assert!(
            (end[0] - pose.x).abs() < 1e-9 && (end[1] - pose.y).abs() < 1e-9 && end[2].abs() < 1e-9,
            "case {case}: chain end ({}, {}, {}) vs forward ({}, {})",
            end[0],
            end[1],
            end[2],
            pose.x,
            pose.y
        );
    }
}

#[test]
fn criterion_5_localize_matches_brute_force_and_window_rule() {
    for w in 1..=20u32 {
        for h in 1..=20u32 {
            let expected = if w.min(h) > 5 { 5 } else { w.min(h) as usize };
            assert_eq!(subarea_size(w as f64, h as f64), expected, "({w}, {h})");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for case in 0..1000 {
        let width = rng.random_range(2..32usize);
        let height = rng.random_range(2..32usize);
        let points: Vec<PatchPoint> = (0..width * height)
            .map(|_| {
                if rng.random_bool(0.7) {
                    PatchPoint::new(
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                        rng.random_range(0.1..3.0),
                    )
                } else {
                    PatchPoint::INVALID
                }
            })
            .collect();
        let patch = PointPatch::new(width, height, points.clone()).unwrap();
        let col = rng.random_range(0..width);
        let row = rng.random_range(0..height);
        let det = Detection {
            bbox: OrientedBox::new(
                col as f64 + rng.random_range(-0.49..0.49),
                row as f64 + rng.random_range(-0.49..0.49),
                rng.random_range(1.0..20.0),
                rng.random_range(1.0..20.0),
                rng.random_range(0.0..PI),
            )
            .unwrap(),
            class_id: 0,
            score: 0.9,
        };

        // Brute-force oracle over the same window definition.
        let k = {
            let m = det.bbox.w.min(det.bbox.h);
            if m > 5.0 {
                5
            } else {
                (m.floor() as usize).max(1)
            }
        };
        let col_lo = col.saturating_sub((k - 1) / 2);
        let col_hi = (col + k / 2).min(width - 1);
        let row_lo = row.saturating_sub((k - 1) / 2);
        let row_hi = (row + k / 2).min(height - 1);
        let mut sums = [0.0f64; 3];
        let mut count = 0usize;
        for r in row_lo..=row_hi {
            for c in col_lo..=col_hi {
                let p = &points[r * width + c];
                if p.valid {
                    sums[0] += p.x;
                    sums[1] += p.y;
                    sums[2] += p.z;
                    count += 1;
                }
            }
        }

        let result = localize(&patch, &det);
        if count == 0 {
            assert!(result.is_err(), "case {case}: expected no-depth error");
        } else {
            let fix = result.unwrap();
            let n = count as f64;
            assert_eq!(fix.position[0], sums[0] / n, "case {case} x");
            assert_eq!(fix.position[1], sums[1] / n, "case {case} y");
            assert_eq!(fix.position[2], sums[2] / n, "case {case} z");
            assert_eq!(fix.theta, det.bbox.theta, "case {case} theta");
        }
    }
}

/// Independent AP evaluation: rank, greedy-match, envelope integration.
fn brute_force_ap(
    dets: &BTreeMap<String, Vec<Detection>>,
    gts: &BTreeMap<String, Vec<OrientedBox>>,
    threshold: f64,
) -> f64 {
    let n_gt: usize = gts.values().map(Vec::len).sum();
    let mut ranked: Vec<(String, Detection)> = dets
        .iter()
        .flat_map(|(img, list)| list.iter().map(move |d| (img.clone(), d.clone())))
        .collect();
    ranked.sort_by(|(img_a, a), (img_b, b)| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| img_a.cmp(img_b))
            .then_with(|| {
                (a.bbox.cx, a.bbox.cy, a.bbox.w, a.bbox.h, a.bbox.theta)
                    .partial_cmp(&(b.bbox.cx, b.bbox.cy, b.bbox.w, b.bbox.h, b.bbox.theta))
                    .unwrap()
            })
            .then_with(|| a.class_id.cmp(&b.class_id))
    });
    let mut used: BTreeMap<String, Vec<bool>> = gts
        .iter()
        .map(|(img, list)| (img.clone(), vec![false; list.len()]))
        .collect();
    let mut tps = Vec::new();
    for (img, det) in &ranked {
        let list = gts.get(img).map(Vec::as_slice).unwrap_or(&[]);
        let mut best_iou = f64::NEG_INFINITY;
        let mut best_index = None;
        for (gi, gt) in list.iter().enumerate() {
            if used[img][gi] {
                continue;
            }
            let iou = iou_exact(&det.bbox, gt);
            if iou > best_iou {
                best_iou = iou;
                best_index = Some(gi);
            }
        }
        if let Some(gi) = best_index {
            if best_iou >= threshold {
                used.get_mut(img).unwrap()[gi] = true;
                tps.push(true);
                continue;
            }
        }
        tps.push(false);
    }
    let mut mrec = vec![0.0];
    let mut mpre = vec![0.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    for &is_tp in &tps {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        mrec.push(tp as f64 / n_gt as f64);
        mpre.push(tp as f64 / (tp + fp) as f64);
    }
    mrec.push(1.0);
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

fn ap_fixture() -> (
    BTreeMap<String, Vec<Detection>>,
    BTreeMap<String, Vec<OrientedBox>>,
) {
    let mut dets: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    let mut gts: BTreeMap<String, Vec<OrientedBox>> = BTreeMap::new();
    let gt_box = |cx: f64, theta: f64| OrientedBox::new(cx, 10.0, 8.0, 4.0, theta).unwrap();
    let det_on = |gt: &OrientedBox, score: f64| Detection {
        bbox: *gt,
        class_id: 0,
        score,
    };

    // Images 0..15: one gt each, a perfect detection with descending score,
    // every fifth image adds a far-off false positive.
    for i in 0..15 {
        let img = format!("img{i:02}");
        let gt = gt_box(10.0 * i as f64, (0.2 * i as f64) % PI);
        let mut list = vec![det_on(&gt, 0.95 - 0.02 * i as f64)];
        if i % 5 == 0 {
            list.push(Detection {
                bbox: OrientedBox::new(900.0 + i as f64, 900.0, 8.0, 4.0, 0.0).unwrap(),
                class_id: 0,
                score: 0.5 - 0.01 * i as f64,
            });
        }
        gts.insert(img.clone(), vec![gt]);
        dets.insert(img, list);
    }

    // Image 15: two gts; a perfect hit plus a duplicate on the same gt that
    // must count as a false positive; the second gt stays unmatched.
    let g15a = gt_box(0.0, 0.3);
    let g15b = gt_box(50.0, 1.1);
    dets.insert(
        "img15".into(),
        vec![
            det_on(&g15a, 0.93),
            Detection {
                bbox: OrientedBox::new(1.0, 10.0, 8.0, 4.0, 0.3).unwrap(),
                class_id: 0,
                score: 0.40,
            },
        ],
    );
    gts.insert("img15".into(), vec![g15a, g15b]);

    // Image 16: detection overlapping its gt below the matching threshold.
    let g16 = gt_box(0.0, 0.0);
    dets.insert(
        "img16".into(),
        vec![Detection {
            bbox: OrientedBox::new(5.5, 10.0, 8.0, 4.0, 0.0).unwrap(),
            class_id: 0,
            score: 0.35,
        }],
    );
    gts.insert("img16".into(), vec![g16]);

    // Image 17: a missed gt, no detections at all.
    gts.insert("img17".into(), vec![gt_box(7.0, 0.9)]);

    // Image 18: two gts hit by two detections sharing one score, which
    // exercises the deterministic tie-break.
    let g18a = gt_box(0.0, 0.5);
    let g18b = gt_box(40.0, 2.5);
    dets.insert(
        "img18".into(),
        vec![det_on(&g18a, 0.66), det_on(&g18b, 0.66)],
    );
    gts.insert("img18".into(), vec![g18a, g18b]);

    // Image 19: a false positive on an image with no ground truth.
    dets.insert(
        "img19".into(),
        vec![Detection {
            bbox: OrientedBox::new(3.0, 3.0, 8.0, 4.0, 0.2).unwrap(),
            class_id: 0,
            score: 0.2,
        }],
    );

    (dets, gts)
}

#[test]
fn criterion_6_ap_matches_brute_force_and_is_permutation_invariant() {
    let (dets, gts) = ap_fixture();
    assert_eq!(gts.len(), 19);
    assert_eq!(dets.len(), 19);
    let reference = evaluate_ap(&dets, &gts, 0.5).unwrap();
    let oracle = brute_force_ap(&dets, &gts, 0.5);
    assert_eq!(reference, oracle, "library {reference} vs oracle {oracle}");
    assert!(
        reference > 0.0 && reference < 1.0,
        "fixture should be imperfect: {reference}"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..5 {
        let mut shuffled = dets.clone();
        for list in shuffled.values_mut() {
            for i in (1..list.len()).rev() {
                let j = rng.random_range(0..=i);
                list.swap(i, j);
            }
        }
        let permuted = evaluate_ap(&shuffled, &gts, 0.5).unwrap();
        assert_eq!(reference, permuted);
    }

    let empty: BTreeMap<String, Vec<OrientedBox>> = BTreeMap::new();
    assert!(matches!(
        evaluate_ap(&dets, &empty, 0.5),
        Err(DetectionError::NoGroundTruth)
    ));
}

#[test]
fn criterion_7_ten_zero_noise_missions_all_succeed() {
    let start = Instant::now();
    let scenarios: [([f64; 3], f64); 10] = [
        ([1.5, 0.1, 0.05], FRAC_PI_4),
        ([0.9, -0.2, 0.05], 0.0),
        ([1.2, 0.25, 0.05], PI / 8.0),
        ([1.8, -0.1, 0.05], 3.0 * PI / 8.0),
        ([2.2, 0.0, 0.05], FRAC_PI_2),
        ([1.0, 0.15, 0.08], 5.0 * PI / 8.0),
        ([1.6, -0.25, 0.05], 3.0 * FRAC_PI_4),
        ([2.0, 0.2, 0.08], 7.0 * PI / 8.0),
        ([1.4, 0.0, 0.05], 0.1),
        ([1.1, -0.15, 0.05], 1.0),
    ];
    for (index, (position, yaw)) in scenarios.iter().enumerate() {
        let config = MissionConfig {
            target: Some(TargetConfig {
                position: *position,
                yaw: *yaw,
                size: [0.10, 0.03],
                mass: 0.05,
            }),
            ..MissionConfig::default()
        };
        let seed = index as u64;
        let log = Mission::new(config.clone(), seed).unwrap().run();
        assert_eq!(
            log.outcome,
            MissionOutcome::Done,
            "scenario {index} ended {:?}",
            log.summary
        );
        let grasp_err = log.summary.grasp_position_error.unwrap();
        assert!(
            grasp_err <= 0.01,
            "scenario {index}: grasp error {grasp_err}"
        );
        let theta_err = log.summary.grasp_theta3_error.unwrap();
        assert!(
            theta_err <= 1e-6,
            "scenario {index}: theta3 error {theta_err}"
        );

        let replay = Mission::new(config, seed).unwrap().run();
        assert_eq!(log.csv(), replay.csv(), "scenario {index}: csv differs");
        assert_eq!(
            log.summary_json(),
            replay.summary_json(),
            "scenario {index}: summary differs"
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "took {elapsed:?}, budget 30 s"
    );
}

#[test]
fn criterion_8_flow_zones_match_reported_pattern() {
    let flow = FlowModel::default();
    assert_eq!(flow.inner_weak, 0.08);
    assert_eq!(flow.peak, 0.21);
    assert_eq!(flow.outer_weak, 0.30);
    assert_eq!(flow_zone(&flow, 0.04).unwrap(), FlowZone::Weak);
    assert_eq!(flow_zone(&flow, 0.21).unwrap(), FlowZone::Strong);
    assert_eq!(flow_zone(&flow, 0.35).unwrap(), FlowZone::Weak);
}
