//! Independent oracles and constructed scenes shared by the integration
//! tests and the acceptance harness. Each `check_*` returns a one-line
//! summary on success and a reason on failure.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use openloop::dataio::{generate_synthetic, Dataset, SyntheticConfig};
use openloop::metrics::{
    audit_gt_collisions, box_distance, collision_at_waypoint, collision_rate, exact_intersects, l2_errors,
    penetration_depth, AuditReport, CollisionOptions, EgoSpec, Extent, OccupancyGrid, OccupancyRule,
};
use openloop::model::{coincidence_weights, loss, Gradients, InputMask, LossConfig, Mlp, OUTPUT_DIM};
use openloop::trainer::{train, TrainConfig};
use openloop::types::{derive_command, EgoSample, Kinematics, OrientedBox, Pose2, Trajectory};
use openloop::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- gradients

/// Plain forward pass returning every pre-activation and the output.
fn naive_forward(net: &Mlp, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut pre = Vec::new();
    let mut a = x.to_vec();
    let last = net.layers.len() - 1;
    for (k, layer) in net.layers.iter().enumerate() {
        let z: Vec<f64> = (0..layer.out_dim)
            .map(|o| {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut acc = layer.bias[o];
                for (w, v) in row.iter().zip(&a) {
                    acc += w * v;
                }
                acc
            })
            .collect();
        a = if k == last {
            z.clone()
        } else {
            z.iter().map(|v| v.max(0.0)).collect()
        };
        pre.push(z);
    }
    (pre, a)
}

/// Weight 0.5 when x and y share a `g`-sized bin with the target, else 1.
fn oracle_weights(out: &[f64], gt: &[f64], g: f64) -> Vec<f64> {
    (0..out.len() / 3)
        .map(|i| {
            let same = |j: usize| (out[3 * i + j] / g).floor() == (gt[3 * i + j] / g).floor();
            if same(0) && same(1) {
                0.5
            } else {
                1.0
            }
        })
        .collect()
}

fn oracle_loss(out: &[f64], gt: &[f64], w: &[f64]) -> f64 {
    let n = w.len() as f64;
    (0..out.len()).map(|i| w[i / 3] * (out[i] - gt[i]).abs()).sum::<f64>() / n
}

/// Everything that must stay fixed between `θ ± h` for the loss to be smooth there.
#[derive(PartialEq)]
struct KinkPattern {
    relu: Vec<bool>,
    residual: Vec<bool>,
    weights: Vec<f64>,
}

fn pattern(net: &Mlp, x: &[f64], gt: &[f64], g: f64) -> (KinkPattern, f64, Vec<f64>) {
    let (pre, out) = naive_forward(net, x);
    let relu = pre[..pre.len() - 1].iter().flatten().map(|&z| z > 0.0).collect();
    let residual = out.iter().zip(gt).map(|(o, t)| o > t).collect();
    let weights = oracle_weights(&out, gt, g);
    let min_residual = out
        .iter()
        .zip(gt)
        .map(|(o, t)| (o - t).abs())
        .fold(f64::INFINITY, f64::min);
    (
        KinkPattern {
            relu,
            residual,
            weights,
        },
        min_residual,
        out,
    )
}

#[derive(Debug, Default)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Central finite differences against `Mlp::backward` on random small networks.
pub fn gradient_check(nets: usize, seed: u64) -> Result<GradCheck, String> {
    const H: f64 = 1e-5;
    const KINK: f64 = 1e-6;
    let cfg = LossConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheck::default();
    for n in 0..nets {
        let mask = InputMask::full();
        let mut net =
            Mlp::init(&[mask.input_dim(), 8, 8, OUTPUT_DIM], mask, seed + n as u64).map_err(|e| e.to_string())?;
        for layer in &mut net.layers {
            layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        let x: Vec<f64> = (0..mask.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let gt = Trajectory::new(
            (0..6)
                .map(|_| {
                    Pose2::new(
                        rng.random_range(-1.5..1.5),
                        rng.random_range(-1.5..1.5),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect(),
        );
        let gt_flat = gt.to_flat();

        let (base, min_residual, out) = pattern(&net, &x, &gt_flat, cfg.grid_size);
        let lib_out = net.forward_raw(&x).map_err(|e| e.to_string())?;
        ensure(lib_out.iter().zip(&out).all(|(a, b)| (a - b).abs() <= 1e-12), || {
            format!("net {n}: forward disagrees with the plain oracle")
        })?;
        let lib_w = coincidence_weights(&lib_out, &gt_flat, &cfg);
        ensure(lib_w.as_slice() == base.weights.as_slice(), || {
            format!("net {n}: re-weighting disagrees")
        })?;
        if min_residual < KINK {
            report.skipped += net.num_params();
            continue;
        }

        let mut grads = Gradients::zeros_like(&net);
        net.backward(&x, &gt, &cfg, &mut grads).map_err(|e| e.to_string())?;

        for k in 0..net.layers.len() {
            let n_w = net.layers[k].weights.len();
            for idx in 0..n_w + net.layers[k].bias.len() {
                let analytic = if idx < n_w {
                    grads.weights[k][idx]
                } else {
                    grads.biases[k][idx - n_w]
                };
                let eval = |delta: f64| {
                    let mut probe = net.clone();
                    let layer = &mut probe.layers[k];
                    if idx < n_w {
                        layer.weights[idx] += delta;
                    } else {
                        layer.bias[idx - n_w] += delta;
                    }
                    let (p, min_r, out) = pattern(&probe, &x, &gt_flat, cfg.grid_size);
                    (p, min_r, oracle_loss(&out, &gt_flat, &base.weights))
                };
                let (p_plus, r_plus, l_plus) = eval(H);
                let (p_minus, r_minus, l_minus) = eval(-H);
                if p_plus != base || p_minus != base || r_plus < KINK || r_minus < KINK {
                    report.skipped += 1;
                    continue;
                }
                let numeric = (l_plus - l_minus) / (2.0 * H);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                report.max_rel_err = report.max_rel_err.max(rel);
                report.checked += 1;
            }
        }
    }
    Ok(report)
}

pub fn check_gradients() -> Check {
    let r = gradient_check(20, 7)?;
    ensure(r.checked > r.skipped, || {
        format!(
            "too few parameters checked ({} of {})",
            r.checked,
            r.checked + r.skipped
        )
    })?;
    ensure(r.max_rel_err < 1e-4, || {
        format!("max relative error {:.3e} >= 1e-4", r.max_rel_err)
    })?;
    Ok(format!(
        "20 networks, {} parameters checked, max relative error {:.2e}",
        r.checked, r.max_rel_err
    ))
}

// ---------------------------------------------------------------- overfit

/// Extrapolates the last history step at constant velocity and yaw rate.
pub fn constant_velocity(sample: &EgoSample) -> Trajectory {
    let h = &sample.history.waypoints;
    let (prev, now) = (h[h.len() - 2], h[h.len() - 1]);
    let (dx, dy, dt) = (now.x - prev.x, now.y - prev.y, now.theta - prev.theta);
    Trajectory::new(
        (1..=sample.gt_future.len())
            .map(|k| {
                let k = k as f64;
                Pose2::new(now.x + k * dx, now.y + k * dy, now.theta + k * dt)
            })
            .collect(),
    )
}

/// Mean absolute error per waypoint, summed over x, y and heading.
fn mean_waypoint_l1(preds: &[Trajectory], ds: &Dataset) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for (p, s) in preds.iter().zip(&ds.samples) {
        for (a, b) in p.waypoints.iter().zip(&s.gt_future.waypoints) {
            total += (a.x - b.x).abs() + (a.y - b.y).abs() + (a.theta - b.theta).abs();
            count += 1;
        }
    }
    total / count as f64
}

fn mean_l2(preds: &[Trajectory], ds: &Dataset) -> f64 {
    preds
        .iter()
        .zip(&ds.samples)
        .map(|(p, s)| l2_errors(p, &s.gt_future).unwrap().avg)
        .sum::<f64>()
        / ds.len() as f64
}

#[derive(Debug)]
pub struct Overfit {
    pub steps: usize,
    pub model_l1: f64,
    pub oracle_l1: f64,
    pub model_l2: f64,
    pub oracle_l2: f64,
}

pub fn overfit_run() -> Result<Overfit, String> {
    let ds = generate_synthetic(&SyntheticConfig {
        n_samples: 64,
        straight_fraction: 1.0,
        obstacle_density: 0.0,
        rng_seed: 11,
        ..SyntheticConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let mut net = Mlp::planner(InputMask::full(), 0).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        lr0: 1e-3,
        epochs: 125,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let log = train(&ds, &mut net, &cfg).map_err(|e| e.to_string())?;
    let preds: Vec<Trajectory> = ds.samples.iter().map(|s| net.predict(s).unwrap()).collect();
    let oracle: Vec<Trajectory> = ds.samples.iter().map(constant_velocity).collect();
    Ok(Overfit {
        steps: log.steps(),
        model_l1: mean_waypoint_l1(&preds, &ds),
        oracle_l1: mean_waypoint_l1(&oracle, &ds),
        model_l2: mean_l2(&preds, &ds),
        oracle_l2: mean_l2(&oracle, &ds),
    })
}

pub fn check_overfit() -> Check {
    let r = overfit_run()?;
    ensure(r.steps == 2000, || format!("ran {} steps, expected 2000", r.steps))?;
    ensure(r.oracle_l1 < 1e-6, || format!("oracle L1 {:.3e} >= 1e-6", r.oracle_l1))?;
    ensure(r.model_l1 < 0.05, || format!("model L1 {:.4} >= 0.05", r.model_l1))?;
    ensure((r.model_l2 - r.oracle_l2).abs() <= 0.1, || {
        format!("model avg L2 {:.4} vs oracle {:.4}", r.model_l2, r.oracle_l2)
    })?;
    Ok(format!(
        "model L1 {:.4} m, oracle L1 {:.1e} m, avg L2 {:.4} vs {:.1e} m",
        r.model_l1, r.oracle_l1, r.model_l2, r.oracle_l2
    ))
}

// ---------------------------------------------------------------- loss

fn one_off(i: usize, pred: (f64, f64), gt: (f64, f64)) -> (Trajectory, Trajectory) {
    let base: Vec<Pose2> = (1..=6).map(|k| Pose2::new(3.0 * k as f64 + 0.25, 0.25, 0.0)).collect();
    let mut p = base.clone();
    let mut g = base;
    p[i] = Pose2::new(pred.0, pred.1, 0.0);
    g[i] = Pose2::new(gt.0, gt.1, 0.0);
    (Trajectory::new(p), Trajectory::new(g))
}

pub fn check_loss_reweighting() -> Check {
    let cfg = LossConfig::default();
    // (pred xy, gt xy, expected weight on the perturbed waypoint)
    let cases = [
        ((1.6, 0.1), (1.9, 0.4), 0.5),
        ((1.5, 1.5), (1.99, 1.99), 0.5),
        ((1.9, 0.1), (2.1, 0.1), 1.0),
        ((1.6, 0.4), (1.9, 0.6), 1.0),
        ((-0.1, 0.2), (0.1, 0.2), 1.0),
        ((-0.4, -0.1), (-0.1, -0.4), 0.5),
        ((1.5, 0.0), (2.0, 0.0), 1.0),
    ];
    for (n, &(pred, gt, w)) in cases.iter().enumerate() {
        let (p, g) = one_off(2, pred, gt);
        let out = loss(&p, &g, &cfg).map_err(|e| e.to_string())?;
        let mut expected_w = [0.5; 6];
        expected_w[2] = w;
        ensure(out.weights == expected_w, || {
            format!("case {n}: weights {:?}", out.weights)
        })?;
        let expected = w * ((pred.0 - gt.0).abs() + (pred.1 - gt.1).abs()) / 6.0;
        ensure((out.loss - expected).abs() <= 1e-12, || {
            format!("case {n}: loss {} vs {}", out.loss, expected)
        })?;
    }
    Ok(format!("{} hand-built cases", cases.len()))
}

// ---------------------------------------------------------------- geometry

/// Point-in-box test in the box's own frame.
pub fn point_in_box(b: &OrientedBox, x: f64, y: f64) -> bool {
    let (dx, dy) = (x - b.cx, y - b.cy);
    let (s, c) = b.heading.sin_cos();
    let u = dx * c + dy * s;
    let v = -dx * s + dy * c;
    u.abs() <= b.length / 2.0 && v.abs() <= b.width / 2.0
}

fn aabb(b: &OrientedBox) -> (f64, f64, f64, f64) {
    let (s, c) = b.heading.sin_cos();
    let hx = (b.length * c.abs() + b.width * s.abs()) / 2.0;
    let hy = (b.length * s.abs() + b.width * c.abs()) / 2.0;
    (b.cx - hx, b.cx + hx, b.cy - hy, b.cy + hy)
}

/// Random pair near (10, 0): an ego pose and spec, plus one obstacle box.
pub fn random_pair(rng: &mut ChaCha8Rng) -> (Pose2, EgoSpec, OrientedBox) {
    let ego = EgoSpec {
        length: rng.random_range(1.0..6.0),
        width: rng.random_range(0.5..3.0),
    };
    let pose = Pose2::new(
        10.0 + rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-PI..PI),
    );
    let obstacle = OrientedBox::new(
        pose.x + rng.random_range(-5.0..5.0),
        pose.y + rng.random_range(-5.0..5.0),
        rng.random_range(-PI..PI),
        rng.random_range(0.5..8.0),
        rng.random_range(0.5..3.0),
    );
    (pose, ego, obstacle)
}

/// Monte Carlo check of the separating-axis test: a shared sample point
/// proves intersection; clearly overlapping pairs must yield one.
pub fn monte_carlo_intersection(pairs: usize, points: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut hits, mut deep) = (0, 0);
    for n in 0..pairs {
        let (pose, ego, b) = random_pair(&mut rng);
        let a = ego.box_at(&pose);
        let (ax0, ax1, ay0, ay1) = aabb(&a);
        let (bx0, bx1, by0, by1) = aabb(&b);
        let (x0, x1, y0, y1) = (ax0.max(bx0), ax1.min(bx1), ay0.max(by0), ay1.min(by1));
        let mut found = false;
        if x0 < x1 && y0 < y1 {
            for _ in 0..points {
                let (x, y) = (rng.random_range(x0..x1), rng.random_range(y0..y1));
                if point_in_box(&a, x, y) && point_in_box(&b, x, y) {
                    found = true;
                    break;
                }
            }
        }
        let sat = exact_intersects(&a, &b);
        ensure(!found || sat, || {
            format!("pair {n}: shared point found but SAT reports separation")
        })?;
        if penetration_depth(&a, &b) > 0.05 {
            deep += 1;
            ensure(found, || {
                format!("pair {n}: SAT depth > 0.05 but no shared point in {points} samples")
            })?;
        }
        hits += sat as usize;
    }
    Ok(format!(
        "{pairs} pairs, {hits} intersecting, {deep} deep overlaps confirmed"
    ))
}

/// Rasterized collision at `g` against the SAT oracle on pairs decided by a
/// margin larger than `g·√2`.
pub fn collision_oracle(pairs: usize, g: f64, seed: u64) -> Result<(usize, usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = g * SQRT_2;
    let (mut overlapping, mut separated, mut violations) = (0, 0, 0);
    for _ in 0..pairs {
        let (pose, ego, obstacle) = random_pair(&mut rng);
        let a = ego.box_at(&pose);
        let grid = OccupancyGrid::from_boxes(g, Extent::default(), [&obstacle], OccupancyRule::Cover)
            .map_err(|e| e.to_string())?;
        let hit = collision_at_waypoint(&pose, &ego, &grid);
        if penetration_depth(&a, &obstacle) > margin {
            overlapping += 1;
            violations += (!hit || !exact_intersects(&a, &obstacle)) as usize;
        } else if box_distance(&a, &obstacle) > margin {
            separated += 1;
            violations += (hit || exact_intersects(&a, &obstacle)) as usize;
        }
    }
    Ok((overlapping, separated, violations))
}

pub fn check_collision_oracle() -> Check {
    let (overlapping, separated, violations) = collision_oracle(1000, 0.05, 3)?;
    ensure(violations == 0, || format!("{violations} violations"))?;
    ensure(overlapping >= 100 && separated >= 100, || {
        format!("too few decided pairs: {overlapping} overlapping, {separated} separated")
    })?;
    Ok(format!(
        "1000 pairs at g=0.05: {overlapping} overlapping, {separated} separated, 0 violations"
    ))
}

// ---------------------------------------------------------------- near miss

const NEAR_MISS_GRIDS: [f64; 4] = [0.1, 0.25, 0.5, 0.6];

/// Pose on a constant-curvature path through the origin at heading 0.
fn arc_pose(speed: f64, curvature: f64, t: f64) -> Pose2 {
    let s = speed * t;
    if curvature == 0.0 {
        return Pose2::new(s, 0.0, 0.0);
    }
    let phi = s * curvature;
    Pose2::new(phi.sin() / curvature, (1.0 - phi.cos()) / curvature, phi)
}

fn scene(
    id: String,
    history: Vec<Pose2>,
    future: Vec<Pose2>,
    obstacle: OrientedBox,
    kinematics: Kinematics,
) -> EgoSample {
    let gt_future = Trajectory::new(future);
    EgoSample {
        sample_id: id,
        history: Trajectory::new(history),
        kinematics,
        command: derive_command(&gt_future).expect("six waypoints"),
        gt_future,
        obstacles: vec![vec![obstacle]; 6],
    }
}

/// Ego drives a 45° diagonal beside a parallel obstacle 0.3 m away. The
/// lateral offset puts a row of 0.5 m cell centres just inside the ego's
/// right edge, so a corner of each of those cells reaches the obstacle.
pub fn diagonal_near_miss_scene() -> EgoSample {
    let (s, c) = FRAC_PI_4.sin_cos();
    let right = [s, -c];
    let ego = EgoSpec::default();
    // Cell centres on the 0.5 m lattice satisfy right·p = 0.3536·(i - j);
    // shift the path so i - j = 3 lies 0.02 m inside the right edge.
    let lateral = 3.0 * 0.5 / SQRT_2 - (ego.width / 2.0 - 0.02);
    let at = |k: f64| Pose2::new(k * c + lateral * right[0], k * s + lateral * right[1], FRAC_PI_4);
    let future: Vec<Pose2> = (1..=6).map(|k| at(1.5 * k as f64)).collect();
    let gap = 0.3;
    let mid = future[2];
    let offset = ego.width / 2.0 + gap + 1.0;
    let obstacle = OrientedBox::new(
        mid.x + offset * right[0],
        mid.y + offset * right[1],
        FRAC_PI_4,
        8.0,
        2.0,
    );
    let history = (0..4)
        .map(|k| Pose2::new(1.5 * (k as f64 - 3.0) * c, 1.5 * (k as f64 - 3.0) * s, 0.0))
        .collect();
    scene(
        "near-miss-diagonal".into(),
        history,
        future,
        obstacle,
        Kinematics {
            vx: 3.0,
            ..Kinematics::default()
        },
    )
}

/// Straight or curved GT path with one static obstacle placed beside a
/// random waypoint, parallel to the ego box, at an exact clearance drawn
/// from `clearance`.
pub fn near_miss_suite(n: usize, clearance: (f64, f64), seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ego = EgoSpec::default();
    let mut samples = Vec::with_capacity(n);
    while samples.len() < n {
        let speed = rng.random_range(3.0..12.0);
        let final_heading = rng.random_range(-1.5..1.5f64);
        let curvature = final_heading / (speed * 3.0);
        let future: Vec<Pose2> = (1..=6).map(|k| arc_pose(speed, curvature, 0.5 * k as f64)).collect();
        let history: Vec<Pose2> = (0..4)
            .map(|k| arc_pose(speed, curvature, 0.5 * (k as f64 - 3.0)))
            .collect();
        let target = rng.random_range(clearance.0..clearance.1);
        let anchor = future[rng.random_range(0..6)];
        let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let (s, c) = anchor.theta.sin_cos();
        let normal = [-s * side, c * side];
        let (length, width) = (rng.random_range(3.5..5.5), rng.random_range(1.6..2.2));
        let mut offset = ego.width / 2.0 + target + width / 2.0;
        let ego_boxes: Vec<OrientedBox> = future.iter().map(|p| ego.box_at(p)).collect();
        let mut placed = None;
        for _ in 0..60 {
            let b = OrientedBox::new(
                anchor.x + offset * normal[0],
                anchor.y + offset * normal[1],
                anchor.theta,
                length,
                width,
            );
            let gap = ego_boxes
                .iter()
                .map(|e| box_distance(e, &b))
                .fold(f64::INFINITY, f64::min);
            if (gap - target).abs() < 1e-9 {
                placed = Some(b);
                break;
            }
            offset += target - gap;
        }
        if let Some(b) = placed {
            let kin = Kinematics {
                vx: speed,
                omega: speed * curvature,
                ay: speed * speed * curvature,
                ..Kinematics::default()
            };
            samples.push(scene(
                format!("near-miss-{:04}", samples.len()),
                history,
                future,
                b,
                kin,
            ));
        }
    }
    Dataset::new(samples, "synthetic")
}

pub fn near_miss_audit(ds: &Dataset, execution: Execution) -> Result<AuditReport, String> {
    let base = CollisionOptions {
        execution,
        ..CollisionOptions::default()
    };
    audit_gt_collisions(ds, &NEAR_MISS_GRIDS, &base).map_err(|e| e.to_string())
}

pub fn check_near_miss() -> Check {
    let scene = diagonal_near_miss_scene();
    let ego = EgoSpec::default();
    let gap = scene
        .gt_future
        .waypoints
        .iter()
        .map(|p| box_distance(&ego.box_at(p), &scene.obstacles[0][0]))
        .fold(f64::INFINITY, f64::min);
    ensure((gap - 0.3).abs() < 1e-9, || format!("scene clearance {gap}"))?;
    let one = Dataset::new(vec![scene], "synthetic");
    let fine = near_miss_audit(&one, Execution::Sequential)?;
    ensure(fine.exact_collisions == 0, || "scene collides exactly".into())?;
    ensure(fine.row(0.1).unwrap().collisions == 0, || {
        "scene collides at g=0.1".into()
    })?;
    ensure(fine.row(0.5).unwrap().collisions == 1, || {
        "scene misses at g=0.5".into()
    })?;

    let suite = near_miss_suite(500, (0.2, 0.4), 5);
    let audit = near_miss_audit(&suite, Execution::default())?;
    let counts: Vec<usize> = audit.rows.iter().map(|r| r.false_collisions).collect();
    ensure(audit.exact_collisions == 0, || {
        format!("{} exact collisions", audit.exact_collisions)
    })?;
    ensure(counts.windows(2).all(|w| w[0] <= w[1]), || {
        format!("false collisions not monotone: {counts:?}")
    })?;
    ensure(*counts.last().unwrap() > 0, || "no false collisions at g=0.6".into())?;
    Ok(format!(
        "scene: clear at 0.1, hit at 0.5; suite false collisions over {NEAR_MISS_GRIDS:?} = {counts:?}"
    ))
}

// ---------------------------------------------------------------- metrics

fn line(f: impl Fn(usize) -> (f64, f64)) -> Trajectory {
    Trajectory::new(
        (1..=6)
            .map(|k| {
                let (x, y) = f(k);
                Pose2::new(x, y, 0.0)
            })
            .collect(),
    )
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

pub fn check_metric_suite() -> Check {
    let gt = line(|k| (2.0 * k as f64, 0.1 * k as f64));
    let same = l2_errors(&gt, &gt).map_err(|e| e.to_string())?;
    ensure(same.per_horizon.iter().all(|&v| v == 0.0) && same.avg == 0.0, || {
        format!("identity: {same:?}")
    })?;

    let shifted = line(|k| (2.0 * k as f64 + 3.0, 0.1 * k as f64 + 4.0));
    let off = l2_errors(&shifted, &gt).map_err(|e| e.to_string())?;
    ensure(
        off.per_horizon.iter().all(|&v| close(v, 5.0)) && close(off.avg, 5.0),
        || format!("offset: {off:?}"),
    )?;

    // Only the last waypoint is off, by 0.5 m: it enters the 3 s mean alone.
    let last = line(|k| {
        if k == 6 {
            (12.3, 1.0)
        } else {
            (2.0 * k as f64, 0.1 * k as f64)
        }
    });
    let one = l2_errors(&last, &gt).map_err(|e| e.to_string())?;
    let want = [0.0, 0.0, 0.5 / 6.0];
    ensure(one.per_horizon.iter().zip(want).all(|(a, b)| close(*a, b)), || {
        format!("single waypoint: {one:?}")
    })?;
    ensure(close(one.avg, 0.5 / 18.0), || {
        format!("single waypoint avg {}", one.avg)
    })?;

    // Only the first waypoint is off, by 1 m: it is in every horizon.
    let first = line(|k| {
        if k == 1 {
            (3.0, 0.1)
        } else {
            (2.0 * k as f64, 0.1 * k as f64)
        }
    });
    let e = l2_errors(&first, &gt).map_err(|e| e.to_string())?;
    let want = [1.0 / 2.0, 1.0 / 4.0, 1.0 / 6.0];
    ensure(e.per_horizon.iter().zip(want).all(|(a, b)| close(*a, b)), || {
        format!("first waypoint: {e:?}")
    })?;

    let free = collision_dataset(false);
    let trajs: Vec<Trajectory> = free.samples.iter().map(|s| s.gt_future.clone()).collect();
    let r = collision_rate(&free, &trajs, &CollisionOptions::default()).map_err(|e| e.to_string())?;
    ensure(r.rates.iter().all(|&v| v == 0.0) && r.avg == 0.0, || {
        format!("obstacle-free rates {:?}", r.rates)
    })?;
    let full = collision_dataset(true);
    let r = collision_rate(&full, &trajs, &CollisionOptions::default()).map_err(|e| e.to_string())?;
    ensure(r.rates.iter().all(|&v| v == 100.0) && r.avg == 100.0, || {
        format!("full-overlap rates {:?}", r.rates)
    })?;
    Ok("L2 identity/offset/single-waypoint exact to 1e-12; collision rates 0% and 100%".into())
}

/// Ten straight samples, either obstacle-free or with an obstacle on top of
/// every GT waypoint.
pub fn collision_dataset(overlapping: bool) -> Dataset {
    let ego = EgoSpec::default();
    let samples = (0..10)
        .map(|i| {
            let speed = 2.0 + i as f64;
            let future: Vec<Pose2> = (1..=6).map(|k| Pose2::new(speed * 0.5 * k as f64, 0.0, 0.0)).collect();
            let history: Vec<Pose2> = (0..4)
                .map(|k| Pose2::new(speed * 0.5 * (k as f64 - 3.0), 0.0, 0.0))
                .collect();
            let obstacles = future
                .iter()
                .map(|p| if overlapping { vec![ego.box_at(p)] } else { Vec::new() })
                .collect();
            let gt_future = Trajectory::new(future);
            EgoSample {
                sample_id: format!("c{i}"),
                history: Trajectory::new(history),
                kinematics: Kinematics {
                    vx: speed,
                    ..Kinematics::default()
                },
                command: derive_command(&gt_future).unwrap(),
                gt_future,
                obstacles,
            }
        })
        .collect();
    Dataset::new(samples, "synthetic")
}
