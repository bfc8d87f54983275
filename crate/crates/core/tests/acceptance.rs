//! Acceptance checks, run in sequence with one result line each.
//!
//! `cargo test --release --test acceptance -- 4 6` runs a subset by number.
//! MNIST checks read cached models from `REGIONLAB_MNIST_MODELS` (default
//! `/root/models`) and data from `REGIONLAB_MNIST_DIR` (default `/root/data/mnist`).
//! The replicated MNIST sweep runs only with `REGIONLAB_REPLICATES=1`.

mod common;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regionlab::analytics::surround::gradient_matrix;
use regionlab::analytics::{
    class_probe, null_space_directions, pgd_attack, relevance, walk_ray, NullSpaceMode, PgdConfig, ProbeOptions,
    WalkOptions,
};
use regionlab::data::{load_mnist_dir, make_spiral, Dataset, SpiralSpec};
use regionlab::fixtures::{random_model, random_point};
use regionlab::lp::{solve_lp, LinearProgram, LpStatus};
use regionlab::network::NetworkModel;
use regionlab::polytope::{insphere, remove_redundant};
use regionlab::render::{rasterize, render, ImageFormat, RenderStyle, SlicePlane, SliceRaster};
use regionlab::sweep::{run_sweep, sample_indices, AnalysisSet, AnalyzeConfig, ClassTargets};
use regionlab::train::{evaluate, train, TrainConfig, Variant};
use regionlab::{extract_region, HalfspaceSystem};

use common::*;

enum Outcome {
    Pass(String),
    Fail(String),
    NotRun(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

#[derive(Default)]
struct Replicate {
    models: [Option<NetworkModel>; 3],
    seconds: [f64; 3],
}

#[derive(Default)]
struct Ctx {
    replicates: Vec<Replicate>,
}

impl Ctx {
    fn spiral_train() -> Dataset {
        make_spiral(&SpiralSpec::default())
    }

    fn spiral_test() -> Dataset {
        make_spiral(&SpiralSpec { seed: 1000, ..SpiralSpec::default() })
    }

    fn model(&mut self, seed: usize, variant: Variant) -> &NetworkModel {
        while self.replicates.len() <= seed {
            self.replicates.push(Replicate::default());
        }
        let slot = Variant::ALL.iter().position(|&v| v == variant).unwrap();
        if self.replicates[seed].models[slot].is_none() {
            let start = Instant::now();
            let (m, _) = train(&TrainConfig::spiral(variant, seed as u64), &Self::spiral_train()).expect("training");
            self.replicates[seed].seconds[slot] = start.elapsed().as_secs_f64();
            self.replicates[seed].models[slot] = Some(m);
        }
        self.replicates[seed].models[slot].as_ref().unwrap()
    }
}

fn env_path(var: &str, default: &str) -> PathBuf {
    std::env::var_os(var).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(default))
}

fn spiral_accuracy(ctx: &mut Ctx) -> Outcome {
    let test = Ctx::spiral_test();
    let mut parts = Vec::new();
    let mut ok = true;
    let mut total = 0.0;
    for v in Variant::ALL {
        let (_, acc) = evaluate(ctx.model(0, v), &test).unwrap();
        let slot = Variant::ALL.iter().position(|&x| x == v).unwrap();
        total += ctx.replicates[0].seconds[slot];
        ok &= acc == 1.0;
        parts.push(format!("{} {:.2}%", v.name(), 100.0 * acc));
    }
    ok &= total < 60.0;
    verdict(ok, format!("{}; training {total:.1}s (limit 60s)", parts.join(", ")))
}

/// Test accuracy and recorded training time of each cached model in a family.
fn mnist_family(
    models: &std::path::Path,
    test: &Dataset,
    prefix: &str,
    accept: impl Fn(f64, f64) -> bool,
) -> (bool, Vec<String>) {
    let targets = [("1e-3", [97.8, 97.9, 97.5]), ("1e-4", [98.0, 98.3, 98.2])];
    let mut ok = true;
    let mut parts = Vec::new();
    for (lr, expected) in targets {
        for (v, want) in Variant::ALL.iter().zip(expected) {
            let stem = format!("{prefix}_{}_lr{lr}", v.name());
            let model = match regionlab::io::load_model(&models.join(format!("{stem}.json"))) {
                Ok(m) => m,
                Err(_) => {
                    ok = false;
                    parts.push(format!("{} lr {lr}: missing", v.name()));
                    continue;
                }
            };
            let (_, acc) = evaluate(&model, test).unwrap();
            let seconds = std::fs::read_to_string(models.join(format!("{stem}.summary.json")))
                .ok()
                .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
                .and_then(|v| v["train_seconds"].as_f64());
            let hit = accept(100.0 * acc, want) && seconds.is_some_and(|s| s <= 1800.0);
            ok &= hit;
            parts.push(format!(
                "{} lr {lr}: {:.2}% (table {want}) {}",
                v.name(),
                100.0 * acc,
                seconds.map_or("time unknown".into(), |s| format!("{s:.0}s"))
            ));
        }
    }
    (ok, parts)
}

fn mnist_accuracy(_: &mut Ctx) -> Outcome {
    let models = env_path("REGIONLAB_MNIST_MODELS", "/root/models");
    let data_dir = env_path("REGIONLAB_MNIST_DIR", "/root/data/mnist");
    let test = match load_mnist_dir(&data_dir, false) {
        Ok(t) => t,
        Err(e) => return Outcome::Fail(format!("MNIST test set unavailable at {}: {e}", data_dir.display())),
    };
    // full width within half a point of the table, or the 256-wide fallback at 97% or better
    let (full_ok, full) = mnist_family(&models, &test, "mnist", |acc, want| (acc - want).abs() <= 0.5);
    let (narrow_ok, narrow) = mnist_family(&models, &test, "mnist256", |acc, _| acc >= 97.0);
    let which = match (full_ok, narrow_ok) {
        (true, _) => "full width passes",
        (false, true) => "full width misses the 30 min budget, 256-wide fallback passes",
        _ => "neither full width nor fallback passes",
    };
    verdict(
        full_ok || narrow_ok,
        format!("{which}; 1024 wide: {}; 256 wide: {}", full.join(", "), narrow.join(", ")),
    )
}

fn constraint_count(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut ok = true;
    let mut parts = Vec::new();
    for bn in [false, true] {
        let model = random_model(&mut rng, &[784, 1024, 1024, 1024, 10], bn);
        let x = random_point(&mut rng, 784);
        let s = extract_region(&model, x.view()).unwrap();
        ok &= s.len() == 3072 && s.total_inequalities() == 4640;
        parts.push(format!("bn={bn}: {} / {}", s.len(), s.total_inequalities()));
    }
    let cached = env_path("REGIONLAB_MNIST_MODELS", "/root/models").join("mnist_vanilla_lr1e-3.json");
    if let (Ok(model), Ok(test)) = (
        regionlab::io::load_model(&cached),
        load_mnist_dir(&env_path("REGIONLAB_MNIST_DIR", "/root/data/mnist"), false),
    ) {
        let s = extract_region(&model, test.point(0).view()).unwrap();
        ok &= s.len() == 3072 && s.total_inequalities() == 4640;
        parts.push(format!("trained model, test point 0: {} / {}", s.len(), s.total_inequalities()));
    }
    verdict(ok, parts.join("; "))
}

fn region_oracle(_: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let (mut agree, mut compared, mut skipped) = (0usize, 0usize, 0usize);
    for _ in 0..20 {
        let model = random_model(&mut rng, &[2, 8, 8, 2], false);
        let x = random_point(&mut rng, 2);
        let system = extract_region(&model, x.view()).unwrap();
        let (bits_star, _) = hand_forward(&model, x.as_slice().unwrap());
        for r in 0..200 {
            for c in 0..200 {
                let p = [-1.0 + (c as f64 + 0.5) / 100.0, -1.0 + (r as f64 + 0.5) / 100.0];
                let slacks = system.slacks(ndarray::ArrayView1::from(&p));
                if slacks.iter().any(|s| s.abs() <= 1e-6) {
                    skipped += 1;
                    continue;
                }
                let by_grid = hand_forward(&model, &p).0 == bits_star;
                let by_system = slacks.iter().all(|&s| s >= 0.0);
                compared += 1;
                agree += (by_grid == by_system) as usize;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        agree == compared && secs < 10.0,
        format!("{agree}/{compared} pixels agree ({skipped} within 1e-6 of a facet), {secs:.1}s (limit 10s)"),
    )
}

/// In-region samples around `x`, found by shrinking random steps.
fn region_samples(model: &NetworkModel, x: &Array1<f64>, count: usize, rng: &mut ChaCha8Rng) -> Vec<Array1<f64>> {
    let (bits, _) = hand_forward(model, x.as_slice().unwrap());
    let mut out = Vec::new();
    let mut radius = 0.2;
    while out.len() < count {
        let y = x + &(random_point(rng, x.len()) * radius);
        let inside = y.iter().all(|v| v.abs() <= 1.0) && hand_forward(model, y.as_slice().unwrap()).0 == bits;
        if inside {
            out.push(y);
        } else {
            radius = (radius * 0.9f64).max(1e-6);
        }
    }
    out
}

fn affine_oracle(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let (mut worst_logit, mut worst_fd) = (0.0f64, 0.0f64);
    let mut fd_checks = 0usize;
    for region in 0..10 {
        let model = random_model(&mut rng, &[6, 16, 16, 4], region % 2 == 1);
        let x = random_point(&mut rng, 6) * 0.8;
        let affine = model.region_affine_map(x.view()).unwrap();
        let (bits, _) = hand_forward(&model, x.as_slice().unwrap());
        for y in region_samples(&model, &x, 100, &mut rng) {
            let (_, z) = hand_forward(&model, y.as_slice().unwrap());
            let pred = affine.logits(y.view());
            for (a, b) in z.iter().zip(pred.iter()) {
                worst_logit = worst_logit.max((a - b).abs());
            }
            let h = 1e-6;
            for i in 0..6 {
                let (mut up, mut down) = (y.clone(), y.clone());
                up[i] += h;
                down[i] -= h;
                let (bu, zu) = hand_forward(&model, up.as_slice().unwrap());
                let (bd, zd) = hand_forward(&model, down.as_slice().unwrap());
                if bu != bits || bd != bits {
                    continue;
                }
                fd_checks += 1;
                for k in 0..4 {
                    let fd = (zu[k] - zd[k]) / (2.0 * h);
                    worst_fd = worst_fd.max((fd - affine.jacobian[[k, i]]).abs());
                }
            }
        }
    }
    verdict(
        worst_logit <= 1e-6 && worst_fd <= 1e-4 && fd_checks > 0,
        format!("max |logit - (Jx+c)| {worst_logit:.2e} (tol 1e-6), max |J - FD| {worst_fd:.2e} over {fd_checks} columns (tol 1e-4)"),
    )
}

/// Every vertex of `a . y <= r` rows plus finite bounds, status by recession cone.
fn lp_oracle(lp: &LinearProgram) -> (LpStatus, f64) {
    let mut planes: Vec<Halfplane> = lp
        .rows
        .outer_iter()
        .zip(lp.rhs.iter())
        .map(|(a, &r)| ([-a[0], -a[1]], r))
        .collect();
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut e = [0.0, 0.0];
        e[j] = 1.0;
        if lo.is_finite() {
            planes.push((e, -lo));
        }
        if hi.is_finite() {
            planes.push(([-e[0], -e[1]], hi));
        }
    }
    let vertices = polygon_vertices(&planes, 1e-10);
    if vertices.is_empty() {
        return (LpStatus::Infeasible, f64::NEG_INFINITY);
    }
    let c = [lp.objective[0], lp.objective[1]];
    let cn = (c[0] * c[0] + c[1] * c[1]).sqrt();
    let mut candidates = vec![];
    if cn > 0.0 {
        candidates.push([c[0] / cn, c[1] / cn]);
    }
    for &([a, b], _) in &planes {
        candidates.push([-b, a]);
        candidates.push([b, -a]);
    }
    let in_cone = |d: &[f64; 2]| planes.iter().all(|&([a, b], _)| a * d[0] + b * d[1] >= -1e-12);
    if candidates.iter().any(|d| in_cone(d) && c[0] * d[0] + c[1] * d[1] > 1e-12) {
        return (LpStatus::Unbounded, f64::INFINITY);
    }
    let best = vertices.iter().map(|v| c[0] * v[0] + c[1] * v[1]).fold(f64::NEG_INFINITY, f64::max);
    (LpStatus::Optimal, best)
}

fn lp_correctness(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let (mut status_ok, mut value_ok, mut optimal) = (0usize, 0usize, 0usize);
    let mut counts = [0usize; 3];
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 500 {
        let family = done % 4;
        let m = rng.random_range(4..9);
        let mut rows = Array2::zeros((m, 2));
        let mut rhs = Array1::zeros(m);
        let anchor = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        for i in 0..m {
            let (a, b): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            rows[[i, 0]] = a;
            rows[[i, 1]] = b;
            rhs[i] = match family {
                // feasible around the anchor
                0 | 1 => a * anchor[0] + b * anchor[1] + rng.random_range(0.0..3.0),
                _ => rng.random_range(-3.0..3.0),
            };
        }
        if family == 3 {
            // a contradictory pair
            rows[[m - 2, 0]] = 1.0;
            rows[[m - 2, 1]] = 0.5;
            rhs[m - 2] = -1.0;
            rows[[m - 1, 0]] = -1.0;
            rows[[m - 1, 1]] = -0.5;
            rhs[m - 1] = 0.5;
        }
        let bounds: Vec<(f64, f64)> = (0..2)
            .map(|_| match (family, rng.random_range(0..3)) {
                (1, _) | (_, 0) => (f64::NEG_INFINITY, f64::INFINITY),
                (_, 1) => (-10.0, 10.0),
                _ => (rng.random_range(-10.0..0.0), f64::INFINITY),
            })
            .collect();
        let c = Array1::from(vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
        let lp = LinearProgram::new(c, rows.clone(), rhs, bounds).unwrap();
        // skip systems whose rows and bounds span less than the plane
        let ok_rank = {
            let det = rows[[0, 0]] * rows[[1, 1]] - rows[[0, 1]] * rows[[1, 0]];
            det.abs() > 1e-3
        };
        if !ok_rank {
            continue;
        }
        done += 1;
        let (want, value) = lp_oracle(&lp);
        counts[want as usize] += 1;
        let got = solve_lp(&lp).unwrap();
        if got.status == want {
            status_ok += 1;
        }
        if want == LpStatus::Optimal {
            optimal += 1;
            let err = (got.objective_value - value).abs();
            worst = worst.max(err);
            if err <= 1e-8 * value.abs().max(1.0) {
                value_ok += 1;
            }
        }
    }
    verdict(
        status_ok == 500 && value_ok == optimal,
        format!(
            "statuses {status_ok}/500 (optimal {}, infeasible {}, unbounded {}), optima {value_ok}/{optimal}, worst error {worst:.1e} (tol 1e-8)",
            counts[0], counts[1], counts[2]
        ),
    )
}

fn grid_inradius(system: &HalfspaceSystem, n: usize) -> (f64, f64) {
    let planes = halfplanes(system);
    let h = 2.0 / n as f64;
    let mut best = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            let p = [-1.0 + (c as f64 + 0.5) * h, -1.0 + (r as f64 + 0.5) * h];
            let dist = planes
                .iter()
                .map(|&([a, b], e)| (a * p[0] + b * p[1] + e) / (a * a + b * b).sqrt())
                .fold(f64::INFINITY, f64::min);
            best = best.max(dist);
        }
    }
    (best, h * std::f64::consts::SQRT_2)
}

fn insphere_checks(_: &mut Ctx) -> Outcome {
    let unit = |cons: &[(Vec<f64>, f64)]| {
        HalfspaceSystem::from_constraints(cons, Array1::from(vec![-1.0, -1.0]), Array1::from(vec![1.0, 1.0])).unwrap()
    };
    let r_box = insphere(&unit(&[])).unwrap().inradius;
    let r_half = insphere(&unit(&[(vec![1.0, 0.0], 0.0)])).unwrap().inradius;
    let mut ok = r_box == 1.0 && r_half == 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut worst = 0.0f64;
    let mut within = 0;
    for _ in 0..50 {
        let model = random_model(&mut rng, &[2, 8, 8, 2], false);
        let x = random_point(&mut rng, 2);
        let system = extract_region(&model, x.view()).unwrap();
        let lp = insphere(&system).unwrap().inradius;
        let (grid, diag) = grid_inradius(&system, 400);
        worst = worst.max((lp - grid).abs() / diag);
        if (lp - grid).abs() <= diag && grid <= lp + 1e-12 {
            within += 1;
        }
    }
    ok &= within == 50;
    let model = random_model(&mut rng, &[784, 1024, 1024, 1024, 10], false);
    let x = random_point(&mut rng, 784);
    let system = extract_region(&model, x.view()).unwrap();
    let start = Instant::now();
    let ball = insphere(&system).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let c = Array1::from(ball.center.clone());
    let mut margin = f64::INFINITY;
    for i in 0..system.len() {
        let (w, b) = system.constraint(i);
        margin = margin.min(w.dot(&c) + b - ball.inradius * w.dot(&w).sqrt());
    }
    for j in 0..784 {
        margin = margin.min(c[j] - system.box_lo()[j] - ball.inradius);
        margin = margin.min(system.box_hi()[j] - c[j] - ball.inradius);
    }
    ok &= margin >= -1e-6 && ball.inradius > 0.0;
    verdict(
        ok,
        format!(
            "box r={r_box}, half box r={r_half}; {within}/50 grid regions within one cell diagonal (worst {worst:.2} diagonals); \
             784-d region r={:.3e}, min slack - r|w| = {margin:.1e} (tol -1e-6) in {secs:.0}s",
            ball.inradius
        ),
    )
}

fn redundancy_checks(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let (mut mismatch, mut bad_redundant, mut bad_retained) = (0usize, 0usize, 0usize);
    let (mut total, mut kept) = (0usize, 0usize);
    for k in 0..20 {
        let dims: &[usize] = match k % 3 {
            0 => &[2, 6, 6, 2],
            1 => &[2, 8, 8, 2],
            _ => &[2, 10, 10, 3],
        };
        let model = random_model(&mut rng, dims, k % 2 == 1);
        let x = random_point(&mut rng, 2);
        let mut system = extract_region(&model, x.view()).unwrap();
        if k % 4 == 0 {
            // plant a duplicate and a scaled copy
            let mut idx: Vec<usize> = (0..system.len()).collect();
            idx.push(0);
            idx.push(1);
            system = system.select(&idx);
            let last = system.len() - 1;
            system = system.scaled(last, 3.0);
        }
        let (reduced, verdicts) = remove_redundant(&system).unwrap();
        total += system.len();
        kept += reduced.len();
        for _ in 0..10_000 {
            let p = random_point(&mut rng, 2);
            if (system.min_slack(p.view()) >= 0.0) != (reduced.min_slack(p.view()) >= 0.0) {
                mismatch += 1;
            }
        }
        let retained: Vec<usize> = verdicts.iter().filter(|v| !v.redundant).map(|v| v.index).collect();
        let plane = |i: usize| {
            let (w, b) = system.constraint(i);
            ([w[0], w[1]], b)
        };
        for v in &verdicts {
            let mut planes: Vec<Halfplane> = retained.iter().filter(|&&i| i != v.index).map(|&i| plane(i)).collect();
            planes.extend(box_halfplanes(&system));
            let (a, b) = plane(v.index);
            planes.push((a, b + 1.0));
            let y = polygon_min(&planes, (a, b)).expect("region is nonempty");
            if v.redundant && y < -1e-9 {
                bad_redundant += 1;
            }
            if !v.redundant && y >= 0.0 {
                bad_retained += 1;
            }
        }
    }
    verdict(
        mismatch == 0 && bad_redundant == 0 && bad_retained == 0,
        format!(
            "{kept}/{total} constraints retained; membership mismatches {mismatch}/200000; \
             re-solve disagreements: redundant {bad_redundant}, retained {bad_retained}"
        ),
    )
}

fn class_probe_checks(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let opts = ProbeOptions::default();
    let (mut grid_ok, mut grid_total) = (0usize, 0usize);
    let mut worst = 0.0f64;
    for k in 0..12 {
        let classes = if k % 2 == 0 { 3 } else { 2 };
        let model = random_model(&mut rng, &[2, 8, 8, classes], false);
        let x = random_point(&mut rng, 2);
        let system = extract_region(&model, x.view()).unwrap();
        let affine = model.region_affine_map(x.view()).unwrap();
        let (bits, _) = hand_forward(&model, x.as_slice().unwrap());
        let vs = polygon_vertices(&halfplanes(&system), 1e-9);
        let (x0, x1) = vs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(v[0]), a.1.max(v[0])));
        let (y0, y1) = vs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(v[1]), a.1.max(v[1])));
        for t in 0..classes {
            let probe = class_probe(&system, &affine, x.view(), t, &opts).unwrap();
            let mut best = f64::NEG_INFINITY;
            for r in 0..400 {
                for c in 0..400 {
                    let p = [x0 + (c as f64 + 0.5) * (x1 - x0) / 400.0, y0 + (r as f64 + 0.5) * (y1 - y0) / 400.0];
                    let (b, z) = hand_forward(&model, &p);
                    if b == bits {
                        best = best.max(log_softmax(&z)[t]);
                    }
                }
            }
            grid_total += 1;
            let diff = probe.log_prob - best;
            worst = worst.max(diff.abs());
            if diff.abs() <= 1e-3 && diff >= -1e-9 {
                grid_ok += 1;
            }
        }
    }
    // face property
    let (mut face_ok, mut face_total) = (0usize, 0usize);
    for k in 0..20 {
        let (d, classes) = if k % 2 == 0 { (2, 2) } else { (5, 3) };
        let model = random_model(&mut rng, &[d, 10, 10, classes], false);
        let x = random_point(&mut rng, d);
        let system = extract_region(&model, x.view()).unwrap();
        let affine = model.region_affine_map(x.view()).unwrap();
        let j = &affine.jacobian;
        let gram = j.dot(&j.t());
        if determinant(&gram) <= 1e-10 {
            continue;
        }
        for t in 0..classes {
            let probe = class_probe(&system, &affine, x.view(), t, &opts).unwrap();
            let xt = Array1::from(probe.x_t.clone());
            let mut slack = f64::INFINITY;
            for i in 0..system.len() {
                let (w, b) = system.constraint(i);
                let n = w.dot(&w).sqrt();
                if n > 0.0 {
                    slack = slack.min((w.dot(&xt) + b) / n);
                }
            }
            for q in 0..d {
                slack = slack.min(xt[q] + 1.0).min(1.0 - xt[q]);
            }
            face_total += 1;
            if slack <= 1e-6 {
                face_ok += 1;
            }
        }
    }
    verdict(
        grid_ok == grid_total && face_ok == face_total,
        format!(
            "grid agreement {grid_ok}/{grid_total} (worst {worst:.1e}, tol 1e-3); optimum on a face {face_ok}/{face_total}"
        ),
    )
}

fn determinant(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut m = a.clone();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[[i, c]].abs().total_cmp(&m[[j, c]].abs())).unwrap();
        if m[[p, c]] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..n {
                m.swap([p, k], [c, k]);
            }
            det = -det;
        }
        det *= m[[c, c]];
        for i in c + 1..n {
            let f = m[[i, c]] / m[[c, c]];
            for k in c..n {
                m[[i, k]] -= f * m[[c, k]];
            }
        }
    }
    det
}

fn class_region_ordering(_: &mut Ctx) -> Outcome {
    if std::env::var_os("REGIONLAB_REPLICATES").is_none() {
        return Outcome::NotRun(
            "needs 15 MNIST models (3 variants x 5 seeds at lr 1e-4) and class probes on 1000 points each; \
             set REGIONLAB_REPLICATES=1 to run"
                .into(),
        );
    }
    let dir = env_path("REGIONLAB_REPLICATE_MODELS", "/root/models/replicates");
    let data_dir = env_path("REGIONLAB_MNIST_DIR", "/root/data/mnist");
    let points: usize = std::env::var("REGIONLAB_REPLICATE_POINTS").ok().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let train_set = load_mnist_dir(&data_dir, true).expect("MNIST training set");
    let test_set = load_mnist_dir(&data_dir, false).expect("MNIST test set");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = AnalyzeConfig {
        points,
        analyses: AnalysisSet { insphere: false, probes: true, decision: false, adversarial: false, surround: false },
        ..AnalyzeConfig::default()
    };
    let (mut count_order, mut distortion_order) = (0, 0);
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let mut means = Vec::new();
        for v in Variant::ALL {
            let path = dir.join(format!("mnist_{}_lr1e-4_seed{seed}.json", v.name()));
            let model = regionlab::io::load_model(&path).unwrap_or_else(|_| {
                let cfg = TrainConfig { variant: v, learning_rate: 1e-4, seed, max_epochs: 75, ..TrainConfig::default() };
                let (m, _) = train(&cfg, &train_set).expect("training");
                regionlab::io::save_model(&path, &m).unwrap();
                m
            });
            let targets = ClassTargets::new(&model, &train_set).unwrap();
            let report = run_sweep(v.name(), &model, &test_set, &targets, &cfg);
            let a = report.aggregate;
            means.push((a.class_region_count.map_or(f64::NAN, |s| s.mean), a.distortion.map_or(f64::NAN, |s| s.mean)));
        }
        let (van, bn, drop) = (means[0], means[1], means[2]);
        count_order += (van.0 > bn.0 && bn.0 > drop.0) as usize;
        distortion_order += (bn.1 < van.1 && bn.1 < drop.1) as usize;
        lines.push(format!("seed {seed}: counts {:.3}/{:.3}/{:.3} distortion {:.3}/{:.3}/{:.3}", van.0, bn.0, drop.0, van.1, bn.1, drop.1));
    }
    verdict(
        count_order >= 4 && distortion_order >= 4 && points == 1000,
        format!("{} points; count ordering {count_order}/5, distortion ordering {distortion_order}/5; {}", points, lines.join("; ")),
    )
}

/// Distinct patterns along the ray at `n` uniform samples of `[lo, hi]`.
fn dense_hashes(model: &NetworkModel, x: &Array1<f64>, e: &Array1<f64>, lo: f64, hi: f64, n: usize) -> HashSet<Vec<bool>> {
    (0..n)
        .map(|k| {
            let beta = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            let p = x + &(e * beta);
            hand_forward(model, p.as_slice().unwrap()).0
        })
        .collect()
}

fn surround_checks(ctx: &mut Ctx) -> Outcome {
    // null space on a wide random model and on a spiral model
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let big = random_model(&mut rng, &[784, 256, 256, 10], false);
    let xb = random_point(&mut rng, 784);
    let mut worst_ortho = 0.0f64;
    let mut worst_norm = 0.0f64;
    let spiral = ctx.model(0, Variant::Vanilla).clone();
    let test = Ctx::spiral_test();
    for (model, x, mode) in [
        (&big, xb.clone(), NullSpaceMode::Logits),
        (&big, xb.clone(), NullSpaceMode::Differences),
        (&spiral, test.point(0), NullSpaceMode::Differences),
    ] {
        let affine = model.region_affine_map(x.view()).unwrap();
        let a = gradient_matrix(&affine, mode);
        for e in null_space_directions(&affine, 100, 3, mode).unwrap() {
            worst_ortho = worst_ortho.max(a.t().dot(&e).iter().fold(0.0f64, |m, v| m.max(v.abs())));
            worst_norm = worst_norm.max((e.dot(&e).sqrt() - 1.0).abs());
        }
    }
    let ortho_ok = worst_ortho <= 1e-8 && worst_norm <= 1e-12;

    // exact walks against dense hashing
    let eps = 0.2;
    let samples = 100_000;
    let (mut rays_ok, mut reconciled) = (0usize, 0usize);
    let idx = sample_indices(test.len(), 100, 5);
    for &i in &idx {
        let x = test.point(i);
        let affine = spiral.region_affine_map(x.view()).unwrap();
        let e = null_space_directions(&affine, 1, i as u64, NullSpaceMode::Differences).unwrap().remove(0);
        let probe = walk_ray(&spiral, x.view(), e.view(), eps, &WalkOptions::default()).unwrap();
        let dense = dense_hashes(&spiral, &x, &e, 0.0, eps, samples);
        // patterns entered by the walk, as bit vectors, with their spans
        let mut spans: Vec<(Vec<bool>, f64, f64)> = Vec::new();
        let start_bits = hand_forward(&spiral, x.as_slice().unwrap()).0;
        let first_end = probe.crossings.first().map_or(eps, |c| c.beta);
        spans.push((start_bits, 0.0, first_end));
        for (k, c) in probe.crossings.iter().enumerate() {
            let end = probe.crossings.get(k + 1).map_or(eps, |n| n.beta);
            let mid = x.clone() + &(&e * (0.5 * (c.beta + end)));
            spans.push((hand_forward(&spiral, mid.as_slice().unwrap()).0, c.beta, end));
        }
        let walked: HashSet<Vec<bool>> = spans.iter().map(|s| s.0.clone()).collect();
        let count_ok = walked.len() == probe.unique_region_count;
        let step = eps / (samples - 1) as f64;
        let mut ok = count_ok && dense.is_subset(&walked);
        for missing in walked.difference(&dense) {
            // thinner than the sampling step: resample its span ten times finer
            let thin = spans.iter().filter(|s| &s.0 == missing).all(|s| s.2 - s.1 < step);
            let (lo, hi) = spans.iter().filter(|s| &s.0 == missing).map(|s| (s.1, s.2)).next().unwrap();
            let finer = dense_hashes(&spiral, &x, &e, (lo - step).max(0.0), (hi + step).min(eps), 30);
            if thin && finer.contains(missing) {
                reconciled += 1;
            } else {
                ok = false;
            }
        }
        rays_ok += ok as usize;
    }

    // same-region relevance
    let mut same_ok = true;
    for &i in idx.iter().take(20) {
        let x = test.point(i);
        let r = relevance(&spiral, x.view(), &[x.clone()]).unwrap();
        same_ok &= r == vec![Some(1.0)];
    }

    // unique-region medians over replicates
    let mut wins = 0;
    let mut medians = Vec::new();
    for seed in 0..5 {
        let mut med = [0.0; 2];
        for (slot, v) in [Variant::Vanilla, Variant::Bn].into_iter().enumerate() {
            let model = ctx.model(seed, v).clone();
            let mut counts = Vec::new();
            for &i in &sample_indices(test.len(), 20, seed as u64) {
                let x = test.point(i);
                let affine = model.region_affine_map(x.view()).unwrap();
                for e in null_space_directions(&affine, 100, i as u64, NullSpaceMode::Differences).unwrap() {
                    counts.push(walk_ray(&model, x.view(), e.view(), eps, &WalkOptions::default()).unwrap().unique_region_count as f64);
                }
            }
            med[slot] = median(&mut counts);
        }
        wins += (med[1] >= med[0]) as usize;
        medians.push(format!("{}/{}", med[0], med[1]));
    }
    verdict(
        ortho_ok && rays_ok == 100 && same_ok && wins >= 4,
        format!(
            "max |A^T e| {worst_ortho:.1e}, max ||e|-1| {worst_norm:.1e}; walks match dense hashing on {rays_ok}/100 rays \
             ({reconciled} thin regions reconciled); same-region relevance exact: {same_ok}; \
             median unique regions vanilla/bn {} -> bn >= vanilla in {wins}/5",
            medians.join(" ")
        ),
    )
}

fn slice_checks(ctx: &mut Ctx) -> Outcome {
    let raster = SliceRaster::from_parts(
        2,
        2,
        vec![1, 1, 1, 2],
        vec![0.125, 0.0, 0.0, 1.0],
        vec![0, 0, 0, 1],
        vec![true, true, true, false],
    );
    let golden = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/golden_2x2.ppm")).unwrap();
    let image = render(&raster, RenderStyle::Regions, ImageFormat::Ppm);
    let golden_ok = image == golden;

    let model = ctx.model(0, Variant::Vanilla).clone();
    let res = 200;
    let raster = rasterize(&model, &SlicePlane::toy2d((-1.0, 1.0), (res, res))).unwrap();
    let mut blobs = HashSet::new();
    for r in 0..res {
        for c in 0..res {
            let p = [-1.0 + (c as f64 + 0.5) * 2.0 / res as f64, -1.0 + (r as f64 + 0.5) * 2.0 / res as f64];
            blobs.insert(hand_forward(&model, &p).0);
        }
    }
    let dedup_ok = blobs.len() == raster.unique_regions();

    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..5 {
        let plane = SlicePlane::toy2d((-1.0, 1.0), (400, 400));
        let van = rasterize(ctx.model(seed, Variant::Vanilla), &plane).unwrap().unique_regions();
        let bn = rasterize(ctx.model(seed, Variant::Bn), &plane).unwrap().unique_regions();
        wins += (bn > van) as usize;
        pairs.push(format!("{van}/{bn}"));
    }
    verdict(
        golden_ok && dedup_ok && wins >= 4,
        format!(
            "golden PPM equal: {golden_ok}; blobs {} vs independent dedup {}; unique regions vanilla/bn {} -> bn more in {wins}/5",
            raster.unique_regions(),
            blobs.len(),
            pairs.join(" ")
        ),
    )
}

fn pgd_contract(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(130);
    let model = random_model(&mut rng, &[10, 32, 32, 5], true);
    let mut identity_ok = true;
    for k in 0..100 {
        let x = random_point(&mut rng, 10);
        let out = pgd_attack(&model, x.view(), k % 5, &PgdConfig { eps: 0.0, seed: k as u64, ..PgdConfig::default() }).unwrap();
        identity_ok &= out.x_adv == x;
    }
    let (mut violations, mut worst) = (0usize, 0.0f64);
    for k in 0..10_000 {
        let mut x = random_point(&mut rng, 10);
        // push some coordinates onto the box faces
        for v in x.iter_mut() {
            if rng.random_bool(0.2) {
                *v = v.signum();
            }
        }
        let eps = rng.random_range(0.001..0.3);
        let cfg = PgdConfig { eps, step: eps / 4.0, iters: 10, restarts: 2, seed: k };
        let out = pgd_attack(&model, x.view(), (k % 5) as usize, &cfg).unwrap();
        let linf = (&out.x_adv - &x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(linf - eps);
        if linf > eps + 1e-12 || out.x_adv.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            violations += 1;
        }
    }
    verdict(
        identity_ok && violations == 0,
        format!("eps=0 identity: {identity_ok}; violations {violations}/10000, worst excess {worst:.1e}"),
    )
}

type Check = fn(&mut Ctx) -> Outcome;

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let checks: [(u32, &str, Check); 13] = [
        (1, "spiral accuracy", spiral_accuracy),
        (2, "mnist accuracy", mnist_accuracy),
        (3, "constraint count", constraint_count),
        (4, "region membership", region_oracle),
        (5, "affine map", affine_oracle),
        (6, "lp correctness", lp_correctness),
        (7, "insphere", insphere_checks),
        (8, "redundancy removal", redundancy_checks),
        (9, "class probe", class_probe_checks),
        (10, "class-region ordering", class_region_ordering),
        (11, "surround walks", surround_checks),
        (12, "slice renderer", slice_checks),
        (13, "pgd contract", pgd_contract),
    ];
    let mut ctx = Ctx::default();
    let mut failed = 0;
    for (id, name, check) in checks {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&mut ctx)))
            .unwrap_or_else(|e| Outcome::Fail(format!("panicked: {:?}", e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())))));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::NotRun(d) => ("NOT RUN", d),
        };
        println!("criterion {id:>2} {name:<22} {tag:<7} {detail} [{secs:.1}s]");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
