use std::collections::HashSet;

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{top_two, NetworkModel, RegionAffineMap};

/// Which gradients the sampled directions must be orthogonal to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NullSpaceMode {
    /// Every logit gradient; needs `d > M`.
    Logits,
    /// Differences of logit gradients, enough to keep every decision boundary parallel; needs `d >= M`.
    Differences,
}

impl NullSpaceMode {
    /// `Logits` when it leaves a nontrivial complement, else `Differences`.
    pub fn auto(input_dim: usize, class_count: usize) -> Self {
        if input_dim > class_count {
            NullSpaceMode::Logits
        } else {
            NullSpaceMode::Differences
        }
    }
}

/// Columns whose orthogonal complement the directions are drawn from.
pub fn gradient_matrix(affine: &RegionAffineMap, mode: NullSpaceMode) -> Array2<f64> {
    let j = &affine.jacobian;
    match mode {
        NullSpaceMode::Logits => j.t().to_owned(),
        NullSpaceMode::Differences => {
            let (m, d) = j.dim();
            let mut a = Array2::zeros((d, m.saturating_sub(1)));
            for k in 1..m {
                a.column_mut(k - 1).assign(&(&j.row(k) - &j.row(0)));
            }
            a
        }
    }
}

fn orthonormal_basis(a: &Array2<f64>) -> Vec<Array1<f64>> {
    let mut basis: Vec<Array1<f64>> = Vec::new();
    for col in a.columns() {
        let scale = col.dot(&col).sqrt().max(1.0);
        let mut v = col.to_owned();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.scaled_add(-c, q);
            }
        }
        let n = v.dot(&v).sqrt();
        if n > 1e-10 * scale {
            basis.push(v / n);
        }
    }
    basis
}

/// `count` seeded unit vectors orthogonal to the columns of [`gradient_matrix`].
pub fn null_space_directions(
    affine: &RegionAffineMap,
    count: usize,
    seed: u64,
    mode: NullSpaceMode,
) -> Result<Vec<Array1<f64>>> {
    const TRIES: usize = 100;
    let d = affine.jacobian.ncols();
    let basis = orthonormal_basis(&gradient_matrix(affine, mode));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut found = None;
        for _ in 0..TRIES {
            let z = Array1::from_shape_fn(d, |_| StandardNormal.sample(&mut rng));
            let mut v: Array1<f64> = z.clone();
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&v);
                    v.scaled_add(-c, q);
                }
            }
            let n = v.dot(&v).sqrt();
            if n > 1e-10 * z.dot(&z).sqrt() {
                found = Some(v / n);
                break;
            }
        }
        out.push(found.ok_or(Error::NullSpaceCollapse(TRIES))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkOptions {
    /// Step past a crossing is `nudge_scale * max(1, |x_star|)`.
    pub nudge_scale: f64,
    pub max_crossings: usize,
}

impl Default for WalkOptions {
    fn default() -> Self {
        WalkOptions {
            nudge_scale: 1e-7,
            max_crossings: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub beta: f64,
    /// Hash of the pattern entered at this crossing.
    pub pattern_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurroundProbe {
    pub direction: Vec<f64>,
    pub epsilon: f64,
    pub crossings: Vec<Crossing>,
    pub unique_region_count: usize,
    /// Representative `beta` of each surrounding region other than the starting one, in first-visit order.
    pub probe_betas: Vec<f64>,
    /// Cosine similarity of decision directions with the starting region, aligned with `probe_betas`;
    /// `None` where a decision direction vanishes.
    pub relevance: Vec<Option<f64>>,
}

/// Walks `x_star + beta e` for `beta in [0, eps]` from region to region by
/// computing where the current region's next hidden-node constraint turns tight.
pub fn walk_ray(
    model: &NetworkModel,
    x_star: ArrayView1<f64>,
    e: ArrayView1<f64>,
    eps: f64,
    opts: &WalkOptions,
) -> Result<SurroundProbe> {
    let nudge = opts.nudge_scale * x_star.dot(&x_star).sqrt().max(1.0);
    let start = model.forward(x_star)?.pattern.hash64();
    let mut current = start;
    let mut crossings: Vec<Crossing> = Vec::new();
    let mut beta = 0.0;
    let mut x = x_star.to_owned();
    loop {
        let (pass, slopes) = model.directional_preacts(x.view(), e)?;
        let mut step = f64::INFINITY;
        for (h, dh) in pass.preacts.iter().zip(slopes.iter()) {
            for (&hv, &dv) in h.iter().zip(dh.iter()) {
                let toward = if hv >= 0.0 { dv < 0.0 } else { dv > 0.0 };
                if toward {
                    let s = (-hv / dv).max(0.0);
                    if !s.is_finite() {
                        return Err(Error::Numeric("non-finite crossing distance".into()));
                    }
                    step = step.min(s);
                }
            }
        }
        let cross = beta + step;
        if !(cross <= eps) {
            break;
        }
        beta = cross + nudge;
        x = &x_star + &(&e * beta);
        let hash = model.forward(x.view())?.pattern.hash64();
        if hash != current {
            crossings.push(Crossing { beta: cross, pattern_hash: hash });
            current = hash;
            if crossings.len() > opts.max_crossings {
                return Err(Error::Numeric(format!("more than {} crossings", opts.max_crossings)));
            }
        }
    }
    let mut seen = HashSet::new();
    seen.insert(start);
    let mut probe_betas = Vec::new();
    for (i, c) in crossings.iter().enumerate() {
        if seen.insert(c.pattern_hash) {
            let end = crossings.get(i + 1).map_or(eps, |n| n.beta);
            probe_betas.push(0.5 * (c.beta + end));
        }
    }
    let points: Vec<Array1<f64>> = probe_betas.iter().map(|&b| &x_star + &(&e * b)).collect();
    Ok(SurroundProbe {
        direction: e.to_vec(),
        epsilon: eps,
        unique_region_count: seen.len(),
        relevance: relevance(model, x_star, &points)?,
        crossings,
        probe_betas,
    })
}

/// Gradient of the gap between the two largest logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionDirection {
    pub g: Vec<f64>,
    pub k1: usize,
    pub k2: usize,
}

pub fn decision_direction(model: &NetworkModel, x: ArrayView1<f64>) -> Result<DecisionDirection> {
    let logits = model.logits(x)?;
    let (k1, k2) = top_two(logits.view());
    let mut v = Array1::zeros(model.class_count());
    v[k1] = 1.0;
    v[k2] = -1.0;
    let (_, g) = model.logit_vjp(x, v.view())?;
    Ok(DecisionDirection { g: g.to_vec(), k1, k2 })
}

pub fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Option<f64> {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    if a == b {
        return Some(1.0);
    }
    Some((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity between each probe point's decision direction (from its
/// own top two logits) and that of `x_star`.
pub fn relevance(model: &NetworkModel, x_star: ArrayView1<f64>, probe_points: &[Array1<f64>]) -> Result<Vec<Option<f64>>> {
    let base = Array1::from(decision_direction(model, x_star)?.g);
    probe_points
        .iter()
        .map(|p| {
            let g = Array1::from(decision_direction(model, p.view())?.g);
            Ok(cosine(g.view(), base.view()))
        })
        .collect()
}
