use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{argmax, log_softmax, softmax, RegionAffineMap};
use crate::polytope::maximize_linear;
use crate::region::HalfspaceSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Classic step `2 / (k + 2)` toward the LP vertex.
    OpenLoop,
    /// Away steps over the active vertex set with exact line search.
    AwayStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Duality-gap stopping tolerance.
    pub tol: f64,
    pub max_iters: usize,
    pub rule: StepRule,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            tol: 1e-6,
            max_iters: 500,
            rule: StepRule::AwayStep,
        }
    }
}

/// Point of the region with the highest log-probability of `target_class`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProbe {
    pub target_class: usize,
    pub x_t: Vec<f64>,
    pub log_prob: f64,
    pub realized: bool,
    pub distortion: f64,
    /// Frank-Wolfe gap at the last iterate.
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub class_region_count: usize,
    pub distortion: f64,
}

struct Objective<'a> {
    affine: &'a RegionAffineMap,
    t: usize,
}

impl Objective<'_> {
    fn logits(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.affine.logits(x)
    }

    fn value_of(&self, z: ArrayView1<f64>) -> f64 {
        log_softmax(z)[self.t]
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        self.value_of(self.logits(x).view())
    }

    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut v = -softmax(self.logits(x).view());
        v[self.t] += 1.0;
        self.affine.jacobian.t().dot(&v)
    }

    /// Maximizer of the objective on `x + gamma d`, `gamma in [0, gamma_max]`.
    fn line_search(&self, x: ArrayView1<f64>, d: ArrayView1<f64>, gamma_max: f64) -> f64 {
        let z = self.logits(x);
        let zd = self.affine.jacobian.dot(&d);
        let slope = |g: f64| {
            let p = softmax((&z + &(&zd * g)).view());
            zd[self.t] - p.dot(&zd)
        };
        if slope(gamma_max) >= 0.0 {
            return gamma_max;
        }
        if slope(0.0) <= 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, gamma_max);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

fn same_point(a: &Array1<f64>, b: &Array1<f64>) -> bool {
    a.iter().zip(b.iter()).all(|(p, q)| (p - q).abs() <= 1e-12 * (1.0 + p.abs()))
}

/// Maximizes `z_t(x) - logsumexp(z(x))` over the region by Frank-Wolfe, one LP per step.
pub fn class_probe(
    system: &HalfspaceSystem,
    affine: &RegionAffineMap,
    x_star: ArrayView1<f64>,
    t: usize,
    opts: &ProbeOptions,
) -> Result<ClassProbe> {
    if t >= affine.offset.len() {
        return Err(Error::IndexOutOfRange(format!("class {t}")));
    }
    let obj = Objective { affine, t };
    let mut x = x_star.to_owned();
    let mut fx = obj.value(x.view());
    if !fx.is_finite() {
        return Err(Error::Numeric("class objective is not finite".into()));
    }
    let mut best = (x.clone(), fx);
    // convex combination representing x; the start point is an atom too
    let mut atoms: Vec<(Array1<f64>, f64)> = vec![(x.clone(), 1.0)];
    let mut gap = 0.0;
    let mut iterations = 0;
    for k in 0..opts.max_iters {
        iterations = k;
        let g = obj.gradient(x.view());
        if g.iter().all(|v| v.abs() <= 1e-15) {
            gap = 0.0;
            break;
        }
        let (s, _) = maximize_linear(system, g.view())?;
        let fs = obj.value(s.view());
        if fs > best.1 {
            best = (s.clone(), fs);
        }
        let d_fw = &s - &x;
        gap = g.dot(&d_fw).max(0.0);
        if gap <= opts.tol {
            break;
        }
        match opts.rule {
            StepRule::OpenLoop => {
                let gamma = 2.0 / (k as f64 + 2.0);
                x = &x + &(&d_fw * gamma);
            }
            StepRule::AwayStep => {
                let (away, _) = atoms
                    .iter()
                    .enumerate()
                    .map(|(i, (a, _))| (i, g.dot(a)))
                    .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
                let d_away = &x - &atoms[away].0;
                let alpha_v = atoms[away].1;
                let away_gain = g.dot(&d_away);
                if away_gain > gap && alpha_v < 1.0 {
                    let gamma_max = alpha_v / (1.0 - alpha_v);
                    let gamma = obj.line_search(x.view(), d_away.view(), gamma_max);
                    x = &x + &(&d_away * gamma);
                    for atom in atoms.iter_mut() {
                        atom.1 *= 1.0 + gamma;
                    }
                    atoms[away].1 -= gamma;
                    if gamma >= gamma_max || atoms[away].1 <= 1e-14 {
                        atoms.remove(away);
                    }
                } else {
                    let gamma = obj.line_search(x.view(), d_fw.view(), 1.0);
                    x = &x + &(&d_fw * gamma);
                    for atom in atoms.iter_mut() {
                        atom.1 *= 1.0 - gamma;
                    }
                    match atoms.iter().position(|(a, _)| same_point(a, &s)) {
                        Some(i) => atoms[i].1 += gamma,
                        None => atoms.push((s, gamma)),
                    }
                    atoms.retain(|(_, w)| *w > 1e-14);
                }
            }
        }
        fx = obj.value(x.view());
        if !fx.is_finite() {
            return Err(Error::Numeric("class objective is not finite".into()));
        }
        if fx > best.1 {
            best = (x.clone(), fx);
        }
        iterations = k + 1;
    }
    let (x_t, log_prob) = best;
    let realized = argmax(affine.logits(x_t.view()).view()) == t;
    let distortion = (&x_t - &x_star).dot(&(&x_t - &x_star)).sqrt();
    Ok(ClassProbe {
        target_class: t,
        x_t: x_t.to_vec(),
        log_prob: log_prob.min(0.0),
        realized,
        distortion,
        gap,
        iterations,
    })
}

pub fn region_summary(probes: &[ClassProbe]) -> RegionSummary {
    RegionSummary {
        class_region_count: probes.iter().filter(|p| p.realized).count(),
        distortion: probes.iter().map(|p| p.distortion).fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn square() -> HalfspaceSystem {
        HalfspaceSystem::from_constraints(&[], array![-1.0, -1.0], array![1.0, 1.0]).unwrap()
    }

    #[test]
    fn constant_objective_returns_start() {
        let affine = RegionAffineMap {
            jacobian: array![[1.0, 2.0], [1.0, 2.0]],
            offset: array![0.0, 0.3],
            pattern: crate::ActivationPattern::zeros(0),
        };
        let x = array![0.1, -0.2];
        let p = class_probe(&square(), &affine, x.view(), 0, &ProbeOptions::default()).unwrap();
        assert_eq!(p.x_t, x.to_vec());
        assert_eq!(p.gap, 0.0);
        assert_eq!(p.distortion, 0.0);
    }

    #[test]
    fn linear_separator_reaches_corner() {
        // z0 - z1 = 4 x0 + x1: maximized at (1, 1)
        let affine = RegionAffineMap {
            jacobian: array![[2.0, 0.5], [-2.0, -0.5]],
            offset: array![0.0, 0.0],
            pattern: crate::ActivationPattern::zeros(0),
        };
        for rule in [StepRule::OpenLoop, StepRule::AwayStep] {
            let opts = ProbeOptions { rule, ..ProbeOptions::default() };
            let p = class_probe(&square(), &affine, array![0.0, 0.0].view(), 0, &opts).unwrap();
            assert!(p.realized);
            let expected = -(1.0f64 + (-5.0f64).exp()).ln();
            assert!((p.log_prob - expected).abs() < 1e-9, "{rule:?}");
        }
    }

    #[test]
    fn interior_optimum_with_three_classes() {
        // p0 is maximized where z0 dominates as much as the box allows
        let affine = RegionAffineMap {
            jacobian: array![[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]],
            offset: array![1.0, 0.0, 0.0],
            pattern: crate::ActivationPattern::zeros(0),
        };
        let p = class_probe(&square(), &affine, array![0.7, 0.3].view(), 0, &ProbeOptions::default()).unwrap();
        // optimum of 1 - log(e + e^x + e^-x) is x0 = 0
        assert!(p.x_t[0].abs() < 1e-4);
        assert!((p.log_prob - (1.0 - (1f64.exp() + 2.0).ln())).abs() < 1e-7);
        let summary = region_summary(std::slice::from_ref(&p));
        assert_eq!(summary.class_region_count, 1);
    }
}
