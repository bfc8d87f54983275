use ndarray::{Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::{argmax, log_softmax, softmax, NetworkModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub eps: f64,
    pub step: f64,
    pub iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        PgdConfig {
            eps: 0.1,
            step: 0.01,
            iters: 40,
            restarts: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PgdOutcome {
    pub x_adv: Array1<f64>,
    /// Cross-entropy of `label` at `x_adv`.
    pub loss: f64,
    pub success: bool,
}

fn project(x: &mut Array1<f64>, center: ArrayView1<f64>, eps: f64, bounds: (f64, f64)) {
    for (v, &c) in x.iter_mut().zip(center.iter()) {
        *v = v.clamp(c - eps, c + eps).clamp(bounds.0, bounds.1);
    }
}

/// L-infinity PGD ascent on cross-entropy with sign steps and random starts;
/// keeps the highest-loss iterate over all restarts.
pub fn pgd_attack(model: &NetworkModel, x: ArrayView1<f64>, label: usize, cfg: &PgdConfig) -> Result<PgdOutcome> {
    let bounds = model.input_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let loss_at = |z: &Array1<f64>| -log_softmax(z.view())[label];
    let mut best_x = x.to_owned();
    let mut best_loss = loss_at(&model.logits(x)?);
    for _ in 0..cfg.restarts.max(1) {
        let mut cur = x.to_owned();
        if cfg.eps > 0.0 {
            cur.mapv_inplace(|v| v + rng.random_range(-cfg.eps..=cfg.eps));
        }
        project(&mut cur, x, cfg.eps, bounds);
        for it in 0..=cfg.iters {
            let z = model.logits(cur.view())?;
            let loss = loss_at(&z);
            if loss > best_loss {
                best_loss = loss;
                best_x.assign(&cur);
            }
            if it == cfg.iters {
                break;
            }
            let mut v = softmax(z.view());
            v[label] -= 1.0;
            let (_, grad) = model.logit_vjp(cur.view(), v.view())?;
            for (c, g) in cur.iter_mut().zip(grad.iter()) {
                if *g > 0.0 {
                    *c += cfg.step;
                } else if *g < 0.0 {
                    *c -= cfg.step;
                }
            }
            project(&mut cur, x, cfg.eps, bounds);
        }
    }
    let success = argmax(model.logits(best_x.view())?.view()) != label;
    Ok(PgdOutcome {
        x_adv: best_x,
        loss: best_loss,
        success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random_model, random_point};

    #[test]
    fn zero_eps_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = random_model(&mut rng, &[3, 8, 3], false);
        let x = random_point(&mut rng, 3);
        let label = model.classify(x.view()).unwrap();
        let out = pgd_attack(&model, x.view(), label, &PgdConfig { eps: 0.0, ..PgdConfig::default() }).unwrap();
        assert_eq!(out.x_adv, x);
        assert!(!out.success);
    }

    #[test]
    fn stays_in_ball_and_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = random_model(&mut rng, &[4, 8, 8, 3], false);
        for s in 0..50 {
            let x = random_point(&mut rng, 4);
            let cfg = PgdConfig { eps: 0.3, step: 0.05, seed: s, ..PgdConfig::default() };
            let out = pgd_attack(&model, x.view(), 0, &cfg).unwrap();
            for (a, b) in out.x_adv.iter().zip(x.iter()) {
                assert!((a - b).abs() <= 0.3 + 1e-15);
                assert!((-1.0..=1.0).contains(a));
            }
        }
    }
}
