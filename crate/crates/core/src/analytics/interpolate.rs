use ndarray::{Array1, ArrayView1};

use crate::error::Result;
use crate::network::NetworkModel;
use crate::region::{extract_region, HalfspaceSystem};

#[derive(Debug, Clone)]
pub struct InterpolationResult {
    /// Largest kept `alpha` with `class(x_alpha) == class(x_test)`.
    pub alpha_star: f64,
    /// First rejected `alpha`, within the bisection width of `alpha_star`; 1 when there is no boundary.
    pub alpha_reject: f64,
    pub x_alpha: Array1<f64>,
    pub boundary_system: HalfspaceSystem,
    /// `x_target` already has the class of `x_test`.
    pub no_boundary: bool,
}

const BISECT_WIDTH: f64 = 1e-6;

fn blend(x_test: ArrayView1<f64>, x_target: ArrayView1<f64>, alpha: f64, bounds: (f64, f64)) -> Array1<f64> {
    let mut x = &x_target * alpha + &x_test * (1.0 - alpha);
    x.mapv_inplace(|v| v.clamp(bounds.0, bounds.1));
    x
}

/// Scans `resolution` uniform steps of `x_alpha = alpha x_target + (1 - alpha) x_test`,
/// brackets the last step that keeps the class of `x_test`, then bisects.
pub fn interpolation_search(
    model: &NetworkModel,
    x_test: ArrayView1<f64>,
    x_target: ArrayView1<f64>,
    resolution: usize,
) -> Result<InterpolationResult> {
    let bounds = model.input_bounds();
    let class = model.classify(x_test)?;
    let at = |alpha: f64| blend(x_test, x_target, alpha, bounds);
    if model.classify(x_target)? == class {
        let x_alpha = x_target.to_owned();
        return Ok(InterpolationResult {
            alpha_star: 1.0,
            alpha_reject: 1.0,
            boundary_system: extract_region(model, x_alpha.view())?,
            x_alpha,
            no_boundary: true,
        });
    }
    let steps = resolution.max(1);
    let mut last_kept = 0;
    for i in 1..steps {
        if model.classify(at(i as f64 / steps as f64).view())? == class {
            last_kept = i;
        }
    }
    let mut lo = last_kept as f64 / steps as f64;
    let mut hi = (last_kept + 1) as f64 / steps as f64;
    while hi - lo > BISECT_WIDTH {
        let mid = 0.5 * (lo + hi);
        if model.classify(at(mid).view())? == class {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x_alpha = at(lo);
    Ok(InterpolationResult {
        alpha_star: lo,
        alpha_reject: hi,
        boundary_system: extract_region(model, x_alpha.view())?,
        x_alpha,
        no_boundary: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::DenseLayer;
    use ndarray::array;

    #[test]
    fn same_class_target_is_flagged() {
        let model = NetworkModel::new(
            vec![DenseLayer::new(array![[1.0, 0.0], [-1.0, 0.0]], array![0.0, 0.0])],
            (-1.0, 1.0),
        )
        .unwrap();
        let r = interpolation_search(&model, array![0.5, 0.0].view(), array![0.2, 0.9].view(), 100).unwrap();
        assert!(r.no_boundary);
        assert_eq!(r.alpha_star, 1.0);
    }

    #[test]
    fn affine_crossing_is_exact() {
        // z0 - z1 = 2 x0 - 0.3 changes sign at x0 = 0.15
        let model = NetworkModel::new(
            vec![DenseLayer::new(array![[1.0, 0.5], [-1.0, 0.5]], array![-0.15, 0.15])],
            (-1.0, 1.0),
        )
        .unwrap();
        let x_test = array![0.9, -0.2];
        let x_target = array![-0.7, 0.6];
        let r = interpolation_search(&model, x_test.view(), x_target.view(), 1000).unwrap();
        // x0(alpha) = 0.9 - 1.6 alpha
        let analytic = (0.9 - 0.15) / 1.6;
        assert!((r.alpha_star - analytic).abs() <= 1e-6, "{} vs {}", r.alpha_star, analytic);
        assert!(r.alpha_reject > analytic - 1e-12);
        assert_eq!(model.classify(r.x_alpha.view()).unwrap(), 0);
    }
}
