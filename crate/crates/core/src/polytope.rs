//! Insphere and redundant-constraint elimination for region H-representations.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::region::HalfspaceSystem;

/// Largest ball inside a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsphereResult {
    pub center: Vec<f64>,
    pub inradius: f64,
}

/// Outcome of the redundancy LP for one constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedundancyVerdict {
    pub index: usize,
    /// Minimum of `w_k . x + b_k` over the other retained constraints, the
    /// relaxed copy `w_k . x + b_k >= -1` and the box.
    pub minimum: f64,
    pub redundant: bool,
}

fn box_bounds(system: &HalfspaceSystem) -> Vec<(f64, f64)> {
    system
        .box_lo()
        .iter()
        .zip(system.box_hi().iter())
        .map(|(&lo, &hi)| (lo, hi))
        .collect()
}

/// Chebyshev center and radius:
/// `max r  s.t.  w_i . c - r |w_i| + b_i >= 0,  lo + r <= c <= hi - r,  r >= 0`.
pub fn insphere(system: &HalfspaceSystem) -> Result<InsphereResult> {
    let d = system.dim();
    let k = system.len();
    let mut rows = Array2::zeros((k + 2 * d, d + 1));
    let mut rhs = Array1::zeros(k + 2 * d);
    for i in 0..k {
        let (w, b) = system.constraint(i);
        let norm = w.dot(&w).sqrt();
        for j in 0..d {
            rows[[i, j]] = -w[j];
        }
        rows[[i, d]] = norm;
        rhs[i] = b;
    }
    for j in 0..d {
        // c_j + r <= hi_j
        rows[[k + 2 * j, j]] = 1.0;
        rows[[k + 2 * j, d]] = 1.0;
        rhs[k + 2 * j] = system.box_hi()[j];
        // -c_j + r <= -lo_j
        rows[[k + 2 * j + 1, j]] = -1.0;
        rows[[k + 2 * j + 1, d]] = 1.0;
        rhs[k + 2 * j + 1] = -system.box_lo()[j];
    }
    let mut objective = Array1::zeros(d + 1);
    objective[d] = 1.0;
    // implied by the box rows; finite bounds give the solver a full starting basis
    let mut bounds: Vec<(f64, f64)> = box_bounds(system);
    let half = bounds.iter().map(|(lo, hi)| 0.5 * (hi - lo)).fold(f64::INFINITY, f64::min);
    bounds.push((0.0, if half.is_finite() { half.max(0.0) } else { f64::INFINITY }));
    let sol = solve_lp(&LinearProgram::new(objective, rows, rhs, bounds)?)?;
    match sol.status {
        LpStatus::Optimal => {
            let y = sol.y.expect("optimal solution carries a point");
            Ok(InsphereResult {
                center: y.iter().take(d).copied().collect(),
                inradius: y[d].max(0.0),
            })
        }
        LpStatus::Infeasible => Err(Error::InfeasibleRegion),
        LpStatus::Unbounded => Err(Error::SolverFailure("insphere LP unbounded".into())),
    }
}

/// `max g . x` over the region; returns the maximizer.
pub fn maximize_linear(system: &HalfspaceSystem, g: ArrayView1<f64>) -> Result<(Array1<f64>, f64)> {
    let rows = system.weights().mapv(|v| -v);
    let lp = LinearProgram::new(g.to_owned(), rows, system.biases().clone(), box_bounds(system))?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.y.expect("optimal solution carries a point"), sol.objective_value)),
        LpStatus::Infeasible => Err(Error::InfeasibleRegion),
        LpStatus::Unbounded => Err(Error::SolverFailure("bounded region reported unbounded".into())),
    }
}

/// Minimum of constraint `k` over `others`, the relaxed copy of `k` and the box.
/// Returns the minimum and the minimizer.
pub fn redundancy_minimum(system: &HalfspaceSystem, k: usize, others: &[usize]) -> Result<(f64, Array1<f64>)> {
    let d = system.dim();
    let mut rows = Array2::zeros((others.len() + 1, d));
    let mut rhs = Array1::zeros(others.len() + 1);
    for (r, &i) in others.iter().enumerate() {
        let (w, b) = system.constraint(i);
        rows.row_mut(r).assign(&w.mapv(|v| -v));
        rhs[r] = b;
    }
    let (wk, bk) = system.constraint(k);
    rows.row_mut(others.len()).assign(&wk.mapv(|v| -v));
    rhs[others.len()] = bk + 1.0;
    let lp = LinearProgram::new(wk.mapv(|v| -v), rows, rhs, box_bounds(system))?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let x = sol.y.expect("optimal solution carries a point");
            Ok((wk.dot(&x) + bk, x))
        }
        LpStatus::Infeasible => Err(Error::InfeasibleRegion),
        LpStatus::Unbounded => Err(Error::SolverFailure("redundancy LP unbounded".into())),
    }
}

/// Tests constraints in order, dropping each one whose minimum over the
/// currently retained others is nonnegative.
pub fn remove_redundant(system: &HalfspaceSystem) -> Result<(HalfspaceSystem, Vec<RedundancyVerdict>)> {
    let mut retained: Vec<usize> = (0..system.len()).collect();
    let mut verdicts = Vec::with_capacity(system.len());
    for k in 0..system.len() {
        let others: Vec<usize> = retained.iter().copied().filter(|&i| i != k).collect();
        let (minimum, _) = redundancy_minimum(system, k, &others).map_err(|e| Error::ConstraintSolve {
            index: k,
            source: Box::new(e),
        })?;
        let redundant = minimum >= 0.0;
        if redundant {
            retained = others;
        }
        verdicts.push(RedundancyVerdict { index: k, minimum, redundant });
    }
    Ok((system.select(&retained), verdicts))
}

/// Axis-aligned bounding box of the region, from `2d` LPs.
pub fn bounding_box(system: &HalfspaceSystem) -> Result<(Array1<f64>, Array1<f64>)> {
    let d = system.dim();
    let mut lo = Array1::zeros(d);
    let mut hi = Array1::zeros(d);
    for j in 0..d {
        let mut g = Array1::zeros(d);
        g[j] = 1.0;
        hi[j] = maximize_linear(system, g.view())?.1;
        g[j] = -1.0;
        lo[j] = -maximize_linear(system, g.view())?.1;
    }
    Ok((lo, hi))
}
