//! Dense revised simplex for small and medium linear programs.
//!
//! Problems are stated as `max c^T y  s.t.  A y <= rhs,  lo <= y <= hi` with
//! free or bounded variables. The region LPs built on top of this have many
//! more inequalities than variables (thousands of halfspaces, hundreds of
//! input dimensions), so the solver works on the dual
//! `min rhs^T u  s.t.  A^T u = c,  u >= 0`, whose basis is only `n x n`.
//! The primal optimum is read off the simplex multipliers.
//!
//! Pricing is Dantzig's rule applied to rotating blocks of columns; after a
//! run of degenerate pivots the solver switches to Bland's smallest-index rule
//! over all columns until progress resumes, which rules out cycling. The starting basis is made of variable-bound rows where
//! they exist, with artificials and a phase-1 problem for the rest. The dual
//! right-hand side is the objective, often sparse, so phase 2 runs on a
//! slightly perturbed copy and a few dual simplex pivots restore the exact
//! optimum afterwards.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;
const REFACTOR_EVERY: usize = 100;
/// Columns priced per iteration outside Bland mode.
const PRICING_BLOCK: usize = 256;
/// Relative size of the right-hand-side lift used against degeneracy.
const PERTURBATION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    /// Maximized.
    pub objective: Array1<f64>,
    /// `m x n`, each row `a` meaning `a . y <= rhs`.
    pub rows: Array2<f64>,
    pub rhs: Array1<f64>,
    /// Per-variable `(lo, hi)`, possibly infinite.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(objective: Array1<f64>, rows: Array2<f64>, rhs: Array1<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let n = objective.len();
        if rows.ncols() != n && rows.nrows() > 0 {
            return Err(Error::InputShape { expected: n, got: rows.ncols() });
        }
        if rows.nrows() != rhs.len() {
            return Err(Error::InputShape { expected: rows.nrows(), got: rhs.len() });
        }
        if bounds.len() != n {
            return Err(Error::InputShape { expected: n, got: bounds.len() });
        }
        let rows = if rows.nrows() == 0 { Array2::zeros((0, n)) } else { rows };
        if objective.iter().chain(rows.iter()).chain(rhs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("LP data must be finite".into()));
        }
        if bounds.iter().any(|&(lo, hi)| lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY) {
            return Err(Error::Numeric("invalid variable bound".into()));
        }
        Ok(LinearProgram { objective, rows, rhs, bounds })
    }

    /// Free variables, no inequalities yet.
    pub fn free(objective: Array1<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            rows: Array2::zeros((0, n)),
            rhs: Array1::zeros(0),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        }
    }

    pub fn var_count(&self) -> usize {
        self.objective.len()
    }

    /// Largest scaled violation `(a.y - rhs) / max(1, |a|)` over rows and bounds.
    pub fn max_violation(&self, y: ArrayView1<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, &rhs) in self.rows.outer_iter().zip(self.rhs.iter()) {
            let norm = row.dot(&row).sqrt().max(1.0);
            worst = worst.max((row.dot(&y) - rhs) / norm);
        }
        for (&v, &(lo, hi)) in y.iter().zip(&self.bounds) {
            worst = worst.max(lo - v).max(v - hi);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub y: Option<Array1<f64>>,
    pub objective_value: f64,
}

impl LpSolution {
    fn infeasible() -> Self {
        LpSolution { status: LpStatus::Infeasible, y: None, objective_value: f64::NEG_INFINITY }
    }

    fn unbounded() -> Self {
        LpSolution { status: LpStatus::Unbounded, y: None, objective_value: f64::INFINITY }
    }
}

/// Solves `lp`, returning a certified optimum or the infeasible/unbounded status.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.var_count();
    let Some(ineq) = Inequalities::build(lp)? else {
        return Ok(LpSolution::infeasible());
    };
    if n == 0 {
        return Ok(LpSolution { status: LpStatus::Optimal, y: Some(Array1::zeros(0)), objective_value: 0.0 });
    }
    let c_scale = lp.objective.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let c = if c_scale > 0.0 { &lp.objective / c_scale } else { lp.objective.clone() };

    match DualSimplex::solve(&ineq, c.view())? {
        DualOutcome::Optimal(y) => {
            let violation = lp.max_violation(y.view());
            if violation > 1e-7 {
                return Err(Error::SolverFailure(format!(
                    "optimal point violates a constraint by {violation:e}"
                )));
            }
            let objective_value = lp.objective.dot(&y);
            Ok(LpSolution { status: LpStatus::Optimal, y: Some(y), objective_value })
        }
        DualOutcome::Unbounded => Ok(LpSolution::infeasible()),
        DualOutcome::Infeasible => {
            if primal_is_feasible(&ineq)? {
                Ok(LpSolution::unbounded())
            } else {
                Ok(LpSolution::infeasible())
            }
        }
    }
}

/// All inequalities, bounds included, as unit-norm rows `a . y <= r`.
struct Inequalities {
    rows: Array2<f64>,
    rhs: Array1<f64>,
    /// Row index of `y_j <= hi_j` and of `-y_j <= -lo_j`, when finite.
    upper: Vec<Option<usize>>,
    lower: Vec<Option<usize>>,
}

impl Inequalities {
    /// `None` when some zero row is trivially violated.
    fn build(lp: &LinearProgram) -> Result<Option<Self>> {
        let n = lp.var_count();
        let mut rows: Vec<f64> = Vec::with_capacity((lp.rows.nrows() + 2 * n) * n);
        let mut rhs = Vec::new();
        for (row, &r) in lp.rows.outer_iter().zip(lp.rhs.iter()) {
            let norm = row.dot(&row).sqrt();
            if norm == 0.0 {
                if r < -FEAS_TOL {
                    return Ok(None);
                }
                continue;
            }
            rows.extend(row.iter().map(|v| v / norm));
            rhs.push(r / norm);
        }
        let mut upper = vec![None; n];
        let mut lower = vec![None; n];
        for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
            if lo > hi {
                return Ok(None);
            }
            if hi.is_finite() {
                upper[j] = Some(rhs.len());
                rows.extend((0..n).map(|k| if k == j { 1.0 } else { 0.0 }));
                rhs.push(hi);
            }
            if lo.is_finite() {
                lower[j] = Some(rhs.len());
                rows.extend((0..n).map(|k| if k == j { -1.0 } else { 0.0 }));
                rhs.push(-lo);
            }
        }
        let m = rhs.len();
        let rows = Array2::from_shape_vec((m, n), rows).map_err(|e| Error::SolverFailure(e.to_string()))?;
        Ok(Some(Inequalities { rows, rhs: Array1::from(rhs), upper, lower }))
    }
}

/// Feasibility of `{y : A y <= r}` via `max -t  s.t.  A y - t <= r, t >= 0`,
/// a problem whose dual is always feasible and bounded.
fn primal_is_feasible(ineq: &Inequalities) -> Result<bool> {
    let (m, n) = ineq.rows.dim();
    let mut rows = Array2::zeros((m + 1, n + 1));
    rows.slice_mut(ndarray::s![..m, ..n]).assign(&ineq.rows);
    rows.slice_mut(ndarray::s![..m, n]).fill(-1.0);
    rows[[m, n]] = -1.0;
    let mut rhs = Array1::zeros(m + 1);
    rhs.slice_mut(ndarray::s![..m]).assign(&ineq.rhs);
    let mut lower = vec![None; n + 1];
    lower[n] = Some(m);
    let aux = Inequalities { rows, rhs, upper: vec![None; n + 1], lower };
    let mut c = Array1::zeros(n + 1);
    c[n] = -1.0;
    match DualSimplex::solve(&aux, c.view())? {
        DualOutcome::Optimal(y) => Ok(y[n] <= 1e-7),
        _ => Err(Error::SolverFailure("feasibility subproblem did not reach an optimum".into())),
    }
}

enum DualOutcome {
    Optimal(Array1<f64>),
    /// Dual unbounded, so the primal is infeasible.
    Unbounded,
    /// Dual infeasible, so the primal is unbounded or infeasible.
    Infeasible,
}

/// Revised simplex on `min r^T u  s.t.  sigma * (A^T u) = sigma * c,  u >= 0`,
/// where `sigma` flips rows so the right-hand side is nonnegative. Columns
/// `0..m` are the rows of `A`; columns `m..m+n` are the artificials.
struct DualSimplex<'a> {
    ineq: &'a Inequalities,
    sigma: Array1<f64>,
    b: Array1<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Array2<f64>,
    xb: Array1<f64>,
    /// Artificials left basic at level zero after phase 1; they must not move.
    pinned: Vec<bool>,
    iterations: usize,
    max_iterations: usize,
    refactor_every: usize,
    /// Where the next partial pricing pass starts.
    cursor: usize,
    block: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl<'a> DualSimplex<'a> {
    fn solve(ineq: &'a Inequalities, c: ArrayView1<f64>) -> Result<DualOutcome> {
        let (m, n) = ineq.rows.dim();
        // Crash basis: the bound row of each variable whose unit column enters
        // with a positive sign, or an artificial where no such row exists.
        let mut sigma = Array1::ones(n);
        let mut basis = Vec::with_capacity(n);
        for j in 0..n {
            let (sign, row) = if c[j] > 0.0 {
                (1.0, ineq.upper[j])
            } else if c[j] < 0.0 {
                (-1.0, ineq.lower[j])
            } else if ineq.upper[j].is_some() {
                (1.0, ineq.upper[j])
            } else {
                (-1.0, ineq.lower[j])
            };
            sigma[j] = sign;
            basis.push(row.unwrap_or(m + j));
        }
        let b = &c * &sigma;
        let mut in_basis = vec![false; m + n];
        for &j in &basis {
            in_basis[j] = true;
        }
        let mut s = DualSimplex {
            ineq,
            sigma,
            xb: b.clone(),
            b,
            basis,
            in_basis,
            binv: Array2::eye(n),
            pinned: vec![false; n],
            iterations: 0,
            max_iterations: 50 * (m + n) + 10_000,
            refactor_every: REFACTOR_EVERY.max(n / 2),
            cursor: 0,
            block: PRICING_BLOCK,
        };

        if s.basis.iter().zip(s.xb.iter()).any(|(&j, &v)| j >= m && v > 0.0) {
            // phase 1: minimize the sum of artificials
            match s.run(true)? {
                PhaseEnd::Optimal => {}
                PhaseEnd::Unbounded => return Err(Error::SolverFailure("phase 1 reported unbounded".into())),
            }
            let infeasibility: f64 = s
                .basis
                .iter()
                .zip(s.xb.iter())
                .filter(|(&j, _)| j >= m)
                .map(|(_, &v)| v.max(0.0))
                .sum();
            if infeasibility > FEAS_TOL * (1.0 + s.b.iter().sum::<f64>()) {
                return Ok(DualOutcome::Infeasible);
            }
        }
        s.drive_out_artificials();

        // The dual right-hand side is mostly zero, so phase 2 is run on a
        // copy whose basic values are lifted off zero, then repaired.
        let exact = s.b.clone();
        s.perturb();
        match s.run(false)? {
            PhaseEnd::Unbounded => return Ok(DualOutcome::Unbounded),
            PhaseEnd::Optimal => {}
        }
        s.b = exact;
        for _ in 0..4 {
            s.refactor()?;
            s.repair()?;
            let pi = s.multipliers(false);
            let d = s.reduced_costs(&pi, false);
            if s.choose_entering(&d, false, &pi, false).is_none() {
                return Ok(DualOutcome::Optimal(s.primal_point()));
            }
            match s.run(false)? {
                PhaseEnd::Unbounded => return Ok(DualOutcome::Unbounded),
                PhaseEnd::Optimal => {}
            }
        }
        Err(Error::SolverFailure("could not restore optimality after perturbation".into()))
    }

    /// Adds `B delta` to the right-hand side for a small deterministic
    /// `delta > 0` on every basic position that may move.
    fn perturb(&mut self) {
        let n = self.n();
        let scale = self.b.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let mut delta = Array1::zeros(n);
        for i in 0..n {
            if !self.pinned[i] {
                // golden-ratio sequence keeps the offsets distinct
                let frac = (i as f64 * 0.618_033_988_749_895).fract();
                delta[i] = PERTURBATION * scale * (1.0 + frac);
            }
        }
        for (i, &j) in self.basis.iter().enumerate() {
            if delta[i] != 0.0 {
                let col = self.column(j);
                self.b.scaled_add(delta[i], &col);
            }
        }
        self.xb = &self.xb + &delta;
    }

    /// Dual simplex passes on the current basis until the basic values are
    /// nonnegative, keeping every reduced cost nonnegative.
    fn repair(&mut self) -> Result<()> {
        let m = self.m();
        let tol = 1e-12 * self.b.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        loop {
            let Some((r, xr)) = self
                .xb
                .iter()
                .enumerate()
                .filter(|(i, _)| !self.pinned[*i])
                .map(|(i, &v)| (i, v))
                .fold(None, |acc: Option<(usize, f64)>, cur| match acc {
                    Some(a) if a.1 <= cur.1 => Some(a),
                    _ => Some(cur),
                })
            else {
                return Ok(());
            };
            if xr >= -tol {
                for v in self.xb.iter_mut() {
                    *v = v.max(0.0);
                }
                return Ok(());
            }
            if self.iterations >= self.max_iterations {
                return Err(Error::SolverFailure("iteration cap reached while repairing".into()));
            }
            let pi = self.multipliers(false);
            let d = self.reduced_costs(&pi, false);
            let rho = &self.binv.row(r) * &self.sigma;
            let alpha_r = self.ineq.rows.dot(&rho);
            let mut best: Option<(usize, f64)> = None;
            for j in 0..m {
                if self.in_basis[j] || alpha_r[j] >= -PIVOT_TOL {
                    continue;
                }
                let ratio = d[j].max(0.0) / -alpha_r[j];
                if best.is_none_or(|(_, br)| ratio < br) {
                    best = Some((j, ratio));
                }
            }
            let Some((q, _)) = best else {
                return Err(Error::SolverFailure("no entering column while repairing".into()));
            };
            let alpha = self.binv.dot(&self.column(q));
            let theta = self.xb[r] / alpha[r];
            self.pivot(q, r, &alpha, theta);
            self.iterations += 1;
        }
    }

    fn m(&self) -> usize {
        self.ineq.rows.nrows()
    }

    fn n(&self) -> usize {
        self.ineq.rows.ncols()
    }

    fn column(&self, j: usize) -> Array1<f64> {
        let m = self.m();
        if j < m {
            &self.ineq.rows.row(j) * &self.sigma
        } else {
            let mut e = Array1::zeros(self.n());
            e[j - m] = 1.0;
            e
        }
    }

    fn cost(&self, j: usize, phase1: bool) -> f64 {
        let m = self.m();
        match (phase1, j < m) {
            (true, true) => 0.0,
            (true, false) => 1.0,
            (false, true) => self.ineq.rhs[j],
            (false, false) => 0.0,
        }
    }

    /// Simplex multipliers `pi = B^-T c_B`.
    fn multipliers(&self, phase1: bool) -> Array1<f64> {
        let cb = Array1::from_iter(self.basis.iter().map(|&j| self.cost(j, phase1)));
        self.binv.t().dot(&cb)
    }

    /// Reduced costs of all structural columns.
    fn reduced_costs(&self, pi: &Array1<f64>, phase1: bool) -> Array1<f64> {
        let scaled = pi * &self.sigma;
        let q = self.ineq.rows.dot(&scaled);
        if phase1 {
            -q
        } else {
            &self.ineq.rhs - &q
        }
    }

    fn run(&mut self, phase1: bool) -> Result<PhaseEnd> {
        let mut degenerate = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Error::SolverFailure(format!(
                    "iteration cap of {} reached",
                    self.max_iterations
                )));
            }
            if since_refactor >= self.refactor_every {
                self.refactor()?;
                since_refactor = 0;
            }
            let pi = self.multipliers(phase1);
            let bland = degenerate >= DEGENERATE_RUN;
            let entering = if phase1 || bland {
                let d = self.reduced_costs(&pi, phase1);
                self.choose_entering(&d, phase1, &pi, bland)
            } else {
                self.partial_price(&pi)
            };
            let Some(q) = entering else {
                if since_refactor > 0 {
                    // confirm optimality with a fresh inverse
                    self.refactor()?;
                    since_refactor = 0;
                    let pi = self.multipliers(phase1);
                    let d = self.reduced_costs(&pi, phase1);
                    if self.choose_entering(&d, phase1, &pi, true).is_some() {
                        continue;
                    }
                }
                return Ok(PhaseEnd::Optimal);
            };
            let alpha = self.binv.dot(&self.column(q));
            let Some((r, theta)) = self.ratio_test(&alpha, bland) else {
                return Ok(PhaseEnd::Unbounded);
            };
            self.pivot(q, r, &alpha, theta);
            self.iterations += 1;
            since_refactor += 1;
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
        }
    }

    /// Dantzig's rule over rotating blocks of structural columns: the first
    /// block with an improving column supplies the entering one, so `None`
    /// means every column was priced.
    fn partial_price(&mut self, pi: &Array1<f64>) -> Option<usize> {
        let m = self.m();
        let block = self.block.clamp(1, m.max(1));
        let scaled = pi * &self.sigma;
        let mut start = if m == 0 { 0 } else { self.cursor % m };
        let mut scanned = 0;
        while scanned < m {
            let end = (start + block).min(m);
            let q = self.ineq.rows.slice(s![start..end, ..]).dot(&scaled);
            let mut best: Option<(usize, f64)> = None;
            for (k, &qk) in q.iter().enumerate() {
                let j = start + k;
                let dj = self.ineq.rhs[j] - qk;
                if !self.in_basis[j] && dj < -OPT_TOL && best.is_none_or(|(_, bd)| dj < bd) {
                    best = Some((j, dj));
                }
            }
            scanned += end - start;
            start = if end == m { 0 } else { end };
            if let Some((j, _)) = best {
                self.cursor = start;
                return Some(j);
            }
        }
        None
    }

    fn choose_entering(&self, d: &Array1<f64>, phase1: bool, pi: &Array1<f64>, bland: bool) -> Option<usize> {
        let m = self.m();
        let mut best: Option<(usize, f64)> = None;
        let candidates = d.iter().enumerate().map(|(j, &dj)| (j, dj));
        // artificials may only re-enter in phase 1, where their reduced cost is 1 - pi_i
        let artificial = (0..self.n()).filter(|_| phase1).map(|i| (m + i, 1.0 - pi[i]));
        for (j, dj) in candidates.chain(artificial) {
            if self.in_basis[j] || dj >= -OPT_TOL {
                continue;
            }
            if bland {
                return Some(j);
            }
            match best {
                Some((_, bd)) if dj >= bd => {}
                _ => best = Some((j, dj)),
            }
        }
        best.map(|(j, _)| j)
    }

    fn ratio_test(&self, alpha: &Array1<f64>, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &a) in alpha.iter().enumerate() {
            if self.pinned[i] {
                if a.abs() > PIVOT_TOL {
                    return Some((i, 0.0));
                }
                continue;
            }
            if a <= PIVOT_TOL {
                continue;
            }
            let theta = self.xb[i].max(0.0) / a;
            best = match best {
                None => Some((i, theta)),
                Some((bi, bt)) => {
                    let tie = (theta - bt).abs() <= 1e-12 * (1.0 + bt.abs());
                    if theta < bt && !tie {
                        Some((i, theta))
                    } else if tie {
                        let prefer = if bland {
                            self.basis[i] < self.basis[bi]
                        } else {
                            a > alpha[bi]
                        };
                        if prefer { Some((i, theta.min(bt))) } else { Some((bi, theta.min(bt))) }
                    } else {
                        Some((bi, bt))
                    }
                }
            };
        }
        best
    }

    fn pivot(&mut self, q: usize, r: usize, alpha: &Array1<f64>, theta: f64) {
        let n = self.n();
        for i in 0..n {
            if i != r {
                self.xb[i] -= theta * alpha[i];
            }
        }
        self.xb[r] = theta;
        let pivot = alpha[r];
        {
            let mut row_r = self.binv.row_mut(r);
            row_r /= pivot;
        }
        let row_r = self.binv.row(r).to_owned();
        for (i, mut row) in self.binv.axis_iter_mut(Axis(0)).enumerate() {
            if i != r && alpha[i] != 0.0 {
                row.scaled_add(-alpha[i], &row_r);
            }
        }
        let leaving = self.basis[r];
        self.in_basis[leaving] = false;
        self.in_basis[q] = true;
        self.basis[r] = q;
        self.pinned[r] = false;
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.n();
        let mut bmat = Array2::zeros((n, n));
        for (k, &j) in self.basis.iter().enumerate() {
            bmat.column_mut(k).assign(&self.column(j));
        }
        self.binv = invert(bmat).ok_or_else(|| Error::SolverFailure("singular basis".into()))?;
        self.xb = self.binv.dot(&self.b);
        for (i, v) in self.xb.iter_mut().enumerate() {
            if *v < 0.0 && *v > -1e-13 && !self.pinned[i] {
                *v = 0.0;
            }
        }
        Ok(())
    }

    /// Pivots basic artificials (all at level zero) out of the basis where some
    /// structural column has a usable entry in their row; the rest stay pinned.
    fn drive_out_artificials(&mut self) {
        let m = self.m();
        for r in 0..self.n() {
            if self.basis[r] < m {
                continue;
            }
            let rho = self.binv.row(r).to_owned();
            let scaled = &rho * &self.sigma;
            let entries = self.ineq.rows.dot(&scaled);
            let mut best: Option<(usize, f64)> = None;
            for (j, &v) in entries.iter().enumerate() {
                if !self.in_basis[j] && v.abs() > 1e-7 && best.is_none_or(|(_, bv)| v.abs() > bv) {
                    best = Some((j, v.abs()));
                }
            }
            match best {
                Some((j, _)) => {
                    let alpha = self.binv.dot(&self.column(j));
                    self.pivot(j, r, &alpha, 0.0);
                    self.xb[r] = self.xb[r].max(0.0);
                }
                None => self.pinned[r] = true,
            }
        }
    }

    fn primal_point(&self) -> Array1<f64> {
        let pi = self.multipliers(false);
        &pi * &self.sigma
    }
}

/// Gauss-Jordan inverse with partial pivoting.
pub(crate) fn invert(mut a: Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let (p, pv) = (col..n)
            .map(|i| (i, a[[i, col]].abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pv < 1e-13 {
            return None;
        }
        if p != col {
            for k in 0..n {
                a.swap([p, k], [col, k]);
                inv.swap([p, k], [col, k]);
            }
        }
        let d = a[[col, col]];
        a.row_mut(col).mapv_inplace(|v| v / d);
        inv.row_mut(col).mapv_inplace(|v| v / d);
        let a_row = a.row(col).to_owned();
        let inv_row = inv.row(col).to_owned();
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = a[[i, col]];
            if f != 0.0 {
                a.row_mut(i).scaled_add(-f, &a_row);
                inv.row_mut(i).scaled_add(-f, &inv_row);
            }
        }
    }
    Some(inv)
}
