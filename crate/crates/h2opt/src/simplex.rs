//! Bounded-variable primal revised simplex.
//!
//! Rows are converted to equalities with one slack per row; slacks carry
//! range bounds derived from the row sense. Phase 1 minimizes the sum of
//! bound violations of the basic variables with a composite objective
//! that is re-derived every iteration; phase 2 minimizes the true
//! objective. Geometric row/column scaling is applied before solving.
//! Pricing is Dantzig with lowest-index tie-break, falling back to
//! Bland's rule after a stall, so solves are fully deterministic.

use crate::model::{MilpModel, RowSense};
use crate::SolverError;

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-8;
const REFACTOR_EVERY: usize = 64;
const STALL_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Result of one LP solve (integrality relaxed).
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural column values (empty unless `Optimal` or `IterationLimit`).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Dual value per row (empty unless `Optimal`).
    pub duals: Vec<f64>,
}

/// Solve the LP relaxation of `model` with its stored bounds.
pub fn solve_lp(model: &MilpModel) -> Result<LpSolution, SolverError> {
    model.validate()?;
    let lo: Vec<f64> = model.columns.iter().map(|c| c.lo).collect();
    let hi: Vec<f64> = model.columns.iter().map(|c| c.hi).collect();
    solve_lp_with_bounds(model, &lo, &hi)
}

/// Solve the LP relaxation with overriding column bounds (used by
/// branch and bound; `lo`/`hi` must have one entry per column).
pub fn solve_lp_with_bounds(model: &MilpModel, lo: &[f64], hi: &[f64]) -> Result<LpSolution, SolverError> {
    if lo.len() != model.columns.len() || hi.len() != model.columns.len() {
        return Err(SolverError::InvalidModel(
            "bound override length does not match column count".into(),
        ));
    }
    for j in 0..lo.len() {
        if lo[j] > hi[j] + 1e-12 {
            // Empty box: trivially infeasible without running the simplex.
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::INFINITY,
                duals: Vec::new(),
            });
        }
    }
    let mut tab = Tableau::build(model, lo, hi);
    tab.solve()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    /// structural column count; total variables = n + m (slacks appended)
    n: usize,
    /// CSC storage for structural columns
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    obj: Vec<f64>,
    rhs: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    /// dense basis inverse, row-major m x m
    binv: Vec<f64>,
    x: Vec<f64>,
    pivots_since_refactor: usize,
}

impl Tableau {
    fn build(model: &MilpModel, lo_in: &[f64], hi_in: &[f64]) -> Tableau {
        let m = model.rows.len();
        let n = model.columns.len();

        // Assemble the structural matrix column-major, merging duplicate
        // (row, col) entries.
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in model.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                per_col[j].push((i, a));
            }
        }
        for entries in &mut per_col {
            entries.sort_by_key(|&(i, _)| i);
            entries.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            entries.retain(|&(_, a)| a != 0.0);
        }

        // Geometric mean scaling, two sweeps.
        let mut row_scale = vec![1.0f64; m];
        let mut col_scale = vec![1.0f64; n];
        for _ in 0..2 {
            let mut row_min = vec![f64::INFINITY; m];
            let mut row_max = vec![0.0f64; m];
            for (j, entries) in per_col.iter().enumerate() {
                for &(i, a) in entries {
                    let v = (a * row_scale[i] * col_scale[j]).abs();
                    if v > 0.0 {
                        row_min[i] = row_min[i].min(v);
                        row_max[i] = row_max[i].max(v);
                    }
                }
            }
            for i in 0..m {
                if row_max[i] > 0.0 {
                    row_scale[i] /= (row_min[i] * row_max[i]).sqrt();
                }
            }
            let mut col_min = vec![f64::INFINITY; n];
            let mut col_max = vec![0.0f64; n];
            for (j, entries) in per_col.iter().enumerate() {
                for &(i, a) in entries {
                    let v = (a * row_scale[i] * col_scale[j]).abs();
                    if v > 0.0 {
                        col_min[j] = col_min[j].min(v);
                        col_max[j] = col_max[j].max(v);
                    }
                }
            }
            for j in 0..n {
                if col_max[j] > 0.0 {
                    col_scale[j] /= (col_min[j] * col_max[j]).sqrt();
                }
            }
        }

        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for (j, entries) in per_col.iter().enumerate() {
            for &(i, a) in entries {
                row_idx.push(i);
                values.push(a * row_scale[i] * col_scale[j]);
            }
            col_ptr.push(row_idx.len());
        }

        let scale_lo = |v: f64, s: f64| if v.is_finite() { v / s } else { v };

        let mut lo: Vec<f64> = (0..n).map(|j| scale_lo(lo_in[j], col_scale[j])).collect();
        let mut hi: Vec<f64> = (0..n).map(|j| scale_lo(hi_in[j], col_scale[j])).collect();
        let mut obj: Vec<f64> = model
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| c.obj * col_scale[j])
            .collect();
        // Slack for row i: A x + s = b with s ranged by sense. Scaled
        // slack value is row_scale[i] times the original slack.
        for (i, row) in model.rows.iter().enumerate() {
            let (slo, shi) = match row.sense {
                RowSense::Le => (0.0, f64::INFINITY),
                RowSense::Ge => (f64::NEG_INFINITY, 0.0),
                RowSense::Eq => (0.0, 0.0),
            };
            lo.push(slo * row_scale[i]);
            hi.push(shi * row_scale[i]);
            obj.push(0.0);
        }
        let rhs: Vec<f64> = model
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.rhs * row_scale[i])
            .collect();

        // Slack basis; structural variables start at their nearest finite
        // bound (zero when free).
        let mut state = Vec::with_capacity(n + m);
        for j in 0..n {
            if lo[j].is_finite() {
                state.push(VarState::AtLower);
            } else if hi[j].is_finite() {
                state.push(VarState::AtUpper);
            } else {
                state.push(VarState::AtLower); // free: value 0 by convention
            }
        }
        let mut basis = Vec::with_capacity(m);
        for i in 0..m {
            state.push(VarState::Basic(i));
            basis.push(n + i);
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }

        let mut tab = Tableau {
            m,
            n,
            col_ptr,
            row_idx,
            values,
            lo,
            hi,
            obj,
            rhs,
            row_scale,
            col_scale,
            basis,
            state,
            binv,
            x: vec![0.0; n + m],
            pivots_since_refactor: 0,
        };
        tab.recompute_x();
        tab
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => {
                if self.lo[j].is_finite() {
                    self.lo[j]
                } else {
                    0.0
                }
            }
            VarState::AtUpper => {
                if self.hi[j].is_finite() {
                    self.hi[j]
                } else {
                    0.0
                }
            }
            VarState::Basic(_) => unreachable!(),
        }
    }

    fn for_each_entry(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for idx in self.col_ptr[j]..self.col_ptr[j + 1] {
                f(self.row_idx[idx], self.values[idx]);
            }
        } else {
            f(j - self.n, 1.0);
        }
    }

    /// Recompute all variable values from the basis inverse.
    fn recompute_x(&mut self) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.n + m {
            if let VarState::Basic(_) = self.state[j] {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                self.for_each_entry(j, |i, a| r[i] -= a * v);
            }
        }
        for i in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += self.binv[i * m + k] * r[k];
            }
            self.x[self.basis[i]] = acc;
        }
    }

    /// w = B^-1 A_e for entering column e.
    fn ftran(&self, e: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        self.for_each_entry(e, |i, a| {
            for r in 0..m {
                w[r] += self.binv[r * m + i] * a;
            }
        });
        w
    }

    /// y = c_B^T B^-1 for the given basic cost vector.
    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let c = cb[i];
            if c != 0.0 {
                for k in 0..m {
                    y[k] += c * self.binv[i * m + k];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], cost: impl Fn(usize) -> f64) -> f64 {
        let mut d = cost(j);
        self.for_each_entry(j, |i, a| d -= y[i] * a);
        d
    }

    fn refactorize(&mut self) -> Result<(), SolverError> {
        let m = self.m;
        // Gauss-Jordan inversion of the basis matrix with partial pivoting.
        let mut a = vec![0.0; m * m];
        for (pos, &j) in self.basis.iter().enumerate() {
            self.for_each_entry(j, |i, v| a[i * m + pos] = v);
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(SolverError::Numerical(format!(
                    "singular basis during refactorization (pivot column {col}, magnitude {best:.3e})"
                )));
            }
            if piv != col {
                for k in 0..m {
                    a.swap(col * m + k, piv * m + k);
                    inv.swap(col * m + k, piv * m + k);
                }
            }
            let p = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for &j in &self.basis {
            let v = self.x[j];
            if v < self.lo[j] {
                total += self.lo[j] - v;
            } else if v > self.hi[j] {
                total += v - self.hi[j];
            }
        }
        total
    }

    fn solve(&mut self) -> Result<LpSolution, SolverError> {
        let iter_limit = 20_000 + 100 * (self.m + self.n);

        // Phase 1: drive bound violations of the basic variables to zero.
        let mut iters = 0usize;
        if self.infeasibility() > FEAS_TOL {
            let status = self.simplex_loop(true, iter_limit, &mut iters)?;
            match status {
                LoopExit::Converged => {
                    if self.infeasibility() > FEAS_TOL * (1.0 + self.rhs.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                        return Ok(self.finish(LpStatus::Infeasible));
                    }
                }
                LoopExit::NoDirection => {
                    return Ok(self.finish(LpStatus::Infeasible));
                }
                LoopExit::Unbounded => {
                    // Phase-1 objective is bounded below by zero; a ray here
                    // is a numerical artifact.
                    return Err(SolverError::Numerical(
                        "unbounded direction in phase 1".into(),
                    ));
                }
                LoopExit::IterationLimit => return Ok(self.finish(LpStatus::IterationLimit)),
            }
        }

        // Phase 2: optimize the true objective from a feasible basis.
        let status = self.simplex_loop(false, iter_limit, &mut iters)?;
        match status {
            LoopExit::Converged | LoopExit::NoDirection => Ok(self.finish(LpStatus::Optimal)),
            LoopExit::Unbounded => Ok(self.finish(LpStatus::Unbounded)),
            LoopExit::IterationLimit => Ok(self.finish(LpStatus::IterationLimit)),
        }
    }

    fn phase1_cost(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Basic(_) => {
                let v = self.x[j];
                if v < self.lo[j] - FEAS_TOL {
                    -1.0
                } else if v > self.hi[j] + FEAS_TOL {
                    1.0
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }

    fn simplex_loop(&mut self, phase1: bool, iter_limit: usize, iters: &mut usize) -> Result<LoopExit, SolverError> {
        let m = self.m;
        let mut stall = 0usize;
        let mut bland = false;
        let mut last_merit = if phase1 {
            self.infeasibility()
        } else {
            self.current_objective()
        };

        loop {
            if *iters >= iter_limit {
                return Ok(LoopExit::IterationLimit);
            }
            *iters += 1;

            if phase1 && self.infeasibility() <= FEAS_TOL {
                return Ok(LoopExit::Converged);
            }

            // Price.
            let cb: Vec<f64> = if phase1 {
                self.basis.iter().map(|&j| self.phase1_cost(j)).collect()
            } else {
                self.basis.iter().map(|&j| self.obj[j]).collect()
            };
            let y = self.btran(&cb);

            let mut entering: Option<(usize, f64, f64)> = None; // (col, reduced cost, direction)
            for j in 0..self.n + m {
                let dir = match self.state[j] {
                    VarState::Basic(_) => continue,
                    VarState::AtLower => 1.0,
                    VarState::AtUpper => -1.0,
                };
                if self.lo[j] == self.hi[j] {
                    continue; // fixed
                }
                let d = if phase1 {
                    self.reduced_cost(j, &y, |_| 0.0)
                } else {
                    self.reduced_cost(j, &y, |jj| self.obj[jj])
                };
                let improving = d * dir < -DUAL_TOL;
                if !improving {
                    continue;
                }
                if bland {
                    entering = Some((j, d, dir));
                    break;
                }
                match entering {
                    Some((_, dbest, _)) if d.abs() <= dbest.abs() => {}
                    _ => entering = Some((j, d, dir)),
                }
            }

            let (e, _de, dir) = match entering {
                Some(t) => t,
                None => {
                    return if phase1 {
                        Ok(LoopExit::NoDirection)
                    } else {
                        Ok(LoopExit::Converged)
                    };
                }
            };

            // Ratio test. The entering variable moves by theta in
            // direction `dir`; basic i changes at rate -dir*w_i.
            let w = self.ftran(e);
            let mut theta = f64::INFINITY;
            let mut leaving: Option<(usize, f64, f64)> = None; // (basis pos, target bound, |pivot|)
            for (pos, &wj) in w.iter().enumerate() {
                let rate = -dir * wj;
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                let bj = self.basis[pos];
                let v = self.x[bj];
                let target = if rate > 0.0 {
                    // increasing
                    if phase1 && v < self.lo[bj] - FEAS_TOL {
                        self.lo[bj] // infeasible below: stop once it reaches feasibility
                    } else if phase1 && v > self.hi[bj] + FEAS_TOL {
                        continue; // infeasible above, moving further away: no breakpoint
                    } else if self.hi[bj].is_finite() {
                        self.hi[bj]
                    } else {
                        continue;
                    }
                } else {
                    // decreasing
                    if phase1 && v > self.hi[bj] + FEAS_TOL {
                        self.hi[bj]
                    } else if phase1 && v < self.lo[bj] - FEAS_TOL {
                        continue;
                    } else if self.lo[bj].is_finite() {
                        self.lo[bj]
                    } else {
                        continue;
                    }
                };
                let t = ((target - v) / rate).max(0.0);
                let better = t < theta - 1e-12
                    || (t < theta + 1e-12
                        && leaving.map_or(true, |(_, _, p)| wj.abs() > p));
                if better {
                    theta = t;
                    leaving = Some((pos, target, wj.abs()));
                }
            }
            // Bound flip of the entering variable itself.
            let span = self.hi[e] - self.lo[e];
            let mut flip = false;
            if span.is_finite() && span < theta {
                theta = span;
                flip = true;
                leaving = None;
            }

            if theta.is_infinite() {
                return Ok(LoopExit::Unbounded);
            }

            // Apply the step.
            if flip {
                self.state[e] = match self.state[e] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    VarState::Basic(_) => unreachable!(),
                };
                self.recompute_x();
            } else {
                let (pos, target, _) = leaving.ok_or_else(|| {
                    SolverError::Numerical("ratio test produced no leaving variable".into())
                })?;
                let out = self.basis[pos];
                // Basis inverse pivot update.
                let piv = w[pos];
                if piv.abs() < PIVOT_TOL {
                    self.refactorize()?;
                    self.recompute_x();
                    continue;
                }
                for k in 0..m {
                    self.binv[pos * m + k] /= piv;
                }
                for r in 0..m {
                    if r != pos {
                        let f = w[r];
                        if f != 0.0 {
                            for k in 0..m {
                                self.binv[r * m + k] -= f * self.binv[pos * m + k];
                            }
                        }
                    }
                }
                self.state[out] = if (target - self.lo[out]).abs() <= (target - self.hi[out]).abs() {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                };
                self.state[e] = VarState::Basic(pos);
                self.basis[pos] = e;
                self.pivots_since_refactor += 1;
                if self.pivots_since_refactor >= REFACTOR_EVERY {
                    self.refactorize()?;
                }
                self.recompute_x();
            }

            // Stall detection drives the Bland fallback.
            let merit = if phase1 {
                self.infeasibility()
            } else {
                self.current_objective()
            };
            if merit < last_merit - 1e-12 * (1.0 + last_merit.abs()) {
                stall = 0;
                bland = false;
                last_merit = merit;
            } else {
                stall += 1;
                if stall >= STALL_LIMIT {
                    bland = true;
                }
            }
        }
    }

    fn current_objective(&self) -> f64 {
        (0..self.n + self.m).map(|j| self.obj[j] * self.x[j]).sum()
    }

    fn finish(&self, status: LpStatus) -> LpSolution {
        match status {
            LpStatus::Optimal | LpStatus::IterationLimit => {
                let mut x = vec![0.0; self.n];
                for j in 0..self.n {
                    let v = self.x[j] * self.col_scale[j];
                    x[j] = v;
                }
                let objective: f64 = (0..self.n)
                    .map(|j| self.obj[j] / self.col_scale[j] * x[j])
                    .sum();
                let duals = if status == LpStatus::Optimal {
                    let cb: Vec<f64> = self.basis.iter().map(|&j| self.obj[j]).collect();
                    let y = self.btran(&cb);
                    (0..self.m).map(|i| y[i] * self.row_scale[i]).collect()
                } else {
                    Vec::new()
                };
                LpSolution {
                    status,
                    x,
                    objective,
                    duals,
                }
            }
            LpStatus::Infeasible => LpSolution {
                status,
                x: Vec::new(),
                objective: f64::INFINITY,
                duals: Vec::new(),
            },
            LpStatus::Unbounded => LpSolution {
                status,
                x: Vec::new(),
                objective: f64::NEG_INFINITY,
                duals: Vec::new(),
            },
        }
    }
}

enum LoopExit {
    Converged,
    NoDirection,
    Unbounded,
    IterationLimit,
}
