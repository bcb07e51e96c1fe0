//! Deterministic branch and bound over the integer columns of a
//! [`MilpModel`]. Node selection is best-bound with most-recent
//! tie-break (a best-first search that dives like DFS on equal bounds);
//! branching picks the most fractional variable with lowest column
//! index as tie-break.

use crate::model::MilpModel;
use crate::simplex::{solve_lp_with_bounds, LpStatus};
use crate::SolverError;
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub integer_tolerance: f64,
    pub relative_gap: f64,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    pub dinkelbach_tolerance: f64,
    pub dinkelbach_max_iters: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            integer_tolerance: 1e-6,
            relative_gap: 1e-6,
            node_limit: None,
            time_limit: None,
            dinkelbach_tolerance: 1e-6,
            dinkelbach_max_iters: 50,
        }
    }
}

impl MilpOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.integer_tolerance <= 0.0 || self.relative_gap <= 0.0 || self.dinkelbach_tolerance <= 0.0 {
            return Err(SolverError::InvalidModel("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct MilpResult {
    pub status: MilpStatus,
    /// Best integral solution found, if any.
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    pub best_bound: f64,
    pub nodes: usize,
    pub wall_time: Duration,
}

struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    bound: f64,
    seq: u64,
}

pub fn solve_milp(model: &MilpModel, opts: &MilpOptions) -> Result<MilpResult, SolverError> {
    model.validate()?;
    opts.validate()?;
    let start = Instant::now();

    let int_cols: Vec<usize> = model
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind.is_integral())
        .map(|(j, _)| j)
        .collect();

    let root_lo: Vec<f64> = model.columns.iter().map(|c| c.lo).collect();
    let root_hi: Vec<f64> = model.columns.iter().map(|c| c.hi).collect();

    let mut open = vec![Node {
        lo: root_lo,
        hi: root_hi,
        bound: f64::NEG_INFINITY,
        seq: 0,
    }];
    let mut next_seq = 1u64;
    let mut incumbent: Option<Vec<f64>> = None;
    let mut incumbent_obj = f64::INFINITY;
    let mut nodes = 0usize;
    let mut limit_hit: Option<MilpStatus> = None;
    let mut root_unbounded = false;
    // Greatest lower bound proven for pruned/processed subtrees.
    let mut pruned_bound = f64::INFINITY;

    while !open.is_empty() {
        if let Some(nl) = opts.node_limit {
            if nodes >= nl {
                limit_hit = Some(MilpStatus::NodeLimit);
                break;
            }
        }
        if let Some(tl) = opts.time_limit {
            if start.elapsed() >= tl {
                limit_hit = Some(MilpStatus::TimeLimit);
                break;
            }
        }

        // Best-bound selection, most recent node on ties.
        let mut pick = 0usize;
        for i in 1..open.len() {
            let a = &open[i];
            let b = &open[pick];
            if a.bound < b.bound - 1e-12 || (a.bound <= b.bound + 1e-12 && a.seq > b.seq) {
                pick = i;
            }
        }
        let node = open.swap_remove(pick);

        let cutoff = if incumbent_obj.is_finite() {
            incumbent_obj - opts.relative_gap * incumbent_obj.abs().max(1.0)
        } else {
            f64::INFINITY
        };
        if node.bound >= cutoff {
            pruned_bound = pruned_bound.min(node.bound);
            continue;
        }

        nodes += 1;
        let lp = solve_lp_with_bounds(model, &node.lo, &node.hi)?;
        match lp.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if nodes == 1 {
                    root_unbounded = true;
                    break;
                }
                return Err(SolverError::Numerical(
                    "unbounded LP below a bounded parent".into(),
                ));
            }
            LpStatus::IterationLimit => {
                return Err(SolverError::Numerical("simplex iteration limit in node LP".into()));
            }
            LpStatus::Optimal => {}
        }
        if lp.objective >= cutoff {
            pruned_bound = pruned_bound.min(lp.objective);
            continue;
        }

        // Most fractional integer variable, lowest index on ties.
        let mut branch_var: Option<(usize, f64)> = None;
        let mut best_frac = -1.0;
        for &j in &int_cols {
            let v = lp.x[j];
            let frac = (v - v.round()).abs();
            if frac > opts.integer_tolerance {
                let f = v - v.floor();
                let dist = f.min(1.0 - f);
                if dist > best_frac + 1e-15 {
                    best_frac = dist;
                    branch_var = Some((j, v));
                }
            }
        }

        match branch_var {
            None => {
                // Integral within tolerance: round and accept as incumbent.
                let mut x = lp.x.clone();
                for &j in &int_cols {
                    x[j] = x[j].round();
                }
                let obj = model.objective_value(&x);
                if obj < incumbent_obj {
                    incumbent_obj = obj;
                    incumbent = Some(x);
                }
                pruned_bound = pruned_bound.min(lp.objective);
            }
            Some((j, v)) => {
                let mut down = Node {
                    lo: node.lo.clone(),
                    hi: node.hi.clone(),
                    bound: lp.objective,
                    seq: 0,
                };
                down.hi[j] = v.floor();
                let mut up = Node {
                    lo: node.lo,
                    hi: node.hi,
                    bound: lp.objective,
                    seq: 0,
                };
                up.lo[j] = v.ceil();
                // Down child pushed last so it is explored first on ties.
                up.seq = next_seq;
                next_seq += 1;
                down.seq = next_seq;
                next_seq += 1;
                open.push(up);
                open.push(down);
            }
        }
    }

    let wall_time = start.elapsed();
    if root_unbounded {
        return Ok(MilpResult {
            status: MilpStatus::Unbounded,
            x: None,
            objective: f64::NEG_INFINITY,
            best_bound: f64::NEG_INFINITY,
            nodes,
            wall_time,
        });
    }

    let open_bound = open
        .iter()
        .map(|n| n.bound)
        .fold(f64::INFINITY, f64::min);
    let best_bound = open_bound.min(pruned_bound).min(incumbent_obj);

    let status = match limit_hit {
        Some(s) => s,
        None => {
            if incumbent.is_some() {
                MilpStatus::Optimal
            } else {
                MilpStatus::Infeasible
            }
        }
    };

    Ok(MilpResult {
        status,
        x: incumbent,
        objective: incumbent_obj,
        best_bound,
        nodes,
        wall_time,
    })
}
