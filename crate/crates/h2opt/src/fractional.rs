//! Dinkelbach iteration for linear-fractional MILP objectives.
//!
//! Minimizes `obj . x / tv . x` by repeatedly solving the parametric
//! problem `min obj . x - q * tv . x` and updating `q` to the ratio at
//! the incumbent until the parametric optimum reaches zero.

use crate::branch_bound::{solve_milp, MilpOptions, MilpResult, MilpStatus};
use crate::model::MilpModel;
use crate::SolverError;

#[derive(Debug, Clone)]
pub struct FractionalResult {
    pub milp: MilpResult,
    /// Converged ratio (the levelized objective value).
    pub ratio: f64,
    /// Numerator value at the incumbent.
    pub numerator: f64,
    /// Denominator value at the incumbent.
    pub denominator: f64,
    /// Number of ratio updates performed.
    pub iterations: usize,
    pub converged: bool,
}

pub fn solve_fractional(model: &MilpModel, opts: &MilpOptions) -> Result<FractionalResult, SolverError> {
    model.validate()?;
    opts.validate()?;
    if model.tv.is_empty() {
        return Err(SolverError::InvalidModel(
            "fractional solve requires a named denominator expression".into(),
        ));
    }

    let mut q = 0.0f64;
    let mut work = model.clone();
    let mut iterations = 0usize;
    loop {
        // Parametric objective: obj - q * tv.
        for (col, base) in work.columns.iter_mut().zip(model.columns.iter()) {
            col.obj = base.obj;
        }
        for &(j, c) in &model.tv {
            work.columns[j].obj -= q * c;
        }

        let result = solve_milp(&work, opts)?;
        let x = match &result.x {
            Some(x) => x.clone(),
            None => {
                return Ok(FractionalResult {
                    milp: result,
                    ratio: q,
                    numerator: f64::NAN,
                    denominator: f64::NAN,
                    iterations,
                    converged: false,
                })
            }
        };
        let tc = model.objective_value(&x);
        let tv = model.tv_value(&x);
        if tv.abs() <= 1e-9 {
            return Err(SolverError::DegenerateDenominator);
        }
        let f = tc - q * tv;
        if f.abs() <= opts.dinkelbach_tolerance * tv.abs().max(1.0) {
            return Ok(FractionalResult {
                milp: result,
                ratio: tc / tv,
                numerator: tc,
                denominator: tv,
                iterations,
                converged: true,
            });
        }
        q = tc / tv;
        iterations += 1;
        if iterations >= opts.dinkelbach_max_iters {
            let mut milp = result;
            milp.status = MilpStatus::NodeLimit;
            return Ok(FractionalResult {
                milp,
                ratio: q,
                numerator: tc,
                denominator: tv,
                iterations,
                converged: false,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MilpModel, RowSense, VarKind};

    #[test]
    fn affine_over_linear_toy() {
        // TC = 10 + 2v, TV = v, v in [1, 5]. Constant 10 carried by a
        // fixed column. Optimum at v = 5 with ratio 4.
        let mut m = MilpModel::new("toy");
        let one = m.add_column("one", 1.0, 1.0, VarKind::Continuous, 10.0);
        let v = m.add_column("v", 1.0, 5.0, VarKind::Continuous, 2.0);
        m.tv = vec![(v, 1.0)];
        let _ = one;
        let r = solve_fractional(&m, &MilpOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.ratio - 4.0).abs() < 1e-9, "ratio {}", r.ratio);
    }

    #[test]
    fn constant_denominator_one_update() {
        // TV pinned to 3 by an equality: one ratio update then exact stop.
        let mut m = MilpModel::new("const");
        let v = m.add_column("v", 0.0, 10.0, VarKind::Continuous, 7.0);
        m.add_row("fix", "t", vec![(v, 1.0)], RowSense::Eq, 3.0);
        m.tv = vec![(v, 1.0)];
        let r = solve_fractional(&m, &MilpOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 1);
        assert!((r.ratio - 7.0).abs() < 1e-12);
    }

    #[test]
    fn zero_denominator_is_an_error() {
        let mut m = MilpModel::new("zero");
        let v = m.add_column("v", 0.0, 5.0, VarKind::Continuous, 1.0);
        m.tv = vec![(v, 1.0)];
        // min v puts v at 0, so the denominator vanishes.
        match solve_fractional(&m, &MilpOptions::default()) {
            Err(SolverError::DegenerateDenominator) => {}
            other => panic!("expected degenerate denominator, got {other:?}"),
        }
    }
}
