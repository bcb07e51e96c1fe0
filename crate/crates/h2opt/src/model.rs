use crate::SolverError;

/// Integrality class of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// One decision variable: bounds, integrality and objective coefficient.
#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub kind: VarKind,
    pub obj: f64,
}

/// One sparse linear constraint.
#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    /// Constraint-family tag, e.g. "demand_balance".
    pub tag: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// Solver-agnostic sparse model: minimize `obj . x` subject to the rows,
/// bounds and integrality requirements.
///
/// `tv` optionally names a second linear expression (a denominator) used
/// by [`crate::solve_fractional`] to minimize the ratio `obj . x / tv . x`.
#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    /// Sparse coefficients of the named denominator expression.
    pub tv: Vec<(usize, f64)>,
    /// Non-fatal notes attached while building (e.g. degenerate horizons).
    pub warnings: Vec<String>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_column(&mut self, name: impl Into<String>, lo: f64, hi: f64, kind: VarKind, obj: f64) -> usize {
        self.columns.push(Column {
            name: name.into(),
            lo,
            hi,
            kind,
            obj,
        });
        self.columns.len() - 1
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        tag: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> usize {
        self.rows.push(Row {
            name: name.into(),
            tag: tag.into(),
            coeffs,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Value of the objective expression at `x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.columns.iter().zip(x).map(|(c, &v)| c.obj * v).sum()
    }

    /// Value of the named denominator expression at `x`.
    pub fn tv_value(&self, x: &[f64]) -> f64 {
        self.tv.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Structural sanity checks: finite coefficients, consistent bounds,
    /// in-range column references.
    pub fn validate(&self) -> Result<(), SolverError> {
        for (j, col) in self.columns.iter().enumerate() {
            if col.lo > col.hi {
                return Err(SolverError::InvalidModel(format!(
                    "column {} ({}) has lo {} > hi {}",
                    j, col.name, col.lo, col.hi
                )));
            }
            if !col.obj.is_finite() {
                return Err(SolverError::InvalidModel(format!(
                    "column {} ({}) has non-finite objective coefficient",
                    j, col.name
                )));
            }
            if col.lo.is_nan() || col.hi.is_nan() {
                return Err(SolverError::InvalidModel(format!(
                    "column {} ({}) has NaN bound",
                    j, col.name
                )));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(SolverError::InvalidModel(format!(
                    "row {} ({}) has non-finite rhs",
                    i, row.name
                )));
            }
            for &(j, a) in &row.coeffs {
                if j >= self.columns.len() {
                    return Err(SolverError::InvalidModel(format!(
                        "row {} ({}) references column {} out of range",
                        i, row.name, j
                    )));
                }
                if !a.is_finite() {
                    return Err(SolverError::InvalidModel(format!(
                        "row {} ({}) has non-finite coefficient on column {}",
                        i, row.name, j
                    )));
                }
            }
        }
        for &(j, c) in &self.tv {
            if j >= self.columns.len() || !c.is_finite() {
                return Err(SolverError::InvalidModel(
                    "denominator expression references bad column or coefficient".into(),
                ));
            }
        }
        Ok(())
    }

    /// Maximum violation of row `i` at `x` (0 when satisfied).
    pub fn row_violation(&self, i: usize, x: &[f64]) -> f64 {
        let row = &self.rows[i];
        let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
        match row.sense {
            RowSense::Le => (lhs - row.rhs).max(0.0),
            RowSense::Ge => (row.rhs - lhs).max(0.0),
            RowSense::Eq => (lhs - row.rhs).abs(),
        }
    }

    /// Largest constraint or bound violation over the whole model.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows.len() {
            worst = worst.max(self.row_violation(i, x));
        }
        for (col, &v) in self.columns.iter().zip(x) {
            worst = worst.max(col.lo - v).max(v - col.hi);
        }
        worst
    }
}
