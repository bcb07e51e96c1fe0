//! Free-format MPS writer.
//!
//! Emits NAME, ROWS, COLUMNS (with INTORG/INTEND markers around integer
//! columns), RHS, BOUNDS and ENDATA. Numbers are rendered with 17
//! significant digits so a re-import reproduces the matrix exactly.

use crate::model::{MilpModel, RowSense};
use crate::SolverError;
use std::collections::BTreeSet;
use std::io::Write;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_name(name: &str, what: &str) -> Result<(), SolverError> {
    if name.is_empty() || name.len() > 255 {
        return Err(SolverError::InvalidModel(format!(
            "{what} name {name:?} must be 1..=255 characters"
        )));
    }
    if name.chars().any(|c| c.is_whitespace()) {
        return Err(SolverError::InvalidModel(format!(
            "{what} name {name:?} contains whitespace"
        )));
    }
    Ok(())
}

/// Write `model` to `out` in free-format MPS.
pub fn write_mps(model: &MilpModel, out: &mut dyn Write) -> Result<(), SolverError> {
    model.validate()?;

    let mut seen = BTreeSet::new();
    for row in &model.rows {
        check_name(&row.name, "row")?;
        if !seen.insert(row.name.as_str()) {
            return Err(SolverError::InvalidModel(format!("duplicate row name {:?}", row.name)));
        }
    }
    let mut seen = BTreeSet::new();
    for col in &model.columns {
        check_name(&col.name, "column")?;
        if !seen.insert(col.name.as_str()) {
            return Err(SolverError::InvalidModel(format!(
                "duplicate column name {:?}",
                col.name
            )));
        }
    }

    let model_name = if model.name.is_empty() { "MODEL" } else { &model.name };
    writeln!(out, "NAME {model_name}")?;
    writeln!(out, "ROWS")?;
    writeln!(out, " N OBJ")?;
    for row in &model.rows {
        let sense = match row.sense {
            RowSense::Le => "L",
            RowSense::Ge => "G",
            RowSense::Eq => "E",
        };
        writeln!(out, " {sense} {}", row.name)?;
    }

    // Row-major coefficients, gathered per column.
    let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.columns.len()];
    for (i, row) in model.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            per_col[j].push((i, a));
        }
    }

    writeln!(out, "COLUMNS")?;
    let mut in_int_block = false;
    let mut marker = 0usize;
    for (j, col) in model.columns.iter().enumerate() {
        if col.kind.is_integral() != in_int_block {
            let kind = if in_int_block { "INTEND" } else { "INTORG" };
            writeln!(out, " MARKER{marker} 'MARKER' '{kind}'")?;
            marker += 1;
            in_int_block = !in_int_block;
        }
        if col.obj != 0.0 {
            writeln!(out, " {} OBJ {}", col.name, num(col.obj))?;
        }
        for &(i, a) in &per_col[j] {
            writeln!(out, " {} {} {}", col.name, model.rows[i].name, num(a))?;
        }
        if col.obj == 0.0 && per_col[j].is_empty() {
            // Keep empty columns visible so bounds below resolve.
            writeln!(out, " {} OBJ {}", col.name, num(0.0))?;
        }
    }
    if in_int_block {
        writeln!(out, " MARKER{marker} 'MARKER' 'INTEND'")?;
    }

    writeln!(out, "RHS")?;
    for row in &model.rows {
        if row.rhs != 0.0 {
            writeln!(out, " RHS {} {}", row.name, num(row.rhs))?;
        }
    }

    writeln!(out, "BOUNDS")?;
    for col in &model.columns {
        if col.lo == col.hi {
            writeln!(out, " FX BND {} {}", col.name, num(col.lo))?;
            continue;
        }
        if col.lo.is_finite() {
            writeln!(out, " LO BND {} {}", col.name, num(col.lo))?;
        } else {
            writeln!(out, " MI BND {}", col.name)?;
        }
        if col.hi.is_finite() {
            writeln!(out, " UP BND {} {}", col.name, num(col.hi))?;
        } else {
            writeln!(out, " PL BND {}", col.name)?;
        }
    }
    writeln!(out, "ENDATA")?;
    Ok(())
}
