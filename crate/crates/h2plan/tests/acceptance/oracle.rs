//! Independent checking machinery for the acceptance gate: a brute-force
//! vertex-enumeration LP oracle, a ratio-objective transform for
//! enumeration over fixed integer patterns, and a minimal MPS reader.

use h2opt::{MilpModel, RowSense, VarKind};
use std::collections::BTreeMap;

/// Solve a dense square system by Gaussian elimination with partial
/// pivoting. Returns None when the matrix is singular.
pub fn solve_square(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r1, &r2| m[r1][col].abs().partial_cmp(&m[r2][col].abs()).unwrap())?;
        if m[pivot][col].abs() < 1e-11 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for k in col..n {
                        m[r][k] -= f * m[col][k];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// One linear condition in dense form: `a . x (sense) b`.
#[derive(Clone)]
pub struct DenseRow {
    pub a: Vec<f64>,
    pub sense: RowSense,
    pub b: f64,
}

/// Minimize `c . x` over dense rows and finite box bounds by enumerating
/// every vertex (each choice of n active constraints). Exponential, for
/// tiny instances only.
pub fn brute_force_lp(c: &[f64], rows: &[DenseRow], lo: &[f64], hi: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = c.len();
    // Candidate active sets come from rows and both bounds per variable.
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in rows {
        planes.push((row.a.clone(), row.b));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lo[j]));
        planes.push((e, hi[j]));
    }
    let feasible = |x: &[f64]| -> bool {
        for (j, &v) in x.iter().enumerate() {
            if v < lo[j] - 1e-7 || v > hi[j] + 1e-7 {
                return false;
            }
        }
        for row in rows {
            let lhs: f64 = row.a.iter().zip(x).map(|(a, v)| a * v).sum();
            let ok = match row.sense {
                RowSense::Le => lhs <= row.b + 1e-7,
                RowSense::Ge => lhs >= row.b - 1e-7,
                RowSense::Eq => (lhs - row.b).abs() <= 1e-7,
            };
            if !ok {
                return false;
            }
        }
        true
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = planes.len();
    let mut chosen = vec![0usize; n];
    fn recurse(
        start: usize,
        depth: usize,
        n: usize,
        total: usize,
        chosen: &mut Vec<usize>,
        planes: &[(Vec<f64>, f64)],
        c: &[f64],
        feasible: &dyn Fn(&[f64]) -> bool,
        best: &mut Option<(f64, Vec<f64>)>,
    ) {
        if depth == n {
            let a: Vec<Vec<f64>> = chosen.iter().map(|&i| planes[i].0.clone()).collect();
            let b: Vec<f64> = chosen.iter().map(|&i| planes[i].1).collect();
            if let Some(x) = solve_square(&a, &b) {
                if feasible(&x) {
                    let obj: f64 = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
                    if best.as_ref().map(|(v, _)| obj < *v - 1e-12).unwrap_or(true) {
                        *best = Some((obj, x));
                    }
                }
            }
            return;
        }
        for i in start..total {
            chosen[depth] = i;
            recurse(i + 1, depth + 1, n, total, chosen, planes, c, feasible, best);
        }
    }
    recurse(0, 0, n, total, &mut chosen, &planes, c, &feasible, &mut best);
    best
}

/// Minimum of `obj . x / tv . x` over the model's feasible region with
/// every integral column fixed (lo == hi), via the standard change of
/// variables y = s x, tv . y = 1. Returns None when no feasible point
/// with positive denominator exists.
pub fn fixed_pattern_min_ratio(model: &MilpModel) -> Option<f64> {
    let n = model.num_columns();
    let mut cc = MilpModel::new("ratio-transform");
    // y columns keep the objective; the scale column s is free-ish.
    for col in &model.columns {
        cc.add_column(format!("y_{}", col.name), 0.0, f64::INFINITY, VarKind::Continuous, col.obj);
    }
    let s = cc.add_column("s", 0.0, f64::INFINITY, VarKind::Continuous, 0.0);
    for row in &model.rows {
        let mut coeffs = row.coeffs.clone();
        coeffs.push((s, -row.rhs));
        cc.add_row(format!("cc_{}", row.name), &row.tag, coeffs, row.sense, 0.0);
    }
    // Bounds become rows tied to s.
    for (j, col) in model.columns.iter().enumerate() {
        if col.hi.is_finite() && col.hi != 0.0 {
            cc.add_row(
                format!("ub_{}", col.name),
                "bound",
                vec![(j, 1.0), (s, -col.hi)],
                RowSense::Le,
                0.0,
            );
        } else if col.hi == 0.0 {
            // Fixed-to-zero columns stay zero.
            cc.add_row(format!("ub_{}", col.name), "bound", vec![(j, 1.0)], RowSense::Le, 0.0);
        }
        if col.lo != 0.0 {
            cc.add_row(
                format!("lb_{}", col.name),
                "bound",
                vec![(j, 1.0), (s, -col.lo)],
                RowSense::Ge,
                0.0,
            );
        }
    }
    let norm: Vec<(usize, f64)> = model.tv.clone();
    cc.add_row("normalize", "normalize", norm, RowSense::Eq, 1.0);
    let _ = n;
    let lp = h2opt::solve_lp(&cc).ok()?;
    match lp.status {
        h2opt::LpStatus::Optimal => Some(lp.objective),
        _ => None,
    }
}

/// What the independent MPS reader reconstructs.
#[derive(Debug, Default, PartialEq)]
pub struct MpsModel {
    pub name: String,
    pub objective_row: String,
    /// name -> (sense, rhs)
    pub rows: BTreeMap<String, (RowSense, f64)>,
    /// name -> (kind, lo, hi, obj)
    pub columns: BTreeMap<String, (VarKind, f64, f64, f64)>,
    /// (row, column) -> coefficient
    pub entries: BTreeMap<(String, String), f64>,
}

/// Parse free-format MPS text. Only the subset the exporter produces is
/// supported; anything unexpected is an error string.
pub fn read_mps(text: &str) -> Result<MpsModel, String> {
    let mut out = MpsModel::default();
    let mut section = String::new();
    let mut integer_mode = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        let indented = line.starts_with(' ') || line.starts_with('\t');
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !indented {
            match fields[0] {
                "NAME" => {
                    out.name = fields.get(1).unwrap_or(&"").to_string();
                    section = "NAME".into();
                }
                "ROWS" | "COLUMNS" | "RHS" | "BOUNDS" | "RANGES" => section = fields[0].to_string(),
                "ENDATA" => return Ok(out),
                other => return Err(format!("line {}: unknown section {other}", lineno + 1)),
            }
            continue;
        }
        match section.as_str() {
            "ROWS" => {
                let (kind, name) = (fields[0], fields[1]);
                match kind {
                    "N" => out.objective_row = name.to_string(),
                    "L" => {
                        out.rows.insert(name.to_string(), (RowSense::Le, 0.0));
                    }
                    "G" => {
                        out.rows.insert(name.to_string(), (RowSense::Ge, 0.0));
                    }
                    "E" => {
                        out.rows.insert(name.to_string(), (RowSense::Eq, 0.0));
                    }
                    other => return Err(format!("line {}: bad row kind {other}", lineno + 1)),
                }
            }
            "COLUMNS" => {
                if fields.len() >= 3 && fields[1] == "'MARKER'" {
                    match fields[2] {
                        "'INTORG'" => integer_mode = true,
                        "'INTEND'" => integer_mode = false,
                        other => return Err(format!("line {}: bad marker {other}", lineno + 1)),
                    }
                    continue;
                }
                let col = fields[0].to_string();
                let kind = if integer_mode { VarKind::Integer } else { VarKind::Continuous };
                out.columns
                    .entry(col.clone())
                    .or_insert((kind, 0.0, f64::INFINITY, 0.0));
                let mut idx = 1;
                while idx + 1 < fields.len() + 1 && idx + 1 <= fields.len() {
                    let row = fields[idx];
                    let value: f64 = fields[idx + 1]
                        .parse()
                        .map_err(|e| format!("line {}: {e}", lineno + 1))?;
                    if row == out.objective_row {
                        out.columns.get_mut(&col).unwrap().3 = value;
                    } else {
                        out.entries.insert((row.to_string(), col.clone()), value);
                    }
                    idx += 2;
                }
            }
            "RHS" => {
                let mut idx = 1;
                while idx + 1 <= fields.len() - 1 {
                    let row = fields[idx];
                    let value: f64 = fields[idx + 1]
                        .parse()
                        .map_err(|e| format!("line {}: {e}", lineno + 1))?;
                    out.rows
                        .get_mut(row)
                        .ok_or_else(|| format!("line {}: rhs for unknown row {row}", lineno + 1))?
                        .1 = value;
                    idx += 2;
                }
            }
            "BOUNDS" => {
                let (kind, col_name) = (fields[0], fields[2]);
                let col = out
                    .columns
                    .get_mut(col_name)
                    .ok_or_else(|| format!("line {}: bound for unknown column {col_name}", lineno + 1))?;
                let value = || -> Result<f64, String> {
                    fields
                        .get(3)
                        .ok_or_else(|| format!("line {}: missing bound value", lineno + 1))?
                        .parse()
                        .map_err(|e| format!("line {}: {e}", lineno + 1))
                };
                match kind {
                    "LO" => col.1 = value()?,
                    "UP" => col.2 = value()?,
                    "FX" => {
                        let v = value()?;
                        col.1 = v;
                        col.2 = v;
                    }
                    "MI" => col.1 = f64::NEG_INFINITY,
                    "PL" => col.2 = f64::INFINITY,
                    "BV" => {
                        col.0 = VarKind::Integer;
                        col.1 = 0.0;
                        col.2 = 1.0;
                    }
                    other => return Err(format!("line {}: bad bound kind {other}", lineno + 1)),
                }
            }
            other => return Err(format!("line {}: data outside a known section ({other})", lineno + 1)),
        }
    }
    Err("missing ENDATA".to_string())
}

/// Compare a parsed MPS file against the in-memory model it came from.
pub fn mps_matches_model(parsed: &MpsModel, model: &MilpModel) -> Result<(), String> {
    if parsed.columns.len() != model.num_columns() {
        return Err(format!(
            "column count {} vs {}",
            parsed.columns.len(),
            model.num_columns()
        ));
    }
    if parsed.rows.len() != model.num_rows() {
        return Err(format!("row count {} vs {}", parsed.rows.len(), model.num_rows()));
    }
    for col in &model.columns {
        let (kind, lo, hi, obj) = parsed
            .columns
            .get(&col.name)
            .ok_or_else(|| format!("column {} missing", col.name))?;
        let expect_integral = col.kind.is_integral();
        if kind.is_integral() != expect_integral {
            return Err(format!("column {} integrality differs", col.name));
        }
        if *lo != col.lo || *hi != col.hi {
            return Err(format!(
                "column {} bounds ({lo}, {hi}) vs ({}, {})",
                col.name, col.lo, col.hi
            ));
        }
        if *obj != col.obj {
            return Err(format!("column {} objective {obj} vs {}", col.name, col.obj));
        }
    }
    let mut expected_entries: BTreeMap<(String, String), f64> = BTreeMap::new();
    for row in &model.rows {
        let (sense, rhs) = parsed
            .rows
            .get(&row.name)
            .ok_or_else(|| format!("row {} missing", row.name))?;
        if *sense != row.sense {
            return Err(format!("row {} sense differs", row.name));
        }
        if *rhs != row.rhs {
            return Err(format!("row {} rhs {rhs} vs {}", row.name, row.rhs));
        }
        for &(j, a) in &row.coeffs {
            let key = (row.name.clone(), model.columns[j].name.clone());
            *expected_entries.entry(key).or_insert(0.0) += a;
        }
    }
    expected_entries.retain(|_, v| *v != 0.0);
    if expected_entries != parsed.entries {
        return Err("matrix entries differ".to_string());
    }
    Ok(())
}
