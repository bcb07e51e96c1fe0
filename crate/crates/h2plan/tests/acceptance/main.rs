//! Acceptance gate: nine end-to-end criteria, each printing one PASS or
//! FAIL line. Every numeric check runs against an independent oracle
//! implemented in `oracle.rs` (vertex enumeration, ratio transform,
//! MPS re-parsing, grid search, exhaustive assignment search).

mod fixtures;
mod oracle;

use h2opt::{
    solve_fractional, solve_lp, LpSolution, LpStatus, MilpModel, MilpOptions, RowSense, VarKind,
};
use h2plan::cluster::{kmeans_hubs, ClusteringResult};
use h2plan::domain::{straight_line_distance, GeoPoint, ScenarioSpec, TransportMode};
use h2plan::forecast::{fcev_share, hydrogen_demand, DemandModelParams, FcevShareTable};
use h2plan::model::{build_model, check_invariants, extract_solution, BuiltModel, PlanSolution, VarId};
use h2plan::report;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn criterion(n: usize, label: &str, body: impl FnOnce() -> Result<String, String>) {
    match body() {
        Ok(note) => {
            if note.is_empty() {
                println!("criterion {n} ({label}): PASS");
            } else {
                println!("criterion {n} ({label}): PASS [{note}]");
            }
        }
        Err(e) => {
            println!("criterion {n} ({label}): FAIL [{e}]");
            panic!("criterion {n} ({label}) failed: {e}");
        }
    }
}

fn tight_options() -> MilpOptions {
    MilpOptions {
        relative_gap: 1e-9,
        dinkelbach_tolerance: 1e-9,
        ..MilpOptions::default()
    }
}

fn solve_spec(
    spec: &ScenarioSpec,
    opts: &MilpOptions,
) -> Result<(BuiltModel, h2opt::FractionalResult, PlanSolution), String> {
    let built = build_model(spec).map_err(|e| format!("build: {e}"))?;
    let fr = solve_fractional(&built.model, opts).map_err(|e| format!("solve: {e}"))?;
    if !fr.converged {
        return Err(format!("solver did not converge (status {:?})", fr.milp.status));
    }
    let raw = fr.milp.x.as_ref().ok_or("no incumbent")?;
    let sol = extract_solution(&built, spec, raw).map_err(|e| format!("extract: {e}"))?;
    Ok((built, fr, sol))
}

/// Micro instance for criteria 1 and 6: two plants, two cities with
/// asymmetric demand around the pipeline break-even, three periods, one
/// year of construction lead time. Tube trailers and carriers other than
/// the liquid truck are switched off through bounds so only pipeline and
/// liquid truck compete.
fn micro_spec() -> ScenarioSpec {
    let mut spec = fixtures::direct_spec(2, 2, 3, 1);
    spec.demand_nodes[0].demand = vec![40_000.0; 3];
    spec.demand_nodes[1].demand = vec![8_000.0; 3];
    spec.econ.pipeline_capital = 5.0;
    spec
}

fn build_micro_restricted() -> (ScenarioSpec, BuiltModel) {
    let spec = micro_spec();
    let mut built = build_model(&spec).unwrap();
    for col in 0..built.model.num_columns() {
        let off = match built.vars.id_of(col) {
            VarId::FlowV { r, .. } => r == 1 || r == 3,
            VarId::Nv { r, .. } | VarId::NvNew { r, .. } | VarId::NvScrap { r, .. } => r == 1 || r == 3,
            _ => false,
        };
        if off {
            built.model.columns[col].lo = 0.0;
            built.model.columns[col].hi = 0.0;
        }
    }
    (spec, built)
}

#[test]
fn criterion_1_ratio_optimality_matches_exhaustive_enumeration() {
    criterion(1, "oracle equivalence", || {
        let (spec, built) = build_micro_restricted();
        let fr = solve_fractional(&built.model, &tight_options()).map_err(|e| e.to_string())?;
        if !fr.converged {
            return Err("solver did not converge".into());
        }
        let lch2 = fr.ratio;

        // Fleet ceiling from the trip-hours requirement, plus slack of 2.
        let truck = spec.mode_spec(TransportMode::LiquidTruck);
        let th = |a: GeoPoint, b: GeoPoint| {
            2.0 * straight_line_distance(a, b) / truck.speed + truck.load_time
        };
        let worst: f64 = spec
            .demand_nodes
            .iter()
            .map(|d| {
                let h = spec
                    .supply_nodes
                    .iter()
                    .map(|s| th(s.location, d.location))
                    .fold(0.0f64, f64::max);
                d.demand[0] * h
            })
            .sum();
        let nmax = (worst / (truck.availability * 365.0 * truck.capacity)).ceil() as usize + 2;

        // Per arc: never build, start at t = 0, or start at t = 1. A
        // start at t = 2 can never finish inside the horizon and starting
        // twice would breach the 0/1 existence bound.
        let arcs: Vec<(usize, usize)> = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).collect();
        let arc_options: [(f64, f64); 3] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
        let mut fleet_plans: Vec<[f64; 3]> = Vec::new();
        for a in 0..=nmax {
            for b in 0..=(nmax - a) {
                for c in 0..=(nmax - a - b) {
                    fleet_plans.push([a as f64, b as f64, c as f64]);
                }
            }
        }

        let mut best: Option<f64> = None;
        let mut patterns = 0usize;
        for combo in 0..3usize.pow(arcs.len() as u32) {
            let mut choice = combo;
            let mut starts = Vec::with_capacity(arcs.len());
            for _ in &arcs {
                starts.push(arc_options[choice % 3]);
                choice /= 3;
            }
            for fleet in &fleet_plans {
                patterns += 1;
                let mut fixed = built.model.clone();
                for (&(i, j), &(b0, b1)) in arcs.iter().zip(&starts) {
                    for (t, v) in [(0usize, b0), (1, b1)] {
                        let col = built.vars.column(VarId::BhNew { i, j, t }).unwrap();
                        fixed.columns[col].lo = v;
                        fixed.columns[col].hi = v;
                    }
                }
                for (t, &v) in fleet.iter().enumerate() {
                    let col = built.vars.column(VarId::NvNew { r: 2, t }).unwrap();
                    fixed.columns[col].lo = v;
                    fixed.columns[col].hi = v;
                }
                if let Some(ratio) = oracle::fixed_pattern_min_ratio(&fixed) {
                    if best.map(|b| ratio < b).unwrap_or(true) {
                        best = Some(ratio);
                    }
                }
            }
        }
        let best = best.ok_or("enumeration found no feasible pattern")?;
        let tol = 1e-6 * (1.0 + best.abs());
        if (lch2 - best).abs() > tol {
            return Err(format!(
                "solver levelized cost {lch2} vs enumeration optimum {best} over {patterns} patterns"
            ));
        }
        Ok(format!(
            "levelized cost {lch2:.9} $/kg equals the optimum over {patterns} integer patterns"
        ))
    });
}

#[test]
fn criterion_2_invariants_hold_on_every_solved_corpus_instance() {
    criterion(2, "invariant suite", || {
        let mut emission_capped = fixtures::direct_spec(1, 1, 3, 1);
        emission_capped.demand_nodes[0].demand = vec![5_000.0; 3];
        emission_capped.econ.emission_ceiling = vec![(0, 1, 500.0)];
        let corpus: Vec<(&str, ScenarioSpec)> = vec![
            ("direct-1x1", fixtures::direct_spec(1, 1, 2, 1)),
            ("direct-2x2", fixtures::direct_spec(2, 2, 3, 1)),
            ("direct-gap2", fixtures::direct_spec(1, 2, 4, 2)),
            ("direct-instant", fixtures::direct_spec(1, 2, 3, 0)),
            ("hub-1x1x2", fixtures::hub_spec(1, 1, 2, 2, 0)),
            ("hub-1x2x4", fixtures::hub_spec(1, 2, 4, 2, 1)),
            ("emission-capped", emission_capped),
            ("micro", micro_spec()),
        ];
        let mut checked = 0usize;
        for (name, spec) in &corpus {
            let (built, _, sol) = solve_spec(spec, &MilpOptions::default()).map_err(|e| format!("{name}: {e}"))?;
            let violations = check_invariants(&built, &sol);
            if !violations.is_empty() {
                return Err(format!("{name}: {}", violations.join("; ")));
            }
            checked += 1;
        }
        Ok(format!("{checked} instances, zero violations"))
    });
}

#[test]
fn criterion_3a_demand_doubling_raises_pipeline_share() {
    criterion(3, "demand scaling direction", || {
        let mut base = fixtures::direct_spec(1, 1, 4, 1);
        base.demand_nodes[0].demand = vec![60_000.0; 4];
        let mut doubled = base.clone();
        doubled.demand_nodes[0].demand = vec![120_000.0; 4];

        let (_, fr_base, sol_base) = solve_spec(&base, &MilpOptions::default())?;
        let (_, fr_double, sol_double) = solve_spec(&doubled, &MilpOptions::default())?;
        let share = |spec: &ScenarioSpec, sol: &PlanSolution| -> Result<f64, String> {
            let m = report::metrics(spec, sol).map_err(|e| e.to_string())?;
            Ok(m.mode_share.last().unwrap()[0])
        };
        let s_base = share(&base, &sol_base)?;
        let s_double = share(&doubled, &sol_double)?;
        if s_double <= s_base + 1e-9 {
            return Err(format!(
                "final-bin pipeline share did not rise: {s_base} -> {s_double}"
            ));
        }
        if fr_double.ratio > fr_base.ratio + 1e-6 * (1.0 + fr_base.ratio.abs()) {
            return Err(format!(
                "levelized cost rose under doubled demand: {} -> {}",
                fr_base.ratio, fr_double.ratio
            ));
        }
        Ok(format!(
            "pipeline share {s_base:.3} -> {s_double:.3}, levelized cost {:.4} -> {:.4}",
            fr_base.ratio, fr_double.ratio
        ))
    });
}

#[test]
fn criterion_3b_longer_lead_time_lowers_final_coverage() {
    criterion(3, "construction delay direction", || {
        let make = |gap: usize| {
            let mut spec = fixtures::direct_spec(1, 3, 4, gap);
            for j in 0..3 {
                spec.demand_nodes[j].demand = vec![400_000.0; 4];
            }
            spec.econ.nh_max = 1;
            spec.econ.pipeline_capital = 5.0;
            spec
        };
        let fast = make(1);
        let slow = make(2);
        let (_, _, sol_fast) = solve_spec(&fast, &MilpOptions::default())?;
        let (_, _, sol_slow) = solve_spec(&slow, &MilpOptions::default())?;
        let coverage = |spec: &ScenarioSpec, sol: &PlanSolution| -> Result<f64, String> {
            let m = report::metrics(spec, sol).map_err(|e| e.to_string())?;
            Ok(*m.pipeline_coverage.last().unwrap())
        };
        let c_fast = coverage(&fast, &sol_fast)?;
        let c_slow = coverage(&slow, &sol_slow)?;
        if c_slow + 1e-9 >= c_fast {
            return Err(format!(
                "final coverage did not drop with the longer lead time: {c_fast} vs {c_slow}"
            ));
        }
        Ok(format!("final coverage {c_fast:.3} (1y lead) vs {c_slow:.3} (2y lead)"))
    });
}

#[test]
fn criterion_3c_hub_mode_keeps_buying_vehicles_late() {
    criterion(3, "hub mode direction", || {
        let demand = fixtures::growth_series(200_000.0, 2.0, 6);
        let mut direct = fixtures::direct_spec(1, 4, 6, 1);
        for j in 0..4 {
            direct.demand_nodes[j].demand = demand.clone();
        }
        direct.supply_nodes[0].capacity = vec![5e8; 6];
        direct.econ.nh_max = 1;
        direct.econ.big_m = 1e9;
        direct.econ.f_base_max = 1e9;

        let mut hub = fixtures::hub_spec(1, 1, 4, 6, 1);
        for j in 0..4 {
            hub.demand_nodes[j].demand = demand.clone();
        }
        hub.supply_nodes[0].capacity = vec![5e8; 6];
        hub.econ.nh_max = 1;
        hub.econ.big_m = 1e9;
        hub.econ.f_base_max = 1e9;

        // Tube trailers and the organic carrier are switched off through
        // bounds and the gap is loosened: the assertion is directional,
        // not about sixth-digit optimality, and the full model does not
        // fit the runtime budget.
        let opts = MilpOptions {
            relative_gap: 1e-3,
            dinkelbach_tolerance: 1e-4,
            ..MilpOptions::default()
        };
        let solve_two_mode = |spec: &ScenarioSpec| -> Result<PlanSolution, String> {
            let mut built = build_model(spec).map_err(|e| format!("build: {e}"))?;
            for col in 0..built.model.num_columns() {
                let off = match built.vars.id_of(col) {
                    VarId::FlowV { r, .. } | VarId::FlowVkj { r, .. } => r == 1 || r == 3,
                    VarId::Nv { r, .. } | VarId::NvNew { r, .. } | VarId::NvScrap { r, .. } => {
                        r == 1 || r == 3
                    }
                    _ => false,
                };
                if off {
                    built.model.columns[col].lo = 0.0;
                    built.model.columns[col].hi = 0.0;
                }
            }
            let fr = solve_fractional(&built.model, &opts).map_err(|e| format!("solve: {e}"))?;
            if !fr.converged {
                return Err(format!("solver did not converge ({:?})", fr.milp.status));
            }
            let raw = fr.milp.x.as_ref().ok_or("no incumbent")?;
            extract_solution(&built, spec, raw).map_err(|e| format!("extract: {e}"))
        };
        let sol_direct = solve_two_mode(&direct)?;
        let sol_hub = solve_two_mode(&hub)?;
        let late_purchases = |sol: &PlanSolution| -> f64 {
            (4..6)
                .flat_map(|t| (1..4).map(move |r| (r, t)))
                .map(|(r, t)| sol.new_vehicles(r, t))
                .sum()
        };
        let hub_late = late_purchases(&sol_hub);
        let direct_late = late_purchases(&sol_direct);
        if hub_late < 1.0 - 1e-6 {
            return Err(format!("hub twin bought no vehicles in the final third ({hub_late})"));
        }
        if direct_late > hub_late + 1e-6 {
            return Err(format!(
                "direct twin bought more vehicles late than the hub twin: {direct_late} vs {hub_late}"
            ));
        }
        Ok(format!(
            "late purchases: hub {hub_late}, direct {direct_late}"
        ))
    });
}

#[test]
fn criterion_4_dinkelbach_toy_and_constant_denominator() {
    criterion(4, "ratio iteration correctness", || {
        // Constant denominator: the equality pins TV, one update suffices.
        let mut constant = MilpModel::new("const-denominator");
        let v = constant.add_column("v", 0.0, 10.0, VarKind::Continuous, 7.0);
        constant.add_row("fix", "t", vec![(v, 1.0)], RowSense::Eq, 3.0);
        constant.tv = vec![(v, 1.0)];
        let r = solve_fractional(&constant, &MilpOptions::default()).map_err(|e| e.to_string())?;
        if !r.converged || r.iterations > 1 {
            return Err(format!("constant-denominator case took {} updates", r.iterations));
        }
        if (r.ratio - 7.0).abs() > 0.0 {
            return Err(format!("constant-denominator ratio {} != 7", r.ratio));
        }

        // (10 + 2v) / v over v in [1, 5]: optimum 4 at v = 5.
        let mut toy = MilpModel::new("fractional-toy");
        let one = toy.add_column("one", 1.0, 1.0, VarKind::Continuous, 10.0);
        let v = toy.add_column("v", 1.0, 5.0, VarKind::Continuous, 2.0);
        let _ = one;
        toy.tv = vec![(v, 1.0)];
        let r = solve_fractional(&toy, &tight_options()).map_err(|e| e.to_string())?;
        if !r.converged {
            return Err("toy did not converge".into());
        }
        if (r.ratio - 4.0).abs() > 1e-9 {
            return Err(format!("toy ratio {} != 4 within 1e-9", r.ratio));
        }
        // Independent grid search over the single degree of freedom.
        let grid_best = (0..=40_000)
            .map(|i| {
                let x = 1.0 + 4.0 * i as f64 / 40_000.0;
                (10.0 + 2.0 * x) / x
            })
            .fold(f64::INFINITY, f64::min);
        if (r.ratio - grid_best).abs() > 1e-6 {
            return Err(format!("toy ratio {} vs grid optimum {grid_best}", r.ratio));
        }
        Ok(format!("toy ratio {} (grid {grid_best})", r.ratio))
    });
}

fn dual_certificate(model: &MilpModel, lp: &LpSolution) -> Result<(), String> {
    if lp.duals.len() != model.num_rows() {
        return Err(format!("{} duals for {} rows", lp.duals.len(), model.num_rows()));
    }
    let tol = 1e-6 * (1.0 + lp.objective.abs());
    // Sign convention for a minimization problem.
    for (row, &y) in model.rows.iter().zip(&lp.duals) {
        match row.sense {
            RowSense::Le if y > tol => return Err(format!("row {}: positive dual {y} on <= row", row.name)),
            RowSense::Ge if y < -tol => return Err(format!("row {}: negative dual {y} on >= row", row.name)),
            _ => {}
        }
    }
    // Lagrangian bound: y^T b plus the bound-side contribution of the
    // reduced costs. For a correct dual vector this equals the optimum.
    let mut reduced: Vec<f64> = model.columns.iter().map(|c| c.obj).collect();
    for (row, &y) in model.rows.iter().zip(&lp.duals) {
        for &(j, a) in &row.coeffs {
            reduced[j] -= y * a;
        }
    }
    let mut bound: f64 = model.rows.iter().zip(&lp.duals).map(|(r, &y)| y * r.rhs).sum();
    for (col, &d) in model.columns.iter().zip(&reduced) {
        if d.abs() <= 1e-12 {
            continue;
        }
        let v = if d > 0.0 { col.lo } else { col.hi };
        if !v.is_finite() {
            return Err(format!("column {}: unbounded side with reduced cost {d}", col.name));
        }
        bound += d * v;
    }
    if bound > lp.objective + tol {
        return Err(format!("dual bound {bound} exceeds objective {}", lp.objective));
    }
    if lp.objective - bound > tol {
        return Err(format!("duality gap: bound {bound} vs objective {}", lp.objective));
    }
    Ok(())
}

#[test]
fn criterion_5_simplex_battery_against_vertex_enumeration() {
    criterion(5, "simplex battery", || {
        // Three pinned examples.
        let mut cases: Vec<(MilpModel, f64)> = Vec::new();

        let mut m1 = MilpModel::new("share");
        let x = m1.add_column("x", 0.0, 1.0, VarKind::Continuous, -1.0);
        let y = m1.add_column("y", 0.0, 1.0, VarKind::Continuous, -1.0);
        m1.add_row("cap", "t", vec![(x, 1.0), (y, 1.0)], RowSense::Le, 1.0);
        cases.push((m1, -1.0));

        let mut m2 = MilpModel::new("floor");
        let x = m2.add_column("x", 0.0, 10.0, VarKind::Continuous, 1.0);
        m2.add_row("min", "t", vec![(x, 1.0)], RowSense::Ge, 3.0);
        cases.push((m2, 3.0));

        let mut m3 = MilpModel::new("blend");
        let x = m3.add_column("x", 0.0, 3.0, VarKind::Continuous, 2.0);
        let y = m3.add_column("y", 0.0, 3.0, VarKind::Continuous, 3.0);
        m3.add_row("mix", "t", vec![(x, 1.0), (y, 1.0)], RowSense::Eq, 4.0);
        cases.push((m3, 9.0));

        for (model, expect) in &cases {
            let lp = solve_lp(model).map_err(|e| e.to_string())?;
            if lp.status != LpStatus::Optimal {
                return Err(format!("{}: status {:?}", model.name, lp.status));
            }
            if (lp.objective - expect).abs() > 1e-9 {
                return Err(format!("{}: objective {} != {expect}", model.name, lp.objective));
            }
            dual_certificate(model, &lp).map_err(|e| format!("{}: {e}", model.name))?;
        }

        // Twenty randomized LPs, feasible by construction around an
        // interior point, checked against full vertex enumeration.
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_817);
        for case in 0..20 {
            let n = rng.random_range(2..=6);
            let m = rng.random_range(1..=5);
            let hi: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..10.0)).collect();
            let lo = vec![0.0; n];
            let z: Vec<f64> = hi.iter().map(|&u| u * rng.random_range(0.2..0.8)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();

            let mut model = MilpModel::new(format!("random{case}"));
            for (j, (&l, &u)) in lo.iter().zip(&hi).enumerate() {
                model.add_column(format!("x{j}"), l, u, VarKind::Continuous, c[j]);
            }
            let mut rows = Vec::new();
            for i in 0..m {
                let mut a: Vec<f64>;
                loop {
                    a = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
                    if a.iter().any(|v| v.abs() > 0.5) {
                        break;
                    }
                }
                let az: f64 = a.iter().zip(&z).map(|(ai, zi)| ai * zi).sum();
                let roll: f64 = rng.random_range(0.0..1.0);
                let (sense, b) = if roll < 0.2 {
                    (RowSense::Eq, az)
                } else if roll < 0.6 {
                    (RowSense::Le, az + rng.random_range(0.0..2.0))
                } else {
                    (RowSense::Ge, az - rng.random_range(0.0..2.0))
                };
                let coeffs: Vec<(usize, f64)> = a.iter().enumerate().map(|(j, &v)| (j, v)).collect();
                model.add_row(format!("r{i}"), "t", coeffs, sense, b);
                rows.push(oracle::DenseRow { a, sense, b });
            }

            let (bf_obj, _) = oracle::brute_force_lp(&c, &rows, &lo, &hi)
                .ok_or_else(|| format!("random{case}: oracle found no vertex"))?;
            let lp = solve_lp(&model).map_err(|e| format!("random{case}: {e}"))?;
            if lp.status != LpStatus::Optimal {
                return Err(format!("random{case}: status {:?}", lp.status));
            }
            if (lp.objective - bf_obj).abs() > 1e-6 * (1.0 + bf_obj.abs()) {
                return Err(format!(
                    "random{case}: simplex {} vs enumeration {bf_obj}",
                    lp.objective
                ));
            }
            dual_certificate(&model, &lp).map_err(|e| format!("random{case}: {e}"))?;
        }
        Ok("3 pinned + 20 randomized LPs with duality certificates".into())
    });
}

#[test]
fn criterion_6_mps_round_trip_through_independent_reader() {
    criterion(6, "MPS round trip", || {
        let spec = micro_spec();
        let built = build_model(&spec).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        h2opt::write_mps(&built.model, &mut buf).map_err(|e| e.to_string())?;
        let text = String::from_utf8(buf).map_err(|e| e.to_string())?;
        let parsed = oracle::read_mps(&text).map_err(|e| format!("reader: {e}"))?;
        oracle::mps_matches_model(&parsed, &built.model).map_err(|e| format!("mismatch: {e}"))?;

        // Optional: agreement with an external solver when one is on PATH.
        let external = ["glpsol", "cbc", "scip", "highs"]
            .iter()
            .find(|name| {
                std::env::var_os("PATH")
                    .map(|paths| {
                        std::env::split_paths(&paths).any(|dir| dir.join(name).is_file())
                    })
                    .unwrap_or(false)
            })
            .copied();
        let note = match external {
            Some(name) => format!("matrix equal; external solver {name} present but not exercised"),
            None => "matrix equal; external solver check skipped (none on PATH)".to_string(),
        };
        Ok(note)
    });
}

#[test]
fn criterion_7_forecast_arithmetic() {
    criterion(7, "forecast arithmetic", || {
        let table = FcevShareTable::texas_default();
        let anchors = [
            (2025.0, 0.00005),
            (2030.0, 0.024),
            (2035.0, 0.086),
            (2040.0, 0.186),
            (2045.0, 0.324),
            (2050.0, 0.50),
        ];
        for (year, share) in anchors {
            let got = fcev_share(year, &table).map_err(|e| e.to_string())?;
            if got != share {
                return Err(format!("share at {year}: {got} != {share}"));
            }
        }
        let params = DemandModelParams::texas_default();
        params.validate().map_err(|e| e.to_string())?;
        let d = hydrogen_demand(1_000_000.0, 0.024, &params);
        if (d - 2_479_032.0).abs() > 1.0 {
            return Err(format!("demand(1e6, 0.024) = {d}, expected 2479032 +- 1"));
        }
        let mut broken = params.clone();
        broken.combined_constant = 99.0;
        if broken.validate().is_ok() {
            return Err("inconsistent demand constant was accepted".into());
        }
        Ok(format!("anchors exact, demand(1e6, 0.024) = {d} kg"))
    });
}

#[test]
fn criterion_8_cli_solve_is_deterministic() {
    criterion(8, "determinism", || {
        let exe = env!("CARGO_BIN_EXE_h2plan");
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let root = tempfile::tempdir().map_err(|e| e.to_string())?;
            let status = std::process::Command::new(exe)
                .args(["solve", "--builtin", "S1", "--periods", "6"])
                .arg("--out")
                .arg(root.path())
                .stdout(std::process::Stdio::null())
                .status()
                .map_err(|e| e.to_string())?;
            if !status.success() {
                return Err(format!("solve exited with {status}"));
            }
            let run_dir = std::fs::read_dir(root.path())
                .map_err(|e| e.to_string())?
                .filter_map(Result::ok)
                .find(|e| e.path().is_dir())
                .ok_or("no run directory created")?;
            let csv = std::fs::read(run_dir.path().join("solution.csv")).map_err(|e| e.to_string())?;
            outputs.push(csv);
        }
        if outputs[0] != outputs[1] {
            return Err("solution CSVs differ between identical runs".into());
        }
        Ok(format!("identical solution CSVs ({} bytes)", outputs[0].len()))
    });
}

fn brute_force_clusters(points: &[(GeoPoint, f64)], k: usize) -> (f64, Vec<Vec<usize>>) {
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut best_groups: Vec<Vec<usize>> = Vec::new();
    let total = k.pow(n as u32);
    for code in 0..total {
        let mut assignment = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            assignment.push(c % k);
            c /= k;
        }
        let mut sums = vec![(0.0f64, 0.0f64, 0.0f64); k];
        for (idx, &(p, w)) in points.iter().enumerate() {
            let g = assignment[idx];
            sums[g].0 += w * p.lat();
            sums[g].1 += w * p.lon();
            sums[g].2 += w;
        }
        let mut inertia = 0.0;
        for (idx, &(p, w)) in points.iter().enumerate() {
            let (sx, sy, sw) = sums[assignment[idx]];
            if sw > 0.0 {
                let dx = p.lat() - sx / sw;
                let dy = p.lon() - sy / sw;
                inertia += w * (dx * dx + dy * dy);
            }
        }
        if inertia < best - 1e-15 {
            best = inertia;
            let mut groups = vec![Vec::new(); k];
            for (idx, &g) in assignment.iter().enumerate() {
                groups[g].push(idx);
            }
            groups.retain(|g| !g.is_empty());
            groups.sort();
            best_groups = groups;
        }
    }
    (best, best_groups)
}

fn groups_of(result: &ClusteringResult) -> Vec<Vec<usize>> {
    let k = result.centroids.len();
    let mut groups = vec![Vec::new(); k];
    for (idx, &g) in result.assignment.iter().enumerate() {
        groups[g].push(idx);
    }
    groups.retain(|g| !g.is_empty());
    groups.sort();
    groups
}

#[test]
fn criterion_9_clustering_matches_exhaustive_partition_search() {
    criterion(9, "clustering", || {
        let pt = |lat: f64, lon: f64| GeoPoint::new(lat, lon).unwrap();
        // Separable case: two coincident triples.
        let separable = vec![
            (pt(0.0, 0.0), 1.0),
            (pt(0.0, 0.0), 1.0),
            (pt(0.0, 0.0), 1.0),
            (pt(10.0, 10.0), 1.0),
            (pt(10.0, 10.0), 1.0),
            (pt(10.0, 10.0), 1.0),
        ];
        let r = kmeans_hubs(&separable, 2, 42, 100).map_err(|e| e.to_string())?;
        if r.inertia.abs() > 1e-12 {
            return Err(format!("separable case inertia {}", r.inertia));
        }

        // Twelve weighted points in three loose groups; every one of the
        // 3^12 assignments is scored with its weighted-mean centroids.
        let centers = [(30.0, -96.0), (32.5, -101.0), (27.5, -99.5)];
        let offsets = [(0.0, 0.0), (0.2, 0.1), (-0.1, 0.3), (0.1, -0.2)];
        let mut points = Vec::new();
        for (g, &(clat, clon)) in centers.iter().enumerate() {
            for (o, &(dlat, dlon)) in offsets.iter().enumerate() {
                points.push((pt(clat + dlat, clon + dlon), 1.0 + ((g * 4 + o) % 5) as f64));
            }
        }
        let (best, best_groups) = brute_force_clusters(&points, 3);
        let r = kmeans_hubs(&points, 3, 5, 200).map_err(|e| e.to_string())?;
        if (r.inertia - best).abs() > 1e-9 * (1.0 + best) {
            return Err(format!("inertia {} vs exhaustive optimum {best}", r.inertia));
        }
        if groups_of(&r) != best_groups {
            return Err("partition differs from the exhaustive optimum".into());
        }

        // Seed determinism.
        let again = kmeans_hubs(&points, 3, 5, 200).map_err(|e| e.to_string())?;
        if again != r {
            return Err("same seed produced a different clustering".into());
        }
        Ok(format!("12-point optimum inertia {best:.6} reproduced"))
    });
}
