//! Post-solve analysis: mode shares, pipeline coverage, fleet purchase
//! series and a cost breakdown recomputed from first principles rather
//! than read back from the solver objective.

use crate::domain::{
    present_value_factor, straight_line_distance, PlanningMode, ScenarioSpec, TransportMode,
};
use crate::model::{PlanSolution, VarId};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("bins do not partition the horizon: {0}")]
    BadBins(String),
    #[error("total_required must be > 0")]
    ZeroRequired,
}

/// Discounted cost components, all in dollars.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Pipeline capital.
    pub c_hc: f64,
    /// Vehicle capital.
    pub c_vc: f64,
    /// Vehicle fuel.
    pub c_fo: f64,
    /// Driver labor.
    pub c_lo: f64,
    /// Pipeline maintenance.
    pub c_ho: f64,
    /// Hydrogen lost in transit.
    pub c_hl: f64,
    /// Carbon emissions.
    pub c_cl: f64,
    /// Supply-demand imbalance.
    pub c_sl: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.c_hc + self.c_vc + self.c_fo + self.c_lo + self.c_ho + self.c_hl + self.c_cl + self.c_sl
    }

    fn add(&mut self, other: &CostBreakdown) {
        self.c_hc += other.c_hc;
        self.c_vc += other.c_vc;
        self.c_fo += other.c_fo;
        self.c_lo += other.c_lo;
        self.c_ho += other.c_ho;
        self.c_hl += other.c_hl;
        self.c_cl += other.c_cl;
        self.c_sl += other.c_sl;
    }
}

/// Everything the reporting layer derives from one solved plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    /// Inclusive (first period, last period) per bin.
    pub bins: Vec<(usize, usize)>,
    /// Per bin, fraction of delivered flow per method index.
    pub mode_share: Vec<[f64; 4]>,
    /// Bins with no flow at all report all-zero shares and are flagged.
    pub bin_has_flow: Vec<bool>,
    /// Per period, existing pipelines over the required arc count.
    pub pipeline_coverage: Vec<f64>,
    pub pipelines_existing: Vec<usize>,
    pub pipelines_required: usize,
    /// Per period, vehicles bought per method index (pipeline stays 0).
    pub vehicle_purchases: Vec<[f64; 4]>,
    pub vehicle_scraps: Vec<[f64; 4]>,
    /// Discounted cost components per period.
    pub cost_by_period: Vec<CostBreakdown>,
    pub totals: CostBreakdown,
    /// Levelized cost; absent when nothing was delivered.
    pub lch2: Option<f64>,
    pub total_delivered: f64,
}

/// Default analysis bins: the opening six years, then five-year blocks.
pub fn default_bins(periods: usize) -> Vec<(usize, usize)> {
    let mut bins = Vec::new();
    let mut start = 0usize;
    let mut width = 6usize;
    while start < periods {
        let end = (start + width - 1).min(periods - 1);
        bins.push((start, end));
        start = end + 1;
        width = 5;
    }
    bins
}

fn check_partition(bins: &[(usize, usize)], periods: usize) -> Result<(), ReportError> {
    if bins.is_empty() {
        return Err(ReportError::BadBins("no bins".into()));
    }
    let mut expect = 0usize;
    for &(a, b) in bins {
        if a != expect || b < a {
            return Err(ReportError::BadBins(format!(
                "bin ({a}, {b}) does not continue at period {expect}"
            )));
        }
        expect = b + 1;
    }
    if expect != periods {
        return Err(ReportError::BadBins(format!(
            "bins end at period {expect}, horizon has {periods}"
        )));
    }
    Ok(())
}

/// Fraction of delivered flow per method within each bin.
pub fn mode_share_by_period(
    sol: &PlanSolution,
    bins: &[(usize, usize)],
) -> Result<(Vec<[f64; 4]>, Vec<bool>), ReportError> {
    check_partition(bins, sol.dims.periods)?;
    let mut shares = Vec::with_capacity(bins.len());
    let mut has_flow = Vec::with_capacity(bins.len());
    for &(a, b) in bins {
        let mut by_mode = [0.0f64; 4];
        for t in a..=b {
            for (r, slot) in by_mode.iter_mut().enumerate() {
                *slot += sol.flow_by_mode_period(r, t);
            }
        }
        let total: f64 = by_mode.iter().sum();
        if total > 0.0 {
            for slot in &mut by_mode {
                *slot /= total;
            }
            has_flow.push(true);
        } else {
            has_flow.push(false);
        }
        shares.push(by_mode);
    }
    Ok((shares, has_flow))
}

/// Arc count the coverage ratio is measured against.
pub fn required_pipeline_arcs(sol: &PlanSolution) -> usize {
    match sol.mode {
        PlanningMode::Direct => sol.dims.supply * sol.dims.demand,
        // Both stages can carry pipelines: every plant-to-hub arc plus one
        // assigned arc per demand node.
        PlanningMode::Hub => sol.dims.supply * sol.dims.hubs + sol.dims.demand,
    }
}

/// Existing pipelines at `t` over the required count.
pub fn pipeline_coverage_ratio(
    sol: &PlanSolution,
    t: usize,
    total_required: usize,
) -> Result<f64, ReportError> {
    if total_required == 0 {
        return Err(ReportError::ZeroRequired);
    }
    Ok(sol.pipelines_at(t) as f64 / total_required as f64)
}

/// Newly purchased and scrapped vehicles per (method, period).
pub fn vehicle_purchase_series(sol: &PlanSolution) -> (Vec<[f64; 4]>, Vec<[f64; 4]>) {
    let periods = sol.dims.periods;
    let mut bought = vec![[0.0f64; 4]; periods];
    let mut scrapped = vec![[0.0f64; 4]; periods];
    for t in 0..periods {
        for mode in TransportMode::VEHICLES {
            let r = mode.index();
            bought[t][r] = sol.new_vehicles(r, t);
            scrapped[t][r] = sol.scrapped_vehicles(r, t);
        }
    }
    (bought, scrapped)
}

struct ArcFlows<'a> {
    spec: &'a ScenarioSpec,
    sol: &'a PlanSolution,
}

impl<'a> ArcFlows<'a> {
    /// Visit every flow-carrying arc at period `t`:
    /// (method, length, flow, counts toward delivery).
    fn for_each(&self, t: usize, mut f: impl FnMut(usize, f64, f64, bool)) {
        let spec = self.spec;
        let sol = self.sol;
        match sol.mode {
            PlanningMode::Direct => {
                for (i, s) in spec.supply_nodes.iter().enumerate() {
                    for (j, d) in spec.demand_nodes.iter().enumerate() {
                        let length = straight_line_distance(s.location, d.location);
                        for r in 0..4 {
                            let v = sol.value(VarId::FlowV { i, j, r, t });
                            f(r, length, v, true);
                        }
                    }
                }
            }
            PlanningMode::Hub => {
                let hubs = spec.hub_nodes.as_ref().unwrap();
                for (i, s) in spec.supply_nodes.iter().enumerate() {
                    for (k, h) in hubs.iter().enumerate() {
                        let length = straight_line_distance(s.location, h.location);
                        let v = sol.value(VarId::FlowVik { i, k, t });
                        f(0, length, v, false);
                    }
                }
                for (k, h) in hubs.iter().enumerate() {
                    for (j, d) in spec.demand_nodes.iter().enumerate() {
                        let length = straight_line_distance(h.location, d.location);
                        for r in 0..4 {
                            let v = sol.value(VarId::FlowVkj { k, j, r, t });
                            f(r, length, v, true);
                        }
                    }
                }
            }
        }
    }

    /// Visit pipeline arcs at `t`: (length, exists, build started).
    fn for_each_pipe(&self, t: usize, mut f: impl FnMut(f64, f64, f64)) {
        let spec = self.spec;
        let sol = self.sol;
        match sol.mode {
            PlanningMode::Direct => {
                for (i, s) in spec.supply_nodes.iter().enumerate() {
                    for (j, d) in spec.demand_nodes.iter().enumerate() {
                        let length = straight_line_distance(s.location, d.location);
                        f(
                            length,
                            sol.value(VarId::Bh { i, j, t }),
                            sol.value(VarId::BhNew { i, j, t }),
                        );
                    }
                }
            }
            PlanningMode::Hub => {
                let hubs = spec.hub_nodes.as_ref().unwrap();
                for (i, s) in spec.supply_nodes.iter().enumerate() {
                    for (k, h) in hubs.iter().enumerate() {
                        let length = straight_line_distance(s.location, h.location);
                        f(
                            length,
                            sol.value(VarId::BhIk { i, k, t }),
                            sol.value(VarId::BhIkNew { i, k, t }),
                        );
                    }
                }
                for (k, h) in hubs.iter().enumerate() {
                    for (j, d) in spec.demand_nodes.iter().enumerate() {
                        let length = straight_line_distance(h.location, d.location);
                        f(
                            length,
                            sol.value(VarId::BhKj { k, j, t }),
                            sol.value(VarId::BhKjNew { k, j, t }),
                        );
                    }
                }
            }
        }
    }

    /// Summed arc length entering the literal carbon term.
    fn carbon_arc_length(&self) -> f64 {
        let spec = self.spec;
        match self.sol.mode {
            PlanningMode::Direct => {
                let mut total = 0.0;
                for s in &spec.supply_nodes {
                    for d in &spec.demand_nodes {
                        total += straight_line_distance(s.location, d.location);
                    }
                }
                total
            }
            PlanningMode::Hub => {
                let hubs = spec.hub_nodes.as_ref().unwrap();
                let assignment = spec.hub_assignment.as_ref().unwrap();
                let mut total = 0.0;
                for (j, d) in spec.demand_nodes.iter().enumerate() {
                    let k = assignment[&j];
                    total += straight_line_distance(hubs[k].location, d.location);
                }
                total
            }
        }
    }
}

/// Recompute the discounted cost components per period from the decision
/// values alone. This deliberately does not reuse the model's objective
/// coefficients, so disagreements expose compilation bugs.
pub fn cost_by_period(spec: &ScenarioSpec, sol: &PlanSolution) -> Vec<CostBreakdown> {
    let arcs = ArcFlows { spec, sol };
    let beta = spec.econ.discount_beta;
    let carbon_len = arcs.carbon_arc_length();
    let mut out = Vec::with_capacity(sol.dims.periods);
    for t in 0..sol.dims.periods {
        let pv = present_value_factor(beta, t);
        let mut c = CostBreakdown::default();
        arcs.for_each(t, |r, length, v, _| {
            if v == 0.0 {
                return;
            }
            let ms = &spec.mode_specs[r];
            if r != TransportMode::Pipeline.index() {
                c.c_fo += pv * v * ms.fuel_price * 2.0 * length / (ms.fuel_economy * ms.capacity);
                c.c_lo += pv * v * ms.wage * (2.0 * length / ms.speed + ms.load_time) / ms.capacity;
                if spec.formulation.carbon_by_flow {
                    c.c_cl +=
                        pv * spec.econ.penalty_co2 * v * ms.emission * length / (ms.fuel_economy * ms.capacity);
                }
            }
            c.c_hl += pv * spec.econ.penalty_loss * v * ms.loss_rate * length / ms.capacity;
        });
        arcs.for_each_pipe(t, |length, exists, started| {
            c.c_ho += pv * spec.econ.pipeline_maint * length * exists;
            c.c_hc += pv * spec.econ.pipeline_capital * length * started;
        });
        for mode in TransportMode::VEHICLES {
            let r = mode.index();
            let ms = &spec.mode_specs[r];
            c.c_vc += pv * ms.capital_cost * sol.new_vehicles(r, t);
            if !spec.formulation.carbon_by_flow {
                c.c_cl += pv
                    * spec.econ.penalty_co2
                    * ms.emission
                    * carbon_len
                    * sol.value(VarId::Nv { r, t })
                    / ms.fuel_economy;
            }
        }
        for j in 0..sol.dims.demand {
            c.c_sl += pv
                * spec.econ.penalty_imbalance
                * (sol.value(VarId::Spos { j, t }) + sol.value(VarId::Sneg { j, t }));
        }
        out.push(c);
    }
    out
}

/// Eight components, their total and the levelized cost.
pub fn levelized_breakdown(spec: &ScenarioSpec, sol: &PlanSolution) -> (CostBreakdown, Option<f64>) {
    let mut totals = CostBreakdown::default();
    for c in cost_by_period(spec, sol) {
        totals.add(&c);
    }
    let lch2 = if sol.total_delivered > 0.0 {
        Some(totals.total() / sol.total_delivered)
    } else {
        None
    };
    (totals, lch2)
}

/// Assemble the full bundle with the default bins.
pub fn metrics(spec: &ScenarioSpec, sol: &PlanSolution) -> Result<MetricsBundle, ReportError> {
    let bins = default_bins(sol.dims.periods);
    let (mode_share, bin_has_flow) = mode_share_by_period(sol, &bins)?;
    let required = required_pipeline_arcs(sol);
    let pipelines_existing: Vec<usize> = (0..sol.dims.periods).map(|t| sol.pipelines_at(t)).collect();
    let pipeline_coverage: Vec<f64> = pipelines_existing
        .iter()
        .map(|&n| n as f64 / required as f64)
        .collect();
    let (vehicle_purchases, vehicle_scraps) = vehicle_purchase_series(sol);
    let per_period = cost_by_period(spec, sol);
    let mut totals = CostBreakdown::default();
    for c in &per_period {
        totals.add(c);
    }
    let lch2 = if sol.total_delivered > 0.0 {
        Some(totals.total() / sol.total_delivered)
    } else {
        None
    };
    Ok(MetricsBundle {
        bins,
        mode_share,
        bin_has_flow,
        pipeline_coverage,
        pipelines_existing,
        pipelines_required: required,
        vehicle_purchases,
        vehicle_scraps,
        cost_by_period: per_period,
        totals,
        lch2,
        total_delivered: sol.total_delivered,
    })
}

fn num(v: f64) -> String {
    // Shortest round-trip decimal form; stable across runs.
    format!("{v}")
}

/// `mode_share.csv`: one row per bin.
pub fn mode_share_csv(metrics: &MetricsBundle, start_year: i32) -> String {
    let mut out = String::from("bin_start_year,bin_end_year,pipeline,tube_trailer,liquid_truck,lohc_trailer,has_flow\n");
    for (idx, &(a, b)) in metrics.bins.iter().enumerate() {
        let s = metrics.mode_share[idx];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            start_year + a as i32,
            start_year + b as i32,
            num(s[0]),
            num(s[1]),
            num(s[2]),
            num(s[3]),
            metrics.bin_has_flow[idx]
        );
    }
    out
}

/// `coverage.csv`: one row per period.
pub fn coverage_csv(metrics: &MetricsBundle, start_year: i32) -> String {
    let mut out = String::from("year,period,pipelines_existing,pipelines_required,coverage\n");
    for (t, &n) in metrics.pipelines_existing.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            start_year + t as i32,
            t,
            n,
            metrics.pipelines_required,
            num(metrics.pipeline_coverage[t])
        );
    }
    out
}

/// `vehicles.csv`: one row per (period, vehicle method).
pub fn vehicles_csv(metrics: &MetricsBundle, start_year: i32) -> String {
    let mut out = String::from("year,period,method,purchased,scrapped\n");
    for t in 0..metrics.vehicle_purchases.len() {
        for mode in TransportMode::VEHICLES {
            let r = mode.index();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                start_year + t as i32,
                t,
                mode.label(),
                num(metrics.vehicle_purchases[t][r]),
                num(metrics.vehicle_scraps[t][r])
            );
        }
    }
    out
}

/// `costs.csv`: discounted components per period plus a totals row.
pub fn costs_csv(metrics: &MetricsBundle, start_year: i32) -> String {
    let mut out = String::from(
        "year,period,pipeline_capital,vehicle_capital,fuel,labor,pipeline_maintenance,hydrogen_loss,carbon,imbalance,total\n",
    );
    let mut row = |year: String, period: String, c: &CostBreakdown| {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            year,
            period,
            num(c.c_hc),
            num(c.c_vc),
            num(c.c_fo),
            num(c.c_lo),
            num(c.c_ho),
            num(c.c_hl),
            num(c.c_cl),
            num(c.c_sl),
            num(c.total())
        );
    };
    for (t, c) in metrics.cost_by_period.iter().enumerate() {
        row((start_year + t as i32).to_string(), t.to_string(), c);
    }
    row("all".to_string(), "all".to_string(), &metrics.totals);
    out
}

/// `solution.csv`: one row per nonzero decision variable.
pub fn solution_csv(sol: &PlanSolution) -> String {
    let mut out = String::from("variable,family,value\n");
    for (&id, &v) in &sol.values {
        if v != 0.0 {
            let family = match id {
                VarId::FlowV { .. } => "flow",
                VarId::FlowVik { .. } => "flow_to_hub",
                VarId::FlowVkj { .. } => "flow_from_hub",
                VarId::Spos { .. } => "surplus",
                VarId::Sneg { .. } => "shortage",
                VarId::Bh { .. } | VarId::BhIk { .. } | VarId::BhKj { .. } => "pipeline",
                VarId::BhNew { .. } | VarId::BhIkNew { .. } | VarId::BhKjNew { .. } => "pipeline_build",
                VarId::Nv { .. } => "fleet",
                VarId::NvNew { .. } => "fleet_purchase",
                VarId::NvScrap { .. } => "fleet_scrap",
            };
            let _ = writeln!(out, "{id},{family},{}", num(v));
        }
    }
    out
}

/// `network.csv`: nonzero flows as period-stamped adjacency rows.
pub fn network_csv(spec: &ScenarioSpec, sol: &PlanSolution) -> String {
    let mut out = String::from("period,from,to,method,flow_kg\n");
    for t in 0..sol.dims.periods {
        match sol.mode {
            PlanningMode::Direct => {
                for (i, s) in spec.supply_nodes.iter().enumerate() {
                    for (j, d) in spec.demand_nodes.iter().enumerate() {
                        for r in 0..4 {
                            let v = sol.value(VarId::FlowV { i, j, r, t });
                            if v > 0.0 {
                                let _ = writeln!(
                                    out,
                                    "{t},{},{},{},{}",
                                    s.name,
                                    d.name,
                                    TransportMode::from_index(r).unwrap().label(),
                                    num(v)
                                );
                            }
                        }
                    }
                }
            }
            PlanningMode::Hub => {
                let hubs = spec.hub_nodes.as_ref().unwrap();
                for (i, s) in spec.supply_nodes.iter().enumerate() {
                    for (k, h) in hubs.iter().enumerate() {
                        let v = sol.value(VarId::FlowVik { i, k, t });
                        if v > 0.0 {
                            let _ = writeln!(out, "{t},{},{},pipeline,{}", s.name, h.name, num(v));
                        }
                    }
                }
                for (k, h) in hubs.iter().enumerate() {
                    for (j, d) in spec.demand_nodes.iter().enumerate() {
                        for r in 0..4 {
                            let v = sol.value(VarId::FlowVkj { k, j, r, t });
                            if v > 0.0 {
                                let _ = writeln!(
                                    out,
                                    "{t},{},{},{},{}",
                                    h.name,
                                    d.name,
                                    TransportMode::from_index(r).unwrap().label(),
                                    num(v)
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
