//! Scenario loading, the five builtin Texas case studies, run
//! orchestration and cross-run comparison.
//!
//! A scenario file is JSON with a mandatory `schema_version`. Everything
//! a file leaves out falls back to a documented default, and every
//! substitution is recorded in the resolved scenario's provenance list,
//! so a run can always say which numbers were assumptions rather than
//! inputs.

use crate::cluster::{kmeans_hubs, ClusterError};
use crate::domain::{
    DemandNode, DomainError, EconParams, FormulationOptions, GeoPoint, Horizon, HubNode, NodeId,
    PlanningMode, ScenarioSpec, SupplyNode, TransportMode, TransportModeSpec,
};
use crate::forecast::{fcev_share, hydrogen_demand, project_population, DemandModelParams, FcevShareTable, ForecastError};
use crate::model::{build_model, check_invariants, extract_solution, ModelError, PlanSolution};
use crate::report::{self, CostBreakdown, MetricsBundle, ReportError};
use h2opt::{solve_fractional, solve_lp, LpStatus, MilpOptions, MilpStatus, SolverError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the runs root directory.
pub const RUNS_ENV: &str = "H2PLAN_RUNS";
pub const DEFAULT_SEED: u64 = 42;

const TEXAS_DATA: &str = include_str!("../data/texas.json");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario file does not parse: {0}")]
    Parse(String),
    #[error("scenario invalid:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("compare needs at least two results, got {0}")]
    TooFewResults(usize),
}

/// The five builtin case studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 5] = [
        ScenarioId::S1,
        ScenarioId::S2,
        ScenarioId::S3,
        ScenarioId::S4,
        ScenarioId::S5,
    ];
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(ScenarioId::S1),
            "S2" => Ok(ScenarioId::S2),
            "S3" => Ok(ScenarioId::S3),
            "S4" => Ok(ScenarioId::S4),
            "S5" => Ok(ScenarioId::S5),
            other => Err(format!("unknown scenario id {other}, expected S1..S5")),
        }
    }
}

// ---------------------------------------------------------------------
// File schema
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub mode: PlanningMode,
    pub horizon: HorizonSection,
    pub supply: Vec<SupplyEntry>,
    pub demand: Vec<DemandEntry>,
    #[serde(default)]
    pub forecast: Option<ForecastSection>,
    #[serde(default)]
    pub hubs: Option<HubSection>,
    #[serde(default)]
    pub transport: Option<Vec<TransportOverride>>,
    #[serde(default)]
    pub economics: Option<EconSection>,
    #[serde(default)]
    pub formulation: Option<FormulationSection>,
    #[serde(default)]
    pub solver: Option<SolverSection>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    pub start_year: i32,
    pub periods: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupplyEntry {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    /// Explicit per-period capacity, kg.
    #[serde(default)]
    pub capacity: Option<Vec<f64>>,
    /// Alternatively, a share of total forecast demand plus headroom.
    #[serde(default)]
    pub share: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandEntry {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    /// Explicit per-period demand, kg.
    #[serde(default)]
    pub demand: Option<Vec<f64>>,
    /// Alternatively, a base population to run the forecast on.
    #[serde(default)]
    pub population: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastSection {
    #[serde(default)]
    pub growth_rate: Option<f64>,
    /// (year, share) anchors for vehicle adoption.
    #[serde(default)]
    pub share_anchors: Option<Vec<(f64, f64)>>,
    /// Extra supply capacity above total demand, fraction.
    #[serde(default)]
    pub headroom: Option<f64>,
    /// Scale factor applied to every forecast demand (low-demand runs).
    #[serde(default)]
    pub demand_scale: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubSection {
    /// Place this many hubs by weighted clustering of demand nodes.
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Or pin hubs explicitly.
    #[serde(default)]
    pub hubs: Option<Vec<HubEntry>>,
    /// Demand index -> hub index; required with explicit hubs.
    #[serde(default)]
    pub assignment: Option<BTreeMap<usize, usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubEntry {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportOverride {
    pub mode: TransportMode,
    #[serde(default)]
    pub capital_cost: Option<f64>,
    #[serde(default)]
    pub lifespan: Option<usize>,
    #[serde(default)]
    pub availability: Option<f64>,
    #[serde(default)]
    pub fuel_economy: Option<f64>,
    #[serde(default)]
    pub speed: Option<f64>,
    #[serde(default)]
    pub capacity: Option<f64>,
    #[serde(default)]
    pub load_time: Option<f64>,
    #[serde(default)]
    pub fuel_price: Option<f64>,
    #[serde(default)]
    pub wage: Option<f64>,
    #[serde(default)]
    pub loss_rate: Option<f64>,
    #[serde(default)]
    pub emission: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconSection {
    #[serde(default)]
    pub discount_beta: Option<f64>,
    #[serde(default)]
    pub pipeline_capital: Option<f64>,
    #[serde(default)]
    pub pipeline_maint: Option<f64>,
    #[serde(default)]
    pub penalty_loss: Option<f64>,
    #[serde(default)]
    pub penalty_co2: Option<f64>,
    #[serde(default)]
    pub penalty_imbalance: Option<f64>,
    #[serde(default)]
    pub big_m: Option<f64>,
    #[serde(default)]
    pub nh_max: Option<usize>,
    #[serde(default)]
    pub nh_gap: Option<usize>,
    #[serde(default)]
    pub f_base_max: Option<f64>,
    #[serde(default)]
    pub l_base: Option<f64>,
    #[serde(default)]
    pub emission_ceiling: Option<Vec<(usize, usize, f64)>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulationSection {
    #[serde(default)]
    pub literal_trip_time: Option<bool>,
    #[serde(default)]
    pub carbon_by_flow: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub integer_tolerance: Option<f64>,
    #[serde(default)]
    pub relative_gap: Option<f64>,
    #[serde(default)]
    pub node_limit: Option<usize>,
    #[serde(default)]
    pub time_limit_secs: Option<f64>,
    #[serde(default)]
    pub dinkelbach_tolerance: Option<f64>,
    #[serde(default)]
    pub dinkelbach_max_iters: Option<usize>,
}

/// A scenario with all defaults applied and recorded.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub spec: ScenarioSpec,
    pub options: MilpOptions,
    pub seed: u64,
    /// One line per default-substituted value.
    pub provenance: Vec<String>,
}

// ---------------------------------------------------------------------
// Defaults
// ---------------------------------------------------------------------

/// Baseline per-method parameters. Vehicle numbers follow the Texas case
/// study; loss rates and emission factors are documented assumptions.
pub fn default_mode_specs() -> Vec<TransportModeSpec> {
    vec![
        TransportModeSpec {
            mode: TransportMode::Pipeline,
            capital_cost: 1_735_904.0,
            lifespan: 40,
            availability: 10.0,
            fuel_economy: 2.86,
            speed: 80.0,
            capacity: 50_000.0,
            load_time: 2.0,
            fuel_price: 0.71,
            wage: 28.0,
            loss_rate: 0.0001,
            emission: 0.0,
        },
        TransportModeSpec {
            mode: TransportMode::TubeTrailer,
            capital_cost: 271_420.0,
            lifespan: 12,
            availability: 10.0,
            fuel_economy: 2.86,
            speed: 80.0,
            capacity: 500.0,
            load_time: 2.0,
            fuel_price: 0.71,
            wage: 28.0,
            loss_rate: 0.001,
            emission: 0.3,
        },
        TransportModeSpec {
            mode: TransportMode::LiquidTruck,
            capital_cost: 173_709.0,
            lifespan: 8,
            availability: 10.0,
            fuel_economy: 2.86,
            speed: 80.0,
            capacity: 3_500.0,
            load_time: 3.0,
            fuel_price: 0.71,
            wage: 26.0,
            loss_rate: 0.005,
            emission: 0.4,
        },
        TransportModeSpec {
            mode: TransportMode::LohcTrailer,
            capital_cost: 86_854.0,
            lifespan: 12,
            availability: 10.0,
            fuel_economy: 2.86,
            speed: 80.0,
            capacity: 1_500.0,
            load_time: 2.0,
            fuel_price: 0.71,
            wage: 28.0,
            loss_rate: 0.002,
            emission: 0.35,
        },
    ]
}

struct Defaults;

impl Defaults {
    const DISCOUNT_BETA: f64 = 0.066;
    const PIPELINE_MAINT: f64 = 30_000.0;
    const PENALTY_LOSS: f64 = 10.0;
    const PENALTY_CO2: f64 = 0.05;
    const PENALTY_IMBALANCE: f64 = 100.0;
    const NH_MAX: usize = 5;
    const NH_GAP: usize = 1;
    const F_BASE_MAX: f64 = 5e7;
    const L_BASE: f64 = 100.0;
    const GROWTH_RATE: f64 = 0.01;
    const HEADROOM: f64 = 0.05;
    const DEMAND_SCALE: f64 = 1.0;
    const LOW_DEMAND_SCALE: f64 = 0.25;
}

fn take<T: Copy + fmt::Display>(prov: &mut Vec<String>, path: &str, value: Option<T>, default: T) -> T {
    match value {
        Some(v) => v,
        None => {
            prov.push(format!("{path} defaulted to {default}"));
            default
        }
    }
}

// ---------------------------------------------------------------------
// Loading and resolution
// ---------------------------------------------------------------------

/// Parse and resolve a scenario file from disk.
pub fn load_scenario(path: &Path) -> Result<ResolvedScenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))?;
    resolve(file)
}

/// Apply defaults, run the demand forecast and hub placement where
/// requested, and produce a validated spec.
pub fn resolve(file: ScenarioFile) -> Result<ResolvedScenario, ScenarioError> {
    let mut issues: Vec<String> = Vec::new();
    let mut prov: Vec<String> = Vec::new();

    if file.schema_version != SCHEMA_VERSION {
        return Err(ScenarioError::Validation(vec![format!(
            "schema_version: expected {SCHEMA_VERSION}, got {}",
            file.schema_version
        )]));
    }
    if file.horizon.periods == 0 {
        return Err(ScenarioError::Validation(vec!["horizon.periods: must be >= 1".into()]));
    }
    let periods = file.horizon.periods;
    let start_year = file.horizon.start_year;

    // Forecast configuration.
    let fc = file.forecast.clone().unwrap_or(ForecastSection {
        growth_rate: None,
        share_anchors: None,
        headroom: None,
        demand_scale: None,
    });
    let needs_forecast = file.demand.iter().any(|d| d.demand.is_none());
    let growth_rate = take(&mut prov, "forecast.growth_rate", fc.growth_rate, Defaults::GROWTH_RATE);
    let headroom = take(&mut prov, "forecast.headroom", fc.headroom, Defaults::HEADROOM);
    let demand_scale = take(&mut prov, "forecast.demand_scale", fc.demand_scale, Defaults::DEMAND_SCALE);
    let share_table = match fc.share_anchors {
        Some(anchors) => FcevShareTable::new(anchors)?,
        None => {
            if needs_forecast {
                prov.push("forecast.share_anchors defaulted to the statewide adoption table".to_string());
            }
            FcevShareTable::texas_default()
        }
    };
    let demand_params = DemandModelParams::texas_default();

    // Demand nodes.
    let mut demand_nodes: Vec<DemandNode> = Vec::with_capacity(file.demand.len());
    for (j, entry) in file.demand.iter().enumerate() {
        let location = match GeoPoint::new(entry.lat, entry.lon) {
            Ok(p) => p,
            Err(e) => {
                issues.push(format!("demand[{j}] ({}): {e}", entry.name));
                continue;
            }
        };
        let series: Vec<f64> = match (&entry.demand, entry.population) {
            (Some(series), _) => {
                if series.len() != periods {
                    issues.push(format!(
                        "demand[{j}] ({}): {} demand entries, horizon has {periods}",
                        entry.name,
                        series.len()
                    ));
                    continue;
                }
                for (t, &q) in series.iter().enumerate() {
                    if !(q >= 0.0) {
                        issues.push(format!(
                            "demand[{j}] ({}): negative demand {q} in period {t}",
                            entry.name
                        ));
                    }
                }
                series.clone()
            }
            (None, Some(population)) => {
                let mut series = Vec::with_capacity(periods);
                let mut failed = false;
                for t in 0..periods {
                    let year = (start_year + t as i32) as f64;
                    match fcev_share(year, &share_table) {
                        Ok(k) => {
                            let pop = project_population(population, growth_rate, t);
                            series.push(hydrogen_demand(pop, k, &demand_params) * demand_scale);
                        }
                        Err(e) => {
                            issues.push(format!("demand[{j}] ({}): {e}", entry.name));
                            failed = true;
                            break;
                        }
                    }
                }
                if failed {
                    continue;
                }
                series
            }
            (None, None) => {
                issues.push(format!(
                    "demand[{j}] ({}): needs either a demand series or a population",
                    entry.name
                ));
                continue;
            }
        };
        demand_nodes.push(DemandNode {
            id: NodeId::demand(demand_nodes.len()),
            name: entry.name.clone(),
            location,
            demand: series,
        });
    }

    // Supply nodes. Share-based entries split total demand plus headroom.
    let total_demand: Vec<f64> = (0..periods)
        .map(|t| demand_nodes.iter().map(|d| d.demand[t]).sum())
        .collect();
    let share_sum: f64 = file.supply.iter().filter_map(|s| s.share).sum();
    let any_share = file.supply.iter().any(|s| s.share.is_some());
    if any_share && (share_sum - 1.0).abs() > 1e-9 {
        issues.push(format!("supply: shares sum to {share_sum}, expected 1"));
    }
    let mut supply_nodes: Vec<SupplyNode> = Vec::with_capacity(file.supply.len());
    for (i, entry) in file.supply.iter().enumerate() {
        let location = match GeoPoint::new(entry.lat, entry.lon) {
            Ok(p) => p,
            Err(e) => {
                issues.push(format!("supply[{i}] ({}): {e}", entry.name));
                continue;
            }
        };
        let capacity: Vec<f64> = match (&entry.capacity, entry.share) {
            (Some(series), _) => {
                if series.len() != periods {
                    issues.push(format!(
                        "supply[{i}] ({}): {} capacity entries, horizon has {periods}",
                        entry.name,
                        series.len()
                    ));
                    continue;
                }
                series.clone()
            }
            (None, Some(share)) => total_demand.iter().map(|&d| share * (1.0 + headroom) * d).collect(),
            (None, None) => {
                issues.push(format!(
                    "supply[{i}] ({}): needs either a capacity series or a share",
                    entry.name
                ));
                continue;
            }
        };
        supply_nodes.push(SupplyNode {
            id: NodeId::supply(supply_nodes.len()),
            name: entry.name.clone(),
            location,
            capacity,
        });
    }

    // Transport parameters.
    let mut mode_specs = default_mode_specs();
    let mut overridden: BTreeSet<(usize, &'static str)> = BTreeSet::new();
    if let Some(overrides) = &file.transport {
        for o in overrides {
            let r = o.mode.index();
            let ms = &mut mode_specs[r];
            macro_rules! apply {
                ($field:ident) => {
                    if let Some(v) = o.$field {
                        ms.$field = v;
                        overridden.insert((r, stringify!($field)));
                    }
                };
            }
            apply!(capital_cost);
            apply!(lifespan);
            apply!(availability);
            apply!(fuel_economy);
            apply!(speed);
            apply!(capacity);
            apply!(load_time);
            apply!(fuel_price);
            apply!(wage);
            apply!(loss_rate);
            apply!(emission);
        }
    }
    for (r, ms) in mode_specs.iter().enumerate() {
        let fields: [(&'static str, String); 11] = [
            ("capital_cost", ms.capital_cost.to_string()),
            ("lifespan", ms.lifespan.to_string()),
            ("availability", ms.availability.to_string()),
            ("fuel_economy", ms.fuel_economy.to_string()),
            ("speed", ms.speed.to_string()),
            ("capacity", ms.capacity.to_string()),
            ("load_time", ms.load_time.to_string()),
            ("fuel_price", ms.fuel_price.to_string()),
            ("wage", ms.wage.to_string()),
            ("loss_rate", ms.loss_rate.to_string()),
            ("emission", ms.emission.to_string()),
        ];
        for (name, value) in fields {
            if !overridden.contains(&(r, name)) {
                prov.push(format!("transport.{}.{name} defaulted to {value}", ms.mode.label()));
            }
        }
    }

    // Economics.
    let ec = file.economics.clone().unwrap_or_default();
    let max_supply = supply_nodes
        .iter()
        .flat_map(|s| s.capacity.iter().copied())
        .fold(0.0f64, f64::max);
    let default_big_m = (10.0 * max_supply).max(1.0);
    let econ = EconParams {
        discount_beta: take(&mut prov, "economics.discount_beta", ec.discount_beta, Defaults::DISCOUNT_BETA),
        pipeline_capital: take(
            &mut prov,
            "economics.pipeline_capital",
            ec.pipeline_capital,
            1_735_904.0,
        ),
        pipeline_maint: take(&mut prov, "economics.pipeline_maint", ec.pipeline_maint, Defaults::PIPELINE_MAINT),
        penalty_loss: take(&mut prov, "economics.penalty_loss", ec.penalty_loss, Defaults::PENALTY_LOSS),
        penalty_co2: take(&mut prov, "economics.penalty_co2", ec.penalty_co2, Defaults::PENALTY_CO2),
        penalty_imbalance: take(
            &mut prov,
            "economics.penalty_imbalance",
            ec.penalty_imbalance,
            Defaults::PENALTY_IMBALANCE,
        ),
        big_m: take(&mut prov, "economics.big_m", ec.big_m, default_big_m),
        nh_max: take(&mut prov, "economics.nh_max", ec.nh_max, Defaults::NH_MAX),
        nh_gap: take(&mut prov, "economics.nh_gap", ec.nh_gap, Defaults::NH_GAP),
        f_base_max: take(&mut prov, "economics.f_base_max", ec.f_base_max, Defaults::F_BASE_MAX),
        l_base: take(&mut prov, "economics.l_base", ec.l_base, Defaults::L_BASE),
        emission_ceiling: match ec.emission_ceiling {
            Some(v) => v,
            None => {
                prov.push("economics.emission_ceiling defaulted to unbounded".to_string());
                Vec::new()
            }
        },
    };

    let fo = file.formulation.clone().unwrap_or_default();
    let formulation = FormulationOptions {
        literal_trip_time: take(
            &mut prov,
            "formulation.literal_trip_time",
            fo.literal_trip_time,
            false,
        ),
        carbon_by_flow: take(&mut prov, "formulation.carbon_by_flow", fo.carbon_by_flow, false),
    };

    let sv = file.solver.clone().unwrap_or_default();
    let base = MilpOptions::default();
    let options = MilpOptions {
        integer_tolerance: sv.integer_tolerance.unwrap_or(base.integer_tolerance),
        relative_gap: sv.relative_gap.unwrap_or(base.relative_gap),
        node_limit: sv.node_limit,
        time_limit: sv.time_limit_secs.map(Duration::from_secs_f64),
        dinkelbach_tolerance: sv.dinkelbach_tolerance.unwrap_or(base.dinkelbach_tolerance),
        dinkelbach_max_iters: sv.dinkelbach_max_iters.unwrap_or(base.dinkelbach_max_iters),
    };

    // Hubs.
    let hub_section = file.hubs.clone();
    let seed = hub_section.as_ref().and_then(|h| h.seed).unwrap_or(DEFAULT_SEED);
    let (hub_nodes, hub_assignment) = match (file.mode, hub_section) {
        (PlanningMode::Direct, None) => (None, None),
        (PlanningMode::Direct, Some(_)) => {
            issues.push("hubs: only meaningful in hub mode".to_string());
            (None, None)
        }
        (PlanningMode::Hub, None) => {
            issues.push("hubs: hub mode requires a hubs section".to_string());
            (None, None)
        }
        (PlanningMode::Hub, Some(h)) => match (h.hubs, h.count) {
            (Some(entries), _) => {
                let mut nodes = Vec::new();
                for (k, e) in entries.iter().enumerate() {
                    match GeoPoint::new(e.lat, e.lon) {
                        Ok(p) => nodes.push(HubNode {
                            id: NodeId::hub(k),
                            name: e.name.clone(),
                            location: p,
                        }),
                        Err(err) => issues.push(format!("hubs.hubs[{k}] ({}): {err}", e.name)),
                    }
                }
                match h.assignment {
                    Some(a) => (Some(nodes), Some(a)),
                    None => {
                        issues.push("hubs.assignment: required with explicit hubs".to_string());
                        (Some(nodes), None)
                    }
                }
            }
            (None, Some(count)) => {
                if demand_nodes.is_empty() {
                    issues.push("hubs.count: no demand nodes to cluster".to_string());
                    (None, None)
                } else {
                    let points: Vec<(GeoPoint, f64)> = demand_nodes
                        .iter()
                        .map(|d| (d.location, d.demand.iter().sum::<f64>().max(1.0)))
                        .collect();
                    match kmeans_hubs(&points, count, seed, 200) {
                        Ok(result) => {
                            prov.push(format!(
                                "hubs placed by weighted clustering (k = {count}, seed = {seed})"
                            ));
                            let nodes: Vec<HubNode> = result
                                .centroids
                                .iter()
                                .enumerate()
                                .map(|(k, &c)| HubNode {
                                    id: NodeId::hub(k),
                                    name: format!("hub{k}"),
                                    location: c,
                                })
                                .collect();
                            let assignment: BTreeMap<usize, usize> =
                                result.assignment.iter().enumerate().map(|(j, &k)| (j, k)).collect();
                            (Some(nodes), Some(assignment))
                        }
                        Err(e) => {
                            issues.push(format!("hubs.count: clustering failed: {e}"));
                            (None, None)
                        }
                    }
                }
            }
            (None, None) => {
                issues.push("hubs: give either count or explicit hubs".to_string());
                (None, None)
            }
        },
    };

    if !issues.is_empty() {
        return Err(ScenarioError::Validation(issues));
    }

    let spec = ScenarioSpec {
        name: file.name,
        mode: file.mode,
        horizon: Horizon::new(start_year, periods)?,
        supply_nodes,
        demand_nodes,
        hub_nodes,
        hub_assignment,
        mode_specs,
        econ,
        formulation,
    };
    spec.validate().map_err(|e| ScenarioError::Validation(vec![e.to_string()]))?;
    Ok(ResolvedScenario {
        spec,
        options,
        seed,
        provenance: prov,
    })
}

// ---------------------------------------------------------------------
// Builtin scenarios
// ---------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct TexasData {
    supply_counties: Vec<TexasSupply>,
    proximal_demand_counties: Vec<TexasCounty>,
    distant_demand_counties: Vec<TexasCounty>,
}

#[derive(Debug, Deserialize)]
struct TexasSupply {
    name: String,
    lat: f64,
    lon: f64,
    share: f64,
}

#[derive(Debug, Deserialize)]
struct TexasCounty {
    name: String,
    lat: f64,
    lon: f64,
    population: f64,
}

/// The unresolved input file behind a builtin case study. Exposed so
/// callers can tweak fields (for example shorten the horizon) before
/// resolving.
pub fn builtin_scenario_file(id: ScenarioId) -> Result<ScenarioFile, ScenarioError> {
    let data: TexasData =
        serde_json::from_str(TEXAS_DATA).map_err(|e| ScenarioError::Parse(format!("builtin data: {e}")))?;
    let counties = match id {
        ScenarioId::S1 | ScenarioId::S4 | ScenarioId::S5 => &data.proximal_demand_counties,
        ScenarioId::S2 | ScenarioId::S3 => &data.distant_demand_counties,
    };
    let demand_scale = if id == ScenarioId::S2 {
        Defaults::LOW_DEMAND_SCALE
    } else {
        Defaults::DEMAND_SCALE
    };
    let nh_gap = if id == ScenarioId::S4 { 2 } else { Defaults::NH_GAP };
    let mode = if id == ScenarioId::S5 {
        PlanningMode::Hub
    } else {
        PlanningMode::Direct
    };
    let file = ScenarioFile {
        schema_version: SCHEMA_VERSION,
        name: id.to_string(),
        mode,
        horizon: HorizonSection {
            start_year: 2025,
            periods: 26,
        },
        supply: data
            .supply_counties
            .iter()
            .map(|s| SupplyEntry {
                name: s.name.clone(),
                lat: s.lat,
                lon: s.lon,
                capacity: None,
                share: Some(s.share),
            })
            .collect(),
        demand: counties
            .iter()
            .map(|c| DemandEntry {
                name: c.name.clone(),
                lat: c.lat,
                lon: c.lon,
                demand: None,
                population: Some(c.population),
            })
            .collect(),
        forecast: Some(ForecastSection {
            growth_rate: None,
            share_anchors: None,
            headroom: None,
            demand_scale: Some(demand_scale),
        }),
        hubs: if mode == PlanningMode::Hub {
            Some(HubSection {
                count: Some(3),
                seed: Some(DEFAULT_SEED),
                hubs: None,
                assignment: None,
            })
        } else {
            None
        },
        transport: None,
        economics: Some(EconSection {
            nh_gap: Some(nh_gap),
            ..EconSection::default()
        }),
        formulation: None,
        solver: None,
    };
    Ok(file)
}

/// Construct one of the five Texas case studies.
///
/// S1, S4 and S5 serve the metropolitan county set; S2 and S3 the
/// distant set. S2 runs at the low demand level, S4 with a two-year
/// pipeline lead time and S5 in hub mode with three hubs.
pub fn builtin_scenario(id: ScenarioId) -> Result<ResolvedScenario, ScenarioError> {
    let file = builtin_scenario_file(id)?;
    let mut resolved = resolve(file)?;
    if id == ScenarioId::S2 {
        resolved
            .provenance
            .push("low demand level set to 0.25 of the high level (ratio not published)".to_string());
    }
    Ok(resolved)
}

// ---------------------------------------------------------------------
// Running and persistence
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub nodes: usize,
    pub wall_time_secs: f64,
    pub dinkelbach_iterations: usize,
    pub converged: bool,
}

/// Everything a finished (or failed) run records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub fingerprint: String,
    pub scenario_name: String,
    /// optimal | node_limit | time_limit | infeasible | degenerate_denominator
    pub status: String,
    pub solution: Option<PlanSolution>,
    pub cost_breakdown: Option<CostBreakdown>,
    pub lch2: Option<f64>,
    pub total_cost: Option<f64>,
    pub total_delivered: Option<f64>,
    pub metrics: Option<MetricsBundle>,
    pub solver: SolverStats,
    pub provenance: Vec<String>,
    pub diagnostics: Vec<String>,
    pub warnings: Vec<String>,
    /// True when the result was read back from an existing run directory.
    #[serde(default)]
    pub reused: bool,
}

/// Content hash over everything that can change the outcome.
pub fn fingerprint(resolved: &ResolvedScenario) -> String {
    let payload = serde_json::json!({
        "spec": resolved.spec,
        "seed": resolved.seed,
        "solver": {
            "integer_tolerance": resolved.options.integer_tolerance,
            "relative_gap": resolved.options.relative_gap,
            "node_limit": resolved.options.node_limit,
            "time_limit_secs": resolved.options.time_limit.map(|d| d.as_secs_f64()),
            "dinkelbach_tolerance": resolved.options.dinkelbach_tolerance,
            "dinkelbach_max_iters": resolved.options.dinkelbach_max_iters,
        },
    });
    let bytes = serde_json::to_vec(&payload).expect("spec serializes");
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = fmt::Write::write_fmt(&mut out, format_args!("{b:02x}"));
    }
    out
}

/// Constraint families that hold with equality at an LP optimum, or the
/// infeasibility verdict itself.
fn diagnose(model: &h2opt::MilpModel) -> Vec<String> {
    let mut relaxed = model.clone();
    for c in &mut relaxed.columns {
        c.kind = h2opt::VarKind::Continuous;
    }
    match solve_lp(&relaxed) {
        Ok(lp) if lp.status == LpStatus::Optimal => {
            let mut binding: BTreeSet<String> = BTreeSet::new();
            for (i, row) in relaxed.rows.iter().enumerate() {
                let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * lp.x[j]).sum();
                let scale = row.coeffs.iter().map(|&(j, a)| (a * lp.x[j]).abs()).fold(1.0, f64::max);
                if (lhs - row.rhs).abs() <= 1e-7 * scale {
                    binding.insert(row.tag.clone());
                }
                let _ = i;
            }
            binding
                .into_iter()
                .map(|tag| format!("binding at the relaxation: {tag}"))
                .collect()
        }
        Ok(lp) if lp.status == LpStatus::Infeasible => {
            vec!["the continuous relaxation is already infeasible (check supply capacity against demand)".to_string()]
        }
        Ok(lp) => vec![format!("relaxation ended with status {:?}", lp.status)],
        Err(e) => vec![format!("relaxation diagnosis failed: {e}")],
    }
}

/// Execute a resolved scenario end to end. When `runs_root` is given the
/// result is persisted under its fingerprint; an existing directory is
/// reused without re-solving.
pub fn run(resolved: &ResolvedScenario, runs_root: Option<&Path>) -> Result<RunResult, ScenarioError> {
    let fp = fingerprint(resolved);
    if let Some(root) = runs_root {
        let dir = root.join(&fp);
        let result_path = dir.join("result.json");
        if result_path.exists() {
            let text = std::fs::read_to_string(&result_path)?;
            let mut prior: RunResult =
                serde_json::from_str(&text).map_err(|e| ScenarioError::Parse(format!("{}: {e}", result_path.display())))?;
            prior.reused = true;
            return Ok(prior);
        }
    }

    let built = build_model(&resolved.spec)?;
    let mut warnings = built.model.warnings.clone();
    let spec = &resolved.spec;

    let outcome = solve_fractional(&built.model, &resolved.options);
    let result = match outcome {
        Err(SolverError::DegenerateDenominator) => RunResult {
            fingerprint: fp.clone(),
            scenario_name: spec.name.clone(),
            status: "degenerate_denominator".to_string(),
            solution: None,
            cost_breakdown: None,
            lch2: None,
            total_cost: None,
            total_delivered: Some(0.0),
            metrics: None,
            solver: SolverStats {
                nodes: 0,
                wall_time_secs: 0.0,
                dinkelbach_iterations: 0,
                converged: false,
            },
            provenance: resolved.provenance.clone(),
            diagnostics: vec!["no hydrogen can be delivered, the levelized cost is undefined".to_string()],
            warnings,
            reused: false,
        },
        Err(e) => return Err(e.into()),
        Ok(fr) => {
            let stats = SolverStats {
                nodes: fr.milp.nodes,
                wall_time_secs: fr.milp.wall_time.as_secs_f64(),
                dinkelbach_iterations: fr.iterations,
                converged: fr.converged,
            };
            let status = match fr.milp.status {
                MilpStatus::Optimal => "optimal",
                MilpStatus::NodeLimit => "node_limit",
                MilpStatus::TimeLimit => "time_limit",
                MilpStatus::Infeasible => "infeasible",
                MilpStatus::Unbounded => "unbounded",
            }
            .to_string();
            match &fr.milp.x {
                None => RunResult {
                    fingerprint: fp.clone(),
                    scenario_name: spec.name.clone(),
                    status,
                    solution: None,
                    cost_breakdown: None,
                    lch2: None,
                    total_cost: None,
                    total_delivered: None,
                    metrics: None,
                    solver: stats,
                    provenance: resolved.provenance.clone(),
                    diagnostics: diagnose(&built.model),
                    warnings,
                    reused: false,
                },
                Some(raw) => {
                    let sol = extract_solution(&built, spec, raw)?;
                    let violations = check_invariants(&built, &sol);
                    warnings.extend(violations.iter().map(|v| format!("invariant: {v}")));
                    let metrics = report::metrics(spec, &sol)?;
                    let breakdown = metrics.totals;
                    let tc = breakdown.total();
                    // The recomputed component sum must agree with the
                    // solver's own objective.
                    let drift = (tc - sol.objective).abs() / tc.abs().max(1.0);
                    if drift > 1e-6 {
                        warnings.push(format!(
                            "cost breakdown disagrees with the solver objective by {drift:.3e} relative"
                        ));
                    }
                    let lch2 = metrics.lch2;
                    RunResult {
                        fingerprint: fp.clone(),
                        scenario_name: spec.name.clone(),
                        status,
                        lch2,
                        total_cost: Some(tc),
                        total_delivered: Some(sol.total_delivered),
                        cost_breakdown: Some(breakdown),
                        metrics: Some(metrics),
                        solution: Some(sol),
                        solver: stats,
                        provenance: resolved.provenance.clone(),
                        diagnostics: Vec::new(),
                        warnings,
                        reused: false,
                    }
                }
            }
        }
    };

    if let Some(root) = runs_root {
        persist(root, resolved, &result)?;
    }
    Ok(result)
}

/// Write the run directory atomically (stage then rename).
fn persist(root: &Path, resolved: &ResolvedScenario, result: &RunResult) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(root)?;
    let final_dir = root.join(&result.fingerprint);
    if final_dir.exists() {
        return Ok(());
    }
    let stage = root.join(format!(".stage-{}-{}", result.fingerprint, std::process::id()));
    if stage.exists() {
        std::fs::remove_dir_all(&stage)?;
    }
    std::fs::create_dir_all(&stage)?;

    let spec_json = serde_json::to_string_pretty(&resolved.spec).expect("spec serializes");
    std::fs::write(stage.join("resolved_spec.json"), spec_json)?;
    let result_json = serde_json::to_string_pretty(result).expect("result serializes");
    std::fs::write(stage.join("result.json"), result_json)?;

    if let Some(sol) = &result.solution {
        std::fs::write(stage.join("solution.csv"), report::solution_csv(sol))?;
        std::fs::write(stage.join("network.csv"), report::network_csv(&resolved.spec, sol))?;
    }
    if let Some(metrics) = &result.metrics {
        let y0 = resolved.spec.horizon.start_year;
        std::fs::write(stage.join("metrics.csv"), report::costs_csv(metrics, y0))?;
    }
    let mut log = String::new();
    log.push_str(&format!("scenario: {}\n", result.scenario_name));
    log.push_str(&format!("fingerprint: {}\n", result.fingerprint));
    log.push_str(&format!("status: {}\n", result.status));
    log.push_str(&format!(
        "nodes: {}, ratio updates: {}, wall time: {:.3}s\n",
        result.solver.nodes, result.solver.dinkelbach_iterations, result.solver.wall_time_secs
    ));
    for p in &result.provenance {
        log.push_str(&format!("default: {p}\n"));
    }
    for w in &result.warnings {
        log.push_str(&format!("warning: {w}\n"));
    }
    for d in &result.diagnostics {
        log.push_str(&format!("diagnostic: {d}\n"));
    }
    std::fs::write(stage.join("log.txt"), log)?;

    match std::fs::rename(&stage, &final_dir) {
        Ok(()) => Ok(()),
        Err(_) if final_dir.exists() => {
            // Lost a race against a concurrent identical run; theirs wins.
            let _ = std::fs::remove_dir_all(&stage);
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

/// Locate the runs root: explicit flag, else the environment, else
/// `./runs`.
pub fn runs_root(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Ok(v) = std::env::var(RUNS_ENV) {
        if !v.is_empty() {
            return PathBuf::from(v);
        }
    }
    PathBuf::from("runs")
}

// ---------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub fingerprint: String,
    pub status: String,
    pub lch2: Option<f64>,
    pub costs: CostBreakdown,
    pub final_coverage: f64,
    pub final_mode_share: [f64; 4],
    /// Relative difference against the first row, when both are defined.
    pub lch2_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub warnings: Vec<String>,
    /// Last period common to every compared run.
    pub common_final_period: usize,
}

/// Align runs on LCH2, cost components, final-period coverage and mode
/// shares, with deltas against the first entry.
pub fn compare(results: &[RunResult]) -> Result<ComparisonTable, ScenarioError> {
    if results.len() < 2 {
        return Err(ScenarioError::TooFewResults(results.len()));
    }
    let mut warnings = Vec::new();
    let periods: Vec<usize> = results
        .iter()
        .map(|r| r.solution.as_ref().map(|s| s.dims.periods).unwrap_or(0))
        .collect();
    let common = periods.iter().copied().filter(|&p| p > 0).min().unwrap_or(0);
    if periods.iter().any(|&p| p > 0 && p != common) {
        warnings.push(format!(
            "horizons differ; final-period columns use the common period {common}"
        ));
    }
    let final_t = common.saturating_sub(1);

    let base_lch2 = results[0].lch2;
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let (final_coverage, final_mode_share) = match (&r.solution, &r.metrics) {
            (Some(sol), Some(m)) if common > 0 => {
                let coverage = sol.pipelines_at(final_t) as f64 / m.pipelines_required as f64;
                let mut share = [0.0f64; 4];
                for (idx, slot) in share.iter_mut().enumerate() {
                    *slot = sol.flow_by_mode_period(idx, final_t);
                }
                let total: f64 = share.iter().sum();
                if total > 0.0 {
                    for slot in &mut share {
                        *slot /= total;
                    }
                }
                (coverage, share)
            }
            _ => {
                warnings.push(format!("{}: no solution, comparison columns zeroed", r.scenario_name));
                (0.0, [0.0; 4])
            }
        };
        let lch2_delta = match (base_lch2, r.lch2) {
            (Some(base), Some(mine)) if base != 0.0 => Some((mine - base) / base),
            _ => None,
        };
        rows.push(ComparisonRow {
            name: r.scenario_name.clone(),
            fingerprint: r.fingerprint.clone(),
            status: r.status.clone(),
            lch2: r.lch2,
            costs: r.cost_breakdown.unwrap_or_default(),
            final_coverage,
            final_mode_share,
            lch2_delta,
        });
    }
    Ok(ComparisonTable {
        rows,
        warnings,
        common_final_period: final_t,
    })
}

/// CSV form of a comparison table.
pub fn comparison_csv(table: &ComparisonTable) -> String {
    use std::fmt::Write as _;
    let mut out = String::from(
        "name,status,lch2,lch2_delta,pipeline_capital,vehicle_capital,fuel,labor,pipeline_maintenance,hydrogen_loss,carbon,imbalance,final_coverage,share_pipeline,share_tube_trailer,share_liquid_truck,share_lohc_trailer\n",
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in &table.rows {
        let c = &r.costs;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.name,
            r.status,
            opt(r.lch2),
            opt(r.lch2_delta),
            c.c_hc,
            c.c_vc,
            c.c_fo,
            c.c_lo,
            c.c_ho,
            c.c_hl,
            c.c_cl,
            c.c_sl,
            r.final_coverage,
            r.final_mode_share[0],
            r.final_mode_share[1],
            r.final_mode_share[2],
            r.final_mode_share[3]
        );
    }
    out
}
