//! Core semantic types shared by every module, plus geometry and
//! discounting primitives. Everything here is immutable after
//! construction and safe to share across threads.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("latitude {0} outside [-90, 90]")]
    BadLatitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    BadLongitude(f64),
    #[error("horizon must have at least one period")]
    EmptyHorizon,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Supply,
    Demand,
    Hub,
}

/// Identifier of a network node: kind plus index within the kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub kind: NodeKind,
    pub index: usize,
}

impl NodeId {
    pub fn supply(index: usize) -> Self {
        NodeId { kind: NodeKind::Supply, index }
    }
    pub fn demand(index: usize) -> Self {
        NodeId { kind: NodeKind::Demand, index }
    }
    pub fn hub(index: usize) -> Self {
        NodeId { kind: NodeKind::Hub, index }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            NodeKind::Supply => "S",
            NodeKind::Demand => "D",
            NodeKind::Hub => "H",
        };
        write!(f, "{tag}{}", self.index)
    }
}

/// Geographic coordinate with ranges enforced at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, DomainError> {
        if !(-90.0..=90.0).contains(&lat) || lat.is_nan() {
            return Err(DomainError::BadLatitude(lat));
        }
        if !(-180.0..=180.0).contains(&lon) || lon.is_nan() {
            return Err(DomainError::BadLongitude(lon));
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }
    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Great-circle (haversine) distance in kilometers.
pub fn straight_line_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lon1) = (a.lat.to_radians(), a.lon.to_radians());
    let (lat2, lon2) = (b.lat.to_radians(), b.lon.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().asin()
}

/// Discount factor 1 / (1 + beta)^t.
pub fn present_value_factor(beta: f64, t: usize) -> f64 {
    (1.0 + beta).powi(-(t as i32))
}

/// Planning horizon of annual periods starting at `start_year`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub start_year: i32,
    pub periods: usize,
}

impl Horizon {
    pub fn new(start_year: i32, periods: usize) -> Result<Self, DomainError> {
        if periods == 0 {
            return Err(DomainError::EmptyHorizon);
        }
        Ok(Horizon { start_year, periods })
    }

    pub fn year_of(&self, t: usize) -> i32 {
        self.start_year + t as i32
    }
}

/// The four transport methods, numbered as in the model (pipeline is 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMode {
    Pipeline,
    TubeTrailer,
    LiquidTruck,
    LohcTrailer,
}

impl TransportMode {
    pub const ALL: [TransportMode; 4] = [
        TransportMode::Pipeline,
        TransportMode::TubeTrailer,
        TransportMode::LiquidTruck,
        TransportMode::LohcTrailer,
    ];

    pub const VEHICLES: [TransportMode; 3] = [
        TransportMode::TubeTrailer,
        TransportMode::LiquidTruck,
        TransportMode::LohcTrailer,
    ];

    /// Zero-based index used for variable addressing.
    pub fn index(self) -> usize {
        match self {
            TransportMode::Pipeline => 0,
            TransportMode::TubeTrailer => 1,
            TransportMode::LiquidTruck => 2,
            TransportMode::LohcTrailer => 3,
        }
    }

    pub fn from_index(r: usize) -> Option<TransportMode> {
        TransportMode::ALL.get(r).copied()
    }

    pub fn is_pipeline(self) -> bool {
        self == TransportMode::Pipeline
    }

    pub fn label(self) -> &'static str {
        match self {
            TransportMode::Pipeline => "pipeline",
            TransportMode::TubeTrailer => "tube_trailer",
            TransportMode::LiquidTruck => "liquid_truck",
            TransportMode::LohcTrailer => "lohc_trailer",
        }
    }
}

/// Physical and economic parameters of one transport method.
///
/// For the pipeline entry the vehicle-only fields (availability, fuel
/// economy, speed, load time, fuel price, wage) are ignored; capacity is
/// still used to normalize per-trip hydrogen loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportModeSpec {
    pub mode: TransportMode,
    /// $/vehicle, or $/km for the pipeline entry.
    pub capital_cost: f64,
    /// Years in service before mandatory retirement.
    pub lifespan: usize,
    /// Operating hours per day.
    pub availability: f64,
    /// km per liter of fuel.
    pub fuel_economy: f64,
    /// km/h.
    pub speed: f64,
    /// kg per trip.
    pub capacity: f64,
    /// Loading/unloading hours per trip.
    pub load_time: f64,
    /// $/liter.
    pub fuel_price: f64,
    /// $/hour.
    pub wage: f64,
    /// kg lost per trip-km equivalent.
    pub loss_rate: f64,
    /// kg CO2 per kg H2 transported.
    pub emission: f64,
}

impl TransportModeSpec {
    pub fn validate(&self) -> Result<(), DomainError> {
        let positive: [(&str, f64); 2] = [("capital_cost", self.capital_cost), ("capacity", self.capacity)];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(DomainError::InvalidParameter(format!(
                    "{} {name} must be > 0, got {v}",
                    self.mode.label()
                )));
            }
        }
        if self.lifespan == 0 {
            return Err(DomainError::InvalidParameter(format!(
                "{} lifespan must be >= 1 year",
                self.mode.label()
            )));
        }
        if !self.mode.is_pipeline() {
            let positive = [
                ("availability", self.availability),
                ("fuel_economy", self.fuel_economy),
                ("speed", self.speed),
                ("load_time", self.load_time),
                ("fuel_price", self.fuel_price),
                ("wage", self.wage),
            ];
            for (name, v) in positive {
                if !(v > 0.0) {
                    return Err(DomainError::InvalidParameter(format!(
                        "{} {name} must be > 0, got {v}",
                        self.mode.label()
                    )));
                }
            }
        }
        if self.loss_rate < 0.0 || self.emission < 0.0 {
            return Err(DomainError::InvalidParameter(format!(
                "{} loss_rate and emission must be >= 0",
                self.mode.label()
            )));
        }
        Ok(())
    }
}

/// System-wide economic and policy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconParams {
    /// Annual discount rate.
    pub discount_beta: f64,
    /// Pipeline capital cost, $/km.
    pub pipeline_capital: f64,
    /// Pipeline maintenance, $/km/year.
    pub pipeline_maint: f64,
    /// Penalty per kg of hydrogen lost in transit.
    pub penalty_loss: f64,
    /// Penalty per kg of CO2 emitted.
    pub penalty_co2: f64,
    /// Penalty per kg of supply-demand imbalance.
    pub penalty_imbalance: f64,
    /// Constraint-activation constant linking flows to pipeline binaries.
    pub big_m: f64,
    /// Maximum pipelines started per year, system wide.
    pub nh_max: usize,
    /// Pipeline construction lead time in years (0 = instant repurposing).
    pub nh_gap: usize,
    /// Pipeline base flow limit at the reference length, kg/period.
    pub f_base_max: f64,
    /// Reference length for the pipeline flow cap, km.
    pub l_base: f64,
    /// Optional CO2 ceilings as (demand index, period, kg) triples;
    /// absent entries are unbounded.
    #[serde(default)]
    pub emission_ceiling: Vec<(usize, usize, f64)>,
}

impl EconParams {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.discount_beta < 0.0 {
            return Err(DomainError::InvalidParameter("discount_beta must be >= 0".into()));
        }
        if !(self.f_base_max > 0.0) || !(self.l_base > 0.0) {
            return Err(DomainError::InvalidParameter(
                "f_base_max and l_base must be > 0".into(),
            ));
        }
        if !(self.big_m > 0.0) {
            return Err(DomainError::InvalidParameter("big_m must be > 0".into()));
        }
        if self.pipeline_capital < 0.0
            || self.pipeline_maint < 0.0
            || self.penalty_loss < 0.0
            || self.penalty_co2 < 0.0
            || self.penalty_imbalance < 0.0
        {
            return Err(DomainError::InvalidParameter("cost parameters must be >= 0".into()));
        }
        Ok(())
    }

    pub fn emission_ceiling_for(&self, demand: usize, period: usize) -> Option<f64> {
        self.emission_ceiling
            .iter()
            .find(|&&(j, t, _)| j == demand && t == period)
            .map(|&(_, _, v)| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanningMode {
    /// Plants ship straight to demand nodes over any method.
    Direct,
    /// Two-stage: pipeline-only to hubs, any method hub-to-demand.
    Hub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyNode {
    pub id: NodeId,
    pub name: String,
    pub location: GeoPoint,
    /// Capacity per period, kg.
    pub capacity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandNode {
    pub id: NodeId,
    pub name: String,
    pub location: GeoPoint,
    /// Demand per period, kg.
    pub demand: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubNode {
    pub id: NodeId,
    pub name: String,
    pub location: GeoPoint,
}

/// Knobs resolving ambiguities in the printed formulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormulationOptions {
    /// Use the literal trip-time denominator 2L/(SP + LT) in the vehicle
    /// requirement instead of the round-trip form 2L/SP + LT.
    pub literal_trip_time: bool,
    /// Apportion carbon cost by flow volume instead of the literal
    /// fleet-times-arc-length sum.
    pub carbon_by_flow: bool,
}

impl Default for FormulationOptions {
    fn default() -> Self {
        FormulationOptions {
            literal_trip_time: false,
            carbon_by_flow: false,
        }
    }
}

/// Full immutable description of one planning problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub mode: PlanningMode,
    pub horizon: Horizon,
    pub supply_nodes: Vec<SupplyNode>,
    pub demand_nodes: Vec<DemandNode>,
    pub hub_nodes: Option<Vec<HubNode>>,
    /// Demand index -> hub index, total over all demand nodes in Hub mode.
    pub hub_assignment: Option<BTreeMap<usize, usize>>,
    /// Per-mode parameters, indexed by [`TransportMode::index`].
    pub mode_specs: Vec<TransportModeSpec>,
    pub econ: EconParams,
    #[serde(default)]
    pub formulation: FormulationOptions,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), DomainError> {
        let t = self.horizon.periods;
        if self.mode_specs.len() != 4 {
            return Err(DomainError::InvalidScenario(
                "exactly four transport mode specs required".into(),
            ));
        }
        for (r, spec) in self.mode_specs.iter().enumerate() {
            if spec.mode.index() != r {
                return Err(DomainError::InvalidScenario(format!(
                    "mode spec {r} is out of order ({})",
                    spec.mode.label()
                )));
            }
            spec.validate()?;
        }
        self.econ.validate()?;
        if self.supply_nodes.is_empty() || self.demand_nodes.is_empty() {
            return Err(DomainError::InvalidScenario(
                "at least one supply and one demand node required".into(),
            ));
        }
        let mut max_supply: f64 = 0.0;
        for (i, s) in self.supply_nodes.iter().enumerate() {
            if s.id != NodeId::supply(i) {
                return Err(DomainError::InvalidScenario(format!(
                    "supply node {i} has id {}",
                    s.id
                )));
            }
            if s.capacity.len() != t {
                return Err(DomainError::InvalidScenario(format!(
                    "supply node {} has {} capacity entries, expected {t}",
                    s.name,
                    s.capacity.len()
                )));
            }
            for (period, &q) in s.capacity.iter().enumerate() {
                if !(q >= 0.0) {
                    return Err(DomainError::InvalidScenario(format!(
                        "supply node {} has negative capacity {q} in period {period}",
                        s.name
                    )));
                }
                max_supply = max_supply.max(q);
            }
        }
        for (j, d) in self.demand_nodes.iter().enumerate() {
            if d.id != NodeId::demand(j) {
                return Err(DomainError::InvalidScenario(format!(
                    "demand node {j} has id {}",
                    d.id
                )));
            }
            if d.demand.len() != t {
                return Err(DomainError::InvalidScenario(format!(
                    "demand node {} has {} demand entries, expected {t}",
                    d.name,
                    d.demand.len()
                )));
            }
            for (period, &q) in d.demand.iter().enumerate() {
                if !(q >= 0.0) {
                    return Err(DomainError::InvalidScenario(format!(
                        "demand node {} has negative demand {q} in period {period}",
                        d.name
                    )));
                }
            }
        }
        if self.econ.big_m < max_supply {
            return Err(DomainError::InvalidScenario(format!(
                "big_m {} is smaller than the largest single-period supply capacity {max_supply}",
                self.econ.big_m
            )));
        }
        match self.mode {
            PlanningMode::Direct => {
                if self.hub_nodes.is_some() || self.hub_assignment.is_some() {
                    return Err(DomainError::InvalidScenario(
                        "direct mode must not carry hub nodes or assignments".into(),
                    ));
                }
            }
            PlanningMode::Hub => {
                let hubs = self.hub_nodes.as_ref().ok_or_else(|| {
                    DomainError::InvalidScenario("hub mode requires hub nodes".into())
                })?;
                if hubs.is_empty() {
                    return Err(DomainError::InvalidScenario("hub mode requires at least one hub".into()));
                }
                for (k, h) in hubs.iter().enumerate() {
                    if h.id != NodeId::hub(k) {
                        return Err(DomainError::InvalidScenario(format!(
                            "hub node {k} has id {}",
                            h.id
                        )));
                    }
                }
                let assignment = self.hub_assignment.as_ref().ok_or_else(|| {
                    DomainError::InvalidScenario("hub mode requires a hub assignment".into())
                })?;
                for j in 0..self.demand_nodes.len() {
                    match assignment.get(&j) {
                        None => {
                            return Err(DomainError::InvalidScenario(format!(
                                "demand node {j} has no hub assignment"
                            )))
                        }
                        Some(&k) if k >= hubs.len() => {
                            return Err(DomainError::InvalidScenario(format!(
                                "demand node {j} assigned to unknown hub {k}"
                            )))
                        }
                        _ => {}
                    }
                }
                for &j in assignment.keys() {
                    if j >= self.demand_nodes.len() {
                        return Err(DomainError::InvalidScenario(format!(
                            "assignment references unknown demand node {j}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn mode_spec(&self, mode: TransportMode) -> &TransportModeSpec {
        &self.mode_specs[mode.index()]
    }
}
