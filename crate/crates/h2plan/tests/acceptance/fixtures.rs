//! Desk-scale scenario builders shared by the acceptance criteria.

use h2plan::domain::{
    DemandNode, EconParams, FormulationOptions, GeoPoint, Horizon, HubNode, NodeId, PlanningMode,
    ScenarioSpec, SupplyNode, TransportMode, TransportModeSpec,
};
use std::collections::BTreeMap;

pub fn mode_specs() -> Vec<TransportModeSpec> {
    vec![
        TransportModeSpec {
            mode: TransportMode::Pipeline,
            capital_cost: 100.0,
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
            capital_cost: 2_000.0,
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
            capital_cost: 1_700.0,
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
            capital_cost: 900.0,
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

pub fn econ(nh_gap: usize) -> EconParams {
    EconParams {
        discount_beta: 0.066,
        pipeline_capital: 100.0,
        pipeline_maint: 3.0,
        penalty_loss: 10.0,
        penalty_co2: 0.05,
        penalty_imbalance: 100.0,
        big_m: 1e8,
        nh_max: 5,
        nh_gap,
        f_base_max: 5e7,
        l_base: 100.0,
        emission_ceiling: Vec::new(),
    }
}

/// Direct-mode desk instance: plants along one parallel, cities along
/// another, uniform demand and ample supply.
pub fn direct_spec(n_i: usize, n_j: usize, periods: usize, nh_gap: usize) -> ScenarioSpec {
    let supply_nodes = (0..n_i)
        .map(|i| SupplyNode {
            id: NodeId::supply(i),
            name: format!("plant{i}"),
            location: GeoPoint::new(29.0, -95.0 - i as f64).unwrap(),
            capacity: vec![1e8; periods],
        })
        .collect();
    let demand_nodes = (0..n_j)
        .map(|j| DemandNode {
            id: NodeId::demand(j),
            name: format!("city{j}"),
            location: GeoPoint::new(32.0, -96.0 - j as f64).unwrap(),
            demand: vec![1_000.0; periods],
        })
        .collect();
    ScenarioSpec {
        name: "desk-direct".to_string(),
        mode: PlanningMode::Direct,
        horizon: Horizon::new(2025, periods).unwrap(),
        supply_nodes,
        demand_nodes,
        hub_nodes: None,
        hub_assignment: None,
        mode_specs: mode_specs(),
        econ: econ(nh_gap),
        formulation: FormulationOptions::default(),
    }
}

/// Hub-mode variant: hubs between the plants and the cities, round-robin
/// assignment.
pub fn hub_spec(n_i: usize, n_k: usize, n_j: usize, periods: usize, nh_gap: usize) -> ScenarioSpec {
    let mut spec = direct_spec(n_i, n_j, periods, nh_gap);
    spec.name = "desk-hub".to_string();
    spec.mode = PlanningMode::Hub;
    spec.hub_nodes = Some(
        (0..n_k)
            .map(|k| HubNode {
                id: NodeId::hub(k),
                name: format!("hub{k}"),
                location: GeoPoint::new(31.0, -96.0 - k as f64).unwrap(),
            })
            .collect(),
    );
    let assignment: BTreeMap<usize, usize> = (0..n_j).map(|j| (j, j % n_k)).collect();
    spec.hub_assignment = Some(assignment);
    spec
}

/// Geometric demand path `d0 * (1 + g)^t`.
pub fn growth_series(d0: f64, g: f64, periods: usize) -> Vec<f64> {
    (0..periods).map(|t| d0 * (1.0 + g).powi(t as i32)).collect()
}
