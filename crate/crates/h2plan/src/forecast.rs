//! County-level hydrogen demand projection from population and fuel-cell
//! vehicle adoption, plus proportional supply allocation.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("share table invalid: {0}")]
    BadTable(String),
    #[error("year {year} outside the anchor range [{first}, {last}]")]
    YearOutOfRange { year: f64, first: f64, last: f64 },
    #[error("demand model constant {given} inconsistent with mileage*ratio*efficiency = {expected}")]
    InconsistentConstant { given: f64, expected: f64 },
    #[error("supply proportions sum to {0}, expected 1")]
    BadProportions(f64),
}

/// Piecewise-linear adoption-share forecast anchored at calendar years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcevShareTable {
    /// (year, share) pairs; years strictly increasing, shares in [0, 1]
    /// and non-decreasing.
    pub anchors: Vec<(f64, f64)>,
}

impl FcevShareTable {
    pub fn new(anchors: Vec<(f64, f64)>) -> Result<Self, ForecastError> {
        if anchors.is_empty() {
            return Err(ForecastError::BadTable("no anchors".into()));
        }
        for w in anchors.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(ForecastError::BadTable("years must be strictly increasing".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(ForecastError::BadTable("shares must be non-decreasing".into()));
            }
        }
        for &(_, k) in &anchors {
            if !(0.0..=1.0).contains(&k) {
                return Err(ForecastError::BadTable(format!("share {k} outside [0, 1]")));
            }
        }
        Ok(FcevShareTable { anchors })
    }

    /// Default statewide adoption anchors, 2025-2050.
    pub fn texas_default() -> Self {
        FcevShareTable::new(vec![
            (2025.0, 0.00005),
            (2030.0, 0.024),
            (2035.0, 0.086),
            (2040.0, 0.186),
            (2045.0, 0.324),
            (2050.0, 0.50),
        ])
        .expect("builtin table is valid")
    }
}

/// Share at `year`: exact at anchors, linear in between.
pub fn fcev_share(year: f64, table: &FcevShareTable) -> Result<f64, ForecastError> {
    let first = table.anchors.first().unwrap().0;
    let last = table.anchors.last().unwrap().0;
    if year < first || year > last {
        return Err(ForecastError::YearOutOfRange { year, first, last });
    }
    for w in table.anchors.windows(2) {
        let ((y0, k0), (y1, k1)) = (w[0], w[1]);
        if year <= y1 {
            if year == y0 {
                return Ok(k0);
            }
            return Ok(k0 + (k1 - k0) * (year - y0) / (y1 - y0));
        }
    }
    Ok(table.anchors.last().unwrap().1)
}

/// Fixed driving parameters behind the per-person demand constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandModelParams {
    /// km driven per person per year.
    pub yearly_mileage: f64,
    /// Fraction of the population commuting by fuel-cell vehicle at k = 1.
    pub commuter_ratio: f64,
    /// kg H2 per km.
    pub fcev_efficiency: f64,
    /// kg/year/person at full adoption; must equal the product above.
    pub combined_constant: f64,
}

impl DemandModelParams {
    pub fn texas_default() -> Self {
        DemandModelParams {
            yearly_mileage: 22_954.0,
            commuter_ratio: 0.45,
            fcev_efficiency: 0.01,
            combined_constant: 103.293,
        }
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        let expected = self.yearly_mileage * self.commuter_ratio * self.fcev_efficiency;
        if (expected - self.combined_constant).abs() > 1e-3 {
            return Err(ForecastError::InconsistentConstant {
                given: self.combined_constant,
                expected,
            });
        }
        Ok(())
    }
}

/// Annual hydrogen demand in kg for a county.
pub fn hydrogen_demand(population: f64, k: f64, params: &DemandModelParams) -> f64 {
    population * k * params.combined_constant
}

/// Compound population growth, rounded half-up to whole persons.
pub fn project_population(base: f64, growth_rate: f64, years_ahead: usize) -> f64 {
    (base * (1.0 + growth_rate).powi(years_ahead as i32) + 0.5).floor()
}

/// Split a total demand series across suppliers by fixed proportions with
/// uniform headroom.
pub fn allocate_supply(
    total_demand: &[f64],
    proportions: &BTreeMap<String, f64>,
    headroom: f64,
) -> Result<BTreeMap<String, Vec<f64>>, ForecastError> {
    let sum: f64 = proportions.values().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ForecastError::BadProportions(sum));
    }
    let mut out = BTreeMap::new();
    for (name, &p) in proportions {
        let series: Vec<f64> = total_demand.iter().map(|&d| p * (1.0 + headroom) * d).collect();
        out.insert(name.clone(), series);
    }
    Ok(out)
}
