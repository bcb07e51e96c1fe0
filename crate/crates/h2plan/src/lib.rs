//! Multi-period hydrogen transportation network planning toolkit.
//!
//! The crate models a regional hydrogen supply chain over a multi-year
//! horizon: county-level demand forecasting, optional hub placement by
//! weighted k-means, compilation into a mixed-integer program (direct
//! plant-to-station delivery or two-stage hub routing), solving with the
//! [`h2opt`] LP/MILP engine under a levelized-cost (ratio) objective,
//! and reporting of mode shares, pipeline coverage and cost breakdowns.

pub mod cluster;
pub mod domain;
pub mod forecast;
pub mod model;
pub mod report;
pub mod scenario;
