//! Hub placement by demand-weighted k-means over demand coordinates.
//!
//! Coordinates are treated as planar (lat, lon) pairs for centroid
//! arithmetic; at state scale the distortion is negligible. Arc lengths
//! fed to the optimization model still use great-circle distances.

use crate::domain::{DomainError, GeoPoint, NodeId};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("k = {k} exceeds the number of distinct points {distinct}")]
    TooManyClusters { k: usize, distinct: usize },
    #[error("k must be >= 1")]
    ZeroClusters,
    #[error("all point weights are zero")]
    AllZeroWeights,
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("{0}")]
    Domain(#[from] DomainError),
    #[error("hub id list has length {given}, expected {expected}")]
    HubCountMismatch { given: usize, expected: usize },
    #[error("inertia increased from {from} to {to} during iteration")]
    InertiaIncreased { from: f64, to: f64 },
}

/// Outcome of one clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub centroids: Vec<GeoPoint>,
    /// Hub index per input point, in input order.
    pub assignment: Vec<usize>,
    /// Weighted sum of squared planar distances to assigned centroids.
    pub inertia: f64,
}

fn sq_dist(p: (f64, f64), q: (f64, f64)) -> f64 {
    let dx = p.0 - q.0;
    let dy = p.1 - q.1;
    dx * dx + dy * dy
}

/// Lloyd's algorithm with k-means++ seeding, deterministic for a given
/// seed. Weights of zero are allowed as long as some weight is positive.
pub fn kmeans_hubs(
    points: &[(GeoPoint, f64)],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusteringResult, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    for &(_, w) in points {
        if w < 0.0 {
            return Err(ClusterError::NegativeWeight(w));
        }
    }
    if points.iter().all(|&(_, w)| w == 0.0) {
        return Err(ClusterError::AllZeroWeights);
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|(p, _)| (p.lat(), p.lon())).collect();
    let w: Vec<f64> = points.iter().map(|&(_, w)| w).collect();
    let mut distinct: Vec<(f64, f64)> = xy.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if k > distinct.len() {
        return Err(ClusterError::TooManyClusters {
            k,
            distinct: distinct.len(),
        });
    }

    // k-means++ seeding: first centroid weighted by demand, the rest by
    // weight times squared distance to the nearest chosen centroid.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<(f64, f64)> = Vec::with_capacity(k);
    let total_w: f64 = w.iter().sum();
    let pick = |rng: &mut ChaCha8Rng, scores: &[f64]| -> usize {
        let total: f64 = scores.iter().sum();
        if total <= 0.0 {
            // Degenerate scores: first point not yet chosen.
            return scores.iter().position(|&s| s >= 0.0).unwrap_or(0);
        }
        let mut target = rng.random_range(0.0..total);
        for (i, &s) in scores.iter().enumerate() {
            target -= s;
            if target <= 0.0 {
                return i;
            }
        }
        scores.len() - 1
    };
    let first = pick(&mut rng, &w);
    let _ = total_w;
    centroids.push(xy[first]);
    while centroids.len() < k {
        let scores: Vec<f64> = xy
            .iter()
            .zip(&w)
            .map(|(&p, &wi)| {
                let d2 = centroids.iter().map(|&c| sq_dist(p, c)).fold(f64::INFINITY, f64::min);
                wi * d2
            })
            .collect();
        let next = if scores.iter().sum::<f64>() > 0.0 {
            pick(&mut rng, &scores)
        } else {
            // All mass sits on the chosen centroids; take the first point
            // not already a centroid so clusters stay distinct.
            xy.iter()
                .position(|p| !centroids.contains(p))
                .expect("k <= distinct points")
        };
        centroids.push(xy[next]);
    }

    let assign = |centroids: &[(f64, f64)]| -> Vec<usize> {
        xy.iter()
            .map(|&p| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (c, &cent) in centroids.iter().enumerate() {
                    let d = sq_dist(p, cent);
                    if d < best_d - 1e-15 {
                        best_d = d;
                        best = c;
                    }
                }
                best
            })
            .collect()
    };
    let inertia_of = |centroids: &[(f64, f64)], assignment: &[usize]| -> f64 {
        xy.iter()
            .zip(&w)
            .zip(assignment)
            .map(|((&p, &wi), &c)| wi * sq_dist(p, centroids[c]))
            .sum()
    };

    let mut assignment = assign(&centroids);
    let mut inertia = inertia_of(&centroids, &assignment);
    for _ in 0..max_iters {
        // Weighted centroid update.
        let mut sums = vec![(0.0f64, 0.0f64, 0.0f64); k];
        for ((&p, &wi), &c) in xy.iter().zip(&w).zip(&assignment) {
            sums[c].0 += wi * p.0;
            sums[c].1 += wi * p.1;
            sums[c].2 += wi;
        }
        for (c, &(sx, sy, sw)) in sums.iter().enumerate() {
            if sw > 0.0 {
                centroids[c] = (sx / sw, sy / sw);
            } else {
                // Empty (or zero-weight) cluster: reseed at the point
                // carrying the largest weighted distance to its centroid.
                let far = xy
                    .iter()
                    .zip(&w)
                    .zip(&assignment)
                    .enumerate()
                    .max_by(|(_, ((pa, wa), &ca)), (_, ((pb, wb), &cb))| {
                        let da = *wa * sq_dist(**pa, centroids[ca]);
                        let db = *wb * sq_dist(**pb, centroids[cb]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                centroids[c] = xy[far];
            }
        }
        let new_assignment = assign(&centroids);
        let new_inertia = inertia_of(&centroids, &new_assignment);
        if new_inertia > inertia + 1e-9 * (1.0 + inertia) {
            return Err(ClusterError::InertiaIncreased {
                from: inertia,
                to: new_inertia,
            });
        }
        let stable = new_assignment == assignment;
        assignment = new_assignment;
        inertia = new_inertia;
        if stable {
            break;
        }
    }

    let centroids = centroids
        .into_iter()
        .map(|(lat, lon)| GeoPoint::new(lat.clamp(-90.0, 90.0), lon.clamp(-180.0, 180.0)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClusteringResult {
        centroids,
        assignment,
        inertia,
    })
}

/// Relabel a clustering into a demand-node -> hub-node map.
pub fn assignment_to_cj(
    result: &ClusteringResult,
    demand_ids: &[NodeId],
    hub_ids: &[NodeId],
) -> Result<BTreeMap<NodeId, NodeId>, ClusterError> {
    if hub_ids.len() != result.centroids.len() {
        return Err(ClusterError::HubCountMismatch {
            given: hub_ids.len(),
            expected: result.centroids.len(),
        });
    }
    if demand_ids.len() != result.assignment.len() {
        return Err(ClusterError::HubCountMismatch {
            given: demand_ids.len(),
            expected: result.assignment.len(),
        });
    }
    Ok(demand_ids
        .iter()
        .zip(&result.assignment)
        .map(|(&j, &c)| (j, hub_ids[c]))
        .collect())
}
