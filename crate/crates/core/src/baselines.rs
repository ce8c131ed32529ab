//! Comparison initializations and the non-private references.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fed::ClientPartition;
use crate::kmeans::{kmeans_cost, weighted_kmeans, weighted_kmeans_pp_seed, weighted_lloyd, KMeansParams, LloydParams};
use crate::points::{sq_dist, CenterSet, Points, WeightedPoints};
use crate::rng::SeedStream;

/// k-means++ seeding on the server data, no refinement.
pub fn server_kmeanspp<R: Rng + ?Sized>(server: &Points, k: usize, rng: &mut R) -> Result<CenterSet> {
    if server.is_empty() {
        return Err(Error::Empty("server data"));
    }
    weighted_kmeans_pp_seed(&WeightedPoints::unit(server.clone()), k, rng)
}

/// k-means++ seeding followed by Lloyd to convergence on the server data.
pub fn server_lloyds<R: Rng + ?Sized>(server: &Points, k: usize, rng: &mut R) -> Result<CenterSet> {
    let seed = server_kmeanspp(server, k, rng)?;
    Ok(weighted_lloyd(&WeightedPoints::unit(server.clone()), &seed, LloydParams::default())?.centers)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePackingParams {
    /// Half-width of the sampling cube `[-delta, delta]^d`.
    pub delta_est: f64,
    pub attempts_per_center: usize,
    pub binary_search_iters: usize,
}

impl SpherePackingParams {
    pub fn new(delta_est: f64) -> Self {
        Self { delta_est, attempts_per_center: 1000, binary_search_iters: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpherePacking {
    pub centers: CenterSet,
    /// Packing radius: centers are `2a` apart and `a` from every cube corner.
    pub radius: f64,
}

/// Euclidean distance from `x` to the nearest corner of `[-delta, delta]^d`.
pub fn corner_distance(x: &[f64], delta: f64) -> f64 {
    x.iter().map(|v| (delta - v.abs()) * (delta - v.abs())).sum::<f64>().sqrt()
}

pub fn pairwise_distance(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn try_pack<R: Rng + ?Sized>(a: f64, k: usize, d: usize, p: &SpherePackingParams, rng: &mut R) -> Option<Points> {
    let delta = p.delta_est;
    let mut centers = Points::with_capacity(d, k);
    let mut x = vec![0.0; d];
    for _ in 0..k {
        let mut placed = false;
        for _ in 0..p.attempts_per_center {
            for v in x.iter_mut() {
                *v = rng.random_range(-delta..=delta);
            }
            if corner_distance(&x, delta) >= a && centers.rows().all(|c| pairwise_distance(&x, c) >= 2.0 * a) {
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
        centers.push(&x).expect("dimension fixed");
    }
    Some(centers)
}

/// Data-independent centers in `[-delta, delta]^d` with the largest packing
/// radius `a` found by binary search over `(0, delta * sqrt(d)]`.
pub fn sphere_packing_init<R: Rng + ?Sized>(params: &SpherePackingParams, k: usize, d: usize, rng: &mut R) -> Result<SpherePacking> {
    if !(params.delta_est > 0.0) || k == 0 || d == 0 {
        return Err(Error::InvalidArgument("sphere packing needs delta > 0, k > 0, d > 0".into()));
    }
    let (mut lo, mut hi) = (0.0, params.delta_est * (d as f64).sqrt());
    let mut best = try_pack(0.0, k, d, params, rng).expect("radius zero is always feasible");
    for _ in 0..params.binary_search_iters {
        let mid = 0.5 * (lo + hi);
        match try_pack(mid, k, d, params, rng) {
            Some(c) => {
                lo = mid;
                best = c;
            }
            None => hi = mid,
        }
    }
    Ok(SpherePacking { centers: CenterSet::new(best)?, radius: lo })
}

/// A client's local centers and cluster sizes; `None` for an empty client.
type LocalSummary = Option<(CenterSet, Vec<f64>)>;

/// One-shot federated k-means: each client clusters locally into `k_local`
/// centers (capped at its size), the server clusters the pooled centers
/// weighted by local cluster sizes. Not private.
pub fn kfed(partition: &ClientPartition, k: usize, k_local: usize, seed: SeedStream) -> Result<CenterSet> {
    let local_params = KMeansParams { restarts: 3, ..KMeansParams::default() };
    let locals: Vec<Result<LocalSummary>> = partition
        .clients()
        .par_iter()
        .enumerate()
        .map(|(j, c)| {
            if c.is_empty() {
                return Ok(None);
            }
            let kl = k_local.min(c.len()).max(1);
            let data = WeightedPoints::unit(c.clone());
            let (centers, _) = weighted_kmeans(&data, kl, local_params, seed.child("client").index(j as u64))?;
            let mut sizes = vec![0.0; kl];
            for p in c.rows() {
                sizes[crate::points::nearest(p, centers.points()).0] += 1.0;
            }
            Ok(Some((centers, sizes)))
        })
        .collect();
    let mut pooled = Points::empty(partition.dim());
    let mut weights = Vec::new();
    for l in locals {
        if let Some((c, w)) = l? {
            pooled.extend(c.points())?;
            weights.extend(w);
        }
    }
    if pooled.is_empty() {
        return Err(Error::Empty("client data"));
    }
    let (centers, _) = weighted_kmeans(&WeightedPoints::new(pooled, weights)?, k, KMeansParams::default(), seed.child("server"))?;
    Ok(centers)
}

pub const OPTIMAL_RESTARTS: usize = 25;

/// Centralized non-private k-means (k-means++ and Lloyd, best of 25 restarts)
/// on all client data. Returns the centers and their unnormalized cost.
pub fn optimal_reference(points: &Points, k: usize, seed: SeedStream) -> Result<(CenterSet, f64)> {
    let params = KMeansParams { restarts: OPTIMAL_RESTARTS, ..KMeansParams::default() };
    let (centers, _) = weighted_kmeans(&WeightedPoints::unit(points.clone()), k, params, seed)?;
    let cost = kmeans_cost(points, &centers)?;
    Ok((centers, cost))
}
