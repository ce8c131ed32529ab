//! Server-data preprocessing used by the theoretical pipeline: thinning the
//! server set until every retained point carries a reliable weight, and
//! shrinking the data diameter by translating far-apart components closer.
//!
//! Neither step is part of the practical pipeline; both run under
//! data-point privacy only.

use petgraph::unionfind::UnionFind;
use rand::Rng;

use crate::dp::PrivacyParams;
use crate::error::{Error, Result};
use crate::fed::{AggregationQuery, ClientPartition, FedRun, PrivacyUnit};
use crate::linalg::Projector;
use crate::points::{nearest, sq_dist, CenterSet, Points};

/// Iteration count `max(1, ceil(10 ln(4 ln|Q| / (eps w_min))))`.
pub fn simplify_iterations(server_len: usize, eps: f64, w_min: f64) -> usize {
    let inner = 4.0 * (server_len.max(1) as f64).ln() / (eps * w_min);
    if inner <= 1.0 {
        return 1;
    }
    (10.0 * inner.ln()).ceil().max(1.0) as usize
}

/// Freeze threshold `2 ln(n) / eps`.
pub fn freeze_threshold(n: usize, eps: f64) -> f64 {
    2.0 * (n.max(1) as f64).ln() / eps
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenSet {
    /// Indices of frozen server points, in the order they were frozen.
    pub frozen: Vec<usize>,
    /// Indices still active after the last iteration.
    pub active: Vec<usize>,
    pub iterations: usize,
    /// Epsilon spent per iteration.
    pub round_budget: f64,
    /// Active-set size at the start of every iteration.
    pub active_history: Vec<usize>,
}

impl FrozenSet {
    pub fn points(&self, server: &Points) -> Points {
        server.select(&self.frozen)
    }
}

/// Repeatedly queries noisy nearest-point weights over `F ∪ Q_t` in projected
/// space; active points heavier than `2 ln(n)/eps` are frozen and the light
/// active points are subsampled at rate 1/2. Each iteration is one round
/// spending `eps / T` with Laplace scale `T / eps`.
pub fn simplify_server_data(
    run: &mut FedRun,
    server: &Points,
    partition: &ClientPartition,
    projector: &Projector,
    eps: f64,
    n: usize,
    w_min: f64,
) -> Result<FrozenSet> {
    if server.is_empty() {
        return Err(Error::Empty("server data"));
    }
    let iterations = simplify_iterations(server.len(), eps, w_min);
    let round_eps = eps / iterations as f64;
    let threshold = freeze_threshold(n, eps);
    let projected = projector.project(server)?;
    let mut frozen: Vec<usize> = Vec::new();
    let mut active: Vec<usize> = (0..server.len()).collect();
    let mut history = Vec::with_capacity(iterations);
    for t in 0..iterations {
        history.push(active.len());
        // frozen points come first so they win ties
        let candidates: Vec<usize> = frozen.iter().chain(&active).copied().collect();
        let cand_points = projected.select(&candidates);
        let label = format!("simplify/{t}");
        let q = AggregationQuery::laplace(label.clone(), candidates.len(), round_eps, 1.0)?;
        run.register(label, q.budget)?;
        let weights = run
            .secure_aggregate(partition, PrivacyUnit::DataPoint, &[q], |c| {
                let mut w = vec![0.0; candidates.len()];
                let mut buf = vec![0.0; c.dim()];
                for p in c.rows() {
                    projector.apply_into(p, &mut buf);
                    if !cand_points.is_empty() {
                        w[nearest(&buf, &cand_points).0] += 1.0;
                    }
                }
                vec![w]
            })?
            .remove(0);
        let mut rng = run.seed().child("simplify/subsample").index(t as u64).rng();
        let mut next = Vec::new();
        for (pos, &idx) in candidates.iter().enumerate().skip(frozen.len()) {
            if weights[pos] > threshold {
                frozen.push(idx);
            } else if rng.random::<bool>() {
                next.push(idx);
            }
        }
        active = next;
    }
    Ok(FrozenSet { frozen, active, iterations, round_budget: round_eps, active_history: history })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiameterParams {
    /// Edge length of the threshold graph.
    pub distance: f64,
    /// A server point with at least this many server points within
    /// `distance` is frozen and never pruned.
    pub freeze_count: f64,
    /// Non-frozen points whose noisy ball count falls below this are pruned.
    pub prune_threshold: f64,
}

impl DiameterParams {
    /// `D = 4 ln(n) sqrt(d) sigma_max`, freeze count `eps n w_min / (200 ln|Q|)`,
    /// prune threshold `n w_min / 3`.
    pub fn from_model(n: usize, d: usize, server_len: usize, eps: f64, sigma_max: f64, w_min: f64) -> Self {
        let ln_n = (n.max(2) as f64).ln();
        let ln_q = (server_len.max(2) as f64).ln();
        Self {
            distance: 4.0 * ln_n * (d as f64).sqrt() * sigma_max,
            freeze_count: eps * n as f64 * w_min / (200.0 * ln_q),
            prune_threshold: n as f64 * w_min / 3.0,
        }
    }
}

/// Threshold graph on surviving server points with per-component translations.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentGraph {
    /// Surviving server indices, ascending.
    pub survivors: Vec<usize>,
    /// Component id of each survivor.
    pub component_of: Vec<usize>,
    /// Translation added to every point of each component.
    pub offsets: Vec<Vec<f64>>,
    /// Largest component diameter (at least the edge length).
    pub d_prime: f64,
    /// Edges `(i, j)` between survivor positions with length `<= distance`.
    pub edges: Vec<(usize, usize)>,
}

impl ComponentGraph {
    pub fn num_components(&self) -> usize {
        self.offsets.len()
    }

    /// Maps a translated point of component `c` back to original coordinates.
    pub fn map_back(&self, p: &[f64], c: usize) -> Vec<f64> {
        p.iter().zip(&self.offsets[c]).map(|(x, o)| x - o).collect()
    }

    /// Maps centers found in translated space back, each by the component of
    /// its nearest translated survivor.
    pub fn map_centers_back(&self, centers: &CenterSet, translated_server: &Points) -> Result<CenterSet> {
        let mut out = Points::with_capacity(centers.dim(), centers.k());
        for c in centers.iter() {
            let s = nearest(c, translated_server).0;
            out.push(&self.map_back(c, self.component_of[s]))?;
        }
        CenterSet::new(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiameterReduction {
    pub graph: ComponentGraph,
    /// Surviving server points after translation.
    pub server: Points,
    /// Client points translated with the component of their nearest survivor.
    pub partition: ClientPartition,
    pub frozen: Vec<bool>,
}

fn translate(p: &[f64], o: &[f64]) -> Vec<f64> {
    p.iter().zip(o).map(|(x, y)| x + y).collect()
}

/// One round of noisy nearest-server-point counts (`Lap(1/eps)`), pruning of
/// light non-frozen server points, and translation of each connected
/// component of the `<= D` graph so its representative sits at
/// `(100 D' i, 0, ..., 0)`.
pub fn reduce_diameter(
    run: &mut FedRun,
    server: &Points,
    partition: &ClientPartition,
    eps: f64,
    params: &DiameterParams,
) -> Result<DiameterReduction> {
    if !(params.distance > 0.0) {
        return Err(Error::InvalidArgument("distance must be positive".into()));
    }
    if server.is_empty() {
        return Err(Error::Empty("server data"));
    }
    let d2 = params.distance * params.distance;
    let within = |a: &[f64], b: &[f64]| sq_dist(a, b) <= d2;
    let frozen: Vec<bool> = server
        .rows()
        .map(|q| server.rows().filter(|r| within(q, r)).count() as f64 >= params.freeze_count)
        .collect();

    let q = AggregationQuery::laplace("diameter/weights", server.len(), eps, 1.0)?;
    run.register("diameter/weights", PrivacyParams::pure(eps)?)?;
    let weights = run
        .secure_aggregate(partition, PrivacyUnit::DataPoint, &[q], |c| {
            let mut w = vec![0.0; server.len()];
            for p in c.rows() {
                w[nearest(p, server).0] += 1.0;
            }
            vec![w]
        })?
        .remove(0);

    let survivors: Vec<usize> = (0..server.len())
        .filter(|&i| {
            frozen[i] || {
                let ball: f64 = (0..server.len()).filter(|&j| within(server.row(i), server.row(j))).map(|j| weights[j]).sum();
                ball >= params.prune_threshold
            }
        })
        .collect();
    if survivors.is_empty() {
        return Err(Error::Empty("surviving server points"));
    }

    let s = survivors.len();
    let mut uf = UnionFind::<usize>::new(s);
    let mut edges = Vec::new();
    for a in 0..s {
        for b in (a + 1)..s {
            if within(server.row(survivors[a]), server.row(survivors[b])) {
                uf.union(a, b);
                edges.push((a, b));
            }
        }
    }
    // components numbered by their lowest survivor position, which is also the representative
    let mut comp_id = vec![usize::MAX; s];
    let mut reps = Vec::new();
    let labels = uf.into_labeling();
    let mut root_to_comp = std::collections::HashMap::new();
    for a in 0..s {
        let id = *root_to_comp.entry(labels[a]).or_insert_with(|| {
            reps.push(a);
            reps.len() - 1
        });
        comp_id[a] = id;
    }
    let mut d_prime = params.distance;
    for a in 0..s {
        for b in (a + 1)..s {
            if comp_id[a] == comp_id[b] {
                d_prime = d_prime.max(sq_dist(server.row(survivors[a]), server.row(survivors[b])).sqrt());
            }
        }
    }
    let dim = server.dim();
    let offsets: Vec<Vec<f64>> = reps
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let mut target = vec![0.0; dim];
            target[0] = 100.0 * d_prime * i as f64;
            target.iter().zip(server.row(survivors[a])).map(|(t, r)| t - r).collect()
        })
        .collect();

    let surv_points = server.select(&survivors);
    let mut moved_server = Points::with_capacity(dim, s);
    for a in 0..s {
        moved_server.push(&translate(surv_points.row(a), &offsets[comp_id[a]]))?;
    }
    let clients = partition
        .clients()
        .iter()
        .map(|c| c.map_rows(dim, |p, out| out.copy_from_slice(&translate(p, &offsets[comp_id[nearest(p, &surv_points).0]]))))
        .collect();

    Ok(DiameterReduction {
        graph: ComponentGraph { survivors, component_of: comp_id, offsets, d_prime, edges },
        server: moved_server,
        partition: ClientPartition::new(clients)?,
        frozen,
    })
}
