//! Simulated federation: clients holding partitions, a round counter, and an
//! aggregation channel that sums client statistics in fixed client order and
//! adds mechanism noise once to the aggregate.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::dp::{
    clip_l1, clip_l2, gaussian_sigma, laplace_scale, sample_laplace, symmetric_gaussian_matrix, BudgetLedger,
    Mechanism, NormKind, PrivacyParams, Sensitivity,
};
use crate::error::{Error, Result};
use crate::points::{norm, Points};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrivacyUnit {
    /// Neighbouring datasets differ in one data point.
    DataPoint,
    /// Neighbouring datasets differ in one client's whole contribution.
    Client,
}

/// Client datasets `P^1..P^m`, all in the same ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientPartition {
    clients: Vec<Points>,
}

impl ClientPartition {
    pub fn new(clients: Vec<Points>) -> Result<Self> {
        let first = clients.first().ok_or(Error::Empty("client partition"))?;
        let d = first.dim();
        for c in &clients {
            c.ensure_dim(d)?;
        }
        Ok(Self { clients })
    }

    pub fn single(points: Points) -> Self {
        Self { clients: vec![points] }
    }

    pub fn clients(&self) -> &[Points] {
        &self.clients
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn num_points(&self) -> usize {
        self.clients.iter().map(Points::len).sum()
    }

    pub fn dim(&self) -> usize {
        self.clients[0].dim()
    }

    /// Every client point clipped to L2 norm `bound`.
    pub fn clipped(&self, bound: f64) -> Self {
        let clients = self
            .clients
            .iter()
            .map(|c| c.map_rows(c.dim(), |src, dst| dst.copy_from_slice(&clip_l2(src, bound))))
            .collect();
        Self { clients }
    }

    /// All client points concatenated in client order.
    pub fn union(&self) -> Points {
        let mut out = Points::with_capacity(self.dim(), self.num_points());
        for c in &self.clients {
            out.extend(c).expect("dimensions validated at construction");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// Independent `N(0, sigma^2)` per coordinate.
    Gaussian,
    /// Row-major `dim x dim` symmetric Gaussian matrix.
    SymmetricGaussian { dim: usize },
    /// Independent `Lap(b)` per coordinate.
    Laplace,
    /// Exact aggregate, no budget consumed.
    None,
}

/// One vector-valued sum over clients.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationQuery {
    pub label: String,
    pub len: usize,
    pub kind: NoiseKind,
    /// Per-data-point sensitivity, used under [`PrivacyUnit::DataPoint`].
    pub sensitivity: Sensitivity,
    pub budget: PrivacyParams,
    /// Per-client clip bound, required under [`PrivacyUnit::Client`].
    pub clip_bound: Option<f64>,
}

impl AggregationQuery {
    pub fn gaussian(label: impl Into<String>, len: usize, budget: PrivacyParams, l2: f64) -> Self {
        Self { label: label.into(), len, kind: NoiseKind::Gaussian, sensitivity: Sensitivity::l2(l2), budget, clip_bound: None }
    }

    pub fn symmetric_gaussian(label: impl Into<String>, dim: usize, budget: PrivacyParams, l2: f64) -> Self {
        Self {
            label: label.into(),
            len: dim * dim,
            kind: NoiseKind::SymmetricGaussian { dim },
            sensitivity: Sensitivity::l2(l2),
            budget,
            clip_bound: None,
        }
    }

    pub fn laplace(label: impl Into<String>, len: usize, epsilon: f64, l1: f64) -> Result<Self> {
        Ok(Self {
            label: label.into(),
            len,
            kind: NoiseKind::Laplace,
            sensitivity: Sensitivity::l1(l1),
            budget: PrivacyParams::pure(epsilon)?,
            clip_bound: None,
        })
    }

    /// An exact sum with no noise and no ledger entry.
    pub fn exact(label: impl Into<String>, len: usize) -> Self {
        Self {
            label: label.into(),
            len,
            kind: NoiseKind::None,
            sensitivity: Sensitivity::l2(0.0),
            budget: PrivacyParams { epsilon: f64::INFINITY, delta: 0.0 },
            clip_bound: None,
        }
    }

    pub fn with_clip(mut self, bound: Option<f64>) -> Self {
        self.clip_bound = bound;
        self
    }

    fn clip_norm(&self) -> NormKind {
        match self.kind {
            NoiseKind::Laplace => NormKind::L1,
            _ => NormKind::L2,
        }
    }

    /// The mechanism this query applies under `unit`.
    pub fn mechanism(&self, unit: PrivacyUnit) -> Result<Mechanism> {
        if self.kind == NoiseKind::None {
            return Ok(Mechanism::Disabled);
        }
        let s = match unit {
            PrivacyUnit::DataPoint => self.sensitivity,
            PrivacyUnit::Client => {
                let b = self.clip_bound.ok_or_else(|| Error::MissingClipBound(self.label.clone()))?;
                Sensitivity { value: b, norm: self.clip_norm() }
            }
        };
        Ok(match self.kind {
            NoiseKind::Laplace => Mechanism::Laplace { scale: laplace_scale(self.budget.epsilon, s)? },
            _ => Mechanism::Gaussian { sigma: gaussian_sigma(self.budget, s)? },
        })
    }
}

/// State of one federated run: privacy ledger, communication rounds, noise
/// switch and the seed all mechanism noise is derived from.
#[derive(Debug, Clone)]
pub struct FedRun {
    ledger: BudgetLedger,
    consumed: HashSet<String>,
    rounds: usize,
    noise_enabled: bool,
    seed: SeedStream,
}

impl FedRun {
    pub fn new(seed: SeedStream, noise_enabled: bool) -> Self {
        Self { ledger: BudgetLedger::new(), consumed: HashSet::new(), rounds: 0, noise_enabled, seed }
    }

    /// Records a budget under `label`; queries may only spend registered budgets.
    pub fn register(&mut self, label: impl Into<String>, params: PrivacyParams) -> Result<()> {
        self.ledger.append(label, params)
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    /// Communication rounds completed so far.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn noise_enabled(&self) -> bool {
        self.noise_enabled
    }

    pub fn seed(&self) -> SeedStream {
        self.seed
    }

    /// One communication round: every client evaluates `stat`, which returns
    /// one vector per query; vectors are clipped in client mode, summed in
    /// ascending client order, and each sum receives a single noise draw.
    pub fn secure_aggregate<F>(
        &mut self,
        partition: &ClientPartition,
        unit: PrivacyUnit,
        queries: &[AggregationQuery],
        stat: F,
    ) -> Result<Vec<Vec<f64>>>
    where
        F: Fn(&Points) -> Vec<Vec<f64>> + Sync,
    {
        let mut mechanisms = Vec::with_capacity(queries.len());
        for q in queries {
            if q.kind != NoiseKind::None {
                let entry = self.ledger.get(&q.label).ok_or_else(|| Error::UnregisteredBudget(q.label.clone()))?;
                if entry.params != q.budget || self.consumed.contains(&q.label) {
                    return Err(Error::UnregisteredBudget(q.label.clone()));
                }
            }
            mechanisms.push(q.mechanism(unit)?);
        }

        let per_client: Vec<Vec<Vec<f64>>> = partition
            .clients()
            .par_iter()
            .map(|c| {
                let mut stats = stat(c);
                if unit == PrivacyUnit::Client {
                    for (s, q) in stats.iter_mut().zip(queries) {
                        if let Some(b) = q.clip_bound {
                            *s = match q.clip_norm() {
                                NormKind::L1 => clip_l1(s, b),
                                NormKind::L2 => clip_l2(s, b),
                            };
                        }
                    }
                }
                stats
            })
            .collect();

        let mut out: Vec<Vec<f64>> = Vec::with_capacity(queries.len());
        for (qi, q) in queries.iter().enumerate() {
            let mut clients = per_client.iter();
            let first = clients.next().expect("partition is non-empty");
            let mut acc = first.get(qi).cloned().unwrap_or_default();
            if acc.len() != q.len {
                return Err(Error::DimensionMismatch { expected: q.len, got: acc.len() });
            }
            for c in clients {
                let v = &c[qi];
                if v.len() != q.len {
                    return Err(Error::DimensionMismatch { expected: q.len, got: v.len() });
                }
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
            if self.noise_enabled {
                let mut rng = self.seed.child("round").index(self.rounds as u64).child(&q.label).rng();
                match (q.kind, mechanisms[qi]) {
                    (NoiseKind::SymmetricGaussian { dim }, Mechanism::Gaussian { sigma }) => {
                        let e = symmetric_gaussian_matrix(dim, sigma, &mut rng)?;
                        for (a, x) in acc.iter_mut().zip(&e) {
                            *a += x;
                        }
                    }
                    (NoiseKind::Laplace, Mechanism::Laplace { scale }) => {
                        for a in acc.iter_mut() {
                            *a += sample_laplace(scale, &mut rng);
                        }
                    }
                    (_, m) => m.perturb(&mut acc, &mut rng),
                }
            }
            out.push(acc);
        }
        for q in queries {
            if q.kind != NoiseKind::None {
                self.consumed.insert(q.label.clone());
            }
        }
        self.rounds += 1;
        Ok(out)
    }
}

/// Per-cluster sums and counts of client points under a labelling rule.
///
/// Under data-point privacy clients send raw sums and counts. Under client
/// privacy each client sends its per-cluster local means (zero for empty
/// clusters) and a 0/1 non-empty indicator, so dividing the aggregates gives
/// a mean of client means.
pub fn cluster_statistics<A>(
    run: &mut FedRun,
    partition: &ClientPartition,
    unit: PrivacyUnit,
    k: usize,
    sums: &AggregationQuery,
    counts: &AggregationQuery,
    label_of: A,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    A: Fn(&[f64]) -> usize + Sync,
{
    match unit {
        PrivacyUnit::DataPoint => {
            let mut out = run.secure_aggregate(partition, unit, &[sums.clone(), counts.clone()], |c| {
                let (s, n) = local_sums(c, k, &label_of);
                vec![s, n.into_iter().map(|x| x as f64).collect()]
            })?;
            let n = out.pop().expect("two queries");
            Ok((out.pop().expect("two queries"), n))
        }
        PrivacyUnit::Client => mean_of_means_aggregate(run, partition, unit, k, sums, counts, label_of),
    }
}

fn local_sums<A: Fn(&[f64]) -> usize>(c: &Points, k: usize, label_of: &A) -> (Vec<f64>, Vec<usize>) {
    let d = c.dim();
    let mut s = vec![0.0; k * d];
    let mut n = vec![0usize; k];
    for p in c.rows() {
        let r = label_of(p);
        n[r] += 1;
        for (a, x) in s[r * d..(r + 1) * d].iter_mut().zip(p) {
            *a += x;
        }
    }
    (s, n)
}

/// Client-level pathway: noisy `sum_j u_r^j` and `sum_j c_r^j`, where `u_r^j`
/// is client `j`'s local mean of cluster `r` (zero if empty) and `c_r^j` is 1
/// when that cluster is non-empty on client `j`.
pub fn mean_of_means_aggregate<A>(
    run: &mut FedRun,
    partition: &ClientPartition,
    unit: PrivacyUnit,
    k: usize,
    means: &AggregationQuery,
    hist: &AggregationQuery,
    label_of: A,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    A: Fn(&[f64]) -> usize + Sync,
{
    if unit != PrivacyUnit::Client {
        return Err(Error::RequiresClientUnit);
    }
    let d = partition.dim();
    let mut out = run.secure_aggregate(partition, unit, &[means.clone(), hist.clone()], |c| {
        let (mut s, n) = local_sums(c, k, &label_of);
        for r in 0..k {
            if n[r] > 0 {
                for x in &mut s[r * d..(r + 1) * d] {
                    *x /= n[r] as f64;
                }
            }
        }
        vec![s, n.iter().map(|&x| if x > 0 { 1.0 } else { 0.0 }).collect()]
    })?;
    let h = out.pop().expect("two queries");
    Ok((out.pop().expect("two queries"), h))
}

/// Center update `m_r / max(n_r, 1)`. A cluster with an exact zero count
/// (only possible with noise disabled) keeps `fallback`'s center.
pub fn centers_from_aggregates(sums: &[f64], counts: &[f64], fallback: &Points) -> Result<Points> {
    let (k, d) = (counts.len(), fallback.dim());
    if sums.len() != k * d || fallback.len() != k {
        return Err(Error::DimensionMismatch { expected: k * d, got: sums.len() });
    }
    let mut out = Points::with_capacity(d, k);
    for r in 0..k {
        if counts[r] == 0.0 {
            out.push(fallback.row(r))?;
        } else {
            let denom = counts[r].max(1.0);
            let row: Vec<f64> = sums[r * d..(r + 1) * d].iter().map(|m| m / denom).collect();
            out.push(&row)?;
        }
    }
    Ok(out)
}

/// Per-client clip bounds for client-level privacy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientClipBounds {
    /// Frobenius bound on a client's outer-product sum.
    pub outer: f64,
    /// L1 bound on a client's nearest-server-point histogram.
    pub weights: f64,
    /// L2 bound on a client's concatenated local means.
    pub means: f64,
    /// L1 bound on a client's non-empty-cluster indicator.
    pub hist: f64,
}

impl ClientClipBounds {
    /// Noise-free 90th percentiles of the per-client statistic norms, measured
    /// on pseudo-clients resampled from the server's own data. `labels` gives
    /// each server point's cluster under a server-side clustering.
    pub fn from_server_proxy(
        server: &Points,
        labels: &[usize],
        k: usize,
        client_size: usize,
        seed: SeedStream,
    ) -> Result<Self> {
        use rand::Rng;
        if server.is_empty() {
            return Err(Error::Empty("server data"));
        }
        let trials = 50;
        let d = server.dim();
        let mut rng = seed.rng();
        let (mut outer, mut weights, mut means, mut hist) = (vec![], vec![], vec![], vec![]);
        for _ in 0..trials {
            let idx: Vec<usize> = (0..client_size.max(1)).map(|_| rng.random_range(0..server.len())).collect();
            let mut m = vec![0.0; d * d];
            crate::linalg::accumulate_outer(&server.select(&idx), &mut m);
            outer.push(norm(&m));
            weights.push(idx.len() as f64);
            let mut s = vec![0.0; k * d];
            let mut n = vec![0usize; k];
            for &i in &idx {
                let r = labels[i];
                n[r] += 1;
                for (a, x) in s[r * d..(r + 1) * d].iter_mut().zip(server.row(i)) {
                    *a += x;
                }
            }
            for r in 0..k {
                if n[r] > 0 {
                    for x in &mut s[r * d..(r + 1) * d] {
                        *x /= n[r] as f64;
                    }
                }
            }
            means.push(norm(&s));
            hist.push(n.iter().filter(|&&c| c > 0).count() as f64);
        }
        let p90 = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v[((v.len() as f64 * 0.9).ceil() as usize).saturating_sub(1)].max(f64::MIN_POSITIVE)
        };
        Ok(Self { outer: p90(outer), weights: p90(weights), means: p90(means), hist: p90(hist) })
    }
}
