//! Private federated initialization in three communication rounds:
//! a noisy outer-product sum gives a rank-k projector, noisy nearest-neighbour
//! counts turn projected server points into a weighted proxy dataset, and one
//! projected assign-and-average step yields the initial centers.

use crate::dp::PrivacyParams;
use crate::error::{Error, Result};
use crate::fed::{centers_from_aggregates, cluster_statistics, AggregationQuery, ClientClipBounds, ClientPartition, FedRun, PrivacyUnit};
use crate::kmeans::{weighted_kmeans, KMeansParams};
use crate::linalg::{accumulate_outer, top_k_projector, Projector};
use crate::points::{nearest, CenterSet, Points, WeightedPoints};

pub const LABEL_PROJECTOR: &str = "init/projector";
pub const LABEL_WEIGHTS: &str = "init/weights";
pub const LABEL_SUMS: &str = "init/sums";
pub const LABEL_COUNTS: &str = "init/counts";

/// Per-step budgets. `delta` is charged separately to each of the two
/// Gaussian steps (projector and sums).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitBudget {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3g: f64,
    pub eps3l: f64,
    pub delta: f64,
}

impl InitBudget {
    pub const DATA_POINT_PROPORTIONS: [f64; 4] = [0.2, 0.2, 0.45, 0.15];
    pub const CLIENT_PROPORTIONS: [f64; 4] = [0.35, 0.1, 0.45, 0.1];

    pub fn new(eps1: f64, eps2: f64, eps3g: f64, eps3l: f64, delta: f64) -> Result<Self> {
        for (name, e) in [("eps1", eps1), ("eps2", eps2), ("eps3G", eps3g), ("eps3L", eps3l)] {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::InvalidPrivacy(format!("{name} must be positive and finite, got {e}")));
            }
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidPrivacy(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { eps1, eps2, eps3g, eps3l, delta })
    }

    /// Splits `eps_init` by `proportions` (normalized to sum to one).
    pub fn from_proportions(eps_init: f64, proportions: [f64; 4], delta: f64) -> Result<Self> {
        let total: f64 = proportions.iter().sum();
        let [a, b, c, d] = proportions.map(|p| eps_init * p / total);
        Self::new(a, b, c, d, delta)
    }

    pub fn default_for(unit: PrivacyUnit, eps_init: f64, delta: f64) -> Result<Self> {
        let p = match unit {
            PrivacyUnit::DataPoint => Self::DATA_POINT_PROPORTIONS,
            PrivacyUnit::Client => Self::CLIENT_PROPORTIONS,
        };
        Self::from_proportions(eps_init, p, delta)
    }

    pub fn total_epsilon(&self) -> f64 {
        self.eps1 + self.eps2 + self.eps3g + self.eps3l
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub k: usize,
    pub budget: InitBudget,
    pub unit: PrivacyUnit,
    /// Client points are clipped to this norm; defaults to the largest server-point norm.
    pub delta_clip: Option<f64>,
    /// Required under client-level privacy.
    pub client_clip: Option<ClientClipBounds>,
    pub kmeans: KMeansParams,
}

impl InitConfig {
    pub fn new(k: usize, budget: InitBudget, unit: PrivacyUnit) -> Self {
        Self { k, budget, unit, delta_clip: None, client_clip: None, kmeans: KMeansParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitResult {
    pub centers: CenterSet,
    pub projector: Projector,
    pub proxy: WeightedPoints,
    /// Weighted k-means centers of the proxy, in projected coordinates.
    pub proxy_centers: CenterSet,
    pub delta_clip: f64,
}

/// Largest L2 norm over server points, the default clipping radius.
pub fn server_radius(server: &Points) -> Result<f64> {
    if server.is_empty() {
        return Err(Error::Empty("server data"));
    }
    Ok(server.max_norm())
}

fn client_bound(unit: PrivacyUnit, clip: Option<&ClientClipBounds>, pick: fn(&ClientClipBounds) -> f64) -> Result<Option<f64>> {
    match unit {
        PrivacyUnit::DataPoint => Ok(None),
        PrivacyUnit::Client => clip.map(|c| Some(pick(c))).ok_or_else(|| Error::MissingClipBound("client clip bounds".into())),
    }
}

/// Step 1: projector onto the top-k eigenvectors of the noisy
/// `sum_j P^j (P^j)^T`. Points must already be clipped to `delta_clip`.
pub fn step1_private_projector(
    run: &mut FedRun,
    partition: &ClientPartition,
    unit: PrivacyUnit,
    delta_clip: f64,
    budget: PrivacyParams,
    k: usize,
    clip: Option<&ClientClipBounds>,
) -> Result<Projector> {
    let d = partition.dim();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("rank k = {k} must lie in 1..={d}")));
    }
    run.register(LABEL_PROJECTOR, budget)?;
    let q = AggregationQuery::symmetric_gaussian(LABEL_PROJECTOR, d, budget, delta_clip * delta_clip)
        .with_clip(client_bound(unit, clip, |c| c.outer)?);
    let out = run.secure_aggregate(partition, unit, &[q], |c| {
        let mut m = vec![0.0; d * d];
        accumulate_outer(c, &mut m);
        vec![m]
    })?;
    let m = nalgebra::DMatrix::from_row_slice(d, d, &out[0]);
    top_k_projector(&m, k)
}

/// Step 2: noisy counts of projected client points whose nearest projected
/// server point is `q` (lowest index on ties). Returns the projected server
/// points with those counts as weights.
pub fn step2_importance_weights(
    run: &mut FedRun,
    partition: &ClientPartition,
    unit: PrivacyUnit,
    projector: &Projector,
    server: &Points,
    eps2: f64,
    clip: Option<&ClientClipBounds>,
) -> Result<WeightedPoints> {
    if server.is_empty() {
        return Err(Error::Empty("server data"));
    }
    let projected = projector.project(server)?;
    let q = AggregationQuery::laplace(LABEL_WEIGHTS, projected.len(), eps2, 1.0)?.with_clip(client_bound(unit, clip, |c| c.weights)?);
    run.register(LABEL_WEIGHTS, q.budget)?;
    let out = run.secure_aggregate(partition, unit, &[q], |c| {
        let mut counts = vec![0.0; projected.len()];
        let mut buf = vec![0.0; c.dim()];
        for p in c.rows() {
            projector.apply_into(p, &mut buf);
            counts[nearest(&buf, &projected).0] += 1.0;
        }
        vec![counts]
    })?;
    WeightedPoints::new(projected, out.into_iter().next().expect("one query"))
}

/// Step 3: weighted k-means on the proxy gives `xi_1..xi_k`; clients label
/// their original points by the nearest `xi` in projected space and the
/// server averages the noisy per-cluster sums.
#[allow(clippy::too_many_arguments)]
pub fn step3_initial_centers(
    run: &mut FedRun,
    partition: &ClientPartition,
    unit: PrivacyUnit,
    projector: &Projector,
    proxy: &WeightedPoints,
    k: usize,
    budget: &InitBudget,
    delta_clip: f64,
    clip: Option<&ClientClipBounds>,
    kmeans: KMeansParams,
) -> Result<(CenterSet, CenterSet)> {
    let (xi, _) = weighted_kmeans(&proxy.clamped(), k, kmeans, run.seed().child("init/proxy-kmeans"))?;
    let d = partition.dim();
    let sums_budget = PrivacyParams::new(budget.eps3g, budget.delta)?;
    let sums = AggregationQuery::gaussian(LABEL_SUMS, k * d, sums_budget, delta_clip).with_clip(client_bound(unit, clip, |c| c.means)?);
    let counts = AggregationQuery::laplace(LABEL_COUNTS, k, budget.eps3l, 1.0)?.with_clip(client_bound(unit, clip, |c| c.hist)?);
    run.register(LABEL_SUMS, sums.budget)?;
    run.register(LABEL_COUNTS, counts.budget)?;
    let label_of = |p: &[f64]| nearest(&projector.apply(p), xi.points()).0;
    let (m, n) = cluster_statistics(run, partition, unit, k, &sums, &counts, label_of)?;
    let centers = CenterSet::new(centers_from_aggregates(&m, &n, xi.points())?)?;
    Ok((centers, xi))
}

/// Runs all three steps. Client points are clipped to the configured radius
/// first; the projector rank is `min(k, d)`. Consumes exactly three rounds and
/// four ledger entries.
pub fn run_feddp_init(run: &mut FedRun, partition: &ClientPartition, server: &Points, cfg: &InitConfig) -> Result<InitResult> {
    let delta_clip = match cfg.delta_clip {
        Some(d) => d,
        None => server_radius(server)?,
    };
    if !(delta_clip > 0.0) {
        return Err(Error::InvalidArgument(format!("clipping radius must be positive, got {delta_clip}")));
    }
    server.ensure_dim(partition.dim())?;
    let clipped = partition.clipped(delta_clip);
    let clip = cfg.client_clip.as_ref();
    let b = &cfg.budget;
    // a rank above the ambient dimension would only re-add the identity
    let rank = cfg.k.min(partition.dim());
    let projector = step1_private_projector(run, &clipped, cfg.unit, delta_clip, PrivacyParams::new(b.eps1, b.delta)?, rank, clip)?;
    let proxy = step2_importance_weights(run, &clipped, cfg.unit, &projector, server, b.eps2, clip)?;
    let (centers, proxy_centers) =
        step3_initial_centers(run, &clipped, cfg.unit, &projector, &proxy, cfg.k, b, delta_clip, clip, cfg.kmeans)?;
    Ok(InitResult { centers, projector, proxy, proxy_centers, delta_clip })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::compose_basic;
    use crate::rng::SeedStream;
    use rand::Rng;

    fn budget() -> InitBudget {
        InitBudget::new(0.2, 0.2, 0.45, 0.15, 1e-6).unwrap()
    }

    fn pts(rows: &[&[f64]]) -> Points {
        Points::from_rows(rows).unwrap()
    }

    #[test]
    fn projector_recovers_exact_low_rank_span() {
        let mut rng = SeedStream::new(5).rng();
        // points in span{(1,1,0,0), (0,0,1,-1)}
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                vec![a, a, b, -b]
            })
            .collect();
        let part = ClientPartition::new(vec![Points::from_rows(&rows[..10]).unwrap(), Points::from_rows(&rows[10..]).unwrap()]).unwrap();
        let mut run = FedRun::new(SeedStream::new(0), false);
        let p = step1_private_projector(&mut run, &part, PrivacyUnit::DataPoint, 2.0, PrivacyParams::new(1.0, 1e-6).unwrap(), 2, None).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = nalgebra::DMatrix::from_row_slice(4, 2, &[h, 0.0, h, 0.0, 0.0, h, 0.0, -h]);
        assert!((p.matrix() - &u * u.transpose()).norm() < 1e-6);
        assert_eq!(run.rounds(), 1);

        let axis = ClientPartition::single(pts(&[&[1.0, 0.0], &[-2.0, 0.0]]));
        let mut run = FedRun::new(SeedStream::new(0), false);
        let p = step1_private_projector(&mut run, &axis, PrivacyUnit::DataPoint, 2.0, PrivacyParams::new(1.0, 1e-6).unwrap(), 1, None).unwrap();
        assert!((p.matrix()[(0, 0)] - 1.0).abs() < 1e-12 && p.matrix()[(1, 1)].abs() < 1e-12);
        let mut run = FedRun::new(SeedStream::new(0), false);
        assert!(step1_private_projector(&mut run, &axis, PrivacyUnit::DataPoint, 2.0, PrivacyParams::new(1.0, 1e-6).unwrap(), 3, None).is_err());
    }

    #[test]
    fn outer_product_sensitivity_is_delta_squared() {
        let mut rng = SeedStream::new(6).rng();
        for _ in 0..50 {
            let v: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let delta = 1.7;
            let p = crate::dp::clip_l2(&v.iter().map(|x| x * 10.0).collect::<Vec<_>>(), delta);
            let mut m = vec![0.0; 25];
            accumulate_outer(&Points::from_flat(p.clone(), 5).unwrap(), &mut m);
            assert!(crate::points::norm(&m) <= delta * delta * (1.0 + 1e-12));
        }
    }

    #[test]
    fn weights_single_server_point_and_ties() {
        let part = ClientPartition::new(vec![pts(&[&[0.0], &[3.0]]), pts(&[&[-4.0]])]).unwrap();
        let mut run = FedRun::new(SeedStream::new(0), false);
        let w = step2_importance_weights(&mut run, &part, PrivacyUnit::DataPoint, &Projector::identity(1), &pts(&[&[7.0]]), 1.0, None).unwrap();
        assert_eq!(w.weights, vec![3.0]);

        let part = ClientPartition::single(pts(&[&[0.0], &[-5.0], &[2.0]]));
        let mut run = FedRun::new(SeedStream::new(0), false);
        let w = step2_importance_weights(&mut run, &part, PrivacyUnit::DataPoint, &Projector::identity(1), &pts(&[&[-1.0], &[1.0]]), 1.0, None).unwrap();
        assert_eq!(w.weights, vec![2.0, 1.0]);
        let mut run = FedRun::new(SeedStream::new(0), false);
        assert!(step2_importance_weights(&mut run, &part, PrivacyUnit::DataPoint, &Projector::identity(1), &Points::empty(1), 1.0, None).is_err());
    }

    #[test]
    fn weights_match_brute_force_scan() {
        let mut rng = SeedStream::new(9).rng();
        let clients: Vec<Points> = (0..4).map(|_| Points::from_flat((0..60).map(|_| rng.random_range(-3.0..3.0)).collect(), 3).unwrap()).collect();
        let server = Points::from_flat((0..15).map(|_| rng.random_range(-3.0..3.0)).collect(), 3).unwrap();
        let part = ClientPartition::new(clients.clone()).unwrap();
        let mut run = FedRun::new(SeedStream::new(0), false);
        let w = step2_importance_weights(&mut run, &part, PrivacyUnit::DataPoint, &Projector::identity(3), &server, 1.0, None).unwrap();
        let mut expect = vec![0.0; server.len()];
        for c in &clients {
            for p in c.rows() {
                let ds: Vec<f64> = server.rows().map(|q| p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum()).collect();
                let min = ds.iter().cloned().fold(f64::INFINITY, f64::min);
                expect[ds.iter().position(|x| *x == min).unwrap()] += 1.0;
            }
        }
        assert_eq!(w.weights, expect);
        assert_eq!(w.total_weight(), part.num_points() as f64);
    }

    #[test]
    fn one_dimensional_toy_pipeline() {
        let part = ClientPartition::new(vec![pts(&[&[0.0], &[10.0]]), pts(&[&[1.0], &[9.0]])]).unwrap();
        let server = pts(&[&[0.4], &[9.6]]);
        let mut cfg = InitConfig::new(2, budget(), PrivacyUnit::DataPoint);
        cfg.delta_clip = Some(20.0);
        let mut run = FedRun::new(SeedStream::new(1), false);
        let res = run_feddp_init(&mut run, &part, &server, &cfg).unwrap();
        let mut c: Vec<f64> = res.centers.iter().map(|r| r[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.5, 9.5]);
        assert_eq!(run.rounds(), 3);
        assert_eq!(res.proxy.weights, vec![2.0, 2.0]);
    }

    #[test]
    fn ledger_matches_declared_steps() {
        let part = ClientPartition::single(pts(&[&[0.0, 1.0], &[5.0, 5.0], &[0.5, 1.0]]));
        let server = pts(&[&[0.0, 1.0], &[5.0, 5.0]]);
        let b = InitBudget::new(0.3, 0.1, 0.7, 0.2, 1e-7).unwrap();
        let mut run = FedRun::new(SeedStream::new(3), true);
        run_feddp_init(&mut run, &part, &server, &InitConfig::new(2, b, PrivacyUnit::DataPoint)).unwrap();
        let e = run.ledger().entries();
        let got: Vec<(f64, f64)> = e.iter().map(|x| (x.params.epsilon, x.params.delta)).collect();
        assert_eq!(got, vec![(0.3, 1e-7), (0.1, 0.0), (0.7, 1e-7), (0.2, 0.0)]);
        let total = compose_basic(run.ledger()).unwrap();
        assert!((total.epsilon - b.total_epsilon()).abs() < 1e-12);
        assert!((total.delta - 2e-7).abs() < 1e-20);
        assert_eq!(run.rounds(), 3);
    }

    #[test]
    fn noisy_counts_clamp_keeps_centers_finite() {
        let mut rows = vec![[50.0]; 200];
        rows.extend([[0.0], [0.1]]);
        let part = ClientPartition::single(Points::from_rows(&rows).unwrap());
        let server = pts(&[&[0.0], &[50.0]]);
        let b = InitBudget::new(1.0, 5.0, 0.01, 0.01, 1e-6).unwrap();
        for s in 0..20 {
            let mut run = FedRun::new(SeedStream::new(s), true);
            let res = run_feddp_init(&mut run, &part, &server, &InitConfig::new(2, b, PrivacyUnit::DataPoint)).unwrap();
            assert!(res.centers.is_finite());
        }
        let zero = WeightedPoints::new(server.clone(), vec![-1.0, 0.0]).unwrap();
        let mut run = FedRun::new(SeedStream::new(0), true);
        assert!(matches!(
            step3_initial_centers(&mut run, &part, PrivacyUnit::DataPoint, &Projector::identity(1), &zero, 2, &b, 50.0, None, KMeansParams::default()),
            Err(Error::ZeroWeights)
        ));
    }

    #[test]
    fn perfect_proxy_gives_client_means() {
        let mut rng = SeedStream::new(12).rng();
        let means = [[0.0, 0.0, 0.0], [8.0, 0.0, 1.0], [0.0, 9.0, -2.0]];
        let mut clients = Vec::new();
        for _ in 0..3 {
            let mut c = Points::empty(3);
            for (r, m) in means.iter().enumerate() {
                for _ in 0..(5 + r) {
                    let p: Vec<f64> = m.iter().map(|x| x + rng.random_range(-0.5..0.5)).collect();
                    c.push(&p).unwrap();
                }
            }
            clients.push(c);
        }
        let part = ClientPartition::new(clients).unwrap();
        let server = Points::from_rows(&means).unwrap();
        let mut cfg = InitConfig::new(3, budget(), PrivacyUnit::DataPoint);
        cfg.delta_clip = Some(100.0);
        let mut run = FedRun::new(SeedStream::new(0), false);
        let res = run_feddp_init(&mut run, &part, &server, &cfg).unwrap();
        let all = part.union();
        for c in res.centers.iter() {
            let r = nearest(c, &server).0;
            let members: Vec<&[f64]> = all.rows().filter(|p| nearest(p, &server).0 == r).collect();
            for t in 0..3 {
                let mean = members.iter().map(|p| p[t]).sum::<f64>() / members.len() as f64;
                assert!((c[t] - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn client_unit_uses_mean_of_means() {
        let part = ClientPartition::new(vec![pts(&[&[0.0], &[2.0], &[10.0]]), pts(&[&[4.0], &[12.0]])]).unwrap();
        let server = pts(&[&[1.0], &[11.0]]);
        let mut cfg = InitConfig::new(2, InitBudget::default_for(PrivacyUnit::Client, 1.0, 1e-6).unwrap(), PrivacyUnit::Client);
        cfg.delta_clip = Some(20.0);
        let mut run = FedRun::new(SeedStream::new(0), false);
        assert!(run_feddp_init(&mut run, &part, &server, &cfg).is_err());
        cfg.client_clip = Some(ClientClipBounds { outer: 1e6, weights: 10.0, means: 100.0, hist: 2.0 });
        let mut run = FedRun::new(SeedStream::new(0), false);
        let res = run_feddp_init(&mut run, &part, &server, &cfg).unwrap();
        let mut c: Vec<f64> = res.centers.iter().map(|r| r[0]).collect();
        c.sort_by(f64::total_cmp);
        // client means (1, 10) and (4, 12)
        assert_eq!(c, vec![2.5, 11.0]);
    }

    #[test]
    fn proportions_match_defaults() {
        let b = InitBudget::default_for(PrivacyUnit::DataPoint, 1.0, 1e-6).unwrap();
        assert!((b.eps1 - 0.2).abs() < 1e-15 && (b.eps3g - 0.45).abs() < 1e-15);
        let c = InitBudget::default_for(PrivacyUnit::Client, 2.0, 1e-6).unwrap();
        assert!((c.eps1 - 0.7).abs() < 1e-15 && (c.eps3l - 0.2).abs() < 1e-15);
        assert!(InitBudget::new(0.0, 1.0, 1.0, 1.0, 1e-6).is_err());
    }
}
