//! Private federated Lloyd refinement in the original space.

use crate::dp::PrivacyParams;
use crate::error::{Error, Result};
use crate::fed::{centers_from_aggregates, cluster_statistics, AggregationQuery, ClientClipBounds, ClientPartition, FedRun, PrivacyUnit};
use crate::kmeans::{assign, normalized_cost};
use crate::points::{nearest, CenterSet, Points};

#[derive(Debug, Clone, PartialEq)]
pub struct LloydsConfig {
    pub rounds: usize,
    /// Total Gaussian budget across all rounds; each round spends `eps_g / T`.
    pub eps_g: f64,
    /// Total Laplace budget across all rounds; each round spends `eps_l / T`.
    pub eps_l: f64,
    /// Total delta across all rounds; each round is charged `delta / T`.
    pub delta: f64,
    pub delta_clip: f64,
    pub unit: PrivacyUnit,
    /// Required under client-level privacy (`means` and `hist` are used).
    pub client_clip: Option<ClientClipBounds>,
}

/// Centers after initialization and after every round.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub centers: Vec<CenterSet>,
}

impl Trajectory {
    pub fn last(&self) -> &CenterSet {
        self.centers.last().expect("trajectory holds at least the initialization")
    }

    /// Noise-free normalized cost of every iterate against `points`.
    pub fn costs(&self, points: &Points) -> Result<Vec<f64>> {
        self.centers.iter().map(|c| normalized_cost(points, c)).collect()
    }
}

pub fn round_labels(t: usize) -> (String, String) {
    (format!("lloyds/{t}/sums"), format!("lloyds/{t}/counts"))
}

/// Runs `cfg.rounds` noisy federated Lloyd steps starting from `init`.
pub fn run_feddp_lloyds(run: &mut FedRun, partition: &ClientPartition, init: &CenterSet, cfg: &LloydsConfig) -> Result<Trajectory> {
    let mut traj = Trajectory { centers: vec![init.clone()] };
    if cfg.rounds == 0 {
        return Ok(traj);
    }
    partition.union().ensure_dim(init.dim())?;
    if !(cfg.delta_clip > 0.0) {
        return Err(Error::InvalidArgument(format!("clipping radius must be positive, got {}", cfg.delta_clip)));
    }
    let t_f = cfg.rounds as f64;
    let gauss = PrivacyParams::new(cfg.eps_g / t_f, cfg.delta / t_f)?;
    let eps_l = cfg.eps_l / t_f;
    let (means_clip, hist_clip) = match cfg.unit {
        PrivacyUnit::DataPoint => (None, None),
        PrivacyUnit::Client => {
            let c = cfg.client_clip.ok_or_else(|| Error::MissingClipBound("client clip bounds".into()))?;
            (Some(c.means), Some(c.hist))
        }
    };
    let clipped = partition.clipped(cfg.delta_clip);
    let (k, d) = (init.k(), init.dim());
    for t in 0..cfg.rounds {
        let (ls, lc) = round_labels(t);
        let sums = AggregationQuery::gaussian(ls.clone(), k * d, gauss, cfg.delta_clip).with_clip(means_clip);
        let counts = AggregationQuery::laplace(lc.clone(), k, eps_l, 1.0)?.with_clip(hist_clip);
        run.register(ls, sums.budget)?;
        run.register(lc, counts.budget)?;
        let current = traj.last().clone();
        let (m, n) = cluster_statistics(run, &clipped, cfg.unit, k, &sums, &counts, |p| nearest(p, current.points()).0)?;
        traj.centers.push(CenterSet::new(centers_from_aggregates(&m, &n, current.points())?)?);
    }
    Ok(traj)
}

/// True iff `predicted` equals `truth` up to a relabelling of clusters, i.e.
/// the contingency table between the two labellings is a bijection.
pub fn exact_recovery_check(predicted: &[usize], truth: &[usize]) -> Result<bool> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: predicted.len() });
    }
    let mut forward = std::collections::HashMap::new();
    let mut backward = std::collections::HashMap::new();
    for (&p, &t) in predicted.iter().zip(truth) {
        if *forward.entry(p).or_insert(t) != t || *backward.entry(t).or_insert(p) != p {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Assignment of `points` under the final iterate, for recovery checks.
pub fn final_labels(traj: &Trajectory, points: &Points) -> Result<Vec<usize>> {
    Ok(assign(points, traj.last())?.0)
}
