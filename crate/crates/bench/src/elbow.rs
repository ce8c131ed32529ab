//! Choosing k from one private proxy: steps 1 and 2 of the initialization run
//! once with a large `k_prime`, then the proxy is clustered for every
//! candidate k at no further privacy cost.

use std::ops::RangeInclusive;

use feddp_core::dp::{BudgetLedger, PrivacyParams};
use feddp_core::fed::{ClientClipBounds, ClientPartition, FedRun, PrivacyUnit};
use feddp_core::init::{server_radius, step1_private_projector, step2_importance_weights};
use feddp_core::kmeans::{weighted_kmeans, KMeansParams};
use feddp_core::{Points, SeedStream};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::experiment::prepare;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElbowBudget {
    pub eps1: f64,
    pub eps2: f64,
    /// Charged to the projector step.
    pub delta: f64,
}

impl ElbowBudget {
    /// Splits `eps` between steps 1 and 2 in the ratio of the first two
    /// initialization proportions.
    pub fn from_proportions(eps: f64, proportions: [f64; 4], delta: f64) -> Self {
        let share = proportions[0] / (proportions[0] + proportions[1]);
        Self { eps1: eps * share, eps2: eps * (1.0 - share), delta }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElbowCurve {
    /// `(k, weighted proxy cost)` for every k in the scanned range.
    pub costs: Vec<(usize, f64)>,
    pub ledger: BudgetLedger,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElbowSettings {
    pub k_prime: usize,
    pub k_range: RangeInclusive<usize>,
    pub budget: ElbowBudget,
    pub unit: PrivacyUnit,
    pub client_clip: Option<ClientClipBounds>,
    pub kmeans: KMeansParams,
    pub noise: bool,
}

pub fn elbow_scan(server: &Points, partition: &ClientPartition, settings: &ElbowSettings, seed: SeedStream) -> Result<ElbowCurve> {
    let (lo, hi) = (*settings.k_range.start(), *settings.k_range.end());
    if lo == 0 || lo > hi || hi > settings.k_prime {
        return Err(BenchError::Config(format!("k range {lo}..={hi} must satisfy 1 <= k_min <= k_max <= k_prime = {}", settings.k_prime)));
    }
    if hi > server.len() {
        return Err(BenchError::Config(format!("k_max = {hi} exceeds the {} proxy points", server.len())));
    }
    let delta_clip = server_radius(server)?;
    let clipped = partition.clipped(delta_clip);
    let mut run = FedRun::new(seed.child("run"), settings.noise);
    let b = settings.budget;
    let rank = settings.k_prime.min(partition.dim());
    let clip = settings.client_clip.as_ref();
    let projector = step1_private_projector(&mut run, &clipped, settings.unit, delta_clip, PrivacyParams::new(b.eps1, b.delta)?, rank, clip)?;
    let proxy = step2_importance_weights(&mut run, &clipped, settings.unit, &projector, server, b.eps2, clip)?.clamped();
    let costs = settings
        .k_range
        .clone()
        .map(|k| Ok((k, weighted_kmeans(&proxy, k, settings.kmeans, seed.child("elbow").index(k as u64))?.1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ElbowCurve { costs, ledger: run.ledger().clone(), rounds: run.rounds() })
}

/// Elbow scan on the first seed's dataset of an experiment config with an
/// `[elbow]` section.
pub fn elbow_from_config(cfg: &ExperimentConfig) -> Result<ElbowCurve> {
    cfg.validate()?;
    let e = cfg.elbow.as_ref().ok_or_else(|| BenchError::Config("config has no [elbow] section".into()))?;
    let seed = cfg.seeds[0];
    let prep = prepare(cfg, seed)?;
    let settings = ElbowSettings {
        k_prime: e.k_prime,
        k_range: e.k_min..=e.k_max,
        budget: ElbowBudget::from_proportions(e.eps, cfg.grid.proportions(cfg.unit), cfg.delta),
        unit: cfg.unit.into(),
        client_clip: prep.client_clip,
        kmeans: KMeansParams::default(),
        noise: cfg.noise,
    };
    elbow_scan(&prep.data.server, &prep.data.partition, &settings, SeedStream::new(seed))
}

/// The k with the largest relative drop `(c_prev - c_k) / c_prev` from the
/// previous entry of the curve; smallest k on ties.
pub fn elbow_locator(curve: &[(usize, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for w in curve.windows(2) {
        let (prev, (k, c)) = (w[0].1, w[1]);
        let drop = if prev > 0.0 { (prev - c) / prev } else { 0.0 };
        if best.is_none_or(|(_, d)| drop > d) {
            best = Some((k, drop));
        }
    }
    best.map(|(k, _)| k)
}
