//! Budget sweeps: every grid point x seed runs one initialization followed by
//! FedDP-Lloyds, and is scored by its noise-free normalized cost.

use std::time::Instant;

use feddp_core::baselines::server_kmeanspp;
use feddp_core::dp::{compose_basic, reported_total, BudgetLedger, LedgerEntry};
use feddp_core::fed::{ClientClipBounds, FedRun, PrivacyUnit};
use feddp_core::init::{server_radius, InitBudget};
use feddp_core::kmeans::{assign, normalized_cost};
use feddp_core::lloyds::{run_feddp_lloyds, LloydsConfig, Trajectory};
use feddp_core::SeedStream;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Method};
use crate::dataset::{build_dataset, Dataset};
use crate::error::Result;
use crate::record::RunRecord;
use crate::strategy::{InitContext, InitStrategy, StrategyRegistry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub eps_init: Option<f64>,
    pub rounds: usize,
    /// Total Lloyd budget; `None` when no Lloyd round runs.
    pub eps_lloyds: Option<f64>,
}

/// Grid points in `eps_init`-major order. Axes a strategy does not use
/// collapse to a single value, and `T = 0` drops the Lloyd budget axis.
pub fn expand_grid(cfg: &ExperimentConfig, strategy: &dyn InitStrategy) -> Vec<GridPoint> {
    let g = &cfg.grid;
    let inits: Vec<Option<f64>> = if strategy.uses_init_budget() { g.eps_init.iter().map(|e| Some(*e)).collect() } else { vec![None] };
    let rounds: Vec<usize> = if strategy.refines() { g.rounds.clone() } else { vec![0] };
    let mut out = Vec::new();
    for &eps_init in &inits {
        for &t in &rounds {
            let lloyds: Vec<Option<f64>> = if t == 0 { vec![None] } else { g.eps_lloyds.iter().map(|e| Some(*e)).collect() };
            for eps_lloyds in lloyds {
                out.push(GridPoint { index: out.len(), eps_init, rounds: t, eps_lloyds });
            }
        }
    }
    out
}

/// How the run's delta is divided: each of the two Gaussian steps of the
/// initialization gets `init_slot`, FedDP-Lloyds gets `lloyds_total`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSplit {
    pub init_slot: f64,
    pub lloyds_total: f64,
}

pub fn split_delta(delta: f64, uses_init: bool, rounds: usize) -> DeltaSplit {
    match (uses_init, rounds > 0) {
        (true, true) => DeltaSplit { init_slot: delta / 4.0, lloyds_total: delta / 2.0 },
        (true, false) => DeltaSplit { init_slot: delta / 2.0, lloyds_total: 0.0 },
        (false, _) => DeltaSplit { init_slot: 0.0, lloyds_total: delta },
    }
}

/// Reported `(eps_total, delta)` of a ledger. Non-private runs report an
/// infinite epsilon; an empty ledger costs nothing.
pub fn account(entries: &[LedgerEntry], non_private: bool, delta_slack: f64) -> Result<(f64, f64)> {
    let mut ledger = BudgetLedger::new();
    for e in entries {
        ledger.append(e.label.clone(), e.params)?;
    }
    if ledger.is_empty() {
        return Ok((if non_private { f64::INFINITY } else { 0.0 }, 0.0));
    }
    if non_private {
        return Ok((f64::INFINITY, compose_basic(&ledger)?.delta));
    }
    let total = reported_total(&ledger, delta_slack)?;
    Ok((total.epsilon, total.delta))
}

/// A seed's dataset plus the data-independent settings every job shares.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub seed: u64,
    pub data: Dataset,
    pub delta_clip: f64,
    pub client_clip: Option<ClientClipBounds>,
}

/// Builds the dataset and, under client privacy, clip bounds estimated from
/// the public server data.
pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<Prepared> {
    let data = build_dataset(&cfg.dataset, seed)?;
    let delta_clip = server_radius(&data.server)?;
    let client_clip = match PrivacyUnit::from(cfg.unit) {
        PrivacyUnit::DataPoint => None,
        PrivacyUnit::Client => {
            let s = SeedStream::new(seed).child("clip");
            let seeds = server_kmeanspp(&data.server, cfg.k.min(data.server.len()), &mut s.child("centers").rng())?;
            let labels = assign(&data.server, &seeds)?.0;
            let client_size = data.partition.num_points() / data.partition.num_clients();
            Some(ClientClipBounds::from_server_proxy(&data.server, &labels, seeds.k(), client_size, s.child("bootstrap"))?)
        }
    };
    Ok(Prepared { seed, data, delta_clip, client_clip })
}

/// Runs one grid point on one seed; returns the record and the centers after
/// initialization and after every Lloyd round.
pub fn run_job(cfg: &ExperimentConfig, strategy: &dyn InitStrategy, prep: &Prepared, gp: &GridPoint) -> Result<(RunRecord, Trajectory)> {
    let start = Instant::now();
    let unit = PrivacyUnit::from(cfg.unit);
    let root = SeedStream::new(prep.seed);
    let split = split_delta(cfg.delta, strategy.uses_init_budget(), gp.rounds);
    let budget = match gp.eps_init {
        Some(e) => Some(InitBudget::from_proportions(e, cfg.grid.proportions(cfg.unit), split.init_slot)?),
        None => None,
    };
    let mut run = FedRun::new(root.child("run"), cfg.noise);
    let init = strategy.initialize(&mut InitContext {
        run: &mut run,
        data: &prep.data,
        k: cfg.k,
        unit,
        budget,
        delta_clip: prep.delta_clip,
        client_clip: prep.client_clip,
        seed: root.child("init"),
    })?;
    let traj = match gp.eps_lloyds {
        Some(eps) if gp.rounds > 0 => {
            let lc = LloydsConfig {
                rounds: gp.rounds,
                eps_g: cfg.grid.gaussian_share * eps,
                eps_l: (1.0 - cfg.grid.gaussian_share) * eps,
                delta: split.lloyds_total,
                delta_clip: prep.delta_clip,
                unit,
                client_clip: prep.client_clip,
            };
            run_feddp_lloyds(&mut run, &prep.data.partition, &init, &lc)?
        }
        _ => Trajectory { centers: vec![init] },
    };
    let cost = normalized_cost(&prep.data.all, traj.last())?;
    let non_private = strategy.non_private() || !cfg.noise;
    let ledger = run.ledger().entries().to_vec();
    let (eps_total, delta) = account(&ledger, non_private, cfg.delta)?;
    let record = RunRecord {
        config_hash: cfg.hash(),
        method: strategy.method(),
        grid_index: gp.index,
        seed: prep.seed,
        eps_init: gp.eps_init,
        rounds: gp.rounds,
        eps_lloyds: gp.eps_lloyds,
        eps_total,
        delta,
        cost,
        rounds_used: run.rounds(),
        non_private,
        ledger,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((record, traj))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    run_experiment_with(cfg, &StrategyRegistry::with_defaults())
}

/// Records ordered by (grid index, position of the seed in `cfg.seeds`).
pub fn run_experiment_with(cfg: &ExperimentConfig, registry: &StrategyRegistry) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let strategy = registry.get(cfg.method)?;
    let grid = expand_grid(cfg, strategy);
    let prepared: Vec<Prepared> = cfg.seeds.par_iter().map(|&s| prepare(cfg, s)).collect::<Result<_>>()?;
    let jobs: Vec<(&GridPoint, &Prepared)> = grid.iter().flat_map(|gp| prepared.iter().map(move |p| (gp, p))).collect();
    jobs.par_iter().map(|(gp, p)| run_job(cfg, strategy, p, gp).map(|(r, _)| r)).collect()
}

/// Per-seed reference costs of the non-private optimum, in seed order.
pub fn optimal_costs(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let mut c = cfg.clone();
    c.method = Method::Optimal;
    Ok(run_experiment(&c)?.into_iter().map(|r| r.cost).collect())
}
