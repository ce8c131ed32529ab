//! Initialization strategies behind a common trait, looked up by [`Method`].

use std::collections::BTreeMap;

use feddp_core::baselines::{kfed, optimal_reference, server_kmeanspp, server_lloyds, sphere_packing_init, SpherePackingParams};
use feddp_core::fed::{ClientClipBounds, FedRun, PrivacyUnit};
use feddp_core::init::{run_feddp_init, InitBudget, InitConfig};
use feddp_core::points::CenterSet;
use feddp_core::SeedStream;

use crate::config::Method;
use crate::dataset::Dataset;
use crate::error::{BenchError, Result};

/// Everything an initialization may touch for one job.
pub struct InitContext<'a> {
    pub run: &'a mut FedRun,
    pub data: &'a Dataset,
    pub k: usize,
    pub unit: PrivacyUnit,
    /// Set only for strategies that spend an initialization budget.
    pub budget: Option<InitBudget>,
    pub delta_clip: f64,
    pub client_clip: Option<ClientClipBounds>,
    /// Substream reserved for the strategy's own randomness.
    pub seed: SeedStream,
}

pub trait InitStrategy: Send + Sync {
    fn method(&self) -> Method;

    /// Whether the strategy consumes an initialization budget.
    fn uses_init_budget(&self) -> bool {
        false
    }

    /// Non-private strategies report an infinite epsilon.
    fn non_private(&self) -> bool {
        false
    }

    /// Whether FedDP-Lloyds rounds follow the initialization.
    fn refines(&self) -> bool {
        true
    }

    fn initialize(&self, ctx: &mut InitContext<'_>) -> Result<CenterSet>;
}

pub struct FedDpKMeans;
pub struct ServerKMeansPP;
pub struct ServerLloyds;
pub struct SpherePacking;
pub struct KFed;
pub struct Optimal;

impl InitStrategy for FedDpKMeans {
    fn method(&self) -> Method {
        Method::FedDpKMeans
    }

    fn uses_init_budget(&self) -> bool {
        true
    }

    fn initialize(&self, ctx: &mut InitContext<'_>) -> Result<CenterSet> {
        let budget = ctx.budget.ok_or_else(|| BenchError::Config("FedDP-KMeans needs an initialization budget".into()))?;
        let mut cfg = InitConfig::new(ctx.k, budget, ctx.unit);
        cfg.delta_clip = Some(ctx.delta_clip);
        cfg.client_clip = ctx.client_clip;
        Ok(run_feddp_init(ctx.run, &ctx.data.partition, &ctx.data.server, &cfg)?.centers)
    }
}

impl InitStrategy for ServerKMeansPP {
    fn method(&self) -> Method {
        Method::ServerKMeansPP
    }

    fn initialize(&self, ctx: &mut InitContext<'_>) -> Result<CenterSet> {
        Ok(server_kmeanspp(&ctx.data.server, ctx.k, &mut ctx.seed.rng())?)
    }
}

impl InitStrategy for ServerLloyds {
    fn method(&self) -> Method {
        Method::ServerLloyds
    }

    fn initialize(&self, ctx: &mut InitContext<'_>) -> Result<CenterSet> {
        Ok(server_lloyds(&ctx.data.server, ctx.k, &mut ctx.seed.rng())?)
    }
}

impl InitStrategy for SpherePacking {
    fn method(&self) -> Method {
        Method::SpherePacking
    }

    fn initialize(&self, ctx: &mut InitContext<'_>) -> Result<CenterSet> {
        let params = SpherePackingParams::new(ctx.delta_clip);
        Ok(sphere_packing_init(&params, ctx.k, ctx.data.all.dim(), &mut ctx.seed.rng())?.centers)
    }
}

impl InitStrategy for KFed {
    fn method(&self) -> Method {
        Method::KFed
    }

    fn non_private(&self) -> bool {
        true
    }

    fn initialize(&self, ctx: &mut InitContext<'_>) -> Result<CenterSet> {
        Ok(kfed(&ctx.data.partition, ctx.k, ctx.k, ctx.seed)?)
    }
}

impl InitStrategy for Optimal {
    fn method(&self) -> Method {
        Method::Optimal
    }

    fn non_private(&self) -> bool {
        true
    }

    fn refines(&self) -> bool {
        false
    }

    fn initialize(&self, ctx: &mut InitContext<'_>) -> Result<CenterSet> {
        Ok(optimal_reference(&ctx.data.all, ctx.k, ctx.seed)?.0)
    }
}

pub struct StrategyRegistry {
    strategies: BTreeMap<Method, Box<dyn InitStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self { strategies: BTreeMap::new() }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(FedDpKMeans));
        r.register(Box::new(ServerKMeansPP));
        r.register(Box::new(ServerLloyds));
        r.register(Box::new(SpherePacking));
        r.register(Box::new(KFed));
        r.register(Box::new(Optimal));
        r
    }

    /// Replaces any strategy already registered for the same method.
    pub fn register(&mut self, s: Box<dyn InitStrategy>) {
        self.strategies.insert(s.method(), s);
    }

    pub fn get(&self, m: Method) -> Result<&dyn InitStrategy> {
        self.strategies.get(&m).map(|b| b.as_ref()).ok_or_else(|| BenchError::Config(format!("no strategy registered for {}", m.name())))
    }

    pub fn methods(&self) -> impl Iterator<Item = Method> + '_ {
        self.strategies.keys().copied()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_every_method() {
        let r = StrategyRegistry::with_defaults();
        assert_eq!(r.methods().collect::<Vec<_>>(), Method::ALL.to_vec());
        for m in Method::ALL {
            let s = r.get(m).unwrap();
            assert_eq!(s.method(), m);
            assert_eq!(s.uses_init_budget(), m == Method::FedDpKMeans);
            assert_eq!(s.non_private(), matches!(m, Method::KFed | Method::Optimal));
            assert_eq!(s.refines(), m != Method::Optimal);
        }
        assert_eq!(StrategyRegistry::empty().get(Method::KFed).err().unwrap().exit_code(), 2);
    }
}
