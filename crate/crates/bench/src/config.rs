//! Experiment configuration, read from TOML.
//!
//! ```toml
//! name = "desk"
//! method = "feddp-kmeans"     # server-kmeanspp | server-lloyds | sphere-packing | kfed | optimal
//! unit = "data-point"         # or "client"
//! k = 5
//! seeds = [0, 1, 2, 3, 4]
//! output = "results/desk"     # optional
//! format = "csv"              # or "json"
//!
//! [dataset]
//! source = "mixture"          # or "import"
//! preset = "desk"             # desk | reference | custom
//!
//! [grid]
//! eps_init = [0.1, 0.2, 0.4, 0.8, 1.6, 3.2]
//! rounds = [0, 1, 2]
//! eps_lloyds = [0.1, 0.2, 0.4, 0.8, 1.6, 3.2]
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use feddp_core::fed::PrivacyUnit;
use feddp_core::init::InitBudget;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "feddp-kmeans")]
    FedDpKMeans,
    #[serde(rename = "server-kmeanspp")]
    ServerKMeansPP,
    #[serde(rename = "server-lloyds")]
    ServerLloyds,
    #[serde(rename = "sphere-packing")]
    SpherePacking,
    #[serde(rename = "kfed")]
    KFed,
    #[serde(rename = "optimal")]
    Optimal,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::FedDpKMeans, Method::ServerKMeansPP, Method::ServerLloyds, Method::SpherePacking, Method::KFed, Method::Optimal];

    pub fn name(self) -> &'static str {
        match self {
            Method::FedDpKMeans => "feddp-kmeans",
            Method::ServerKMeansPP => "server-kmeanspp",
            Method::ServerLloyds => "server-lloyds",
            Method::SpherePacking => "sphere-packing",
            Method::KFed => "kfed",
            Method::Optimal => "optimal",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unit {
    DataPoint,
    Client,
}

impl From<Unit> for PrivacyUnit {
    fn from(u: Unit) -> Self {
        match u {
            Unit::DataPoint => PrivacyUnit::DataPoint,
            Unit::Client => PrivacyUnit::Client,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Desk,
    Reference,
    Custom,
}

/// Synthetic Gaussian mixture. `preset` fixes the mixture and scenario; the
/// optional fields override it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    #[serde(default)]
    pub preset: Preset,
    /// Custom preset only.
    pub k: Option<usize>,
    pub d: Option<usize>,
    pub mean_scale: Option<f64>,
    pub variance_fraction: Option<f64>,
    pub clients: Option<usize>,
    pub points_per_client: Option<usize>,
    pub server_per_component: Option<usize>,
    pub server_ood: Option<usize>,
    pub missing_components: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFileFormat {
    #[default]
    Csv,
    Binary,
}

/// Client and server matrices read from disk; clients are formed by an i.i.d.
/// split of the client matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportConfig {
    pub clients: PathBuf,
    pub server: PathBuf,
    #[serde(default)]
    pub format: MatrixFileFormat,
    pub num_clients: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetConfig {
    Mixture(MixtureConfig),
    Import(ImportConfig),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Mixture(MixtureConfig::default())
    }
}

pub const DEFAULT_EPS_GRID: [f64; 6] = [0.1, 0.2, 0.4, 0.8, 1.6, 3.2];

fn default_eps_grid() -> Vec<f64> {
    DEFAULT_EPS_GRID.to_vec()
}

fn default_rounds() -> Vec<usize> {
    vec![0, 1, 2]
}

fn default_gaussian_share() -> f64 {
    0.75
}

/// Budget grid. FedDP-KMeans sweeps `eps_init x rounds x eps_lloyds`; the
/// baselines only sweep `rounds x eps_lloyds`. `eps_lloyds` is the total
/// Lloyd budget, split `gaussian_share : 1 - gaussian_share` between the sums
/// and counts queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetGrid {
    #[serde(default = "default_eps_grid")]
    pub eps_init: Vec<f64>,
    #[serde(default = "default_rounds")]
    pub rounds: Vec<usize>,
    #[serde(default = "default_eps_grid")]
    pub eps_lloyds: Vec<f64>,
    /// Split of `eps_init` across steps 1, 2, 3G, 3L; defaults depend on the unit.
    pub proportions: Option<[f64; 4]>,
    #[serde(default = "default_gaussian_share")]
    pub gaussian_share: f64,
}

impl Default for BudgetGrid {
    fn default() -> Self {
        Self { eps_init: default_eps_grid(), rounds: default_rounds(), eps_lloyds: default_eps_grid(), proportions: None, gaussian_share: 0.75 }
    }
}

impl BudgetGrid {
    pub fn proportions(&self, unit: Unit) -> [f64; 4] {
        self.proportions.unwrap_or(match unit {
            Unit::DataPoint => InitBudget::DATA_POINT_PROPORTIONS,
            Unit::Client => InitBudget::CLIENT_PROPORTIONS,
        })
    }
}

/// Elbow scan settings: steps 1 and 2 run once with `k_prime`, then the proxy
/// is clustered for every `k` in `k_min..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElbowConfig {
    pub k_prime: usize,
    #[serde(default = "one")]
    pub k_min: usize,
    pub k_max: usize,
    /// Budget of steps 1 and 2 together, split by the grid proportions.
    pub eps: f64,
}

fn one() -> usize {
    1
}

fn default_delta() -> f64 {
    1e-6
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub method: Method,
    pub unit: Unit,
    pub k: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// `false` disables all noise; such runs are reported as non-private.
    #[serde(default = "yes")]
    pub noise: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub grid: BudgetGrid,
    #[serde(default)]
    pub elbow: Option<ElbowConfig>,
}

impl ExperimentConfig {
    pub fn new(name: impl Into<String>, method: Method, unit: Unit, k: usize, seeds: Vec<u64>) -> Self {
        Self {
            name: name.into(),
            method,
            unit,
            k,
            seeds,
            delta: default_delta(),
            noise: true,
            output: None,
            format: OutputFormat::Csv,
            dataset: DatasetConfig::default(),
            grid: BudgetGrid::default(),
            elbow: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        let g = &self.grid;
        if g.eps_init.is_empty() || g.rounds.is_empty() || g.eps_lloyds.is_empty() {
            return bad("budget grids must be non-empty".into());
        }
        if g.eps_init.iter().chain(&g.eps_lloyds).any(|e| !(*e > 0.0) || !e.is_finite()) {
            return bad("grid epsilons must be positive and finite".into());
        }
        if !(g.gaussian_share > 0.0 && g.gaussian_share < 1.0) {
            return bad("gaussian_share must lie in (0, 1)".into());
        }
        if let Some(p) = g.proportions {
            if p.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                return bad("proportions must be positive".into());
            }
        }
        if let DatasetConfig::Mixture(m) = &self.dataset {
            if m.preset != Preset::Custom && (m.k.is_some() || m.d.is_some() || m.mean_scale.is_some() || m.variance_fraction.is_some()) {
                return bad("k, d, mean_scale and variance_fraction need preset = \"custom\"".into());
            }
            if [m.clients, m.points_per_client].contains(&Some(0)) {
                return bad("clients and points_per_client must be positive".into());
            }
        }
        if let DatasetConfig::Import(i) = &self.dataset {
            if i.num_clients == 0 {
                return bad("num_clients must be positive".into());
            }
        }
        if let Some(e) = &self.elbow {
            if e.k_min == 0 || e.k_min > e.k_max || e.k_max > e.k_prime || !(e.eps > 0.0) {
                return bad("elbow needs 1 <= k_min <= k_max <= k_prime and eps > 0".into());
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&canonical)[..8])
    }
}
