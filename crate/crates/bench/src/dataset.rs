//! Builds the federated dataset for one seed.

use std::path::{Path, PathBuf};

use feddp_core::datagen::{
    build_federation, export_matrix, import_matrix, partition_clients, MatrixFormat, MixtureSpec, PartitionScheme, ScenarioSpec, DESK_MEAN_SCALE,
    DESK_VARIANCE_FRACTION,
};
use feddp_core::fed::ClientPartition;
use feddp_core::{Points, SeedStream};

use serde::{Deserialize, Serialize};

use crate::config::{DatasetConfig, ImportConfig, MatrixFileFormat, MixtureConfig, Preset};
use crate::error::{BenchError, Result};

/// Generating mixture and per-point component labels, in client order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub spec: MixtureSpec,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub partition: ClientPartition,
    pub server: Points,
    /// Union of the client data; costs are reported against it.
    pub all: Points,
    pub truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn new(partition: ClientPartition, server: Points, truth: Option<GroundTruth>) -> Self {
        let all = partition.union();
        Self { partition, server, all, truth }
    }
}

pub fn mixture_and_scenario(cfg: &MixtureConfig, seed: SeedStream) -> Result<(MixtureSpec, ScenarioSpec)> {
    let base = match cfg.preset {
        Preset::Reference => ScenarioSpec::reference(),
        Preset::Desk | Preset::Custom => ScenarioSpec::desk_scale(),
    };
    let scenario = ScenarioSpec {
        clients: cfg.clients.unwrap_or(base.clients),
        points_per_client: cfg.points_per_client.unwrap_or(base.points_per_client),
        server_per_component: cfg.server_per_component.unwrap_or(base.server_per_component),
        server_ood: cfg.server_ood.unwrap_or(base.server_ood),
        missing_components: cfg.missing_components.clone().unwrap_or(base.missing_components),
    };
    let spec_seed = seed.child("spec");
    let spec = match cfg.preset {
        Preset::Desk => MixtureSpec::desk(spec_seed)?,
        Preset::Reference => MixtureSpec::reference(spec_seed)?,
        Preset::Custom => {
            let k = cfg.k.ok_or_else(|| BenchError::Config("custom mixture needs k".into()))?;
            let d = cfg.d.ok_or_else(|| BenchError::Config("custom mixture needs d".into()))?;
            MixtureSpec::separated(
                k,
                d,
                scenario.num_points(),
                cfg.mean_scale.unwrap_or(DESK_MEAN_SCALE),
                cfg.variance_fraction.unwrap_or(DESK_VARIANCE_FRACTION),
                spec_seed,
            )?
        }
    };
    Ok((spec, scenario))
}

fn import(cfg: &ImportConfig, seed: SeedStream) -> Result<Dataset> {
    let fmt = match cfg.format {
        MatrixFileFormat::Csv => MatrixFormat::Csv,
        MatrixFileFormat::Binary => MatrixFormat::BinaryF64,
    };
    let points = import_matrix(&cfg.clients, fmt)?;
    let server = import_matrix(&cfg.server, fmt)?;
    if server.dim() != points.dim() {
        return Err(BenchError::Config(format!("server dimension {} differs from client dimension {}", server.dim(), points.dim())));
    }
    let unlabeled = vec![0; points.len()];
    let split = partition_clients(&points, &unlabeled, cfg.num_clients, &PartitionScheme::Iid, seed.child("data"))?;
    Ok(Dataset::new(split.partition, server, None))
}

/// Mixture data comes from `seed/spec` (means) and `seed/data` (samples,
/// partition, server set).
pub fn build_dataset(cfg: &DatasetConfig, seed: u64) -> Result<Dataset> {
    let seed = SeedStream::new(seed);
    match cfg {
        DatasetConfig::Mixture(m) => {
            let (spec, scenario) = mixture_and_scenario(m, seed)?;
            let fed = build_federation(&spec, &scenario, seed.child("data"))?;
            let labels = fed.clients.all_labels();
            Ok(Dataset::new(fed.clients.partition, fed.server, Some(GroundTruth { spec: fed.spec, labels })))
        }
        DatasetConfig::Import(i) => import(i, seed),
    }
}

/// `gen-data` input: a dataset section plus the seed and matrix format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: MatrixFileFormat,
    #[serde(default)]
    pub dataset: DatasetConfig,
}

impl GenDataSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }
}

/// Writes `clients.*` (all client points in client order), `server.*`,
/// `client_index.csv` (owning client of every row) and, for generated data,
/// `labels.csv` and `means.*`. Returns the written paths.
pub fn write_dataset(data: &Dataset, dir: &Path, format: MatrixFileFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::Io(format!("{}: {e}", dir.display())))?;
    let (fmt, ext) = match format {
        MatrixFileFormat::Csv => (MatrixFormat::Csv, "csv"),
        MatrixFileFormat::Binary => (MatrixFormat::BinaryF64, "bin"),
    };
    let mut written = Vec::new();
    let mut matrix = |name: &str, p: &Points| -> Result<()> {
        let path = dir.join(format!("{name}.{ext}"));
        export_matrix(p, &path, fmt)?;
        written.push(path);
        Ok(())
    };
    matrix("clients", &data.all)?;
    matrix("server", &data.server)?;
    if let Some(t) = &data.truth {
        matrix("means", &t.spec.means)?;
    }
    let lines = |name: &str, values: Vec<usize>| -> Result<PathBuf> {
        let path = dir.join(name);
        let mut text = String::with_capacity(values.len() * 3);
        for v in values {
            text.push_str(&v.to_string());
            text.push('\n');
        }
        std::fs::write(&path, text).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    };
    let owners: Vec<usize> = data.partition.clients().iter().enumerate().flat_map(|(j, c)| std::iter::repeat_n(j, c.len())).collect();
    written.push(lines("client_index.csv", owners)?);
    if let Some(t) = &data.truth {
        written.push(lines("labels.csv", t.labels.clone())?);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use feddp_core::datagen::DESK_POINTS;

    #[test]
    fn desk_preset_shapes() {
        let d = build_dataset(&DatasetConfig::default(), 3).unwrap();
        assert_eq!(d.partition.num_clients(), 20);
        assert_eq!(d.all.len(), DESK_POINTS);
        assert_eq!(d.server.len(), 5 * 20 + 100);
        assert_eq!(d.truth.as_ref().unwrap().labels.len(), DESK_POINTS);
        assert_eq!(build_dataset(&DatasetConfig::default(), 3).unwrap(), d);
    }

    #[test]
    fn overrides_and_custom() {
        let cfg = MixtureConfig {
            preset: Preset::Custom,
            k: Some(3),
            d: Some(4),
            clients: Some(2),
            points_per_client: Some(50),
            server_ood: Some(0),
            missing_components: Some(vec![1]),
            ..MixtureConfig::default()
        };
        let d = build_dataset(&DatasetConfig::Mixture(cfg), 0).unwrap();
        assert_eq!((d.all.len(), d.all.dim(), d.server.len()), (100, 4, 40));
        let missing = MixtureConfig { preset: Preset::Custom, d: Some(4), ..MixtureConfig::default() };
        assert!(build_dataset(&DatasetConfig::Mixture(missing), 0).is_err());
    }

    #[test]
    fn import_splits_clients() {
        let dir = tempfile::tempdir().unwrap();
        let pts = Points::from_flat((0..40).map(f64::from).collect(), 2).unwrap();
        let (c, s) = (dir.path().join("c.bin"), dir.path().join("s.bin"));
        export_matrix(&pts, &c, MatrixFormat::BinaryF64).unwrap();
        export_matrix(&pts.select(&[0, 1]), &s, MatrixFormat::BinaryF64).unwrap();
        let cfg = ImportConfig { clients: c, server: s, format: MatrixFileFormat::Binary, num_clients: 3 };
        let d = build_dataset(&DatasetConfig::Import(cfg.clone()), 1).unwrap();
        assert_eq!((d.partition.num_clients(), d.all.len(), d.server.len()), (3, 20, 2));
        assert!(d.truth.is_none());
        let gone = ImportConfig { clients: dir.path().join("nope.csv"), ..cfg };
        assert_eq!(build_dataset(&DatasetConfig::Import(gone), 1).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn gen_data_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GenDataSpec::from_toml("seed = 2\n[dataset]\nsource = \"mixture\"\npreset = \"custom\"\nk = 2\nd = 3\nclients = 2\npoints_per_client = 5\n").unwrap();
        let data = build_dataset(&spec.dataset, spec.seed).unwrap();
        let files = write_dataset(&data, dir.path(), spec.format).unwrap();
        assert_eq!(files.len(), 5);
        assert_eq!(import_matrix(&files[0], MatrixFormat::Csv).unwrap(), data.all);
        let owners = std::fs::read_to_string(dir.path().join("client_index.csv")).unwrap();
        assert_eq!(owners.lines().collect::<Vec<_>>(), vec!["0"; 5].into_iter().chain(vec!["1"; 5]).collect::<Vec<_>>());
        assert!(GenDataSpec::from_toml("seed = \"x\"").is_err());
    }
}
