//! Results files: records, Pareto front, a run manifest, and a timings sidecar.
//!
//! Everything except `timings.csv` is a pure function of the config and seeds,
//! so reruns reproduce those files byte for byte.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::error::{BenchError, Result};
use crate::pareto::ParetoFront;
use crate::record::{validate_records_json, RunRecord, CSV_COLUMNS, RECORDS_SCHEMA};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportPaths {
    pub records: PathBuf,
    pub front: PathBuf,
    pub manifest: PathBuf,
    pub timings: PathBuf,
    /// Written alongside JSON output only.
    pub schema: Option<PathBuf>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> BenchError {
    BenchError::Io(format!("{}: {e}", path.display()))
}

pub fn write_records_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record(r.csv_fields())?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_records_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(BenchError::Format(format!("{}: unexpected header", path.display())));
    }
    rdr.records().map(|row| RunRecord::from_csv_fields(&row?)).collect()
}

fn write_json(value: &Value, path: &Path) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(|e| io_err(path, e))
}

pub fn records_json(records: &[RunRecord]) -> Value {
    Value::Array(records.iter().map(RunRecord::to_json).collect())
}

fn write_timings(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["method", "grid_index", "seed", "wall_time_ms"])?;
    for r in records {
        w.write_record([r.method.name().to_string(), r.grid_index.to_string(), r.seed.to_string(), format!("{:?}", r.wall_time_ms)])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Fills in wall times from a timings sidecar, matched on (method, grid index, seed).
pub fn attach_timings(records: &mut [RunRecord], path: &Path) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let mut times = HashMap::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 4 {
            return Err(BenchError::Format(format!("{}: expected 4 columns", path.display())));
        }
        let t: f64 = row[3].parse().map_err(|_| BenchError::Format(format!("bad wall time {:?}", &row[3])))?;
        times.insert((row[0].to_string(), row[1].to_string(), row[2].to_string()), t);
    }
    for r in records.iter_mut() {
        if let Some(t) = times.get(&(r.method.name().to_string(), r.grid_index.to_string(), r.seed.to_string())) {
            r.wall_time_ms = *t;
        }
    }
    Ok(())
}

fn manifest(records: &[RunRecord], front: &ParetoFront, cfg: Option<&ExperimentConfig>, format: OutputFormat) -> Value {
    let seeds: Vec<u64> = match cfg {
        Some(c) => c.seeds.clone(),
        None => {
            let mut s: Vec<u64> = records.iter().map(|r| r.seed).collect();
            s.sort_unstable();
            s.dedup();
            s
        }
    };
    json!({
        "tool": "feddp-bench",
        "version": env!("CARGO_PKG_VERSION"),
        "format": match format { OutputFormat::Csv => "csv", OutputFormat::Json => "json" },
        "columns": CSV_COLUMNS,
        "config": cfg.map(|c| serde_json::to_value(c).expect("config serializes")),
        "config_hash": cfg.map(ExperimentConfig::hash),
        "delta_slack": cfg.map(|c| c.delta),
        "seeds": seeds,
        "records": records.len(),
        "front": front.records.len(),
    })
}

/// Writes `records.*`, `front.*`, `manifest.json` and `timings.csv` into `dir`
/// (created if missing). JSON output also writes `records.schema.json`.
pub fn export_results(records: &[RunRecord], front: &ParetoFront, cfg: Option<&ExperimentConfig>, dir: &Path, format: OutputFormat) -> Result<ExportPaths> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    let paths = ExportPaths {
        records: dir.join(format!("records.{ext}")),
        front: dir.join(format!("front.{ext}")),
        manifest: dir.join("manifest.json"),
        timings: dir.join("timings.csv"),
        schema: (format == OutputFormat::Json).then(|| dir.join("records.schema.json")),
    };
    match format {
        OutputFormat::Csv => {
            write_records_csv(records, &paths.records)?;
            write_records_csv(&front.records, &paths.front)?;
        }
        OutputFormat::Json => {
            let (r, f) = (records_json(records), records_json(&front.records));
            validate_records_json(&r)?;
            write_json(&r, &paths.records)?;
            write_json(&f, &paths.front)?;
            let schema = paths.schema.as_ref().expect("json output");
            std::fs::write(schema, format!("{RECORDS_SCHEMA}\n")).map_err(|e| io_err(schema, e))?;
        }
    }
    write_json(&manifest(records, front, cfg, format), &paths.manifest)?;
    write_timings(records, &paths.timings)?;
    Ok(paths)
}
