use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use feddp_bench::export::{export_results, read_records_csv, write_records_csv};
use feddp_bench::{
    build_dataset, elbow_from_config, elbow_locator, pareto_front, run_experiment, write_dataset, BenchError, ExperimentConfig, GenDataSpec, Result,
    THREADS_ENV,
};

#[derive(Parser)]
#[command(name = "bench", version, about = "Budget sweeps and Pareto fronts for federated private k-means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid point and seed of an experiment config and export the results.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce a records CSV to its Pareto front.
    Pareto {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Elbow scan on the first seed, using the config's [elbow] section.
    Elbow {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a dataset and write it as matrix files.
    GenData {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| BenchError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| BenchError::Config(e.to_string()))
}

fn run(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("results").join(&cfg.name));
    let records = run_experiment(&cfg)?;
    let front = pareto_front(&records)?;
    let paths = export_results(&records, &front, Some(&cfg), &dir, cfg.format)?;
    println!("{}: {} runs, {} on the Pareto front (config {})", cfg.name, records.len(), front.records.len(), cfg.hash());
    for r in &front.records {
        println!("  eps_total {:>10.4}  cost {:.6e}  grid {} seed {}", r.eps_total, r.cost, r.grid_index, r.seed);
    }
    println!("records: {}", paths.records.display());
    Ok(())
}

fn pareto(input: &Path, out: &Path) -> Result<()> {
    let records = read_records_csv(input)?;
    let front = pareto_front(&records)?;
    write_records_csv(&front.records, out)?;
    println!("{} of {} records on the front", front.records.len(), records.len());
    Ok(())
}

fn elbow(config: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let curve = elbow_from_config(&cfg)?;
    println!("k,cost");
    for (k, c) in &curve.costs {
        println!("{k},{c:?}");
    }
    match elbow_locator(&curve.costs) {
        Some(k) => println!("elbow at k = {k}"),
        None => println!("elbow undefined for a single k"),
    }
    Ok(())
}

fn gen_data(spec: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec).map_err(|e| BenchError::Io(format!("{}: {e}", spec.display())))?;
    let spec = GenDataSpec::from_toml(&text)?;
    let data = build_dataset(&spec.dataset, spec.seed)?;
    for p in write_dataset(&data, out, spec.format)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Pareto { input, out } => pareto(&input, &out),
        Command::Elbow { config } => elbow(&config),
        Command::GenData { spec, out } => gen_data(&spec, &out),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
