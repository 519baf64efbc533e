//! The `regimes` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid input, 3 infeasible request, 4 some
//! benchmark runs failed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{
    evaluate_record, load_suite, load_truth, run_benchmark, sha256_hex, solve_with_restarts, write_suite,
    AdjacencySource, BenchmarkConfig, BenchmarkSuite, DatasetFingerprint, RunManifest, Simulation, SolveRecord,
    SuiteManifest, DATA_FILE, MANIFEST_FILE,
};
use crate::io;
use crate::solvers::{Algorithm, SolverConfig, DEFAULT_MAX_ITER};
use crate::synthgen::{SchemeKind, SimulationSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_PARTIAL_FAILURE: i32 = 4;

const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "regimes", version, about = "Delineate spatially connected regression regimes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition a dataset into p regimes.
    Solve(SolveArgs),
    /// Generate a suite of synthetic lattice simulations.
    Synth(SynthArgs),
    /// Score a solution against known regimes.
    Eval(EvalArgs),
    /// Run algorithms over simulation suites and aggregate metrics.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct SolverFlags {
    /// Number of regions.
    #[arg(long)]
    pub p: usize,
    /// Minimum units per region.
    #[arg(long = "min-obs")]
    pub min_obs: usize,
    /// K-Models micro-cluster count (default 4p).
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long = "max-iter", default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent restarts; the lowest-SSR solution is kept.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Z-score covariates and response before solving.
    #[arg(long)]
    pub standardize: bool,
}

impl SolverFlags {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            k: self.k,
            ..SolverConfig::new(self.p, self.min_obs)
                .with_max_iter(self.max_iter)
                .with_seed(self.seed)
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Data CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// `edgelist PATH`, `grid ROWSxCOLS` or `knn K`.
    #[arg(long, num_args = 2, value_names = ["KIND", "VALUE"])]
    pub adjacency: Vec<String>,
    /// kmodels, azp or rkm.
    #[arg(long)]
    pub algorithm: Algorithm,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Also write `assignments.csv`.
    #[arg(long)]
    pub assignments: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// rectangular, voronoi or arbitrary.
    #[arg(long)]
    pub scheme: SchemeKind,
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 25)]
    pub rows: usize,
    #[arg(long, default_value_t = 25)]
    pub cols: usize,
    #[arg(long, default_value_t = 5)]
    pub regions: usize,
    #[arg(long = "min-region-units", default_value_t = 10)]
    pub min_region_units: usize,
    /// Coefficient values, one per region.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,-1,0,1,2")]
    pub pool: Vec<f64>,
    /// Name used for this suite in benchmark output.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory with data.csv, truth_partition.csv and truth_coefficients.csv.
    #[arg(long)]
    pub truth: PathBuf,
    /// Solution JSON written by `solve`.
    #[arg(long)]
    pub result: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Suite directory written by `synth`; repeatable.
    #[arg(long, required = true)]
    pub suite: Vec<PathBuf>,
    /// Comma-separated algorithm names.
    #[arg(long, value_delimiter = ',', default_value = "kmodels,azp,rkm")]
    pub algorithms: Vec<String>,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long)]
    pub output: PathBuf,
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let command_line = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a, command_line),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Benchmark(a) => cmd_benchmark(a, command_line),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn adjacency_from(tokens: &[String]) -> Result<AdjacencySource> {
    match tokens {
        [kind, value] => AdjacencySource::parse(kind, value),
        _ => Err(Error::InvalidConfig(
            "exactly one --adjacency source is required: edgelist PATH, grid ROWSxCOLS or knn K".into(),
        )),
    }
}

pub fn cmd_solve(args: &SolveArgs, command_line: Vec<String>) -> Result<i32> {
    let adjacency = adjacency_from(&args.adjacency)?;
    let config = args.solver.config();
    let mut manifest = RunManifest::start(command_line, serde_json::json!({
        "algorithm": args.algorithm,
        "solver": config,
        "repeats": args.solver.repeats,
        "standardize": args.solver.standardize,
    }));
    let dataset = io::read_dataset_csv(&args.data)?;
    let graph = adjacency.build(&dataset)?;
    manifest.inputs.push(DatasetFingerprint::of_file(&args.data, &dataset, &adjacency)?);
    if let AdjacencySource::EdgeList(path) = &adjacency {
        manifest.inputs.push(DatasetFingerprint::of_file(path, &dataset, &adjacency)?);
    }
    let standardized = if args.solver.standardize { Some(dataset.standardize()?) } else { None };
    let solved = standardized.as_ref().map_or(&dataset, |(d, _)| d);
    let outcome = solve_with_restarts(args.algorithm, solved, &graph, &config, args.solver.repeats)?;
    let best = outcome.best();
    let record = SolveRecord::new(best, &config, &dataset, solved, standardized.as_ref().map(|(_, s)| s), outcome.runs());

    io::create_dir(&args.output)?;
    record.write_json(&args.output.join("result.json"))?;
    if args.assignments {
        io::write_partition_csv(&args.output.join("assignments.csv"), &best.partition, &dataset)?;
    }
    manifest.finish_and_write(&args.output.join(RUN_MANIFEST))?;

    println!(
        "{}: {} regions, total SSR {:.6}{} (seed {}, {} iterations, {:.3}s)",
        args.algorithm,
        best.partition.n_regions(),
        best.total_ssr,
        if record.standardized { " on standardized data" } else { "" },
        best.seed,
        best.iterations_used,
        record.wall_time_secs,
    );
    if record.restarts.len() > 1 {
        let ssrs: Vec<String> = record.restarts.iter().map(|r| format!("{:.6}", r.total_ssr)).collect();
        println!("restart SSRs: {}", ssrs.join(" "));
    }
    for r in &record.regions {
        println!("  region {}: {} units, intercept {:.4}, coefficients {:?}", r.region, r.size, r.intercept, r.coefficients);
    }
    println!("wrote {}", args.output.display());
    Ok(EXIT_OK)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<i32> {
    let spec = SimulationSpec {
        rows: args.rows,
        cols: args.cols,
        scheme: args.scheme,
        region_count: args.regions,
        min_region_units: args.min_region_units,
        sigma: args.sigma,
        coefficient_pool: args.pool.clone(),
        seed: args.seed,
    };
    let manifest = write_suite(&args.output, &spec, args.count, args.label.as_deref())?;
    println!(
        "{}: {} simulations on a {}x{} grid written to {}",
        manifest.label,
        manifest.simulations.len(),
        spec.rows,
        spec.cols,
        args.output.display()
    );
    Ok(EXIT_OK)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<i32> {
    let truth = load_truth(&args.truth)?;
    let record = SolveRecord::read_json(&args.result)?;
    let report = evaluate_record(&record, &truth.dataset, &truth.partition, &truth.params)?;
    let json = serde_json::to_string_pretty(&report)?;
    match &args.output {
        Some(path) => {
            io::write_text(path, &json)?;
            println!(
                "SSR {:.6}, RI {:.4}, NMI {:.4}, MAE {:?}",
                report.total_ssr, report.rand_index, report.nmi, report.mae_per_coefficient
            );
        }
        None => println!("{json}"),
    }
    Ok(EXIT_OK)
}

pub fn cmd_benchmark(args: &BenchmarkArgs, command_line: Vec<String>) -> Result<i32> {
    let algorithms = args
        .algorithms
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<Algorithm>())
        .collect::<Result<Vec<_>>>()?;
    let config = BenchmarkConfig {
        algorithms,
        p: args.solver.p,
        min_obs: args.solver.min_obs,
        k: args.solver.k,
        max_iter: args.solver.max_iter,
        seed: args.solver.seed,
        repeats: args.solver.repeats,
        standardize: args.solver.standardize,
    };
    if config.algorithms.is_empty() {
        return Err(Error::InvalidConfig("no algorithms selected".into()));
    }
    let mut manifest = RunManifest::start(command_line, serde_json::to_value(&config)?);
    let mut suites = Vec::with_capacity(args.suite.len());
    for dir in &args.suite {
        let (suite_manifest, simulations) = load_suite(dir)?;
        manifest.inputs.push(suite_fingerprint(dir, &suite_manifest, &simulations)?);
        suites.push(BenchmarkSuite {
            label: suite_manifest.label,
            simulations,
        });
    }
    let outcome = run_benchmark(&suites, &config)?;
    outcome.write(&args.output)?;
    manifest.finish_and_write(&args.output.join(RUN_MANIFEST))?;

    println!("{:<28} {:<8} {:>12} {:>8} {:>8}", "dataset", "algorithm", "mean SSR", "RI", "NMI");
    let summary = outcome.summary_rows();
    for suite in &suites {
        for &algorithm in &config.algorithms {
            let mean = |metric: &str| {
                summary
                    .iter()
                    .find(|r| r.0 == suite.label && r.1 == algorithm && r.2 == metric)
                    .map_or(f64::NAN, |r| r.3)
            };
            println!(
                "{:<28} {:<8} {:>12.4} {:>8.4} {:>8.4}",
                suite.label,
                algorithm,
                mean("ssr"),
                mean("rand_index"),
                mean("nmi")
            );
        }
    }
    let failed = outcome.failures().count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed; see failures.csv", outcome.runs.len());
        return Ok(EXIT_PARTIAL_FAILURE);
    }
    Ok(EXIT_OK)
}

/// Hash of a suite's manifest together with every simulation's data file.
fn suite_fingerprint(dir: &Path, suite: &SuiteManifest, sims: &[Simulation]) -> Result<DatasetFingerprint> {
    let mut bytes = io::read_text(&dir.join(MANIFEST_FILE))?.into_bytes();
    for name in &suite.simulations {
        bytes.extend(io::read_text(&dir.join(name).join(DATA_FILE))?.into_bytes());
    }
    Ok(DatasetFingerprint {
        path: dir.to_path_buf(),
        n: sims.first().map_or(0, |s| s.truth.dataset.n()),
        m: sims.first().map_or(0, |s| s.truth.dataset.m()),
        adjacency: format!("suite {}", suite.label),
        sha256: sha256_hex(&bytes),
    })
}
