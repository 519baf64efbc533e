//! Run orchestration and persisted records: seeded restarts, solve result
//! JSON, simulation suites on disk, and benchmark sweeps.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use indexmap::IndexMap;
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{AdjacencyGraph, Partition};
use crate::io;
use crate::linreg::{region_ssr, Dataset, RegionModel, Standardization};
use crate::metrics::{duration_secs, evaluate, EvaluationReport, TruthRef};
use crate::solvers::{solve, Algorithm, SolveResult, SolverConfig};
use crate::synthgen::{generate_suite, GroundTruth, SimulationSpec};

/// Version stamped into every JSON file written here.
pub const SCHEMA_VERSION: u32 = 1;

/// Where the adjacency structure comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjacencySource {
    EdgeList(PathBuf),
    Grid { rows: usize, cols: usize },
    Knn(usize),
}

impl AdjacencySource {
    /// From the two command-line tokens, e.g. `grid 25x25`.
    pub fn parse(kind: &str, value: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse adjacency {kind} {value:?}"));
        match kind.to_ascii_lowercase().as_str() {
            "edgelist" => Ok(AdjacencySource::EdgeList(PathBuf::from(value))),
            "grid" => {
                let (r, c) = value.to_ascii_lowercase().split_once('x').ok_or_else(bad).map(|(r, c)| (r.to_string(), c.to_string()))?;
                Ok(AdjacencySource::Grid {
                    rows: r.trim().parse().map_err(|_| bad())?,
                    cols: c.trim().parse().map_err(|_| bad())?,
                })
            }
            "knn" => Ok(AdjacencySource::Knn(value.parse().map_err(|_| bad())?)),
            other => Err(Error::InvalidConfig(format!(
                "unknown adjacency kind {other:?} (expected edgelist, grid or knn)"
            ))),
        }
    }

    pub fn build(&self, dataset: &Dataset) -> Result<AdjacencyGraph> {
        match self {
            AdjacencySource::EdgeList(path) => io::read_edge_list(path, dataset),
            AdjacencySource::Grid { rows, cols } => {
                if rows * cols != dataset.n() {
                    return Err(Error::SizeMismatch {
                        what: "grid cells",
                        got: rows * cols,
                        expected: dataset.n(),
                    });
                }
                AdjacencyGraph::grid(*rows, *cols)
            }
            AdjacencySource::Knn(k) => {
                let coords = dataset.coords().ok_or_else(|| {
                    Error::InvalidDataset("knn adjacency needs x_coord and y_coord columns".into())
                })?;
                AdjacencyGraph::knn(coords, *k)
            }
        }
    }
}

impl std::fmt::Display for AdjacencySource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AdjacencySource::EdgeList(p) => write!(f, "edgelist {}", p.display()),
            AdjacencySource::Grid { rows, cols } => write!(f, "grid {rows}x{cols}"),
            AdjacencySource::Knn(k) => write!(f, "knn {k}"),
        }
    }
}

impl FromStr for AdjacencySource {
    type Err = Error;

    /// `kind value` or `kind:value`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .trim()
            .split_once(|c: char| c == ':' || c.is_whitespace())
            .ok_or_else(|| Error::InvalidConfig(format!("cannot parse adjacency {s:?}")))?;
        Self::parse(kind, value.trim())
    }
}

/// Seed of restart `r` of a run seeded with `base`. Restart 0 uses `base`
/// itself.
pub fn restart_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Summary of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRun {
    pub seed: u64,
    pub total_ssr: f64,
    pub iterations_used: usize,
    pub wall_time_secs: f64,
}

/// Every restart of a multi-start solve.
#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub results: Vec<SolveResult>,
    /// Index of the lowest-SSR result; the earliest wins ties.
    pub best: usize,
}

impl RestartOutcome {
    pub fn best(&self) -> &SolveResult {
        &self.results[self.best]
    }

    pub fn runs(&self) -> Vec<RestartRun> {
        self.results
            .iter()
            .map(|r| RestartRun {
                seed: r.seed,
                total_ssr: r.total_ssr,
                iterations_used: r.iterations_used,
                wall_time_secs: duration_secs(r.wall_time),
            })
            .collect()
    }
}

/// Runs `repeats` independently seeded solves in parallel and keeps the one
/// with the lowest total SSR.
pub fn solve_with_restarts(
    algorithm: Algorithm,
    dataset: &Dataset,
    graph: &AdjacencyGraph,
    config: &SolverConfig,
    repeats: usize,
) -> Result<RestartOutcome> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    config.validate(algorithm, dataset, graph)?;
    let results = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let cfg = config.clone().with_seed(restart_seed(config.seed, r));
            solve(algorithm, dataset, graph, &cfg)
        })
        .collect::<Vec<Result<SolveResult>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    for (r, res) in results.iter().enumerate() {
        info!(
            "{algorithm} restart {r} seed {} ssr {:.6} iterations {} time {:.3}s",
            res.seed,
            res.total_ssr,
            res.iterations_used,
            duration_secs(res.wall_time)
        );
    }
    let best = (0..results.len())
        .min_by(|&a, &b| results[a].total_ssr.total_cmp(&results[b].total_ssr).then(a.cmp(&b)))
        .expect("at least one restart");
    Ok(RestartOutcome { results, best })
}

/// One region of a persisted solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub region: usize,
    pub size: usize,
    /// On the scale of the input data.
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Residual sum of squares on the scale the solver worked on.
    pub ssr: f64,
    pub degenerate: bool,
    /// `[intercept, coefficients..]` on the standardized scale, when the
    /// solve ran on standardized data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardized_params: Option<Vec<f64>>,
}

/// A solution as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub config: SolverConfig,
    pub seed: u64,
    pub standardized: bool,
    pub covariates: Vec<String>,
    pub total_ssr: f64,
    pub iterations_used: usize,
    pub wall_time_secs: f64,
    pub trace: Vec<f64>,
    /// Region of every unit, keyed by unit id, in input order.
    pub assignments: IndexMap<String, usize>,
    pub regions: Vec<RegionRecord>,
    pub restarts: Vec<RestartRun>,
}

impl SolveRecord {
    /// `dataset` is the input data; `standardization` is set when `result`
    /// was computed on its standardized copy `solved`.
    pub fn new(
        result: &SolveResult,
        config: &SolverConfig,
        dataset: &Dataset,
        solved: &Dataset,
        standardization: Option<&Standardization>,
        restarts: Vec<RestartRun>,
    ) -> Self {
        let regions = result
            .partition
            .regions()
            .iter()
            .zip(&result.models)
            .enumerate()
            .map(|(r, (members, model))| {
                let raw = match standardization {
                    Some(s) => s.to_raw(model.params()),
                    None => model.params().to_vec(),
                };
                RegionRecord {
                    region: r,
                    size: members.len(),
                    intercept: raw[0],
                    coefficients: raw[1..].to_vec(),
                    ssr: region_ssr(model, solved, members),
                    degenerate: model.is_degenerate(),
                    standardized_params: standardization.map(|_| model.params().to_vec()),
                }
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            algorithm: result.algorithm,
            config: SolverConfig {
                seed: result.seed,
                ..config.clone()
            },
            seed: result.seed,
            standardized: standardization.is_some(),
            covariates: dataset.covariate_names().to_vec(),
            total_ssr: result.total_ssr,
            iterations_used: result.iterations_used,
            wall_time_secs: duration_secs(result.wall_time),
            trace: result.trace.clone(),
            assignments: (0..dataset.n()).map(|u| (dataset.id(u), result.partition.label(u))).collect(),
            regions,
            restarts,
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        io::write_text(path, &serde_json::to_string_pretty(self)?)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let record: Self = serde_json::from_str(&io::read_text(path)?)
            .map_err(|e| Error::parse(path, e.to_string()))?;
        if record.schema_version != SCHEMA_VERSION {
            return Err(Error::parse(
                path,
                format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", record.schema_version),
            ));
        }
        Ok(record)
    }

    /// Partition over the units of `dataset`, which must be exactly the
    /// assigned units.
    pub fn partition(&self, dataset: &Dataset) -> Result<Partition> {
        if self.assignments.len() != dataset.n() {
            return Err(Error::SizeMismatch {
                what: "assigned units",
                got: self.assignments.len(),
                expected: dataset.n(),
            });
        }
        let labels = (0..dataset.n())
            .map(|u| {
                let id = dataset.id(u);
                self.assignments
                    .get(&id)
                    .copied()
                    .ok_or_else(|| Error::InvalidPartition(format!("unit {id:?} has no assignment")))
            })
            .collect::<Result<Vec<_>>>()?;
        let partition = Partition::new(labels)?;
        if partition.n_regions() != self.regions.len() {
            return Err(Error::InvalidPartition(format!(
                "assignments use {} regions but {} are described",
                partition.n_regions(),
                self.regions.len()
            )));
        }
        Ok(partition)
    }

    /// Region parameters on the scale the solver worked on.
    pub fn solved_params(&self) -> Vec<Vec<f64>> {
        self.regions
            .iter()
            .map(|r| match &r.standardized_params {
                Some(p) if self.standardized => p.clone(),
                _ => std::iter::once(r.intercept).chain(r.coefficients.iter().copied()).collect(),
            })
            .collect()
    }
}

/// Scores a persisted solution against known regimes. When the solve ran on
/// standardized data, SSR and coefficient errors are measured on the
/// standardized scale, with the true coefficients transformed to match.
pub fn evaluate_record(
    record: &SolveRecord,
    dataset: &Dataset,
    truth_partition: &Partition,
    truth_params: &[Vec<f64>],
) -> Result<EvaluationReport> {
    let partition = record.partition(dataset)?;
    let (scaled, truth_scaled);
    let (eval_data, eval_truth) = if record.standardized {
        let (d, s) = dataset.standardize()?;
        scaled = d;
        truth_scaled = truth_params.iter().map(|p| s.to_standardized(p)).collect::<Vec<_>>();
        (&scaled, truth_scaled.as_slice())
    } else {
        (dataset, truth_params)
    };
    let models = record
        .solved_params()
        .iter()
        .map(|p| RegionModel::from_params(p))
        .collect();
    let result = SolveResult {
        algorithm: record.algorithm,
        partition,
        models,
        total_ssr: record.total_ssr,
        iterations_used: record.iterations_used,
        seed: record.seed,
        wall_time: Duration::ZERO,
        trace: Vec::new(),
    };
    let truth = TruthRef {
        partition: truth_partition,
        params: eval_truth,
    };
    let mut report = evaluate(truth, &result, eval_data)?;
    report.runtime_secs = record.wall_time_secs;
    Ok(report)
}

/// Content hash and shape of an input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub path: PathBuf,
    pub n: usize,
    pub m: usize,
    pub adjacency: String,
    pub sha256: String,
}

impl DatasetFingerprint {
    pub fn of_file(path: &Path, dataset: &Dataset, adjacency: &AdjacencySource) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            n: dataset.n(),
            m: dataset.m(),
            adjacency: adjacency.to_string(),
            sha256: sha256_hex(&bytes),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance written next to every command's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<DatasetFingerprint>,
    pub started_unix_secs: f64,
    pub finished_unix_secs: f64,
}

impl RunManifest {
    pub fn start(command_line: Vec<String>, config: serde_json::Value) -> Self {
        let now = unix_now();
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command_line,
            config,
            inputs: Vec::new(),
            started_unix_secs: now,
            finished_unix_secs: now,
        }
    }

    pub fn finish_and_write(mut self, path: &Path) -> Result<()> {
        self.finished_unix_secs = unix_now();
        io::write_text(path, &serde_json::to_string_pretty(&self)?)
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Root manifest of a suite directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub schema_version: u32,
    pub label: String,
    pub spec: SimulationSpec,
    pub simulations: Vec<String>,
}

/// Manifest of one simulation directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationManifest {
    pub schema_version: u32,
    pub spec: SimulationSpec,
    pub simulation: usize,
    /// Generator seed and stream that reproduce this simulation.
    pub seed: u64,
    pub stream: u64,
}

/// A simulation loaded from disk.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub index: usize,
    pub truth: GroundTruth,
    pub graph: AdjacencyGraph,
}

pub const DATA_FILE: &str = "data.csv";
pub const EDGES_FILE: &str = "edges.txt";
pub const TRUTH_PARTITION_FILE: &str = "truth_partition.csv";
pub const TRUTH_COEFFICIENTS_FILE: &str = "truth_coefficients.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Default suite label, e.g. `rectangular-sigma0.1`.
pub fn suite_label(spec: &SimulationSpec) -> String {
    format!("{}-sigma{}", spec.scheme.name(), spec.sigma)
}

/// Generates a suite and writes it under `dir`, one `sim_NNN` directory per
/// simulation.
pub fn write_suite(dir: &Path, spec: &SimulationSpec, n_simulations: usize, label: Option<&str>) -> Result<SuiteManifest> {
    let suite = generate_suite(spec, n_simulations)?;
    io::create_dir(dir)?;
    let graph = spec.graph()?;
    let mut names = Vec::with_capacity(suite.len());
    for (i, truth) in suite.iter().enumerate() {
        let name = format!("sim_{i:03}");
        write_simulation(&dir.join(&name), spec, i, truth, &graph)?;
        names.push(name);
    }
    let manifest = SuiteManifest {
        schema_version: SCHEMA_VERSION,
        label: label.map_or_else(|| suite_label(spec), str::to_string),
        spec: spec.clone(),
        simulations: names,
    };
    io::write_text(&dir.join(MANIFEST_FILE), &serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn write_simulation(dir: &Path, spec: &SimulationSpec, index: usize, truth: &GroundTruth, graph: &AdjacencyGraph) -> Result<()> {
    io::create_dir(dir)?;
    io::write_dataset_csv(&dir.join(DATA_FILE), &truth.dataset)?;
    io::write_edge_list(
        &dir.join(EDGES_FILE),
        graph,
        &truth.dataset,
        &format!("rook adjacency on a {}x{} grid", spec.rows, spec.cols),
    )?;
    io::write_partition_csv(&dir.join(TRUTH_PARTITION_FILE), &truth.partition, &truth.dataset)?;
    io::write_coefficients_csv(&dir.join(TRUTH_COEFFICIENTS_FILE), &truth.params)?;
    let manifest = SimulationManifest {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        simulation: index,
        seed: spec.seed,
        stream: index as u64,
    };
    io::write_text(&dir.join(MANIFEST_FILE), &serde_json::to_string_pretty(&manifest)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&io::read_text(path)?).map_err(|e| Error::parse(path, e.to_string()))
}

/// Reads `data.csv`, `truth_partition.csv` and `truth_coefficients.csv`
/// from `dir`.
pub fn load_truth(dir: &Path) -> Result<GroundTruth> {
    let dataset = io::read_dataset_csv(&dir.join(DATA_FILE))?;
    let partition = io::read_partition_csv(&dir.join(TRUTH_PARTITION_FILE), &dataset)?;
    let params = io::read_coefficients_csv(&dir.join(TRUTH_COEFFICIENTS_FILE))?;
    if params.len() != partition.n_regions() {
        return Err(Error::SizeMismatch {
            what: "true region coefficients",
            got: params.len(),
            expected: partition.n_regions(),
        });
    }
    Ok(GroundTruth {
        partition,
        params,
        dataset,
    })
}

pub fn load_simulation(dir: &Path) -> Result<Simulation> {
    let manifest: SimulationManifest = read_json(&dir.join(MANIFEST_FILE))?;
    let truth = load_truth(dir)?;
    let graph = io::read_edge_list(&dir.join(EDGES_FILE), &truth.dataset)?;
    Ok(Simulation {
        index: manifest.simulation,
        truth,
        graph,
    })
}

pub fn load_suite(dir: &Path) -> Result<(SuiteManifest, Vec<Simulation>)> {
    let manifest: SuiteManifest = read_json(&dir.join(MANIFEST_FILE))?;
    let sims = manifest
        .simulations
        .iter()
        .map(|name| load_simulation(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, sims))
}

/// Settings shared by every run of a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub algorithms: Vec<Algorithm>,
    pub p: usize,
    pub min_obs: usize,
    /// K-Models micro-cluster count; `None` means `4 * p`.
    pub k: Option<usize>,
    pub max_iter: usize,
    /// Simulation `i` runs with seed `seed + i`.
    pub seed: u64,
    pub repeats: usize,
    pub standardize: bool,
}

impl BenchmarkConfig {
    pub fn solver_config(&self, simulation: usize) -> SolverConfig {
        SolverConfig {
            k: self.k,
            ..SolverConfig::new(self.p, self.min_obs)
                .with_max_iter(self.max_iter)
                .with_seed(self.seed.wrapping_add(simulation as u64))
        }
    }
}

/// One (suite, algorithm, simulation) run.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub simulation: usize,
    pub outcome: std::result::Result<(RestartOutcome, SolveRecord, EvaluationReport), String>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub config: BenchmarkConfig,
    pub runs: Vec<BenchmarkRun>,
}

/// A labelled set of simulations.
pub struct BenchmarkSuite {
    pub label: String,
    pub simulations: Vec<Simulation>,
}

/// Runs every algorithm on every simulation of every suite, simulations in
/// parallel. Failures are recorded per run rather than aborting the sweep.
pub fn run_benchmark(suites: &[BenchmarkSuite], config: &BenchmarkConfig) -> Result<BenchmarkOutcome> {
    if config.algorithms.is_empty() {
        return Err(Error::InvalidConfig("no algorithms selected".into()));
    }
    if config.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    let tasks: Vec<(&BenchmarkSuite, &Simulation)> = suites
        .iter()
        .flat_map(|s| s.simulations.iter().map(move |sim| (s, sim)))
        .collect();
    let runs: Vec<BenchmarkRun> = tasks
        .par_iter()
        .flat_map_iter(|&(suite, sim)| {
            config.algorithms.iter().map(move |&algorithm| BenchmarkRun {
                dataset: suite.label.clone(),
                algorithm,
                simulation: sim.index,
                outcome: benchmark_one(sim, algorithm, config).map_err(|e| e.to_string()),
            })
        })
        .collect();
    Ok(BenchmarkOutcome {
        config: config.clone(),
        runs,
    })
}

fn benchmark_one(
    sim: &Simulation,
    algorithm: Algorithm,
    config: &BenchmarkConfig,
) -> Result<(RestartOutcome, SolveRecord, EvaluationReport)> {
    let solver_config = config.solver_config(sim.index);
    let raw = &sim.truth.dataset;
    let standardized = if config.standardize { Some(raw.standardize()?) } else { None };
    let solved = standardized.as_ref().map_or(raw, |(d, _)| d);
    let outcome = solve_with_restarts(algorithm, solved, &sim.graph, &solver_config, config.repeats)?;
    let record = SolveRecord::new(
        outcome.best(),
        &solver_config,
        raw,
        solved,
        standardized.as_ref().map(|(_, s)| s),
        outcome.runs(),
    );
    let report = evaluate_record(&record, raw, &sim.truth.partition, &sim.truth.params)?;
    Ok((outcome, record, report))
}

impl BenchmarkOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &BenchmarkRun> {
        self.runs.iter().filter(|r| r.outcome.is_err())
    }

    /// Long-format `(dataset, algorithm, simulation, metric, value)` rows.
    pub fn metric_rows(&self) -> Vec<(String, Algorithm, usize, String, f64)> {
        let mut rows = Vec::new();
        for run in &self.runs {
            let Ok((_, record, report)) = &run.outcome else {
                continue;
            };
            let mut push = |metric: String, value: f64| {
                rows.push((run.dataset.clone(), run.algorithm, run.simulation, metric, value));
            };
            push("ssr".into(), report.total_ssr);
            push("rand_index".into(), report.rand_index);
            push("nmi".into(), report.nmi);
            for (c, v) in report.mae_per_coefficient.iter().enumerate() {
                push(format!("mae_b{c}"), *v);
            }
            push("regions".into(), report.region_count as f64);
            push("iterations".into(), record.iterations_used as f64);
        }
        rows
    }

    /// Mean of each metric per (dataset, algorithm), in first-seen order.
    pub fn summary_rows(&self) -> Vec<(String, Algorithm, String, f64, usize)> {
        let mut acc: IndexMap<(String, Algorithm, String), (f64, usize)> = IndexMap::new();
        for (dataset, algorithm, _, metric, value) in self.metric_rows() {
            let e = acc.entry((dataset, algorithm, metric)).or_insert((0.0, 0));
            e.0 += value;
            e.1 += 1;
        }
        acc.into_iter()
            .map(|((d, a, m), (sum, count))| (d, a, m, sum / count as f64, count))
            .collect()
    }

    /// Mean value of `metric` for `algorithm` across all suites.
    pub fn mean(&self, algorithm: Algorithm, metric: &str) -> Option<f64> {
        let values: Vec<f64> = self
            .metric_rows()
            .into_iter()
            .filter(|r| r.1 == algorithm && r.3 == metric)
            .map(|r| r.4)
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    /// Writes `benchmark.csv` and `summary.csv` (reproducible byte for byte
    /// from the same inputs and seeds), `timing.csv` with wall-clock seconds,
    /// and `failures.csv` when any run failed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::create_dir(dir)?;
        let mut w = csv::Writer::from_path(dir.join("benchmark.csv"))?;
        w.write_record(["dataset", "algorithm", "simulation", "metric", "value"])?;
        for (d, a, s, m, v) in self.metric_rows() {
            w.write_record([d, a.to_string(), s.to_string(), m, v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(dir.join("benchmark.csv"), e))?;

        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        w.write_record(["dataset", "algorithm", "metric", "mean", "runs"])?;
        for (d, a, m, mean, count) in self.summary_rows() {
            w.write_record([d, a.to_string(), m, mean.to_string(), count.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(dir.join("summary.csv"), e))?;

        let mut w = csv::Writer::from_path(dir.join("timing.csv"))?;
        w.write_record(["dataset", "algorithm", "simulation", "best_run_secs", "all_restarts_secs"])?;
        for run in &self.runs {
            if let Ok((outcome, record, _)) = &run.outcome {
                let total: f64 = outcome.results.iter().map(|r| duration_secs(r.wall_time)).sum();
                w.write_record([
                    run.dataset.clone(),
                    run.algorithm.to_string(),
                    run.simulation.to_string(),
                    record.wall_time_secs.to_string(),
                    total.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(dir.join("timing.csv"), e))?;

        if self.failures().next().is_some() {
            let mut w = csv::Writer::from_path(dir.join("failures.csv"))?;
            w.write_record(["dataset", "algorithm", "simulation", "error"])?;
            for run in self.failures() {
                let message = run.outcome.as_ref().err().cloned().unwrap_or_default();
                w.write_record([run.dataset.clone(), run.algorithm.to_string(), run.simulation.to_string(), message])?;
            }
            w.flush().map_err(|e| Error::io(dir.join("failures.csv"), e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::SchemeKind;

    #[test]
    fn adjacency_parsing() {
        assert_eq!(AdjacencySource::parse("grid", "25x25").unwrap(), AdjacencySource::Grid { rows: 25, cols: 25 });
        assert_eq!("knn:18".parse::<AdjacencySource>().unwrap(), AdjacencySource::Knn(18));
        assert_eq!(
            "edgelist a/b.txt".parse::<AdjacencySource>().unwrap(),
            AdjacencySource::EdgeList("a/b.txt".into())
        );
        assert!(AdjacencySource::parse("grid", "25").is_err());
        assert!(AdjacencySource::parse("queen", "1").is_err());
        let ds = Dataset::from_flat(4, 1, vec![0.0; 4], vec![0.0; 4]).unwrap();
        assert!(AdjacencySource::Grid { rows: 3, cols: 2 }.build(&ds).is_err());
        assert!(AdjacencySource::Knn(2).build(&ds).is_err());
    }

    #[test]
    fn restart_seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> = (0..100).map(|r| restart_seed(7, r)).collect();
        assert_eq!(seeds.len(), 100);
        assert_eq!(restart_seed(7, 0), 7);
    }

    #[test]
    fn best_restart_has_minimum_ssr() {
        let spec = SimulationSpec::standard(SchemeKind::Rectangular, 0.3, 11);
        let truth = &generate_suite(&spec, 1).unwrap()[0];
        let graph = spec.graph().unwrap();
        let config = SolverConfig::new(5, 10).with_seed(3);
        let outcome = solve_with_restarts(Algorithm::Azp, &truth.dataset, &graph, &config, 4).unwrap();
        let min = outcome.results.iter().map(|r| r.total_ssr).fold(f64::INFINITY, f64::min);
        assert_eq!(outcome.best().total_ssr, min);
        assert_eq!(outcome.runs().len(), 4);
        let single = solve(Algorithm::Azp, &truth.dataset, &graph, &config.clone().with_seed(restart_seed(3, 2))).unwrap();
        assert_eq!(single.total_ssr.to_bits(), outcome.results[2].total_ssr.to_bits());
    }

    #[test]
    fn record_round_trips_through_json() {
        let spec = SimulationSpec::standard(SchemeKind::Rectangular, 0.1, 2);
        let truth = &generate_suite(&spec, 1).unwrap()[0];
        let graph = spec.graph().unwrap();
        let config = SolverConfig::new(5, 10).with_k(20).with_seed(1);
        for standardize in [false, true] {
            let (solved, stdz) = if standardize {
                let (d, s) = truth.dataset.standardize().unwrap();
                (d, Some(s))
            } else {
                (truth.dataset.clone(), None)
            };
            let outcome = solve_with_restarts(Algorithm::KModels, &solved, &graph, &config, 1).unwrap();
            let record = SolveRecord::new(outcome.best(), &config, &truth.dataset, &solved, stdz.as_ref(), outcome.runs());
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("r.json");
            record.write_json(&path).unwrap();
            let back = SolveRecord::read_json(&path).unwrap();
            assert_eq!(back, record);
            let a = evaluate_record(&record, &truth.dataset, &truth.partition, &truth.params).unwrap();
            let b = evaluate_record(&back, &truth.dataset, &truth.partition, &truth.params).unwrap();
            assert_eq!(a, b);
            assert!((a.total_ssr - outcome.best().total_ssr).abs() < 1e-9 * (1.0 + a.total_ssr));
        }
    }

    #[test]
    fn raw_params_predict_like_standardized_ones() {
        let spec = SimulationSpec::standard(SchemeKind::Rectangular, 0.1, 4);
        let truth = &generate_suite(&spec, 1).unwrap()[0];
        let (solved, stdz) = truth.dataset.standardize().unwrap();
        let graph = spec.graph().unwrap();
        let config = SolverConfig::new(5, 10).with_seed(0);
        let result = solve(Algorithm::KModels, &solved, &graph, &config).unwrap();
        let record = SolveRecord::new(&result, &config, &truth.dataset, &solved, Some(&stdz), Vec::new());
        let region = &record.regions[0];
        let u = result.partition.members(0)[0];
        let raw_pred = region.intercept
            + region.coefficients.iter().zip(truth.dataset.row(u)).map(|(b, x)| b * x).sum::<f64>();
        let std_pred = result.models[0].predict(solved.row(u)).unwrap();
        let back = std_pred * stdz.y_sd + stdz.y_mean;
        assert!((raw_pred - back).abs() < 1e-9);
    }

    #[test]
    fn suite_round_trips_through_disk() {
        let spec = SimulationSpec::standard(SchemeKind::Voronoi, 0.2, 5);
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_suite(dir.path(), &spec, 3, None).unwrap();
        assert_eq!(manifest.label, "voronoi-sigma0.2");
        let (back, sims) = load_suite(dir.path()).unwrap();
        assert_eq!(back, manifest);
        let fresh = generate_suite(&spec, 3).unwrap();
        for (sim, truth) in sims.iter().zip(&fresh) {
            assert_eq!(&sim.truth, truth);
            assert_eq!(sim.graph, spec.graph().unwrap());
        }
    }

    #[test]
    fn benchmark_rejects_empty_algorithm_list() {
        let config = BenchmarkConfig {
            algorithms: vec![],
            p: 5,
            min_obs: 10,
            k: None,
            max_iter: 10,
            seed: 0,
            repeats: 1,
            standardize: false,
        };
        assert!(matches!(run_benchmark(&[], &config), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn benchmark_records_failures_per_run() {
        let spec = SimulationSpec::standard(SchemeKind::Rectangular, 0.1, 8);
        let suite = generate_suite(&spec, 2).unwrap();
        let graph = spec.graph().unwrap();
        let sims = suite
            .into_iter()
            .enumerate()
            .map(|(index, truth)| Simulation { index, truth, graph: graph.clone() })
            .collect();
        // 250 micro-clusters of three units do not fit on 625 cells
        let config = BenchmarkConfig {
            algorithms: vec![Algorithm::Azp, Algorithm::KModels],
            p: 5,
            min_obs: 10,
            k: Some(250),
            max_iter: 50,
            seed: 1,
            repeats: 1,
            standardize: false,
        };
        let outcome = run_benchmark(&[BenchmarkSuite { label: "r".into(), simulations: sims }], &config).unwrap();
        assert_eq!(outcome.runs.len(), 4);
        assert_eq!(outcome.failures().count(), 2);
        assert!(outcome.failures().all(|r| r.algorithm == Algorithm::KModels));
        assert!(outcome.mean(Algorithm::Azp, "rand_index").is_some());
        assert!(outcome.mean(Algorithm::KModels, "rand_index").is_none());
    }
}
