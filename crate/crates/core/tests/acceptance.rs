//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spatial_regimes::harness::{load_suite, run_benchmark, write_suite, BenchmarkConfig, BenchmarkOutcome, BenchmarkSuite};
use spatial_regimes::linreg::fit_ols;
use spatial_regimes::metrics::{mutual_information, rand_index};
use spatial_regimes::solvers::{solve_azp_observed, solve_regional_kmodels_observed};
use spatial_regimes::synthgen::{generate_point_scenario, SchemeKind, SimulationSpec};
use spatial_regimes::{solve, AdjacencyGraph, Algorithm, Dataset, Partition, SolveResult, SolverConfig};

const MASTER_SEED: u64 = 2024;
const SIMULATIONS: usize = 10;
const TRACE_TOLERANCE: f64 = 1e-9;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Writes a 10-simulation rectangular suite under `dir` and loads it back.
fn rectangular_suite(dir: &Path, sigma: f64) -> BenchmarkSuite {
    let spec = SimulationSpec::standard(SchemeKind::Rectangular, sigma, MASTER_SEED);
    write_suite(dir, &spec, SIMULATIONS, None).expect("suite written");
    let (manifest, simulations) = load_suite(dir).expect("suite loads");
    BenchmarkSuite {
        label: manifest.label,
        simulations,
    }
}

fn config(algorithm: Algorithm) -> BenchmarkConfig {
    BenchmarkConfig {
        algorithms: vec![algorithm],
        p: 5,
        min_obs: 10,
        k: Some(20),
        max_iter: 1000,
        seed: MASTER_SEED,
        repeats: 3,
        standardize: false,
    }
}

fn expect_no_failures(outcome: &BenchmarkOutcome) -> Option<String> {
    let failed: Vec<String> = outcome
        .failures()
        .map(|r| format!("{} sim {}: {}", r.algorithm, r.simulation, r.outcome.as_ref().err().unwrap()))
        .collect();
    (!failed.is_empty()).then(|| failed.join("; "))
}

fn trace_violations(result: &SolveResult) -> usize {
    result.trace.windows(2).filter(|w| w[1] > w[0] + TRACE_TOLERANCE).count()
}

fn partition_ok(partition: &Partition, graph: &AdjacencyGraph, p: usize, min_obs: usize) -> bool {
    partition.n_regions() == p
        && partition.sizes().iter().all(|&s| s >= min_obs)
        && partition.all_regions_connected(graph)
}

/// Solver runs collected from criteria 1-3 for the trace and constraint
/// checks.
#[derive(Default)]
struct RunLog {
    runs: usize,
    trace_violations: usize,
    constraint_failures: Vec<String>,
}

impl RunLog {
    fn absorb(&mut self, outcome: &BenchmarkOutcome, suite: &BenchmarkSuite) {
        for run in &outcome.runs {
            let Ok((restarts, _, _)) = &run.outcome else {
                continue;
            };
            let sim = suite.simulations.iter().find(|s| s.index == run.simulation).expect("simulation");
            for result in &restarts.results {
                self.runs += 1;
                self.trace_violations += trace_violations(result);
                if !partition_ok(&result.partition, &sim.graph, 5, 10) {
                    self.constraint_failures.push(format!(
                        "{} {} sim {} seed {}",
                        run.dataset, run.algorithm, run.simulation, result.seed
                    ));
                }
            }
        }
    }
}

fn criterion_1(outcome: &BenchmarkOutcome) -> Verdict {
    if let Some(f) = expect_no_failures(outcome) {
        return verdict(false, format!("runs failed: {f}"));
    }
    let ri = outcome.mean(Algorithm::KModels, "rand_index").unwrap_or(f64::NAN);
    let nmi = outcome.mean(Algorithm::KModels, "nmi").unwrap_or(f64::NAN);
    verdict(
        ri >= 0.90 && nmi >= 0.80,
        format!("rectangular sigma=0.1, K-Models best of 3: mean RI {ri:.4} (>= 0.90), mean NMI {nmi:.4} (>= 0.80)"),
    )
}

fn criterion_2(kmodels: &BenchmarkOutcome, azp: &BenchmarkOutcome, rkm: &BenchmarkOutcome) -> Verdict {
    for o in [azp, rkm] {
        if let Some(f) = expect_no_failures(o) {
            return verdict(false, format!("runs failed: {f}"));
        }
    }
    let k = kmodels.mean(Algorithm::KModels, "ssr").unwrap_or(f64::NAN);
    let a = azp.mean(Algorithm::Azp, "ssr").unwrap_or(f64::NAN);
    let r = rkm.mean(Algorithm::RegionalKModels, "ssr").unwrap_or(f64::NAN);
    verdict(
        k < a && k < r,
        format!("mean SSR K-Models {k:.2} < AZP {a:.2} and < Regional-K-Models {r:.2}"),
    )
}

fn criterion_3(outcome: &BenchmarkOutcome) -> Verdict {
    if let Some(f) = expect_no_failures(outcome) {
        return verdict(false, format!("runs failed: {f}"));
    }
    let ri = outcome.mean(Algorithm::KModels, "rand_index").unwrap_or(f64::NAN);
    verdict(ri >= 0.85, format!("rectangular sigma=0.3, K-Models: mean RI {ri:.4} (>= 0.85)"))
}

fn criterion_4(log: &RunLog) -> Verdict {
    verdict(
        log.trace_violations == 0 && log.runs > 0,
        format!(
            "{} solver runs, {} SSR trace increases beyond {TRACE_TOLERANCE:e}",
            log.runs, log.trace_violations
        ),
    )
}

/// Observed AZP and Regional-K-Models runs checking every region after
/// every accepted move.
fn instrumented_moves(suite: &BenchmarkSuite) -> (usize, Vec<String>) {
    let sim = &suite.simulations[0];
    let (data, graph) = (&sim.truth.dataset, &sim.graph);
    let config = SolverConfig::new(5, 10).with_seed(MASTER_SEED);
    let mut moves = 0;
    let mut problems = Vec::new();
    let mut check = |name: &str, labels: &[usize], sizes: &[usize], iteration: usize| {
        moves += 1;
        let partition = Partition::new(labels.to_vec()).expect("dense labels");
        if partition.sizes() != sizes {
            problems.push(format!("{name} move {moves}: reported sizes out of date"));
        }
        if !partition_ok(&partition, graph, 5, 10) {
            problems.push(format!("{name} iteration {iteration}: constraint violated after move {moves}"));
        }
    };
    let azp = solve_azp_observed(data, graph, &config, &mut |ev| check("azp", ev.labels, ev.sizes, ev.iteration));
    let rkm = solve_regional_kmodels_observed(data, graph, &config, &mut |ev| {
        check("rkm", ev.labels, ev.sizes, ev.iteration)
    });
    for (name, r) in [("azp", azp.err()), ("rkm", rkm.err())] {
        if let Some(e) = r {
            problems.push(format!("{name} failed: {e}"));
        }
    }
    (moves, problems)
}

fn criterion_5(log: &RunLog, suite: &BenchmarkSuite) -> Verdict {
    let (moves, problems) = instrumented_moves(suite);
    let pass = log.constraint_failures.is_empty() && problems.is_empty() && moves > 0;
    let mut detail = format!(
        "{} final partitions checked ({} bad); {moves} instrumented AZP/Regional-K-Models moves ({} bad)",
        log.runs,
        log.constraint_failures.len(),
        problems.len()
    );
    if let Some(first) = log.constraint_failures.first().or(problems.first()) {
        detail.push_str(&format!("; first: {first}"));
    }
    verdict(pass, detail)
}

/// Solves `A b = r` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut r: Vec<f64>) -> Vec<f64> {
    let d = r.len();
    for col in 0..d {
        let pivot = (col..d).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        r.swap(col, pivot);
        for row in col + 1..d {
            let f = a[row][col] / a[col][col];
            for c in col..d {
                a[row][c] -= f * a[col][c];
            }
            r[row] -= f * r[col];
        }
    }
    let mut b = vec![0.0; d];
    for row in (0..d).rev() {
        let s: f64 = (row + 1..d).map(|c| a[row][c] * b[c]).sum();
        b[row] = (r[row] - s) / a[row][row];
    }
    b
}

/// Reference OLS from explicitly accumulated normal equations.
fn reference_ols(data: &Dataset, members: &[usize]) -> Vec<f64> {
    let d = data.m() + 1;
    let mut xtx = vec![vec![0.0; d]; d];
    let mut xty = vec![0.0; d];
    for &u in members {
        let row: Vec<f64> = std::iter::once(1.0).chain(data.row(u).iter().copied()).collect();
        for i in 0..d {
            xty[i] += row[i] * data.y(u);
            for j in 0..d {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    gauss_solve(xtx, xty)
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Dataset {
    let beta: Vec<f64> = (0..=m).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut x = Vec::with_capacity(n * m);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let noise: f64 = rng.random_range(-0.5..0.5);
        y.push(beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>() + noise);
        x.extend(row);
    }
    Dataset::from_flat(n, m, x, y).expect("finite data")
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut worst_fit: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(10..=200);
        let m = rng.random_range(1..=5);
        let data = random_dataset(&mut rng, n, m);
        let all: Vec<usize> = (0..n).collect();
        let model = fit_ols(&data, &all).expect("well-conditioned fit");
        let reference = reference_ols(&data, &all);
        for (a, b) in model.params().iter().zip(&reference) {
            worst_fit = worst_fit.max((a - b).abs());
        }
    }

    let mut worst_update: f64 = 0.0;
    let sequences = 20;
    for _ in 0..sequences {
        let m = rng.random_range(1..=5);
        let n = 200;
        let data = random_dataset(&mut rng, n, m);
        let mut inside = vec![false; n];
        let mut members: Vec<usize> = rand::seq::index::sample(&mut rng, n, 4 * (m + 1)).into_vec();
        for &u in &members {
            inside[u] = true;
        }
        let mut model = fit_ols(&data, &members).expect("initial fit");
        for _ in 0..50 {
            let grow = members.len() <= m + 2 || rng.random_bool(0.5);
            if grow {
                let u = loop {
                    let u = rng.random_range(0..n);
                    if !inside[u] {
                        break u;
                    }
                };
                model = model.add_unit(data.row(u), data.y(u)).expect("add");
                inside[u] = true;
                members.push(u);
            } else {
                let idx = rng.random_range(0..members.len());
                let u = members.swap_remove(idx);
                model = model.remove_unit(data.row(u), data.y(u)).expect("remove");
                inside[u] = false;
            }
            let full = fit_ols(&data, &members).expect("refit");
            let scale = full.params().iter().fold(1.0_f64, |s, b| s.max(b.abs()));
            let err = model
                .params()
                .iter()
                .zip(full.params())
                .fold(0.0_f64, |e, (a, b)| e.max((a - b).abs()));
            worst_update = worst_update.max(err / scale);
        }
    }
    verdict(
        worst_fit <= 1e-8 && worst_update <= 1e-5,
        format!(
            "100 random fits: max coefficient gap {worst_fit:.2e} (<= 1e-8); {sequences} rank-one sequences of 50 steps: max relative gap {worst_update:.2e} (<= 1e-5)"
        ),
    )
}

/// All set partitions of `n` units as restricted growth strings.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for label in 0..=max + 1 {
            prefix.push(label);
            extend(prefix, max.max(label), n, out);
            prefix.pop();
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    extend(&mut vec![0], 0, n, &mut out);
    out
}

/// Pair counts `(tp, fn, fp, tn)` by direct enumeration.
fn pair_categories(a: &[usize], b: &[usize]) -> [usize; 4] {
    let mut c = [0; 4];
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let idx = match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            };
            c[idx] += 1;
        }
    }
    c
}

fn oracle_mi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ra = a.iter().max().map_or(0, |&x| x + 1);
    let rb = b.iter().max().map_or(0, |&x| x + 1);
    let mut mi = 0.0;
    for j in 0..ra {
        let size_a = a.iter().filter(|&&x| x == j).count() as f64;
        for k in 0..rb {
            let size_b = b.iter().filter(|&&x| x == k).count() as f64;
            let both = a.iter().zip(b).filter(|&(&x, &y)| x == j && y == k).count() as f64;
            if both > 0.0 {
                mi += both / n * (n * both / (size_a * size_b)).ln();
            }
        }
    }
    mi
}

fn criterion_7() -> Verdict {
    let mut pairs = 0usize;
    let mut worst_ri: f64 = 0.0;
    let mut worst_mi: f64 = 0.0;
    for n in 1..=8 {
        let labels = set_partitions(n);
        let parts: Vec<Partition> = labels.iter().map(|l| Partition::new(l.clone()).unwrap()).collect();
        for (la, pa) in labels.iter().zip(&parts) {
            for (lb, pb) in labels.iter().zip(&parts) {
                pairs += 1;
                let c = pair_categories(la, lb);
                let total = c.iter().sum::<usize>();
                let ri_oracle = if total == 0 { 1.0 } else { (c[0] + c[3]) as f64 / total as f64 };
                worst_ri = worst_ri.max((rand_index(pa, pb).unwrap() - ri_oracle).abs());
                worst_mi = worst_mi.max((mutual_information(pa, pb).unwrap() - oracle_mi(la, lb)).abs());
            }
        }
    }
    let truth = [0, 0, 1, 1];
    let estimate = [0, 1, 1, 1];
    let categories = pair_categories(&truth, &estimate);
    let figure = rand_index(
        &Partition::new(truth.to_vec()).unwrap(),
        &Partition::new(estimate.to_vec()).unwrap(),
    )
    .unwrap();
    verdict(
        worst_ri <= 1e-12 && worst_mi <= 1e-12 && categories == [1, 1, 2, 2] && figure == 0.5,
        format!(
            "{pairs} partition pairs (n <= 8): max RI gap {worst_ri:.1e}, max MI gap {worst_mi:.1e}; four-unit TP/FN/FP/TN = {categories:?}, RI = {figure}"
        ),
    )
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_default()
}

fn criterion_8(first_dir: &Path, scratch: &Path) -> Verdict {
    let suite_dir = scratch.join("rerun-suite");
    let out_dir = scratch.join("rerun-out");
    let suite = rectangular_suite(&suite_dir, 0.1);
    let rerun = match run_benchmark(std::slice::from_ref(&suite), &config(Algorithm::KModels)) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("rerun failed: {e}")),
    };
    if let Err(e) = rerun.write(&out_dir) {
        return verdict(false, format!("cannot write rerun: {e}"));
    }
    let mut compared = Vec::new();
    let mut differing = Vec::new();
    for name in ["benchmark.csv", "summary.csv"] {
        let (a, b) = (read(&first_dir.join("out").join(name)), read(&out_dir.join(name)));
        compared.push(name.to_string());
        if a.is_empty() || a != b {
            differing.push(name.to_string());
        }
    }
    for sim in 0..SIMULATIONS {
        for file in ["data.csv", "truth_partition.csv", "truth_coefficients.csv"] {
            let rel = format!("sim_{sim:03}/{file}");
            let (a, b) = (read(&first_dir.join("suite").join(&rel)), read(&suite_dir.join(&rel)));
            compared.push(rel.clone());
            if a.is_empty() || a != b {
                differing.push(rel);
            }
        }
    }
    verdict(
        differing.is_empty(),
        format!("{} files regenerated and compared byte for byte, {} differ {:?}", compared.len(), differing.len(), differing),
    )
}

fn criterion_9() -> Verdict {
    let start = Instant::now();
    let truth = match generate_point_scenario(20_000, 16, 5, 0.1, MASTER_SEED) {
        Ok(t) => t,
        Err(e) => return verdict(false, format!("generation failed: {e}")),
    };
    let graph = match AdjacencyGraph::knn(truth.dataset.coords().unwrap(), 18) {
        Ok(g) => g,
        Err(e) => return verdict(false, format!("knn graph failed: {e}")),
    };
    let (scaled, _) = truth.dataset.standardize().expect("non-constant columns");
    let config = SolverConfig::new(5, 20).with_k(10).with_seed(MASTER_SEED);
    let result = solve(Algorithm::KModels, &scaled, &graph, &config);
    let elapsed = start.elapsed().as_secs_f64();
    match result {
        Ok(r) => verdict(
            elapsed < 1800.0 && partition_ok(&r.partition, &graph, 5, 20),
            format!(
                "20000 points, 16 covariates, knn k=18: K-Models finished in {elapsed:.1}s (< 1800s), solve {:.1}s, SSR {:.2}, sizes {:?}",
                r.wall_time.as_secs_f64(),
                r.total_ssr,
                r.partition.sizes()
            ),
        ),
        Err(e) => verdict(false, format!("solve failed after {elapsed:.1}s: {e}")),
    }
}

fn report(number: usize, started: Instant, v: &Verdict) {
    println!(
        "criterion {number}: {} [{:.1}s] {}",
        if v.pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64(),
        v.detail
    );
}

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let first = scratch.path().join("first");
    let mut verdicts = Vec::new();

    let t = Instant::now();
    let low_noise = rectangular_suite(&first.join("suite"), 0.1);
    let kmodels = run_benchmark(std::slice::from_ref(&low_noise), &config(Algorithm::KModels)).expect("benchmark runs");
    kmodels.write(&first.join("out")).expect("benchmark written");
    let v1 = criterion_1(&kmodels);
    report(1, t, &v1);
    verdicts.push(v1);

    let t = Instant::now();
    let azp = run_benchmark(std::slice::from_ref(&low_noise), &config(Algorithm::Azp)).expect("benchmark runs");
    let rkm = run_benchmark(std::slice::from_ref(&low_noise), &config(Algorithm::RegionalKModels)).expect("benchmark runs");
    let v2 = criterion_2(&kmodels, &azp, &rkm);
    report(2, t, &v2);
    verdicts.push(v2);

    let t = Instant::now();
    let high_noise = rectangular_suite(&scratch.path().join("noisy"), 0.3);
    let noisy = run_benchmark(std::slice::from_ref(&high_noise), &config(Algorithm::KModels)).expect("benchmark runs");
    let v3 = criterion_3(&noisy);
    report(3, t, &v3);
    verdicts.push(v3);

    let mut log = RunLog::default();
    for outcome in [&kmodels, &azp, &rkm] {
        log.absorb(outcome, &low_noise);
    }
    log.absorb(&noisy, &high_noise);

    let t = Instant::now();
    let v4 = criterion_4(&log);
    report(4, t, &v4);
    verdicts.push(v4);

    let t = Instant::now();
    let v5 = criterion_5(&log, &low_noise);
    report(5, t, &v5);
    verdicts.push(v5);

    for (number, check) in [(6, criterion_6 as fn() -> Verdict), (7, criterion_7)] {
        let t = Instant::now();
        let v = check();
        report(number, t, &v);
        verdicts.push(v);
    }

    let t = Instant::now();
    let v8 = criterion_8(&first, scratch.path());
    report(8, t, &v8);
    verdicts.push(v8);

    let t = Instant::now();
    let v9 = criterion_9();
    report(9, t, &v9);
    verdicts.push(v9);

    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!("acceptance: {passed}/{} criteria passed", verdicts.len());
    if passed != verdicts.len() {
        std::process::exit(1);
    }
}
