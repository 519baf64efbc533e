//! A small benchmark sweep: three algorithms on Rectangular suites at two
//! noise levels.
//!
//! cargo run --release --example benchmark

use spatial_regimes::harness::{run_benchmark, suite_label, BenchmarkConfig, BenchmarkSuite, Simulation};
use spatial_regimes::synthgen::{generate_suite, SchemeKind, SimulationSpec};
use spatial_regimes::Algorithm;

fn main() -> spatial_regimes::Result<()> {
    let mut suites = Vec::new();
    for sigma in [0.1, 0.3] {
        let spec = SimulationSpec::standard(SchemeKind::Rectangular, sigma, 2024);
        let graph = spec.graph()?;
        let simulations = generate_suite(&spec, 4)?
            .into_iter()
            .enumerate()
            .map(|(index, truth)| Simulation {
                index,
                truth,
                graph: graph.clone(),
            })
            .collect();
        suites.push(BenchmarkSuite {
            label: suite_label(&spec),
            simulations,
        });
    }
    let config = BenchmarkConfig {
        algorithms: Algorithm::ALL.to_vec(),
        p: 5,
        min_obs: 10,
        k: Some(20),
        max_iter: 1000,
        seed: 100,
        repeats: 2,
        standardize: false,
    };
    let outcome = run_benchmark(&suites, &config)?;
    println!("{:<22} {:<8} {:<10} {:>10}", "dataset", "algorithm", "metric", "mean");
    for (dataset, algorithm, metric, mean, _) in outcome.summary_rows() {
        if ["ssr", "rand_index", "nmi"].contains(&metric.as_str()) {
            println!("{dataset:<22} {algorithm:<8} {metric:<10} {mean:>10.4}");
        }
    }
    Ok(())
}
