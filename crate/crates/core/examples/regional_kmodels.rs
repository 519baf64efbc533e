//! Regional-K-Models on an arbitrary-shaped scheme.
//!
//! cargo run --release --example regional_kmodels

use spatial_regimes::metrics::{nmi, rand_index};
use spatial_regimes::synthgen::{generate_suite, SchemeKind, SimulationSpec};
use spatial_regimes::{solve, Algorithm, SolverConfig};

fn main() -> spatial_regimes::Result<()> {
    let spec = SimulationSpec::standard(SchemeKind::Arbitrary, 0.1, 5);
    let truth = generate_suite(&spec, 1)?.remove(0);
    let graph = spec.graph()?;
    for seed in 0..3 {
        let config = SolverConfig::new(5, 10).with_seed(seed);
        let result = solve(Algorithm::RegionalKModels, &truth.dataset, &graph, &config)?;
        println!(
            "seed {seed}: {} iterations, SSR {:.3}, RI {:.4}, NMI {:.4}, sizes {:?}",
            result.iterations_used,
            result.total_ssr,
            rand_index(&truth.partition, &result.partition)?,
            nmi(&truth.partition, &result.partition)?,
            result.partition.sizes()
        );
    }
    Ok(())
}
