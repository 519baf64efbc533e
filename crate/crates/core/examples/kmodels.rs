//! Two-stage K-Models on one synthetic simulation, stage by stage and then
//! with restarts.
//!
//! cargo run --release --example kmodels

use spatial_regimes::harness::solve_with_restarts;
use spatial_regimes::metrics::{nmi, rand_index};
use spatial_regimes::solvers::{kmodels_merge_stage, kmodels_partition_stage, rng_from_seed};
use spatial_regimes::synthgen::{generate_suite, SchemeKind, SimulationSpec};
use spatial_regimes::{Algorithm, SolverConfig};

fn main() -> spatial_regimes::Result<()> {
    let spec = SimulationSpec::standard(SchemeKind::Rectangular, 0.1, 42);
    let truth = generate_suite(&spec, 1)?.remove(0);
    let graph = spec.graph()?;
    let config = SolverConfig::new(5, 10).with_k(20).with_seed(7);

    let micro = kmodels_partition_stage(&truth.dataset, &graph, &config, &mut rng_from_seed(config.seed))?;
    println!(
        "partition stage: {} iterations, SSR {:.3} -> {:.3}",
        micro.iterations,
        micro.trace[0],
        micro.trace.last().unwrap()
    );
    let (partition, _models) = kmodels_merge_stage(&truth.dataset, &graph, &micro.partition, &config)?;
    println!("merged into {} regions of sizes {:?}", partition.n_regions(), partition.sizes());

    let outcome = solve_with_restarts(Algorithm::KModels, &truth.dataset, &graph, &config, 3)?;
    for run in outcome.runs() {
        println!("restart seed {:>20}: SSR {:.4}", run.seed, run.total_ssr);
    }
    let best = outcome.best();
    println!(
        "best: SSR {:.4}, RI {:.4}, NMI {:.4}",
        best.total_ssr,
        rand_index(&truth.partition, &best.partition)?,
        nmi(&truth.partition, &best.partition)?
    );
    for (r, model) in best.models.iter().enumerate() {
        println!("region {r}: {:?}", model.params());
    }
    Ok(())
}
