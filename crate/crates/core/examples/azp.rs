//! AZP local search, watching every accepted move.
//!
//! cargo run --release --example azp

use spatial_regimes::metrics::rand_index;
use spatial_regimes::solvers::solve_azp_observed;
use spatial_regimes::synthgen::{generate_suite, SchemeKind, SimulationSpec};
use spatial_regimes::SolverConfig;

fn main() -> spatial_regimes::Result<()> {
    let spec = SimulationSpec::standard(SchemeKind::Voronoi, 0.1, 3);
    let truth = generate_suite(&spec, 1)?.remove(0);
    let graph = spec.graph()?;
    let config = SolverConfig::new(5, 10).with_seed(11);

    let mut moves = 0;
    let result = solve_azp_observed(&truth.dataset, &graph, &config, &mut |ev| {
        moves += 1;
        if moves <= 5 {
            println!("pass {}: unit {} moves {} -> {}", ev.iteration, ev.unit, ev.from, ev.to);
        }
    })?;
    println!("{moves} moves over {} passes", result.iterations_used);
    println!("SSR trace head: {:?}", &result.trace[..result.trace.len().min(5)]);
    println!("final SSR {:.4}, RI {:.4}", result.total_ssr, rand_index(&truth.partition, &result.partition)?);
    Ok(())
}
