use std::time::Instant;

use rand::Rng;

use super::{best_region, grow_initial_partition, members_of, rng_from_seed, total_ssr, Algorithm, MoveEvent, SolveResult, SolverConfig};
use crate::error::Result;
use crate::graph::{AdjacencyGraph, ConnectivityScratch, Partition};
use crate::linreg::{fit_ols, Dataset};

/// Regional-K-Models: per iteration, collect units whose best-fitting model
/// belongs to another region that touches them, whose donor stays above
/// `min_obs` and connected without them; relocate one at random and refit
/// both affected regions.
pub fn solve_regional_kmodels(dataset: &Dataset, graph: &AdjacencyGraph, config: &SolverConfig) -> Result<SolveResult> {
    solve_regional_kmodels_observed(dataset, graph, config, &mut |_| {})
}

/// [`solve_regional_kmodels`] with a callback after every accepted move.
pub fn solve_regional_kmodels_observed(
    dataset: &Dataset,
    graph: &AdjacencyGraph,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&MoveEvent<'_>),
) -> Result<SolveResult> {
    config.validate(Algorithm::RegionalKModels, dataset, graph)?;
    let start = Instant::now();
    let mut rng = rng_from_seed(config.seed);
    let p = config.p;
    let initial = grow_initial_partition(graph, p, config.min_obs, config.restart_limit, &mut rng)?;
    let mut labels = initial.labels().to_vec();
    let mut sizes = initial.sizes();
    let mut models = (0..p)
        .map(|j| fit_ols(dataset, &members_of(&labels, j)))
        .collect::<Result<Vec<_>>>()?;
    let mut trace = vec![total_ssr(dataset, &labels, &models)];
    let mut scratch = ConnectivityScratch::new(dataset.n());
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    let mut iterations = 0;

    while iterations < config.max_iter {
        candidates.clear();
        for unit in 0..dataset.n() {
            let donor = labels[unit];
            if sizes[donor] <= config.min_obs {
                continue;
            }
            let target = best_region(&models, dataset.row(unit), dataset.y(unit), donor);
            if target == donor {
                continue;
            }
            // the receiving region must touch the unit to stay connected
            if !graph.neighbors(unit).iter().any(|&v| labels[v] == target) {
                continue;
            }
            if !scratch.connected_without(graph, &labels, donor, sizes[donor], unit) {
                continue;
            }
            candidates.push((unit, target));
        }
        iterations += 1;
        if candidates.is_empty() {
            trace.push(*trace.last().expect("trace starts non-empty"));
            break;
        }
        let (unit, target) = candidates[rng.random_range(0..candidates.len())];
        let donor = labels[unit];
        labels[unit] = target;
        sizes[donor] -= 1;
        sizes[target] += 1;
        models[donor] = fit_ols(dataset, &members_of(&labels, donor))?;
        models[target] = fit_ols(dataset, &members_of(&labels, target))?;
        observer(&MoveEvent {
            iteration: iterations - 1,
            unit,
            from: donor,
            to: target,
            labels: &labels,
            sizes: &sizes,
        });
        trace.push(total_ssr(dataset, &labels, &models));
    }

    let partition = Partition::new(labels)?;
    let total = total_ssr(dataset, partition.labels(), &models);
    Ok(SolveResult {
        algorithm: Algorithm::RegionalKModels,
        partition,
        models,
        total_ssr: total,
        iterations_used: iterations,
        seed: config.seed,
        wall_time: start.elapsed(),
        trace,
    })
}
