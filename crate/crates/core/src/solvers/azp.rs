use std::time::Instant;

use rand::Rng;

use super::{grow_initial_partition, members_of, rng_from_seed, total_ssr, Algorithm, MoveEvent, SolveResult, SolverConfig};
use crate::error::Result;
use crate::graph::{region_frontier, AdjacencyGraph, ConnectivityScratch, Partition};
use crate::linreg::{fit_ols, region_ssr, Dataset, NormalEquations, RegionModel};

/// AZP: each pass visits regions in index order; a region absorbs one
/// randomly chosen neighboring unit among those whose move keeps the donor
/// above `min_obs`, keeps the donor connected, and lowers total SSR.
pub fn solve_azp(dataset: &Dataset, graph: &AdjacencyGraph, config: &SolverConfig) -> Result<SolveResult> {
    solve_azp_observed(dataset, graph, config, &mut |_| {})
}

/// [`solve_azp`] with a callback after every accepted move.
pub fn solve_azp_observed(
    dataset: &Dataset,
    graph: &AdjacencyGraph,
    config: &SolverConfig,
    observer: &mut dyn FnMut(&MoveEvent<'_>),
) -> Result<SolveResult> {
    config.validate(Algorithm::Azp, dataset, graph)?;
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
    let mut candidates = Vec::new();
    let mut iterations = 0;

    while iterations < config.max_iter {
        let mut stable = true;
        for j in 0..p {
            candidates.clear();
            for v in region_frontier(graph, &labels, j) {
                let donor = labels[v];
                if sizes[donor] <= config.min_obs {
                    continue;
                }
                if !scratch.connected_without(graph, &labels, donor, sizes[donor], v) {
                    continue;
                }
                let delta = move_delta(dataset, &labels, &models, v, donor, j);
                if delta < -config.ssr_tolerance {
                    candidates.push(v);
                }
            }
            if candidates.is_empty() {
                continue;
            }
            stable = false;
            let v = candidates[rng.random_range(0..candidates.len())];
            let donor = labels[v];
            let (x, y) = (dataset.row(v), dataset.y(v));
            models[j] = models[j].add_unit(x, y)?;
            models[donor] = models[donor].remove_unit(x, y)?;
            labels[v] = j;
            sizes[donor] -= 1;
            sizes[j] += 1;
            observer(&MoveEvent {
                iteration: iterations,
                unit: v,
                from: donor,
                to: j,
                labels: &labels,
                sizes: &sizes,
            });
        }
        iterations += 1;
        trace.push(total_ssr(dataset, &labels, &models));
        if stable {
            break;
        }
    }

    let partition = Partition::new(labels)?;
    let total = total_ssr(dataset, partition.labels(), &models);
    Ok(SolveResult {
        algorithm: Algorithm::Azp,
        partition,
        models,
        total_ssr: total,
        iterations_used: iterations,
        seed: config.seed,
        wall_time: start.elapsed(),
        trace,
    })
}

/// Change in total SSR from moving `unit` out of `donor` into `receiver`,
/// with both regions refit.
fn move_delta(
    dataset: &Dataset,
    labels: &[usize],
    models: &[RegionModel],
    unit: usize,
    donor: usize,
    receiver: usize,
) -> f64 {
    let (x, y) = (dataset.row(unit), dataset.y(unit));
    let gain = models[receiver]
        .ssr_increase_if_added(x, y)
        .unwrap_or_else(|| explicit_change(dataset, labels, &models[receiver], receiver, unit, true));
    let loss = models[donor]
        .ssr_decrease_if_removed(x, y)
        .unwrap_or_else(|| -explicit_change(dataset, labels, &models[donor], donor, unit, false));
    gain - loss
}

/// SSR change of `region` when `unit` joins (`add`) or leaves, by refitting
/// the changed member set.
fn explicit_change(
    dataset: &Dataset,
    labels: &[usize],
    model: &RegionModel,
    region: usize,
    unit: usize,
    add: bool,
) -> f64 {
    let mut members = members_of(labels, region);
    let before = region_ssr(model, dataset, &members);
    if add {
        members.push(unit);
    } else {
        members.retain(|&u| u != unit);
    }
    let refit = RegionModel::from_normal_equations(NormalEquations::from_members(dataset, &members));
    region_ssr(&refit, dataset, &members) - before
}
