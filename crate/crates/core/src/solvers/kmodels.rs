//! Two-stage K-Models.
//!
//! The partition stage is a K-means-style alternation over `K` micro-clusters
//! that ignores contiguity: every unit moves to the model with the smallest
//! absolute residual, then all models are refit. The merge stage splits
//! micro-clusters into connected pieces, absorbs undersized pieces into a
//! neighbor, and greedily merges neighboring regions until `p` remain.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::Rng;

use super::{best_region, grow_initial_partition, rng_from_seed, total_ssr, Algorithm, SolveResult, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::{AdjacencyGraph, Partition};
use crate::linreg::{fit_ols, Dataset, NormalEquations, RegionModel};

/// Output of the partition stage.
#[derive(Debug, Clone)]
pub struct MicroClusters {
    /// `K` groups, not necessarily connected.
    pub partition: Partition,
    pub models: Vec<RegionModel>,
    pub trace: Vec<f64>,
    pub iterations: usize,
}

pub fn kmodels_partition_stage<R: Rng + ?Sized>(
    dataset: &Dataset,
    graph: &AdjacencyGraph,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<MicroClusters> {
    let k = config.micro_clusters();
    let stage_min = dataset.m() + 1;
    let initial = grow_initial_partition(graph, k, stage_min, config.restart_limit, rng)?;
    let mut labels = initial.labels().to_vec();
    let mut sizes = initial.sizes();
    let mut models = fit_all(dataset, &labels, k)?;
    let mut trace = vec![total_ssr(dataset, &labels, &models)];
    let mut iterations = 0;

    while iterations < config.max_iter {
        let mut moved = false;
        for unit in 0..dataset.n() {
            let donor = labels[unit];
            if sizes[donor] <= stage_min {
                continue;
            }
            let target = best_region(&models, dataset.row(unit), dataset.y(unit), donor);
            if target != donor {
                labels[unit] = target;
                sizes[donor] -= 1;
                sizes[target] += 1;
                moved = true;
            }
        }
        if moved {
            models = fit_all(dataset, &labels, k)?;
        }
        iterations += 1;
        trace.push(total_ssr(dataset, &labels, &models));
        if !moved {
            break;
        }
    }

    Ok(MicroClusters {
        partition: Partition::new(labels)?,
        models,
        trace,
        iterations,
    })
}

fn fit_all(dataset: &Dataset, labels: &[usize], count: usize) -> Result<Vec<RegionModel>> {
    let mut members = vec![Vec::new(); count];
    for (u, &l) in labels.iter().enumerate() {
        members[l].push(u);
    }
    members.iter().map(|m| fit_ols(dataset, m)).collect()
}

/// Region bookkeeping during merging. Dead slots are `None`.
struct MergeState {
    members: Vec<Option<Vec<usize>>>,
    normal: Vec<NormalEquations>,
    ssr: Vec<f64>,
    adjacent: Vec<BTreeSet<usize>>,
}

impl MergeState {
    fn new(dataset: &Dataset, graph: &AdjacencyGraph, pieces: Vec<Vec<usize>>) -> Self {
        let mut owner = vec![0; dataset.n()];
        for (r, piece) in pieces.iter().enumerate() {
            for &u in piece {
                owner[u] = r;
            }
        }
        let mut adjacent = vec![BTreeSet::new(); pieces.len()];
        for (a, b) in graph.edges() {
            let (ra, rb) = (owner[a], owner[b]);
            if ra != rb {
                adjacent[ra].insert(rb);
                adjacent[rb].insert(ra);
            }
        }
        let normal: Vec<NormalEquations> = pieces
            .iter()
            .map(|p| NormalEquations::from_members(dataset, p))
            .collect();
        let ssr = normal.iter().map(NormalEquations::fitted_ssr).collect();
        Self {
            members: pieces.into_iter().map(Some).collect(),
            normal,
            ssr,
            adjacent,
        }
    }

    fn size(&self, r: usize) -> usize {
        self.members[r].as_ref().map_or(0, Vec::len)
    }

    fn alive(&self) -> usize {
        self.members.iter().filter(|m| m.is_some()).count()
    }

    /// SSR change from fitting one model to `a` and `b` jointly.
    fn merge_cost(&self, a: usize, b: usize) -> f64 {
        self.normal[a].merged(&self.normal[b]).fitted_ssr() - self.ssr[a] - self.ssr[b]
    }

    /// Folds `gone` into `keep`.
    fn merge(&mut self, keep: usize, gone: usize) {
        let moved = self.members[gone].take().expect("merging a live region");
        self.members[keep].as_mut().expect("merging into a live region").extend(moved);
        self.normal[keep] = self.normal[keep].merged(&self.normal[gone]);
        self.ssr[keep] = self.normal[keep].fitted_ssr();
        let gone_adj = std::mem::take(&mut self.adjacent[gone]);
        for &r in &gone_adj {
            self.adjacent[r].remove(&gone);
            if r != keep {
                self.adjacent[r].insert(keep);
                self.adjacent[keep].insert(r);
            }
        }
        self.adjacent[keep].remove(&gone);
    }

    fn into_regions(self) -> Vec<Vec<usize>> {
        let mut regions: Vec<Vec<usize>> = self.members.into_iter().flatten().collect();
        for r in &mut regions {
            r.sort_unstable();
        }
        regions.sort_by_key(|r| r[0]);
        regions
    }
}

/// Turns micro-clusters into exactly `config.p` connected regions of at least
/// `config.min_obs` units each.
pub fn kmodels_merge_stage(
    dataset: &Dataset,
    graph: &AdjacencyGraph,
    micro: &Partition,
    config: &SolverConfig,
) -> Result<(Partition, Vec<RegionModel>)> {
    // 1. split into connected pieces
    let pieces: Vec<Vec<usize>> = micro
        .regions()
        .iter()
        .flat_map(|members| graph.components_of(members))
        .collect();
    let mut state = MergeState::new(dataset, graph, pieces);

    // 2. absorb undersized regions, smallest first
    let mut queue: BTreeSet<(usize, usize)> = (0..state.members.len())
        .filter(|&r| state.size(r) < config.min_obs)
        .map(|r| (state.size(r), r))
        .collect();
    while let Some((_, small)) = queue.pop_first() {
        if state.alive() == 1 {
            break;
        }
        let target = state.adjacent[small]
            .iter()
            .map(|&b| {
                let joint = state.normal[small].merged(&state.normal[b]).fitted_ssr();
                (joint - state.ssr[b], b)
            })
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
            .map(|(_, b)| b)
            .expect("a region in a connected graph has a neighbor");
        queue.remove(&(state.size(target), target));
        state.merge(target, small);
        if state.size(target) < config.min_obs {
            queue.insert((state.size(target), target));
        }
    }
    let remaining = state.alive();
    if remaining < config.p || (remaining == 1 && dataset.n() < config.min_obs) {
        return Err(Error::MergeInfeasible {
            regions: remaining,
            p: config.p,
            min_obs: config.min_obs,
        });
    }

    // 3. merge the neighboring pair with the smallest SSR increase
    let mut costs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for a in 0..state.members.len() {
        if state.members[a].is_none() {
            continue;
        }
        for &b in state.adjacent[a].range(a + 1..) {
            costs.insert((a, b), state.merge_cost(a, b));
        }
    }
    while state.alive() > config.p {
        let (&(a, b), _) = costs
            .iter()
            .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(y.0)))
            .expect("a connected graph with several regions has adjacent pairs");
        costs.retain(|&(x, y), _| x != a && x != b && y != a && y != b);
        state.merge(a, b);
        let neighbors: Vec<usize> = state.adjacent[a].iter().copied().collect();
        for c in neighbors {
            let key = (a.min(c), a.max(c));
            costs.insert(key, state.merge_cost(key.0, key.1));
        }
    }

    let regions = state.into_regions();
    let mut labels = vec![0; dataset.n()];
    for (r, members) in regions.iter().enumerate() {
        for &u in members {
            labels[u] = r;
        }
    }
    let models = regions
        .iter()
        .map(|members| fit_ols(dataset, members))
        .collect::<Result<Vec<_>>>()?;
    Ok((Partition::new(labels)?, models))
}

pub fn solve_kmodels(dataset: &Dataset, graph: &AdjacencyGraph, config: &SolverConfig) -> Result<SolveResult> {
    config.validate(Algorithm::KModels, dataset, graph)?;
    let start = Instant::now();
    let mut rng = rng_from_seed(config.seed);
    let micro = kmodels_partition_stage(dataset, graph, config, &mut rng)?;
    let (partition, models) = kmodels_merge_stage(dataset, graph, &micro.partition, config)?;
    let total = total_ssr(dataset, partition.labels(), &models);
    Ok(SolveResult {
        algorithm: Algorithm::KModels,
        partition,
        models,
        total_ssr: total,
        iterations_used: micro.iterations,
        seed: config.seed,
        wall_time: start.elapsed(),
        trace: micro.trace,
    })
}
