use indexmap::IndexSet;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{AdjacencyGraph, Partition};

const UNASSIGNED: usize = usize::MAX;

/// Random seeded region growth.
///
/// `count` distinct seed units are drawn; then, repeatedly, a region with
/// unassigned neighbors is chosen uniformly and absorbs one of those
/// neighbors, also chosen uniformly, until every unit is assigned. Draws
/// that leave a region below `min_obs` are discarded and the procedure
/// restarts with fresh seeds, up to `restart_limit` attempts.
pub fn grow_initial_partition<R: Rng + ?Sized>(
    graph: &AdjacencyGraph,
    count: usize,
    min_obs: usize,
    restart_limit: usize,
    rng: &mut R,
) -> Result<Partition> {
    let n = graph.n();
    if count == 0 || count > n {
        return Err(Error::InvalidConfig(format!(
            "cannot grow {count} regions over {n} units"
        )));
    }
    for _ in 0..restart_limit {
        let labels = grow_once(graph, count, rng);
        let mut sizes = vec![0usize; count];
        for &l in &labels {
            sizes[l] += 1;
        }
        if sizes.iter().all(|&s| s >= min_obs) {
            return Partition::new(labels);
        }
    }
    Err(Error::InitializationFailed {
        count,
        min_obs,
        attempts: restart_limit,
    })
}

pub(crate) fn grow_once<R: Rng + ?Sized>(graph: &AdjacencyGraph, count: usize, rng: &mut R) -> Vec<usize> {
    let n = graph.n();
    let mut labels = vec![UNASSIGNED; n];
    let seeds = rand::seq::index::sample(rng, n, count).into_vec();
    for (region, &s) in seeds.iter().enumerate() {
        labels[s] = region;
    }
    // frontier entries may go stale once another region claims them; stale
    // entries are dropped when drawn
    let mut frontier: Vec<IndexSet<usize>> = seeds
        .iter()
        .map(|&s| {
            graph
                .neighbors(s)
                .iter()
                .copied()
                .filter(|&v| labels[v] == UNASSIGNED)
                .collect()
        })
        .collect();
    let mut active: Vec<usize> = (0..count).filter(|&r| !frontier[r].is_empty()).collect();
    let mut assigned = count;
    while assigned < n {
        // connected graphs always leave a live frontier
        assert!(!active.is_empty(), "region growth stalled on a disconnected graph");
        let slot = rng.random_range(0..active.len());
        let region = active[slot];
        let pick = rng.random_range(0..frontier[region].len());
        let unit = frontier[region]
            .swap_remove_index(pick)
            .expect("index in range");
        if labels[unit] == UNASSIGNED {
            labels[unit] = region;
            assigned += 1;
            for &v in graph.neighbors(unit) {
                if labels[v] == UNASSIGNED {
                    frontier[region].insert(v);
                }
            }
        }
        if frontier[region].is_empty() {
            active.swap_remove(slot);
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::rng_from_seed;

    #[test]
    fn single_region_covers_everything() {
        let g = AdjacencyGraph::grid(6, 6).unwrap();
        let p = grow_initial_partition(&g, 1, 36, 1, &mut rng_from_seed(1)).unwrap();
        assert_eq!(p.n_regions(), 1);
        assert_eq!(p.sizes(), vec![36]);
    }

    #[test]
    fn one_region_per_unit() {
        let g = AdjacencyGraph::grid(3, 4).unwrap();
        let p = grow_initial_partition(&g, 12, 1, 1, &mut rng_from_seed(5)).unwrap();
        assert_eq!(p.sizes(), vec![1; 12]);
    }

    #[test]
    fn grid_regions_are_connected_and_large_enough() {
        let g = AdjacencyGraph::grid(25, 25).unwrap();
        for seed in 0..20 {
            let p = grow_initial_partition(&g, 5, 10, 100, &mut rng_from_seed(seed)).unwrap();
            assert_eq!(p.n_regions(), 5);
            assert!(p.sizes().iter().all(|&s| s >= 10));
            for members in p.regions() {
                assert!(g.is_connected_subset(&members).unwrap());
            }
        }
    }

    #[test]
    fn impossible_floor_fails_after_limit() {
        let g = AdjacencyGraph::grid(4, 4).unwrap();
        let err = grow_initial_partition(&g, 4, 5, 7, &mut rng_from_seed(0)).unwrap_err();
        assert!(matches!(err, Error::InitializationFailed { attempts: 7, .. }));
        assert!(grow_initial_partition(&g, 17, 1, 1, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn growth_is_reproducible() {
        let g = AdjacencyGraph::grid(10, 10).unwrap();
        let a = grow_initial_partition(&g, 4, 5, 50, &mut rng_from_seed(42)).unwrap();
        let b = grow_initial_partition(&g, 4, 5, 50, &mut rng_from_seed(42)).unwrap();
        assert_eq!(a, b);
    }
}
