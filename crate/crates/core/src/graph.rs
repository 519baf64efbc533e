//! Spatial units and their neighborhood structure.
//!
//! Units are dense indices `0..n`. An [`AdjacencyGraph`] is symmetric, has no
//! self-loops and is always connected; every constructor rejects input that
//! would violate this. A [`Partition`] assigns each unit one region label.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric binary adjacency over `n` units.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyGraph {
    neighbors: Vec<Vec<usize>>,
    n_edges: usize,
}

impl AdjacencyGraph {
    /// Rook contiguity on a `rows x cols` lattice. Unit `r * cols + c` is the
    /// cell in row `r`, column `c`.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyGraph);
        }
        let n = rows * cols;
        let mut neighbors = vec![Vec::with_capacity(4); n];
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if r > 0 {
                    neighbors[i].push(i - cols);
                }
                if c > 0 {
                    neighbors[i].push(i - 1);
                }
                if c + 1 < cols {
                    neighbors[i].push(i + 1);
                }
                if r + 1 < rows {
                    neighbors[i].push(i + cols);
                }
            }
        }
        let n_edges = rows * (cols - 1) + cols * (rows - 1);
        Ok(Self { neighbors, n_edges })
    }

    /// Builds a graph from unordered pairs. Both orientations of a pair and
    /// repeated pairs collapse to one edge.
    pub fn from_edges(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut sets = vec![BTreeSet::new(); n];
        for &(a, b) in pairs {
            for index in [a, b] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        Self::from_neighbor_sets(sets)
    }

    /// Symmetrized k-nearest-neighbor graph over 2-D points (Euclidean
    /// distance, ties to the lower unit index).
    pub fn knn(points: &[[f64; 2]], k: usize) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if k == 0 || k >= n {
            return Err(Error::InvalidConfig(format!(
                "knn requires 1 <= k < n (k={k}, n={n})"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            points[a][0]
                .total_cmp(&points[b][0])
                .then(points[a][1].total_cmp(&points[b][1]))
        });
        for w in order.windows(2) {
            if points[w[0]] == points[w[1]] {
                let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
                return Err(Error::DuplicatePoints(a, b));
            }
        }

        let directed = directed_knn(points, k);

        let mut sets = vec![BTreeSet::new(); n];
        for (i, list) in directed.into_iter().enumerate() {
            for j in list {
                sets[i].insert(j);
                sets[j].insert(i);
            }
        }
        Self::from_neighbor_sets(sets)
    }

    fn from_neighbor_sets(sets: Vec<BTreeSet<usize>>) -> Result<Self> {
        let neighbors: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let n_edges = neighbors.iter().map(Vec::len).sum::<usize>() / 2;
        let graph = Self { neighbors, n_edges };
        let components = graph.count_components();
        if components != 1 {
            return Err(Error::DisconnectedGraph { components });
        }
        Ok(graph)
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Sorted neighbor list of `unit`.
    pub fn neighbors(&self, unit: usize) -> &[usize] {
        &self.neighbors[unit]
    }

    pub fn degree(&self, unit: usize) -> usize {
        self.neighbors[unit].len()
    }

    /// Edges as `(i, j)` with `i < j`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    fn count_components(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        let mut components = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in &self.neighbors[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        components
    }

    /// Whether the subgraph induced by `subset` is connected (BFS, O(|E|)).
    pub fn is_connected_subset(&self, subset: &[usize]) -> Result<bool> {
        let Some(&start) = subset.first() else {
            return Err(Error::EmptySubset);
        };
        let n = self.n();
        let mut inside = vec![false; n];
        for &u in subset {
            if u >= n {
                return Err(Error::IndexOutOfRange { index: u, n });
            }
            inside[u] = true;
        }
        let target = inside.iter().filter(|&&b| b).count();
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut reached = 1;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if inside[v] && !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        Ok(reached == target)
    }

    /// Connected components of the subgraph induced by `subset`, each sorted,
    /// ordered by their smallest unit.
    pub fn components_of(&self, subset: &[usize]) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut inside = vec![false; n];
        for &u in subset {
            inside[u] = true;
        }
        let mut sorted = subset.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for &start in &sorted {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut comp = vec![start];
            while let Some(u) = queue.pop_front() {
                for &v in &self.neighbors[u] {
                    if inside[v] && !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Units outside `region` with at least one neighbor inside it, sorted.
    pub fn region_neighbors(&self, partition: &Partition, region: usize) -> Result<Vec<usize>> {
        if region >= partition.n_regions() {
            return Err(Error::UnknownRegion {
                region,
                regions: partition.n_regions(),
            });
        }
        Ok(region_frontier(self, partition.labels(), region))
    }
}

/// For every point, its `k` nearest other points (ties to the lower index).
fn directed_knn(points: &[[f64; 2]], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dx = points[i][0] - points[j][0];
                    let dy = points[i][1] - points[j][1];
                    (dx * dx + dy * dy, j)
                })
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            cand.select_nth_unstable_by(k - 1, cmp);
            let nearest = &mut cand[..k];
            nearest.sort_unstable_by(cmp);
            nearest.iter().map(|&(_, j)| j).collect()
        })
        .collect()
}

pub(crate) fn region_frontier(graph: &AdjacencyGraph, labels: &[usize], region: usize) -> Vec<usize> {
    let mut out: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l == region)
        .flat_map(|(u, _)| graph.neighbors(u).iter().copied())
        .filter(|&v| labels[v] != region)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Reusable BFS state for repeated "is region still connected without unit
/// v" checks against a label array.
#[derive(Debug)]
pub(crate) struct ConnectivityScratch {
    stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<usize>,
}

impl ConnectivityScratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            epoch: 0,
            queue: Vec::with_capacity(n),
        }
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.epoch
    }

    /// Whether the units labelled `region`, minus `removed`, form a connected
    /// set. `region_size` counts `removed`. An empty remainder is connected.
    pub(crate) fn connected_without(
        &mut self,
        graph: &AdjacencyGraph,
        labels: &[usize],
        region: usize,
        region_size: usize,
        removed: usize,
    ) -> bool {
        let target = region_size - 1;
        if target <= 1 {
            return true;
        }
        let start = graph
            .neighbors(removed)
            .iter()
            .copied()
            .find(|&v| labels[v] == region)
            .or_else(|| (0..labels.len()).find(|&u| u != removed && labels[u] == region));
        let Some(start) = start else {
            return true;
        };
        let epoch = self.next_epoch();
        self.stamp[removed] = epoch;
        self.stamp[start] = epoch;
        self.queue.clear();
        self.queue.push(start);
        let mut reached = 1;
        let mut head = 0;
        while head < self.queue.len() {
            let u = self.queue[head];
            head += 1;
            for &v in graph.neighbors(u) {
                if labels[v] == region && self.stamp[v] != epoch {
                    self.stamp[v] = epoch;
                    reached += 1;
                    if reached == target {
                        return true;
                    }
                    self.queue.push(v);
                }
            }
        }
        reached == target
    }
}

/// Assignment of every unit to one of `n_regions` labels; every label in
/// `0..n_regions` is used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
    n_regions: usize,
}

impl Partition {
    /// Validates that labels are dense (`0..p` all present).
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidPartition("no units".into()));
        }
        let n_regions = labels.iter().max().map_or(0, |&m| m + 1);
        let mut used = vec![false; n_regions];
        for &l in &labels {
            used[l] = true;
        }
        if let Some(missing) = used.iter().position(|&u| !u) {
            return Err(Error::InvalidPartition(format!(
                "label {missing} has no units (labels must cover 0..{n_regions})"
            )));
        }
        Ok(Self { labels, n_regions })
    }

    /// Relabels arbitrary labels densely in order of first appearance.
    pub fn from_raw_labels<T: Ord + Clone>(raw: &[T]) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        let labels = raw
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(l.clone()).or_insert(next)
            })
            .collect();
        Self::new(labels)
    }

    pub fn single(n: usize) -> Result<Self> {
        Self::new(vec![0; n])
    }

    pub fn n_units(&self) -> usize {
        self.labels.len()
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, unit: usize) -> usize {
        self.labels[unit]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_regions];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Member lists per region, each in ascending unit order.
    pub fn regions(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_regions];
        for (u, &l) in self.labels.iter().enumerate() {
            out[l].push(u);
        }
        out
    }

    pub fn members(&self, region: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == region)
            .map(|(u, _)| u)
            .collect()
    }

    /// Relabels regions in order of their smallest unit. Returns the
    /// canonical partition and the old-to-new label map.
    pub fn canonical(&self) -> (Partition, Vec<usize>) {
        let mut map = vec![usize::MAX; self.n_regions];
        let mut next = 0;
        for &l in &self.labels {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
        }
        let labels = self.labels.iter().map(|&l| map[l]).collect();
        (
            Partition {
                labels,
                n_regions: self.n_regions,
            },
            map,
        )
    }

    /// Same grouping of units, ignoring label names.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        self.n_units() == other.n_units() && self.canonical().0 == other.canonical().0
    }

    /// Every region induces a connected subgraph.
    pub fn all_regions_connected(&self, graph: &AdjacencyGraph) -> bool {
        self.regions()
            .iter()
            .all(|r| graph.is_connected_subset(r).unwrap_or(false))
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        Partition::new(labels)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.labels
    }
}
