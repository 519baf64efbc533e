//! Regime solvers: two-stage K-Models, AZP and Regional-K-Models.
//!
//! All three minimize the total sum of squared residuals of per-region
//! linear models over partitions into `p` connected regions of at least
//! `min_obs` units. A run is fully determined by its inputs and
//! [`SolverConfig::seed`].

mod azp;
mod init;
mod kmodels;
mod rkm;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AdjacencyGraph, Partition};
use crate::linreg::{region_ssr, Dataset, RegionModel};

pub use azp::{solve_azp, solve_azp_observed};
pub use init::grow_initial_partition;
pub use kmodels::{kmodels_merge_stage, kmodels_partition_stage, solve_kmodels, MicroClusters};
pub use rkm::{solve_regional_kmodels, solve_regional_kmodels_observed};

/// The run's random generator: ChaCha with 8 rounds, seeded from a `u64`.
pub type SolverRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SolverRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_RESTART_LIMIT: usize = 100;
pub const DEFAULT_SSR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    KModels,
    Azp,
    #[serde(rename = "rkm")]
    RegionalKModels,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::KModels, Algorithm::Azp, Algorithm::RegionalKModels];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KModels => "kmodels",
            Algorithm::Azp => "azp",
            Algorithm::RegionalKModels => "rkm",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kmodels" | "k-models" => Ok(Algorithm::KModels),
            "azp" => Ok(Algorithm::Azp),
            "rkm" | "regional-kmodels" | "regional-k-models" => Ok(Algorithm::RegionalKModels),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm {other:?} (expected kmodels, azp or rkm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Number of regions to return.
    pub p: usize,
    /// Minimum units per final region.
    pub min_obs: usize,
    /// Micro-cluster count for K-Models; `None` means `4 * p`.
    pub k: Option<usize>,
    pub max_iter: usize,
    pub seed: u64,
    /// Attempts at drawing an initial partition that meets the size floor.
    pub restart_limit: usize,
    /// A move must lower total SSR by more than this to count as a decrease.
    pub ssr_tolerance: f64,
}

impl SolverConfig {
    pub fn new(p: usize, min_obs: usize) -> Self {
        Self {
            p,
            min_obs,
            k: None,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
            restart_limit: DEFAULT_RESTART_LIMIT,
            ssr_tolerance: DEFAULT_SSR_TOLERANCE,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn micro_clusters(&self) -> usize {
        self.k.unwrap_or(4 * self.p)
    }

    pub fn validate(&self, algorithm: Algorithm, dataset: &Dataset, graph: &AdjacencyGraph) -> Result<()> {
        let n = dataset.n();
        let needed = dataset.m() + 1;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if graph.n() != n {
            return Err(Error::SizeMismatch {
                what: "adjacency graph",
                got: graph.n(),
                expected: n,
            });
        }
        if self.p == 0 {
            return bad("p must be at least 1".into());
        }
        if self.min_obs < needed {
            return bad(format!(
                "min_obs={} is below m+1={needed} required for a unique fit",
                self.min_obs
            ));
        }
        if self.p * self.min_obs > n {
            return bad(format!(
                "p * min_obs = {} exceeds the {n} available units",
                self.p * self.min_obs
            ));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.restart_limit == 0 {
            return bad("restart_limit must be at least 1".into());
        }
        if !(self.ssr_tolerance >= 0.0) {
            return bad("ssr_tolerance must be non-negative".into());
        }
        if algorithm == Algorithm::KModels {
            let k = self.micro_clusters();
            if k <= self.p {
                return bad(format!("K={k} must exceed p={}", self.p));
            }
            if k * needed > n {
                return bad(format!(
                    "K={k} micro-clusters of at least {needed} units do not fit in {n} units"
                ));
            }
        }
        Ok(())
    }
}

/// Outcome of one solver run.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub algorithm: Algorithm,
    pub partition: Partition,
    /// One model per region, indexed by region label.
    pub models: Vec<RegionModel>,
    pub total_ssr: f64,
    pub iterations_used: usize,
    pub seed: u64,
    pub wall_time: Duration,
    /// Total SSR before the first iteration and after each iteration. For
    /// K-Models this covers the partition stage only; merging raises SSR.
    pub trace: Vec<f64>,
}

impl SolveResult {
    /// Parameters `[intercept, coefficients..]` applying to `unit`.
    pub fn unit_params(&self, unit: usize) -> &[f64] {
        self.models[self.partition.label(unit)].params()
    }
}

/// A relocation accepted by AZP or Regional-K-Models, reported after the
/// partition has been updated.
#[derive(Debug)]
pub struct MoveEvent<'a> {
    pub iteration: usize,
    pub unit: usize,
    pub from: usize,
    pub to: usize,
    pub labels: &'a [usize],
    pub sizes: &'a [usize],
}

/// Runs `algorithm` once with `config.seed`.
pub fn solve(algorithm: Algorithm, dataset: &Dataset, graph: &AdjacencyGraph, config: &SolverConfig) -> Result<SolveResult> {
    match algorithm {
        Algorithm::KModels => solve_kmodels(dataset, graph, config),
        Algorithm::Azp => solve_azp(dataset, graph, config),
        Algorithm::RegionalKModels => solve_regional_kmodels(dataset, graph, config),
    }
}

pub(crate) fn total_ssr(dataset: &Dataset, labels: &[usize], models: &[RegionModel]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(u, &l)| models[l].residual(dataset.row(u), dataset.y(u)).powi(2))
        .sum()
}

pub(crate) fn members_of(labels: &[usize], region: usize) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l == region)
        .map(|(u, _)| u)
        .collect()
}

/// Region whose model has the smallest absolute residual for `(x, y)`,
/// lowest index on ties; `current` is kept unless another region is
/// strictly better.
pub(crate) fn best_region(models: &[RegionModel], x: &[f64], y: f64, current: usize) -> usize {
    let mut best = current;
    let mut best_abs = models[current].residual(x, y).abs();
    for (j, model) in models.iter().enumerate() {
        let r = model.residual(x, y).abs();
        if r < best_abs {
            best = j;
            best_abs = r;
        }
    }
    best
}

/// Sum of `region_ssr` over regions, for cross-checking results.
pub fn recompute_total_ssr(dataset: &Dataset, partition: &Partition, models: &[RegionModel]) -> f64 {
    partition
        .regions()
        .iter()
        .zip(models)
        .map(|(members, model)| region_ssr(model, dataset, members))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmin_prefers_current_on_ties_then_lowest_index() {
        let models = vec![
            RegionModel::from_params(&[1.0, 0.0]),
            RegionModel::from_params(&[-1.0, 0.0]),
            RegionModel::from_params(&[0.5, 0.0]),
            RegionModel::from_params(&[-0.5, 0.0]),
        ];
        assert_eq!(best_region(&models, &[0.0], 0.0, 1), 2);
        assert_eq!(best_region(&models, &[0.0], 0.0, 3), 3);
        assert_eq!(best_region(&models, &[0.0], 0.9, 1), 0);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{}\"", a.name()));
        }
        assert!("tabu".parse::<Algorithm>().is_err());
    }

    #[test]
    fn config_validation() {
        let ds = Dataset::from_flat(20, 2, (0..40).map(|v| v as f64).collect(), vec![0.0; 20]).unwrap();
        let g = AdjacencyGraph::grid(4, 5).unwrap();
        assert!(SolverConfig::new(2, 3).validate(Algorithm::Azp, &ds, &g).is_ok());
        assert!(SolverConfig::new(2, 2).validate(Algorithm::Azp, &ds, &g).is_err());
        assert!(SolverConfig::new(0, 3).validate(Algorithm::Azp, &ds, &g).is_err());
        assert!(SolverConfig::new(7, 3).validate(Algorithm::Azp, &ds, &g).is_err());
        assert!(SolverConfig::new(2, 3).with_k(2).validate(Algorithm::KModels, &ds, &g).is_err());
        assert!(SolverConfig::new(2, 3).with_k(7).validate(Algorithm::KModels, &ds, &g).is_err());
        assert!(SolverConfig::new(2, 3).with_k(6).validate(Algorithm::KModels, &ds, &g).is_ok());
        let small = AdjacencyGraph::grid(2, 2).unwrap();
        assert!(SolverConfig::new(1, 3).validate(Algorithm::Azp, &ds, &small).is_err());
    }
}
