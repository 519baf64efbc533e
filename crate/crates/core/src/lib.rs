//! Spatial regime delineation.
//!
//! Partitions spatial units into `p` contiguous regions, each with its own
//! linear regression model, by minimizing the total sum of squared
//! residuals. Three solvers are provided: two-stage K-Models, AZP and
//! Regional-K-Models. Supporting modules build adjacency graphs, simulate
//! lattice data with known regimes, and score solutions against ground truth.

pub mod cli;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod linreg;
pub mod metrics;
pub mod solvers;
pub mod synthgen;

pub use error::{Error, Result};
pub use graph::{AdjacencyGraph, Partition};
pub use linreg::{fit_ols, region_ssr, Dataset, RegionModel};
pub use solvers::{solve, Algorithm, SolveResult, SolverConfig};
