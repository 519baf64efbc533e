//! Synthetic lattice experiments with known regimes.
//!
//! A simulation draws a region scheme on a grid, assigns each region its own
//! coefficients by shuffling a pool, and generates
//! `y = b0 + b1 x1 + b2 x2 + e` with `x ~ U[0,1)` and `e ~ N(0, sigma^2)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AdjacencyGraph, Partition};
use crate::linreg::Dataset;
use crate::solvers::grow_initial_partition;

/// Redraws allowed before a scheme is declared infeasible.
pub const SCHEME_RETRY_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Horizontal stripes of equal height.
    Rectangular,
    /// Nearest random seed cell.
    Voronoi,
    /// Random growth from seed cells.
    Arbitrary,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Rectangular => "rectangular",
            SchemeKind::Voronoi => "voronoi",
            SchemeKind::Arbitrary => "arbitrary",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rectangular" => Ok(SchemeKind::Rectangular),
            "voronoi" => Ok(SchemeKind::Voronoi),
            "arbitrary" => Ok(SchemeKind::Arbitrary),
            other => Err(Error::InvalidConfig(format!(
                "unknown scheme {other:?} (expected rectangular, voronoi or arbitrary)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub rows: usize,
    pub cols: usize,
    pub scheme: SchemeKind,
    pub region_count: usize,
    pub min_region_units: usize,
    pub sigma: f64,
    pub coefficient_pool: Vec<f64>,
    pub seed: u64,
}

impl SimulationSpec {
    /// 25x25 grid, five regions of at least ten cells, pool {-2,-1,0,1,2}.
    pub fn standard(scheme: SchemeKind, sigma: f64, seed: u64) -> Self {
        Self {
            rows: 25,
            cols: 25,
            scheme,
            region_count: 5,
            min_region_units: 10,
            sigma,
            coefficient_pool: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            seed,
        }
    }

    pub fn n_units(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.rows == 0 || self.cols == 0 {
            return bad("grid must have at least one row and column".into());
        }
        if self.region_count == 0 {
            return bad("region_count must be at least 1".into());
        }
        if self.coefficient_pool.len() != self.region_count {
            return bad(format!(
                "coefficient pool has {} values but there are {} regions",
                self.coefficient_pool.len(),
                self.region_count
            ));
        }
        if self.min_region_units * self.region_count > self.n_units() {
            return bad(format!(
                "{} regions of at least {} units do not fit in a {}x{} grid",
                self.region_count, self.min_region_units, self.rows, self.cols
            ));
        }
        if self.scheme == SchemeKind::Rectangular && self.region_count > self.rows {
            return bad(format!(
                "cannot cut {} rows into {} stripes",
                self.rows, self.region_count
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        Ok(())
    }

    pub fn graph(&self) -> Result<AdjacencyGraph> {
        AdjacencyGraph::grid(self.rows, self.cols)
    }

    /// Generator for simulation `index`: ChaCha8 seeded by `seed`, on stream
    /// `index`.
    pub fn simulation_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// One simulated dataset with its generating regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub partition: Partition,
    /// `[b0, b1, b2]` per region.
    pub params: Vec<Vec<f64>>,
    pub dataset: Dataset,
}

/// Draws a region scheme; every region is connected with at least
/// `min_region_units` cells.
pub fn generate_scheme<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<Partition> {
    spec.validate()?;
    let graph = spec.graph()?;
    let k = spec.region_count;
    let acceptable = |p: &Partition| {
        p.n_regions() == k
            && p.sizes().iter().all(|&s| s >= spec.min_region_units)
            && p.all_regions_connected(&graph)
    };
    match spec.scheme {
        SchemeKind::Rectangular => {
            let labels = (0..spec.n_units())
                .map(|u| (u / spec.cols) * k / spec.rows)
                .collect();
            let p = Partition::new(labels)?;
            if acceptable(&p) {
                Ok(p)
            } else {
                Err(Error::SchemeInfeasible {
                    attempts: 1,
                    reason: "stripes fall below the minimum region size".into(),
                })
            }
        }
        SchemeKind::Voronoi => {
            for _ in 0..SCHEME_RETRY_LIMIT {
                let seeds = rand::seq::index::sample(rng, spec.n_units(), k).into_vec();
                let p = voronoi_cells(spec.rows, spec.cols, &seeds)?;
                if acceptable(&p) {
                    return Ok(p);
                }
            }
            Err(Error::SchemeInfeasible {
                attempts: SCHEME_RETRY_LIMIT,
                reason: "voronoi cells kept violating size or connectivity".into(),
            })
        }
        SchemeKind::Arbitrary => {
            match grow_initial_partition(&graph, k, spec.min_region_units, SCHEME_RETRY_LIMIT, rng) {
                Ok(p) => Ok(p),
                Err(Error::InitializationFailed { attempts, .. }) => Err(Error::SchemeInfeasible {
                    attempts,
                    reason: "grown regions kept falling below the minimum size".into(),
                }),
                Err(e) => Err(e),
            }
        }
    }
}

/// Assigns each cell to the nearest seed cell by Euclidean distance between
/// cell centers; equidistant cells go to the lower seed index.
pub fn voronoi_cells(rows: usize, cols: usize, seeds: &[usize]) -> Result<Partition> {
    let labels = (0..rows * cols)
        .map(|u| {
            let (r, c) = ((u / cols) as i64, (u % cols) as i64);
            seeds
                .iter()
                .enumerate()
                .min_by_key(|&(idx, &s)| {
                    let (sr, sc) = ((s / cols) as i64, (s % cols) as i64);
                    ((r - sr).pow(2) + (c - sc).pow(2), idx)
                })
                .map(|(idx, _)| idx)
                .expect("at least one seed")
        })
        .collect::<Vec<_>>();
    Partition::new(labels)
}

/// `[0, b1, b2]` per region: the pool is shuffled once for `b1` and again for
/// `b2`.
pub fn assign_coefficients<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if spec.coefficient_pool.len() != spec.region_count {
        return Err(Error::InvalidConfig(format!(
            "coefficient pool has {} values but there are {} regions",
            spec.coefficient_pool.len(),
            spec.region_count
        )));
    }
    let mut b1 = spec.coefficient_pool.clone();
    b1.shuffle(rng);
    let mut b2 = spec.coefficient_pool.clone();
    b2.shuffle(rng);
    Ok(b1.into_iter().zip(b2).map(|(a, b)| vec![0.0, a, b]).collect())
}

/// Draws covariates and responses cell by cell (`x1`, `x2`, then the noise
/// term). Unit ids are the cell indices; coordinates are `(col, row)`.
pub fn generate_data<R: Rng + ?Sized>(
    partition: &Partition,
    params: &[Vec<f64>],
    spec: &SimulationSpec,
    rng: &mut R,
) -> Result<Dataset> {
    let n = spec.n_units();
    if partition.n_units() != n {
        return Err(Error::SizeMismatch {
            what: "partition",
            got: partition.n_units(),
            expected: n,
        });
    }
    if params.len() != partition.n_regions() {
        return Err(Error::SizeMismatch {
            what: "region coefficients",
            got: params.len(),
            expected: partition.n_regions(),
        });
    }
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for u in 0..n {
        let b = &params[partition.label(u)];
        let x1: f64 = rng.random();
        let x2: f64 = rng.random();
        let z: f64 = rng.sample(StandardNormal);
        x.extend([x1, x2]);
        y.push(b[0] + b[1] * x1 + b[2] * x2 + spec.sigma * z);
    }
    let coords = (0..n)
        .map(|u| [(u % spec.cols) as f64, (u / spec.cols) as f64])
        .collect();
    Dataset::from_flat(n, 2, x, y)?
        .with_ids((0..n).map(|u| u.to_string()).collect())?
        .with_coords(coords)
}

/// `n_simulations` independent draws. Simulation `i` uses
/// [`SimulationSpec::simulation_rng`]`(i)`; the rectangular scheme is shared.
pub fn generate_suite(spec: &SimulationSpec, n_simulations: usize) -> Result<Vec<GroundTruth>> {
    spec.validate()?;
    if n_simulations == 0 {
        return Err(Error::InvalidConfig("a suite needs at least one simulation".into()));
    }
    let shared = match spec.scheme {
        SchemeKind::Rectangular => Some(generate_scheme(spec, &mut spec.simulation_rng(0))?),
        _ => None,
    };
    (0..n_simulations)
        .map(|i| generate_simulation(spec, i, shared.as_ref()))
        .collect()
}

/// Simulation `index` of the suite defined by `spec`.
pub fn generate_simulation(spec: &SimulationSpec, index: usize, shared: Option<&Partition>) -> Result<GroundTruth> {
    let mut rng = spec.simulation_rng(index);
    let partition = match shared {
        Some(p) => p.clone(),
        None => generate_scheme(spec, &mut rng)?,
    };
    let params = assign_coefficients(spec, &mut rng)?;
    let dataset = generate_data(&partition, &params, spec, &mut rng)?;
    Ok(GroundTruth {
        partition,
        params,
        dataset,
    })
}

/// Scattered points in the unit square, `m` uniform covariates, regimes from
/// the nearest of `region_count` random centers, coefficients drawn from
/// `{-2,-1,0,1,2}` and a zero intercept. Intended for scale tests on KNN
/// adjacency.
pub fn generate_point_scenario(
    n_points: usize,
    m: usize,
    region_count: usize,
    sigma: f64,
    seed: u64,
) -> Result<GroundTruth> {
    if n_points == 0 || m == 0 || region_count == 0 || region_count > n_points {
        return Err(Error::InvalidConfig(format!(
            "point scenario needs n>0, m>0 and 1<=regions<=n (n={n_points}, m={m}, regions={region_count})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<[f64; 2]> = (0..n_points).map(|_| [rng.random(), rng.random()]).collect();
    let centers: Vec<[f64; 2]> = (0..region_count).map(|_| [rng.random(), rng.random()]).collect();
    let raw: Vec<usize> = coords
        .iter()
        .map(|pt| {
            (0..region_count)
                .min_by(|&a, &b| {
                    let d = |c: &[f64; 2]| (c[0] - pt[0]).powi(2) + (c[1] - pt[1]).powi(2);
                    d(&centers[a]).total_cmp(&d(&centers[b])).then(a.cmp(&b))
                })
                .expect("at least one center")
        })
        .collect();
    let partition = Partition::from_raw_labels(&raw)?;
    // from_raw_labels renumbers by first appearance; keep params aligned
    let mut order = Vec::new();
    for &r in &raw {
        if !order.contains(&r) {
            order.push(r);
        }
    }
    let pool = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let by_center: Vec<Vec<f64>> = (0..region_count)
        .map(|_| {
            std::iter::once(0.0)
                .chain((0..m).map(|_| pool[rng.random_range(0..pool.len())]))
                .collect()
        })
        .collect();
    let params: Vec<Vec<f64>> = order.iter().map(|&c| by_center[c].clone()).collect();
    let mut x = Vec::with_capacity(n_points * m);
    let mut y = Vec::with_capacity(n_points);
    for u in 0..n_points {
        let b = &params[partition.label(u)];
        let row: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let z: f64 = rng.sample(StandardNormal);
        y.push(b[0] + row.iter().zip(&b[1..]).map(|(a, c)| a * c).sum::<f64>() + sigma * z);
        x.extend(row);
    }
    let dataset = Dataset::from_flat(n_points, m, x, y)?
        .with_ids((0..n_points).map(|u| u.to_string()).collect())?
        .with_coords(coords)?;
    Ok(GroundTruth {
        partition,
        params,
        dataset,
    })
}
