//! Point data from CSV: k-nearest-neighbor adjacency, standardization and a
//! persisted result.
//!
//! cargo run --release --example csv_knn

use spatial_regimes::harness::{solve_with_restarts, AdjacencySource, SolveRecord};
use spatial_regimes::io::{read_dataset_csv, write_dataset_csv};
use spatial_regimes::synthgen::generate_point_scenario;
use spatial_regimes::{Algorithm, SolverConfig};

fn main() -> spatial_regimes::Result<()> {
    let dir = std::env::temp_dir().join("regimes-csv-knn");
    std::fs::create_dir_all(&dir).map_err(|e| spatial_regimes::Error::Io { path: dir.clone(), source: e })?;

    // 1500 scattered points with four regimes over three covariates
    let truth = generate_point_scenario(1500, 3, 4, 0.2, 8)?;
    let data_path = dir.join("points.csv");
    write_dataset_csv(&data_path, &truth.dataset)?;

    let data = read_dataset_csv(&data_path)?;
    let graph = AdjacencySource::Knn(8).build(&data)?;
    let (scaled, stdz) = data.standardize()?;
    let config = SolverConfig::new(4, 30).with_seed(3);
    let outcome = solve_with_restarts(Algorithm::KModels, &scaled, &graph, &config, 4)?;

    let record = SolveRecord::new(outcome.best(), &config, &data, &scaled, Some(&stdz), outcome.runs());
    let out = dir.join("result.json");
    record.write_json(&out)?;
    println!("standardized SSR {:.4}; result written to {}", record.total_ssr, out.display());
    for r in &record.regions {
        println!("region {}: {} points, raw-scale coefficients {:?}", r.region, r.size, r.coefficients);
    }
    Ok(())
}
