//! Scoring a solution against the true regimes.
//!
//! cargo run --release --example evaluate

use spatial_regimes::metrics::{entropy, evaluate, mutual_information, nmi, rand_index, TruthRef};
use spatial_regimes::synthgen::{generate_suite, SchemeKind, SimulationSpec};
use spatial_regimes::{solve, Algorithm, Partition, SolverConfig};

fn main() -> spatial_regimes::Result<()> {
    // two groupings of four units
    let a = Partition::new(vec![0, 0, 1, 1])?;
    let b = Partition::new(vec![0, 0, 1, 2])?;
    println!("RI {:.4}", rand_index(&a, &b)?);
    println!("H(a) {:.4}, H(b) {:.4}, I {:.4}", entropy(&a), entropy(&b), mutual_information(&a, &b)?);
    println!("NMI {:.4}", nmi(&a, &b)?);

    let spec = SimulationSpec::standard(SchemeKind::Rectangular, 0.2, 12);
    let truth = generate_suite(&spec, 1)?.remove(0);
    let config = SolverConfig::new(5, 10).with_k(20).with_seed(1);
    let result = solve(Algorithm::KModels, &truth.dataset, &spec.graph()?, &config)?;
    let report = evaluate(
        TruthRef {
            partition: &truth.partition,
            params: &truth.params,
        },
        &result,
        &truth.dataset,
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
