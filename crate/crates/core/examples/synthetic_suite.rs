//! Generating the three lattice schemes and writing a suite to disk.
//!
//! cargo run --example synthetic_suite [OUTPUT_DIR]

use std::path::PathBuf;

use spatial_regimes::harness::{load_suite, write_suite};
use spatial_regimes::synthgen::{generate_scheme, SchemeKind, SimulationSpec};

fn draw(spec: &SimulationSpec) -> spatial_regimes::Result<()> {
    let p = generate_scheme(spec, &mut spec.simulation_rng(0))?;
    println!("{} (sizes {:?})", spec.scheme.name(), p.sizes());
    for r in 0..spec.rows {
        let row: String = (0..spec.cols)
            .map(|c| char::from(b'A' + p.label(r * spec.cols + c) as u8))
            .collect();
        println!("  {row}");
    }
    Ok(())
}

fn main() -> spatial_regimes::Result<()> {
    for scheme in [SchemeKind::Rectangular, SchemeKind::Voronoi, SchemeKind::Arbitrary] {
        draw(&SimulationSpec::standard(scheme, 0.1, 1))?;
    }

    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("regimes-suite"));
    let spec = SimulationSpec::standard(SchemeKind::Voronoi, 0.2, 9);
    let manifest = write_suite(&dir, &spec, 4, None)?;
    let (_, sims) = load_suite(&dir)?;
    println!("wrote {} simulations of {} to {}", sims.len(), manifest.label, dir.display());
    for sim in &sims {
        println!("  sim {}: true coefficients {:?}", sim.index, sim.truth.params);
    }
    Ok(())
}
