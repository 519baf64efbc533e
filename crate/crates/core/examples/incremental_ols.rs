//! Per-region least squares with rank-one updates.
//!
//! cargo run --example incremental_ols

use spatial_regimes::{fit_ols, region_ssr, Dataset};

fn main() -> spatial_regimes::Result<()> {
    // y = 1 + 2 x1 - x2 plus a little deterministic wobble
    let n = 12;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / 3.0, ((i * 7) % 5) as f64]).collect();
    let y = rows
        .iter()
        .enumerate()
        .map(|(i, r)| 1.0 + 2.0 * r[0] - r[1] + 0.05 * ((i % 3) as f64 - 1.0))
        .collect();
    let data = Dataset::from_rows(&rows, y)?;

    let members: Vec<usize> = (0..8).collect();
    let model = fit_ols(&data, &members)?;
    println!("fit on units 0..8: params {:?}", model.params());
    println!("SSR {:.6}", region_ssr(&model, &data, &members));

    // closed-form SSR change before touching the model
    let unit = 8;
    let (x, yv) = (data.row(unit), data.y(unit));
    println!("leverage of unit {unit}: {:.4}", model.leverage(x));
    println!("predicted SSR increase if added: {:?}", model.ssr_increase_if_added(x, yv));

    let grown = model.add_unit(x, yv)?;
    let all: Vec<usize> = (0..9).collect();
    let refit = fit_ols(&data, &all)?;
    println!("updated params {:?}", grown.params());
    println!("refit params   {:?}", refit.params());
    println!(
        "actual SSR increase: {:.6}",
        region_ssr(&refit, &data, &all) - region_ssr(&model, &data, &members)
    );

    let shrunk = grown.remove_unit(x, yv)?;
    println!("after removing it again: {:?}", shrunk.params());
    println!("max |G^-1 G - I| = {:.2e}", shrunk.inverse_error());
    Ok(())
}
