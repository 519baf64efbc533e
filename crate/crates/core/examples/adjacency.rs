//! Building adjacency graphs and checking region connectivity.
//!
//! cargo run --example adjacency

use spatial_regimes::{AdjacencyGraph, Partition};

fn main() -> spatial_regimes::Result<()> {
    // rook contiguity on a 3x4 lattice; unit = row * cols + col
    let grid = AdjacencyGraph::grid(3, 4)?;
    println!("grid: {} units, {} edges", grid.n(), grid.n_edges());
    println!("neighbors of unit 5: {:?}", grid.neighbors(5));

    // an L-shaped region is connected, two opposite corners are not
    println!("L-shape connected: {}", grid.is_connected_subset(&[0, 4, 8, 9])?);
    println!("corners connected: {}", grid.is_connected_subset(&[0, 11])?);

    let stripes = Partition::new((0..12).map(|u| u / 4).collect())?;
    println!("regions touching the middle stripe: {:?}", grid.region_neighbors(&stripes, 1)?);
    println!("all stripes connected: {}", stripes.all_regions_connected(&grid));

    // symmetrized k-nearest-neighbor graph over scattered points
    let points = [[0.0, 0.0], [1.0, 0.1], [2.1, 0.0], [0.2, 1.0], [1.1, 1.2], [5.0, 5.0]];
    let knn = AdjacencyGraph::knn(&points, 2)?;
    for u in 0..knn.n() {
        println!("knn neighbors of {u}: {:?}", knn.neighbors(u));
    }

    // explicit edge list, e.g. from a polygon contiguity file
    let chain = AdjacencyGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)])?;
    println!("chain components of {{0, 1, 3}}: {:?}", chain.components_of(&[0, 1, 3]));
    Ok(())
}
