//! Coarsens a graph with planted structure by spectral clustering and shows
//! that the compaction stages recover it, along with the Laplacian spectrum
//! the clustering runs on.
//!
//! Run: cargo run --release -p gsim --example spectral_hierarchy

use gsim::spectral::{
    build_hierarchy, pooling_matrix, symmetric_eigendecomposition, unnormalized_laplacian,
    SpectralConfig,
};
use gsim::Graph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two 4-cliques joined by a single bridge edge (3-7): the classic
    // two-community graph.
    let mut edges = Vec::new();
    for u in 0..4usize {
        for v in (u + 1)..4 {
            edges.push((u, v));
            edges.push((u + 4, v + 4));
        }
    }
    edges.push((3, 7));
    let g = Graph::new("two_cliques", 8, &edges, None)?;
    println!("graph: two 4-cliques bridged by edge (3, 7), {} edges", g.edges().len());

    // The unnormalized Laplacian's small eigenvalues expose the structure:
    // one zero (the graph is connected) and a tiny second value (the cut).
    let lap = unnormalized_laplacian(&g.adjacency());
    let (eigenvalues, _) = symmetric_eigendecomposition(&lap, 4)?;
    println!("\nfour smallest Laplacian eigenvalues:");
    for (i, ev) in eigenvalues.iter().enumerate() {
        println!("  lambda_{i} = {ev:.6}");
    }

    // Coarsen 8 -> 2 -> 1 nodes.
    let config = SpectralConfig { stage_sizes: vec![2, 1], ..SpectralConfig::default() };
    let hierarchy = build_hierarchy(&g, &config)?;
    println!("\nstage node counts: {:?}", hierarchy.node_counts());
    for (l, stage) in hierarchy.stages.iter().enumerate() {
        println!("stage {}: clusters {:?}", l + 1, stage.clusters);
    }

    // The first stage should split exactly along the two cliques.
    let first = &hierarchy.stages[0].clusters;
    let mut parts: Vec<Vec<usize>> = first.clone();
    parts.sort();
    assert_eq!(parts, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
    println!("-> stage 1 recovered the planted cliques");

    // The compact graph keeps an edge where any original edge crossed.
    let compact = &hierarchy.stages[0].adjacency;
    println!(
        "compact 2-node adjacency: [[{}, {}], [{}, {}]] (bridge survives)",
        compact[(0, 0)],
        compact[(0, 1)],
        compact[(1, 0)],
        compact[(1, 1)]
    );

    // Pooling matrices carry per-cluster eigenvector weights; channel c uses
    // the eigenvector of the c-th largest intra-cluster Laplacian eigenvalue.
    for channel in 1..=2 {
        let u = pooling_matrix(&g.adjacency(), first, channel)?;
        let nonzero = (0..u.rows())
            .map(|k| u.row(k).iter().filter(|w| **w != 0.0).count())
            .collect::<Vec<_>>();
        println!(
            "pooling channel {channel}: {} x {} matrix, nonzero weights per cluster {:?}",
            u.rows(),
            u.cols(),
            nonzero
        );
    }
    Ok(())
}
