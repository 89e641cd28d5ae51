//! Aligns the node embeddings of two differently sized graphs with exact
//! optimal transport, extracts an injective matching from the plan, and
//! builds the correlation matrix the downstream regressor consumes.
//!
//! Run: cargo run --release -p gsim --example transport_alignment

use gsim::align::{align_stage, correlation_matrix, emd, greedy_match};
use gsim::Mat;

fn print_mat(name: &str, m: &Mat) {
    println!("{name} ({} x {}):", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:7.4}")).collect();
        println!("  [{}]", row.join(", "));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Node embeddings for a 3-node and a 4-node graph (2-d for readability).
    let h1 = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.9, 0.1]]);
    let h2 = Mat::from_rows(&[
        vec![0.0, 1.1],
        vec![1.0, 0.1],
        vec![0.5, 0.5],
        vec![0.95, 0.0],
    ]);

    // Exact earth mover's distance with uniform masses 1/3 and 1/4.
    let transport = emd(&h1, &h2)?;
    print_mat("ground cost (Euclidean)", &transport.cost);
    print_mat("optimal plan", &transport.plan);
    println!("objective: {:.6}", transport.objective);

    // Plan marginals are exactly the uniform masses.
    for i in 0..3 {
        let row_sum: f64 = transport.plan.row(i).iter().sum();
        assert!((row_sum - 1.0 / 3.0).abs() < 1e-12);
    }
    println!("row sums = 1/3, column sums = 1/4 (checked)");

    // A distribution against itself transports for free.
    let self_cost = emd(&h1, &h1)?.objective;
    println!("self-transport objective: {self_cost:.2e}");
    assert!(self_cost.abs() < 1e-12);

    // Each row grabs the remaining column with the most plan mass, giving an
    // injective node matching; leftover columns trail at the end.
    let matching = greedy_match(&transport.plan);
    println!("\ngreedy matching rows -> columns: {:?}", matching.t);
    println!("unmatched graph-2 columns: {:?}", matching.trailing);

    // The full stage alignment also fixes a canonical row order (descending
    // embedding, then degree), making the result renumbering-invariant.
    let degrees1 = vec![2, 1, 2];
    let degrees2 = vec![1, 3, 2, 2];
    let stage = align_stage(&h1, &degrees1, None, &h2, &degrees2, None)?;
    println!("\ncanonical row order for graph 1: {:?}", stage.row_order);
    let corr = correlation_matrix(&h1, &h2, &stage.row_order, &stage.matching)?;
    print_mat("correlation matrix (dot products, aligned)", &corr);
    Ok(())
}
