//! Builds a synthetic corpus of edit-perturbed graph copies, splits it into
//! train/val/test parts, and round-trips it through the JSON-lines format.
//!
//! Run: cargo run --release -p gsim --example generate_dataset

use gsim::graph::{load_dataset, perturbed_corpus, save_dataset, split_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 30 graphs: one 10-node base plus 29 copies, each at most 3 edits away.
    let graphs = perturbed_corpus(30, 10, 0.35, 3, 3, 7)?;
    println!("generated {} graphs (ids {} .. {})", graphs.len(), graphs[0].id(), graphs[29].id());

    println!("\nfirst five graphs:");
    println!("{:<6} {:>5} {:>5}  labels", "id", "nodes", "edges");
    for g in &graphs[..5] {
        let labels = match g.labels() {
            Some(ls) => ls.join(""),
            None => "-".to_string(),
        };
        println!("{:<6} {:>5} {:>5}  {labels}", g.id(), g.n(), g.edges().len());
    }

    let sizes: Vec<usize> = graphs.iter().map(|g| g.n()).collect();
    println!(
        "\nnode counts: min {}, max {} (base graph has 10)",
        sizes.iter().min().unwrap(),
        sizes.iter().max().unwrap()
    );

    // Deterministic shuffled split; same ids and seed always give the same
    // partition.
    let ids: Vec<String> = graphs.iter().map(|g| g.id().to_string()).collect();
    let split = split_dataset(&ids, (7, 2, 1), 0)?;
    println!(
        "\nsplit 7:2:1 -> {} train / {} val / {} test",
        split.train_ids.len(),
        split.val_ids.len(),
        split.test_ids.len()
    );
    println!("test ids: {:?}", split.test_ids);

    // Graphs serialize one-per-line; loading restores them exactly.
    let dir = std::env::temp_dir().join("gsim_example_dataset");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("dataset.jsonl");
    save_dataset(&graphs, &path)?;
    let reloaded = load_dataset(&path)?;
    assert_eq!(graphs, reloaded);
    println!("\nwrote and reloaded {} graphs via {}", reloaded.len(), path.display());
    Ok(())
}
