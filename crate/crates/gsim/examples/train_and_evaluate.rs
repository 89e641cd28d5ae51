//! Full pipeline on a small corpus: generate graphs, compute exact
//! edit-distance ground truth, train the hierarchical model, and score its
//! retrieval quality on held-out queries.
//!
//! Run: cargo run --release -p gsim --example train_and_evaluate

use std::collections::BTreeMap;

use gsim::eval::{evaluate_model, SimilarityTable};
use gsim::graph::{build_features, perturbed_corpus, split_dataset, FeatureMode};
use gsim::nn::{prepare_graph, train, Model, ModelConfig, TrainConfig, TrainPair};
use gsim::oracles::{ged_to_similarity, ground_truth_ged_pairs, EditCostModel};
use gsim::spectral::SpectralConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Corpus: a 8-node base graph and 15 perturbed copies (at most 2 edits),
    // so every pairwise edit distance is exactly solvable.
    let graphs = perturbed_corpus(16, 8, 0.4, 2, 2, 11)?;
    let ids: Vec<String> = graphs.iter().map(|g| g.id().to_string()).collect();
    let split = split_dataset(&ids, (3, 1, 1), 0)?;
    println!(
        "corpus: {} graphs, split {}/{}/{}",
        graphs.len(),
        split.train_ids.len(),
        split.val_ids.len(),
        split.test_ids.len()
    );

    // Exact ground truth for every unordered pair, mapped to similarities
    // exp(-distance).
    let pairs: Vec<(usize, usize)> =
        (0..graphs.len()).flat_map(|i| (i..graphs.len()).map(move |j| (i, j))).collect();
    let costs = EditCostModel::default();
    let results = ground_truth_ged_pairs(&graphs, &pairs, &costs, 16)?;
    let mut truth = SimilarityTable::new();
    for (&(i, j), r) in pairs.iter().zip(&results) {
        truth.insert(graphs[i].id(), graphs[j].id(), ged_to_similarity(r.distance)?);
    }
    println!("ground truth: {} exact pairwise distances", pairs.len());

    // A deliberately small model so this example runs in seconds.
    let config = ModelConfig {
        spectral: SpectralConfig { stage_sizes: vec![3, 1], ..SpectralConfig::default() },
        hidden_dim: 16,
        upsample_side: 12,
        conv_channels: 4,
        fc_hidden: 32,
        ..ModelConfig::default()
    };
    let mode = FeatureMode::Constant { width: config.input_dim };
    let vocab = BTreeMap::new();
    let mut inputs = Vec::new();
    let mut idx = BTreeMap::new();
    for (i, g) in graphs.iter().enumerate() {
        let fg = build_features(g, &vocab, &mode)?;
        inputs.push(prepare_graph(&fg, &config)?);
        idx.insert(g.id().to_string(), i);
    }

    let pair_list = |ids: &[String]| -> Vec<TrainPair> {
        let mut out = Vec::new();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i..] {
                out.push(TrainPair {
                    a: idx[a.as_str()],
                    b: idx[b.as_str()],
                    target: truth.get(a, b).unwrap(),
                });
            }
        }
        out
    };
    let train_pairs = pair_list(&split.train_ids);
    let val_pairs = pair_list(&split.val_ids);

    let train_config = TrainConfig { batch_size: 16, epochs: 6, eval_interval: 5, ..TrainConfig::default() };
    let mut model = Model::new(config)?;
    println!("\ntraining on {} pairs:", train_pairs.len());
    let log = train(&mut model, &inputs, &train_pairs, &val_pairs, &train_config)?;
    println!("{:>5} {:>12} {:>12}", "step", "batch loss", "val mse");
    for row in &log {
        println!("{:>5} {:>12.6} {:>12.6}", row.step, row.loss, row.val_mse);
    }

    // Retrieval evaluation: rank the whole corpus for each test query.
    let predict = |a: &str, b: &str| -> Result<f64, String> {
        model.predict_symmetric(&inputs[idx[a]], &inputs[idx[b]]).map_err(|e| e.to_string())
    };
    let report = evaluate_model(predict, &ids, &split.test_ids, &truth, 4)?;
    println!(
        "\ntest queries: mse {:.4}, spearman {:.3}, kendall {:.3}, p@4 {:.3}",
        report.mse, report.spearman_rho, report.kendall_tau, report.precision_at_k
    );

    // Context: the error a single constant prediction could achieve at best.
    let truth_ref = &truth;
    let targets: Vec<f64> = split
        .test_ids
        .iter()
        .flat_map(|q| ids.iter().map(move |c| truth_ref.get(q, c).unwrap()))
        .collect();
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let const_mse = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>()
        / targets.len() as f64;
    println!("best constant predictor mse: {const_mse:.4}");
    Ok(())
}
