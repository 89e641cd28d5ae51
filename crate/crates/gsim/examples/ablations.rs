//! Trains the full model and its two ablations (alignment disabled,
//! hierarchy disabled) plus the mean-pooled-embedding baseline on the same
//! corpus, then compares held-out error.
//!
//! Run: cargo run --release -p gsim --example ablations

use std::collections::BTreeMap;

use gsim::graph::{build_features, perturbed_corpus, split_dataset, FeatureMode, Graph};
use gsim::nn::{
    mean_squared_error, prepare_graph, train, Ablation, GraphInput, Model, ModelConfig,
    TrainConfig, TrainPair, Variant,
};
use gsim::oracles::{ged_to_similarity, ground_truth_ged_pairs, EditCostModel};
use gsim::spectral::SpectralConfig;

fn prepare(
    graphs: &[Graph],
    config: &ModelConfig,
) -> Result<Vec<GraphInput>, Box<dyn std::error::Error>> {
    let mode = FeatureMode::Constant { width: config.input_dim };
    let vocab = BTreeMap::new();
    let mut inputs = Vec::new();
    for g in graphs {
        inputs.push(prepare_graph(&build_features(g, &vocab, &mode)?, config)?);
    }
    Ok(inputs)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graphs = perturbed_corpus(14, 8, 0.4, 2, 2, 5)?;
    let ids: Vec<String> = graphs.iter().map(|g| g.id().to_string()).collect();
    let split = split_dataset(&ids, (4, 1, 2), 0)?;
    let idx: BTreeMap<&str, usize> =
        ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    // Exact pairwise ground truth.
    let all_pairs: Vec<(usize, usize)> =
        (0..graphs.len()).flat_map(|i| (i..graphs.len()).map(move |j| (i, j))).collect();
    let results = ground_truth_ged_pairs(&graphs, &all_pairs, &EditCostModel::default(), 16)?;
    let mut sim = BTreeMap::new();
    for (&(i, j), r) in all_pairs.iter().zip(&results) {
        sim.insert((i.min(j), i.max(j)), ged_to_similarity(r.distance)?);
    }
    let pair_list = |part: &[String]| -> Vec<TrainPair> {
        let mut out = Vec::new();
        for (i, a) in part.iter().enumerate() {
            for b in &part[i..] {
                let (x, y) = (idx[a.as_str()], idx[b.as_str()]);
                out.push(TrainPair { a: x, b: y, target: sim[&(x.min(y), x.max(y))] });
            }
        }
        out
    };
    let train_pairs = pair_list(&split.train_ids);
    let test_pairs = pair_list(&split.test_ids);

    let base = ModelConfig {
        spectral: SpectralConfig { stage_sizes: vec![3, 1], ..SpectralConfig::default() },
        hidden_dim: 16,
        upsample_side: 12,
        conv_channels: 4,
        fc_hidden: 32,
        ..ModelConfig::default()
    };
    let train_config = TrainConfig { batch_size: 16, epochs: 4, ..TrainConfig::default() };

    let settings: [(&str, ModelConfig); 4] = [
        ("full model", base.clone()),
        ("no alignment", ModelConfig { ablation: Ablation::NoAlignment, ..base.clone() }),
        ("no hierarchy", ModelConfig { ablation: Ablation::NoHierarchy, ..base.clone() }),
        ("embedding-mean baseline", ModelConfig { variant: Variant::EmbAvg, ..base.clone() }),
    ];

    println!(
        "training {} variants on {} pairs, testing on {} pairs\n",
        settings.len(),
        train_pairs.len(),
        test_pairs.len()
    );
    println!("{:<26} {:>10}", "variant", "test mse");
    for (name, config) in settings {
        let inputs = prepare(&graphs, &config)?;
        let mut model = Model::new(config)?;
        train(&mut model, &inputs, &train_pairs, &[], &train_config)?;
        let mse = mean_squared_error(&model, &inputs, &test_pairs)?;
        println!("{name:<26} {mse:>10.5}");
    }
    println!("\n(lower is better; exact numbers vary with the corpus seed)");
    Ok(())
}
