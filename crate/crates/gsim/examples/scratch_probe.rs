//! Temporary timing/quality probe for the end-to-end learning setup.
//! Not part of the example suite.

use std::collections::BTreeMap;
use std::time::Instant;

use gsim::eval::{evaluate_model, SimilarityTable};
use gsim::graph::{build_features, perturbed_corpus, split_dataset, FeatureMode};
use gsim::nn::{
    mean_squared_error, prepare_graph, train, Ablation, GraphInput, Model, ModelConfig,
    TrainConfig, TrainPair, Variant,
};
use gsim::oracles::{ged_to_similarity, ground_truth_ged_pairs, EditCostModel};
use gsim::spectral::SpectralConfig;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let t_all = Instant::now();
    let graphs = perturbed_corpus(300, 12, 0.35, 3, 4, 1).unwrap();
    let ids: Vec<String> = graphs.iter().map(|g| g.id().to_string()).collect();
    let split = split_dataset(&ids, (7, 2, 1), 0).unwrap();
    println!(
        "split: {}/{}/{}",
        split.train_ids.len(),
        split.val_ids.len(),
        split.test_ids.len()
    );
    let idx: BTreeMap<&str, usize> =
        ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    // Ground truth for train-internal pairs + test x corpus pairs.
    let mut wanted: Vec<(usize, usize)> = Vec::new();
    for (i, a) in split.train_ids.iter().enumerate() {
        for b in &split.train_ids[i..] {
            wanted.push((idx[a.as_str()], idx[b.as_str()]));
        }
    }
    for q in &split.test_ids {
        for c in &ids {
            let (x, y) = (idx[q.as_str()], idx[c.as_str()]);
            wanted.push((x.min(y), x.max(y)));
        }
    }
    for (i, a) in split.val_ids.iter().enumerate() {
        for b in &split.val_ids[i..] {
            wanted.push((idx[a.as_str()], idx[b.as_str()]));
        }
    }
    wanted.sort();
    wanted.dedup();
    println!("ground-truth pairs needed: {}", wanted.len());
    let cache_path = std::env::temp_dir().join("gsim_probe_gt.csv");
    let t0 = Instant::now();
    let results: Vec<gsim::oracles::GroundTruthGed> = if cache_path.exists() {
        let rows = gsim::graph::load_ground_truth(&cache_path).unwrap();
        let map: BTreeMap<(String, String), u64> = rows
            .into_iter()
            .map(|p| ((p.g1_id, p.g2_id), p.ged.unwrap()))
            .collect();
        wanted
            .iter()
            .map(|&(i, j)| gsim::oracles::GroundTruthGed {
                distance: map[&(ids[i].clone(), ids[j].clone())] as f64,
                provenance: gsim::graph::GedProvenance::Exact,
            })
            .collect()
    } else {
        let r = ground_truth_ged_pairs(&graphs, &wanted, &EditCostModel::default(), 16).unwrap();
        let rows: Vec<gsim::graph::GraphPair> = wanted
            .iter()
            .zip(&r)
            .map(|(&(i, j), g)| gsim::graph::GraphPair {
                g1_id: ids[i].clone(),
                g2_id: ids[j].clone(),
                ged: Some(g.distance.round() as u64),
                ged_provenance: Some(g.provenance),
                mcs: None,
            })
            .collect();
        gsim::graph::cache_ground_truth(&rows, &cache_path).unwrap();
        r
    };
    let n_exact = results
        .iter()
        .filter(|r| matches!(r.provenance, gsim::graph::GedProvenance::Exact))
        .count();
    println!("ground truth: {:?} ({} exact of {})", t0.elapsed(), n_exact, results.len());
    let mut truth = SimilarityTable::new();
    let mut dist_hist = BTreeMap::new();
    for (&(i, j), r) in wanted.iter().zip(&results) {
        truth.insert(&ids[i], &ids[j], ged_to_similarity(r.distance).unwrap());
        *dist_hist.entry(r.distance as u64).or_insert(0usize) += 1;
    }
    println!("distance histogram: {dist_hist:?}");

    // Config under test.
    let envu = |k: &str, d: usize| {
        std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d)
    };
    let vocab = gsim::graph::label_vocab(&graphs);
    let config = ModelConfig {
        spectral: SpectralConfig { stage_sizes: vec![6, 4, 2, 1], ..SpectralConfig::default() },
        upsample_side: 16,
        input_dim: vocab.len(),
        hidden_dim: envu("HID", 32),
        gcn_depth: envu("GDEPTH", 3),
        conv_channels: envu("CONVC", 8),
        fc_hidden: envu("FCH", 128),
        ..ModelConfig::default()
    };
    let mode = FeatureMode::OneHot;
    let t0 = Instant::now();
    let inputs: Vec<_> = graphs
        .iter()
        .map(|g| prepare_graph(&build_features(g, &vocab, &mode).unwrap(), &config).unwrap())
        .collect();
    println!("prepare: {:?}", t0.elapsed());

    // Training pairs: seeded subsample of train-internal pairs, identity
    // pairs always kept.
    let mut all_train: Vec<TrainPair> = Vec::new();
    for (i, a) in split.train_ids.iter().enumerate() {
        for b in &split.train_ids[i..] {
            all_train.push(TrainPair {
                a: idx[a.as_str()],
                b: idx[b.as_str()],
                target: truth.get(a, b).unwrap(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n_pairs =
        std::env::var("NP").ok().and_then(|v| v.parse().ok()).unwrap_or(4000usize);
    let stratified = std::env::var("STRAT").is_ok();
    let keep: Vec<TrainPair> = if stratified {
        // Equal-sized buckets by target band so near-duplicates are not
        // swamped by the many far pairs.
        let mut buckets: BTreeMap<u64, Vec<TrainPair>> = BTreeMap::new();
        for p in &all_train {
            let band = (-p.target.ln()).round() as u64; // ~ edit distance
            buckets.entry(band.min(4)).or_default().push(*p);
        }
        let per = n_pairs / buckets.len();
        let mut keep = Vec::new();
        for (_, mut v) in buckets {
            v.shuffle(&mut rng);
            v.truncate(per);
            keep.extend(v);
        }
        keep
    } else {
        let (mut keep, rest): (Vec<TrainPair>, Vec<TrainPair>) =
            all_train.iter().partition(|p| p.a == p.b);
        let mut rest = rest;
        rest.shuffle(&mut rng);
        let cap = n_pairs.saturating_sub(keep.len());
        keep.extend(rest.into_iter().take(cap));
        keep
    };
    println!("train pairs: {} (of {}), stratified: {stratified}", keep.len(), all_train.len());

    let t_target: Vec<f64> = split
        .test_ids
        .iter()
        .flat_map(|q| ids.iter().map(|c| truth.get(q, c).unwrap()))
        .collect();
    let mean_t = t_target.iter().sum::<f64>() / t_target.len() as f64;
    let const_mse =
        t_target.iter().map(|t| (t - mean_t) * (t - mean_t)).sum::<f64>() / t_target.len() as f64;
    println!("test targets: mean {mean_t:.4}, best-constant mse {const_mse:.5}");

    let envf = |k: &str, d: f64| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
    let train_config = TrainConfig {
        batch_size: envf("B", 32.0) as usize,
        learning_rate: envf("LR", 0.01),
        epochs: envf("EP", 10.0) as usize,
        seed: 0,
        loss_scale: 1.0,
        eval_interval: 50,
    };

    // Reduced-budget dry runs for the ablation and sweep comparisons.
    let probe_mode = std::env::var("MODE").unwrap_or_default();
    if probe_mode == "ablate" || probe_mode == "sweep" {
        let mut test_pairs = Vec::new();
        for (i, a) in split.test_ids.iter().enumerate() {
            for b in &split.test_ids[i..] {
                test_pairs.push(TrainPair {
                    a: idx[a.as_str()],
                    b: idx[b.as_str()],
                    target: truth.get(a, b).unwrap(),
                });
            }
        }
        let n_seeds = envu("SEEDS", 3);
        let run = |cfg: &ModelConfig, ins: &[GraphInput], seed: u64| -> f64 {
            let mut model =
                Model::new(ModelConfig { init_seed: seed, ..cfg.clone() }).unwrap();
            let tc = TrainConfig { seed, ..train_config.clone() };
            train(&mut model, ins, &keep, &[], &tc).unwrap();
            mean_squared_error(&model, ins, &test_pairs).unwrap()
        };
        if probe_mode == "ablate" {
            for ablation in
                [Ablation::Off, Ablation::NoAlignment, Ablation::NoHierarchy]
            {
                let cfg = ModelConfig { ablation, ..config.clone() };
                let t0 = Instant::now();
                let mses: Vec<f64> = (0..n_seeds).map(|s| run(&cfg, &inputs, s as u64)).collect();
                let mean = mses.iter().sum::<f64>() / mses.len() as f64;
                println!("{ablation:?}: mean test-pair mse {mean:.5} {mses:?} ({:?})", t0.elapsed());
            }
        } else {
            let param = std::env::var("PARAM").unwrap_or_else(|_| "channels".into());
            let values: Vec<usize> =
                if param == "channels" { vec![1, 2, 3, 4] } else { vec![2, 3, 4] };
            for v in values {
                let mut cfg = config.clone();
                if param == "channels" {
                    cfg.spectral.n_pool_channels = v;
                } else {
                    let ladder = [6usize, 4, 2, 1];
                    cfg.spectral.stage_sizes = ladder[ladder.len() - v..].to_vec();
                }
                let t0 = Instant::now();
                let vins: Vec<_> = graphs
                    .iter()
                    .map(|g| {
                        prepare_graph(&build_features(g, &vocab, &mode).unwrap(), &cfg)
                            .unwrap()
                    })
                    .collect();
                let mses: Vec<f64> = (0..n_seeds).map(|s| run(&cfg, &vins, s as u64)).collect();
                let mean = mses.iter().sum::<f64>() / mses.len() as f64;
                println!("{param} {v}: mean test-pair mse {mean:.5} {mses:?} ({:?})", t0.elapsed());
            }
        }
        println!("total: {:?}", t_all.elapsed());
        return;
    }
    println!(
        "train config: lr {}, epochs {}, batch {}",
        train_config.learning_rate, train_config.epochs, train_config.batch_size
    );

    for variant in [Variant::Hierarchical, Variant::EmbAvg] {
        let cfg = ModelConfig { variant, ..config.clone() };
        let vinputs: Vec<_>;
        let use_inputs = if variant == Variant::Hierarchical {
            &inputs
        } else {
            vinputs = graphs
                .iter()
                .map(|g| {
                    prepare_graph(&build_features(g, &vocab, &mode).unwrap(), &cfg).unwrap()
                })
                .collect();
            &vinputs
        };
        let n_members = envu("ENS", 1);
        let t0 = Instant::now();
        let ep2 = envf("EP2", 0.0) as usize;
        let mut members = Vec::new();
        let mut log = Vec::new();
        for m in 0..n_members {
            let mut model =
                Model::new(ModelConfig { init_seed: m as u64, ..cfg.clone() }).unwrap();
            let tc = TrainConfig { seed: m as u64, ..train_config.clone() };
            log = train(&mut model, use_inputs, &keep, &[], &tc).unwrap();
            if ep2 > 0 {
                let phase2 = TrainConfig {
                    learning_rate: envf("LR2", train_config.learning_rate / 5.0),
                    epochs: ep2,
                    seed: 1000 + m as u64,
                    ..train_config.clone()
                };
                log.extend(train(&mut model, use_inputs, &keep, &[], &phase2).unwrap());
            }
            members.push(model);
        }
        let model = &members[0];
        let train_time = t0.elapsed();
        let t0 = Instant::now();
        let predict = |a: &str, b: &str| -> Result<f64, String> {
            let mut s = 0.0;
            for m in &members {
                s += m
                    .predict_symmetric(&use_inputs[idx[a]], &use_inputs[idx[b]])
                    .map_err(|e| e.to_string())?;
            }
            Ok(s / members.len() as f64)
        };
        let report = evaluate_model(predict, &ids, &split.test_ids, &truth, 10).unwrap();
        println!(
            "{variant:?}: train {train_time:?}, eval {:?}; first loss {:.5}, last loss {:.5}; \
             test mse {:.5} (const {:.5}), spearman {:.3}, kendall {:.3}, p@10 {:.3}",
            t0.elapsed(),
            log.first().map(|r| r.loss).unwrap_or(f64::NAN),
            log.last().map(|r| r.loss).unwrap_or(f64::NAN),
            report.mse,
            const_mse,
            report.spearman_rho,
            report.kendall_tau,
            report.precision_at_k
        );
        // Also the plain test-pair mse used by the sweep criteria.
        let mut test_pairs = Vec::new();
        for (i, a) in split.test_ids.iter().enumerate() {
            for b in &split.test_ids[i..] {
                test_pairs.push(TrainPair {
                    a: idx[a.as_str()],
                    b: idx[b.as_str()],
                    target: truth.get(a, b).unwrap(),
                });
            }
        }
        let tp_mse = mean_squared_error(model, use_inputs, &test_pairs).unwrap();
        println!("  test-pair mse: {tp_mse:.5}");

        // Prediction spread: identity vs near vs far pairs.
        let mut by_d: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
        for (&(i, j), r) in wanted.iter().zip(&results).take(3000) {
            let p = model.predict_symmetric(&use_inputs[i], &use_inputs[j]).unwrap();
            let e = by_d.entry(r.distance as u64).or_insert((0.0, 0.0, 0));
            e.0 += p;
            e.1 += ged_to_similarity(r.distance).unwrap();
            e.2 += 1;
        }
        for (d, (sum_p, sum_t, c)) in by_d {
            println!(
                "  d={d}: mean pred {:.4}, target {:.4} ({c} pairs)",
                sum_p / c as f64,
                sum_t / c as f64
            );
        }
    }
    println!("total: {:?}", t_all.elapsed());
}
