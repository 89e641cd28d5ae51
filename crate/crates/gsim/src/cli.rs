//! Command-line interface over the library: dataset management, ground-truth
//! caching, training, evaluation, one-off queries, and parameter sweeps.
//!
//! Every subcommand writes a manifest next to its outputs recording the
//! resolved configuration and seeds, so a run can be reproduced from its
//! artifacts alone. Model and training options come from an optional flat
//! `key=value` config file; repeatable `--set KEY=VALUE` flags override the
//! file, and dedicated flags (`--seed`, `--ablate`) override both.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::eval::{evaluate_model, SimilarityTable};
use crate::graph::{
    build_features, erdos_renyi, load_dataset, load_ground_truth, perturbed_corpus, save_dataset,
    split_dataset, cache_ground_truth, DatasetSplit, FeatureMode, Graph, GraphPair,
};
use crate::nn::{
    load_checkpoint, mean_squared_error, prepare_graph, save_checkpoint, train, Ablation,
    GraphInput, LogRow, Model, ModelConfig, TrainConfig, TrainPair, Variant,
};
use crate::oracles::{
    ged_astar, ged_beam, ged_bipartite, ged_to_similarity, ground_truth_ged_pairs,
    mcs_branch_bound, EditCostModel, DEFAULT_BEAM_WIDTH, DEFAULT_EXACT_THRESHOLD,
    DEFAULT_NODE_BUDGET,
};
use crate::spectral::SpectralConfig;

// ---------------------------------------------------------------------------
// Argument grammar

#[derive(Parser)]
#[command(
    name = "gsim",
    version,
    about = "Graph similarity toolkit: hierarchical correlation model plus exact edit-distance oracles"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Generate, import, or split graph datasets (JSON-lines files).
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Compute and cache ground-truth values for every unordered graph pair.
    Groundtruth(GroundtruthArgs),
    /// Train a model against cached ground truth and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint's retrieval quality on the test split.
    Eval(EvalArgs),
    /// Compare two graph files with a trained model.
    Query(QueryArgs),
    /// Retrain across a parameter range and tabulate test error per value.
    Sweep(SweepArgs),
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Generate a synthetic corpus.
    Gen(DatasetGenArgs),
    /// Validate an external JSON-lines corpus and rewrite it canonically.
    Import(DatasetImportArgs),
    /// Partition a dataset's graph ids into train/val/test lists.
    Split(DatasetSplitArgs),
}

#[derive(Args)]
struct DatasetGenArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Corpus family.
    #[arg(long, value_enum, default_value_t = DatasetKind::Perturbed)]
    kind: DatasetKind,
    /// Number of graphs to generate.
    #[arg(long, default_value_t = 300)]
    count: usize,
    /// Node count of the base graph (perturbed) or of every graph (random).
    #[arg(long, default_value_t = 12)]
    base_n: usize,
    /// Edge probability of the underlying random graphs.
    #[arg(long, default_value_t = 0.35)]
    edge_prob: f64,
    /// Node label alphabet size; 0 leaves nodes unlabeled.
    #[arg(long, default_value_t = 3)]
    alphabet: usize,
    /// Maximum edits applied to each perturbed copy (perturbed kind only).
    #[arg(long, default_value_t = 4)]
    max_edits: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DatasetKind {
    /// One random base graph plus edit-perturbed copies of it.
    Perturbed,
    /// Independent connected random graphs.
    Random,
}

#[derive(Args)]
struct DatasetImportArgs {
    /// JSON-lines graph file to validate.
    #[arg(long)]
    input: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DatasetSplitArgs {
    /// Dataset file (JSON lines) whose ids are to be partitioned.
    #[arg(long)]
    dataset: PathBuf,
    /// Train:val:test proportions, e.g. 7:2:1.
    #[arg(long, default_value = "7:2:1")]
    ratio: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GroundtruthArgs {
    /// Dataset file (JSON lines).
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory; an existing ground_truth.csv there is reused and
    /// only missing values are computed.
    #[arg(long)]
    out: PathBuf,
    /// Which measure to compute.
    #[arg(long, value_enum, default_value_t = Measure::Ged)]
    measure: Measure,
    /// Largest graph size (nodes) still solved exactly for edit distance.
    #[arg(long, default_value_t = DEFAULT_EXACT_THRESHOLD)]
    threshold: usize,
    /// Search-node budget for the common-subgraph solver.
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    budget: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Measure {
    /// Graph edit distance (exact below the threshold, else an upper bound).
    Ged,
    /// Size of the largest connected common subgraph.
    Mcs,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset file (JSON lines).
    #[arg(long)]
    dataset: PathBuf,
    /// Split file produced by `gsim dataset split`.
    #[arg(long)]
    split: PathBuf,
    /// Ground-truth CSV produced by `gsim groundtruth`.
    #[arg(long)]
    ground_truth: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single config key, e.g. --set epochs=5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Disable one model component.
    #[arg(long, value_enum)]
    ablate: Option<AblateOpt>,
    /// Override the training seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AblateOpt {
    /// Replace transport-based node alignment with arbitrary orders.
    NoAlignment,
    /// Drop all coarsened stages; correlate full-resolution embeddings only.
    NoHierarchy,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by `gsim train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset file (JSON lines); all of it serves as the retrieval corpus.
    #[arg(long)]
    dataset: PathBuf,
    /// Split file; its test ids become the queries.
    #[arg(long)]
    split: PathBuf,
    /// Ground-truth CSV produced by `gsim groundtruth`.
    #[arg(long)]
    ground_truth: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Cutoff for precision@k.
    #[arg(long, default_value_t = 10)]
    k: usize,
}

#[derive(Args)]
struct QueryArgs {
    /// Checkpoint written by `gsim train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// First graph file (JSON lines; the first graph is used).
    #[arg(long)]
    g1: PathBuf,
    /// Second graph file (JSON lines; the first graph is used).
    #[arg(long)]
    g2: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Parameter to vary.
    #[arg(long, value_enum)]
    param: SweepParam,
    /// Dataset file (JSON lines).
    #[arg(long)]
    dataset: PathBuf,
    /// Split file produced by `gsim dataset split`.
    #[arg(long)]
    split: PathBuf,
    /// Ground-truth CSV produced by `gsim groundtruth`.
    #[arg(long)]
    ground_truth: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single config key, e.g. --set epochs=5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Number of seeds averaged per parameter value.
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    /// Comma-separated parameter values to try (defaults depend on --param).
    #[arg(long)]
    values: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    /// Number of pooling channels (1, 2, 3, 4 by default).
    Channels,
    /// Number of hierarchy stages (2, 3, 4 by default).
    Stages,
}

// ---------------------------------------------------------------------------
// Entry points

/// Parses `std::env::args`, runs the command, and returns a process exit
/// code. Errors print a single `error: ...` line on stderr.
pub fn run() -> i32 {
    match dispatch(Cli::parse()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

/// Test-friendly entry point taking explicit arguments (the first one is the
/// program name).
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    dispatch(Cli::try_parse_from(args)?)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Commands::Dataset(DatasetCmd::Gen(a)) => cmd_dataset_gen(a),
        Commands::Dataset(DatasetCmd::Import(a)) => cmd_dataset_import(a),
        Commands::Dataset(DatasetCmd::Split(a)) => cmd_dataset_split(a),
        Commands::Groundtruth(a) => cmd_groundtruth(a),
        Commands::Train(a) => cmd_train(a),
        Commands::Eval(a) => cmd_eval(a),
        Commands::Query(a) => cmd_query(a),
        Commands::Sweep(a) => cmd_sweep(a),
    }
}

// ---------------------------------------------------------------------------
// Config resolution

/// Model/training options after merging defaults, the config file, `--set`
/// overrides, and dedicated flags. Serialized into every manifest.
#[derive(Clone, Debug, Serialize)]
struct ResolvedConfig {
    model: ModelConfig,
    train: TrainConfig,
    /// Validation pairs are capped at this count (seeded subsample) so
    /// periodic evaluation stays cheap on large splits.
    val_pair_cap: usize,
}

/// Reads a flat `key=value` file (blank lines and `#` comments allowed) and
/// applies `--set` overrides on top.
fn parse_settings(file: Option<&Path>, sets: &[String]) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                anyhow!("{}:{}: expected key=value, got {:?}", path.display(), lineno + 1, line)
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| anyhow!("--set {s:?}: expected KEY=VALUE"))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Tracks which keys a config map actually used so typos are rejected.
struct Settings<'a> {
    map: &'a BTreeMap<String, String>,
    used: std::cell::RefCell<BTreeSet<&'a str>>,
}

impl<'a> Settings<'a> {
    fn new(map: &'a BTreeMap<String, String>) -> Settings<'a> {
        Settings { map, used: std::cell::RefCell::new(BTreeSet::new()) }
    }

    fn raw(&self, key: &'static str) -> Option<&'a str> {
        self.used.borrow_mut().insert(key);
        self.map.get(key).map(|s| s.as_str())
    }

    fn parse<T>(&self, key: &'static str, default: T) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| anyhow!("config key {key}: invalid value {v:?} ({e})")),
        }
    }

    fn finish(self) -> Result<()> {
        let used = self.used.into_inner();
        if let Some(k) = self.map.keys().find(|k| !used.contains(k.as_str())) {
            bail!("unknown config key {k:?}");
        }
        Ok(())
    }
}

fn build_configs(map: &BTreeMap<String, String>) -> Result<ResolvedConfig> {
    let md = ModelConfig::default();
    let sd = SpectralConfig::default();
    let td = TrainConfig::default();
    let s = Settings::new(map);

    let variant = match s.raw("variant").unwrap_or("hierarchical") {
        "hierarchical" => Variant::Hierarchical,
        "embavg" => Variant::EmbAvg,
        other => bail!("config key variant: expected hierarchical|embavg, got {other:?}"),
    };
    let ablation = match s.raw("ablation").unwrap_or("off") {
        "off" => Ablation::Off,
        "no-alignment" => Ablation::NoAlignment,
        "no-hierarchy" => Ablation::NoHierarchy,
        other => {
            bail!("config key ablation: expected off|no-alignment|no-hierarchy, got {other:?}")
        }
    };
    let stage_sizes = match s.raw("stage_sizes") {
        None => sd.stage_sizes.clone(),
        Some(v) => v
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| anyhow!("config key stage_sizes: {t:?} is not an integer"))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let k_eig = match s.raw("k_eig") {
        None | Some("auto") => None,
        Some(v) => Some(
            v.parse::<usize>()
                .map_err(|_| anyhow!("config key k_eig: expected integer or \"auto\", got {v:?}"))?,
        ),
    };
    let spectral = SpectralConfig {
        stage_sizes,
        k_eig,
        n_pool_channels: s.parse("pool_channels", sd.n_pool_channels)?,
        kmeans_restarts: s.parse("kmeans_restarts", sd.kmeans_restarts)?,
        kmeans_max_iter: s.parse("kmeans_max_iter", sd.kmeans_max_iter)?,
        seed: s.parse("spectral_seed", sd.seed)?,
    };
    let model = ModelConfig {
        variant,
        ablation,
        spectral,
        input_dim: s.parse("input_dim", md.input_dim)?,
        hidden_dim: s.parse("hidden_dim", md.hidden_dim)?,
        gcn_depth: s.parse("gcn_depth", md.gcn_depth)?,
        upsample_side: s.parse("upsample_side", md.upsample_side)?,
        conv_channels: s.parse("conv_channels", md.conv_channels)?,
        fc_hidden: s.parse("fc_hidden", md.fc_hidden)?,
        init_seed: s.parse("init_seed", md.init_seed)?,
    };
    let train = TrainConfig {
        batch_size: s.parse("batch_size", td.batch_size)?,
        learning_rate: s.parse("learning_rate", td.learning_rate)?,
        epochs: s.parse("epochs", td.epochs)?,
        seed: s.parse("seed", td.seed)?,
        loss_scale: s.parse("loss_scale", td.loss_scale)?,
        eval_interval: s.parse("eval_interval", td.eval_interval)?,
    };
    let val_pair_cap = s.parse("val_pair_cap", 200)?;
    s.finish()?;
    Ok(ResolvedConfig { model, train, val_pair_cap })
}

// ---------------------------------------------------------------------------
// Shared helpers

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("manifest serializes");
    text.push('\n');
    write_text(path, &text)
}

fn load_graphs(path: &Path) -> Result<Vec<Graph>> {
    load_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

/// Split file written by `dataset split` and consumed by train/eval/sweep.
#[derive(Serialize, Deserialize)]
struct SplitFile {
    dataset: String,
    ratio: String,
    seed: u64,
    split: DatasetSplit,
}

fn load_split(path: &Path) -> Result<SplitFile> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading split file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing split file {}", path.display()))
}

fn load_truth(path: &Path) -> Result<SimilarityTable> {
    let rows = load_ground_truth(path)
        .with_context(|| format!("reading ground truth {}", path.display()))?;
    Ok(SimilarityTable::from_ground_truth(&rows))
}

fn parse_ratio(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("--ratio {s:?}: expected three colon-separated integers like 7:2:1");
    }
    let nums = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| anyhow!("--ratio {s:?}: {p:?} is not a nonnegative integer"))
        })
        .collect::<Result<Vec<_>>>()?;
    if nums.iter().sum::<usize>() == 0 {
        bail!("--ratio {s:?}: parts sum to zero");
    }
    Ok((nums[0], nums[1], nums[2]))
}

/// Attaches constant features and precomputes each graph's hierarchy; also
/// returns an id-to-index map over the dataset order.
fn prepare_inputs(
    graphs: &[Graph],
    config: &ModelConfig,
) -> Result<(Vec<GraphInput>, BTreeMap<String, usize>)> {
    let mut idx = BTreeMap::new();
    for (i, g) in graphs.iter().enumerate() {
        if idx.insert(g.id().to_string(), i).is_some() {
            bail!("duplicate graph id {:?} in dataset", g.id());
        }
    }
    let mode = FeatureMode::Constant { width: config.input_dim };
    let vocab = BTreeMap::new();
    let inputs = graphs
        .par_iter()
        .map(|g| {
            let fg = build_features(g, &vocab, &mode)?;
            prepare_graph(&fg, config)
                .with_context(|| format!("preparing graph {:?}", g.id()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((inputs, idx))
}

/// All unordered pairs (identity included) within `ids`, with targets looked
/// up in the ground-truth table.
fn pair_list(
    ids: &[String],
    idx: &BTreeMap<String, usize>,
    truth: &SimilarityTable,
    truth_path: &Path,
) -> Result<Vec<TrainPair>> {
    let mut out = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        let ia = *idx
            .get(a)
            .ok_or_else(|| anyhow!("split references graph id {a:?} missing from the dataset"))?;
        for b in &ids[i..] {
            let ib = idx[b.as_str()];
            let target = truth.get(a, b).ok_or_else(|| {
                anyhow!(
                    "no ground truth for pair ({a}, {b}) in {}; run `gsim groundtruth` over this dataset first",
                    truth_path.display()
                )
            })?;
            out.push(TrainPair { a: ia, b: ib, target });
        }
    }
    Ok(out)
}

/// Seeded subsample keeping periodic validation affordable.
fn cap_pairs(mut pairs: Vec<TrainPair>, cap: usize, seed: u64) -> Vec<TrainPair> {
    if pairs.len() > cap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        pairs.shuffle(&mut rng);
        pairs.truncate(cap);
    }
    pairs
}

fn log_csv(log: &[LogRow]) -> String {
    let mut out = String::from("step,loss,val_mse\n");
    for row in log {
        writeln!(out, "{},{},{}", row.step, row.loss, row.val_mse).expect("string write");
    }
    out
}

// ---------------------------------------------------------------------------
// dataset

fn cmd_dataset_gen(args: DatasetGenArgs) -> Result<()> {
    let graphs = match args.kind {
        DatasetKind::Perturbed => perturbed_corpus(
            args.count,
            args.base_n,
            args.edge_prob,
            args.alphabet,
            args.max_edits,
            args.seed,
        )?,
        DatasetKind::Random => (0..args.count)
            .map(|i| {
                erdos_renyi(
                    format!("g{i:03}"),
                    args.base_n,
                    args.edge_prob,
                    args.seed.wrapping_add(i as u64),
                    true,
                )
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let data_path = args.out.join("dataset.jsonl");
    save_dataset(&graphs, &data_path)
        .with_context(|| format!("writing {}", data_path.display()))?;
    write_json(
        &args.out.join("dataset_manifest.json"),
        &json!({
            "command": "dataset gen",
            "kind": match args.kind {
                DatasetKind::Perturbed => "perturbed",
                DatasetKind::Random => "random",
            },
            "count": graphs.len(),
            "base_n": args.base_n,
            "edge_prob": args.edge_prob,
            "alphabet": args.alphabet,
            "max_edits": args.max_edits,
            "seed": args.seed,
            "dataset": data_path.display().to_string(),
        }),
    )?;
    println!("dataset: {} graphs -> {}", graphs.len(), data_path.display());
    Ok(())
}

fn cmd_dataset_import(args: DatasetImportArgs) -> Result<()> {
    let graphs = load_graphs(&args.input)?;
    if graphs.is_empty() {
        bail!("{}: no graphs found", args.input.display());
    }
    let mut seen = BTreeSet::new();
    for g in &graphs {
        if !seen.insert(g.id().to_string()) {
            bail!("{}: duplicate graph id {:?}", args.input.display(), g.id());
        }
    }
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let data_path = args.out.join("dataset.jsonl");
    save_dataset(&graphs, &data_path)
        .with_context(|| format!("writing {}", data_path.display()))?;
    write_json(
        &args.out.join("dataset_manifest.json"),
        &json!({
            "command": "dataset import",
            "source": args.input.display().to_string(),
            "count": graphs.len(),
            "dataset": data_path.display().to_string(),
        }),
    )?;
    println!("imported: {} graphs -> {}", graphs.len(), data_path.display());
    Ok(())
}

fn cmd_dataset_split(args: DatasetSplitArgs) -> Result<()> {
    let ratio = parse_ratio(&args.ratio)?;
    let graphs = load_graphs(&args.dataset)?;
    let ids: Vec<String> = graphs.iter().map(|g| g.id().to_string()).collect();
    let split = split_dataset(&ids, ratio, args.seed)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let file = SplitFile {
        dataset: args.dataset.display().to_string(),
        ratio: args.ratio.clone(),
        seed: args.seed,
        split,
    };
    let path = args.out.join("split.json");
    let mut text = serde_json::to_string_pretty(&file).expect("split serializes");
    text.push('\n');
    write_text(&path, &text)?;
    println!(
        "split: {} train / {} val / {} test -> {}",
        file.split.train_ids.len(),
        file.split.val_ids.len(),
        file.split.test_ids.len(),
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// groundtruth

fn cmd_groundtruth(args: GroundtruthArgs) -> Result<()> {
    let graphs = load_graphs(&args.dataset)?;
    let n = graphs.len();
    if n == 0 {
        bail!("{}: no graphs found", args.dataset.display());
    }
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let csv_path = args.out.join("ground_truth.csv");

    // Resume: pairs already carrying the requested measure are not recomputed,
    // so rerunning the command is idempotent (and cheap).
    let mut cache: BTreeMap<(String, String), GraphPair> = BTreeMap::new();
    if csv_path.exists() {
        for p in load_ground_truth(&csv_path)
            .with_context(|| format!("reading existing cache {}", csv_path.display()))?
        {
            cache.insert((p.g1_id.clone(), p.g2_id.clone()), p);
        }
    }

    let key_of = |i: usize, j: usize| -> (String, String) {
        let (a, b) = (graphs[i].id(), graphs[j].id());
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    };
    let mut todo: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i..n {
            let done = cache.get(&key_of(i, j)).is_some_and(|p| match args.measure {
                Measure::Ged => p.ged.is_some(),
                Measure::Mcs => p.mcs.is_some(),
            });
            if !done {
                todo.push((i, j));
            }
        }
    }

    let n_computed = todo.len();
    match args.measure {
        Measure::Ged => {
            let costs = EditCostModel::default();
            let results = ground_truth_ged_pairs(&graphs, &todo, &costs, args.threshold)?;
            for (&(i, j), r) in todo.iter().zip(&results) {
                let key = key_of(i, j);
                let entry = cache.entry(key.clone()).or_insert_with(|| GraphPair {
                    g1_id: key.0,
                    g2_id: key.1,
                    ged: None,
                    ged_provenance: None,
                    mcs: None,
                });
                entry.ged = Some(r.distance.round() as u64);
                entry.ged_provenance = Some(r.provenance);
            }
        }
        Measure::Mcs => {
            let results = todo
                .par_iter()
                .map(|&(i, j)| mcs_branch_bound(&graphs[i], &graphs[j], args.budget))
                .collect::<Result<Vec<_>, _>>()?;
            for (&(i, j), r) in todo.iter().zip(&results) {
                let key = key_of(i, j);
                let entry = cache.entry(key.clone()).or_insert_with(|| GraphPair {
                    g1_id: key.0,
                    g2_id: key.1,
                    ged: None,
                    ged_provenance: None,
                    mcs: None,
                });
                entry.mcs = Some(r.size as u64);
            }
        }
    }

    // BTreeMap order makes reruns byte-identical.
    let rows: Vec<GraphPair> = cache.into_values().collect();
    cache_ground_truth(&rows, &csv_path)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    write_json(
        &args.out.join("ground_truth_manifest.json"),
        &json!({
            "command": "groundtruth",
            "dataset": args.dataset.display().to_string(),
            "measure": match args.measure { Measure::Ged => "ged", Measure::Mcs => "mcs" },
            "threshold": args.threshold,
            "budget": args.budget,
            "n_graphs": n,
            "n_pairs": rows.len(),
            "n_computed": n_computed,
            "n_cached": rows.len() - n_computed.min(rows.len()),
            "ground_truth": csv_path.display().to_string(),
        }),
    )?;
    println!(
        "ground truth: {} pairs ({} computed, {} cached) -> {}",
        rows.len(),
        n_computed,
        rows.len().saturating_sub(n_computed),
        csv_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train

fn cmd_train(args: TrainArgs) -> Result<()> {
    let settings = parse_settings(args.config.as_deref(), &args.set)?;
    let mut resolved = build_configs(&settings)?;
    if let Some(ab) = args.ablate {
        resolved.model.ablation = match ab {
            AblateOpt::NoAlignment => Ablation::NoAlignment,
            AblateOpt::NoHierarchy => Ablation::NoHierarchy,
        };
    }
    if let Some(seed) = args.seed {
        resolved.train.seed = seed;
    }

    let graphs = load_graphs(&args.dataset)?;
    let split = load_split(&args.split)?;
    let truth = load_truth(&args.ground_truth)?;
    let (inputs, idx) = prepare_inputs(&graphs, &resolved.model)?;
    let train_pairs = pair_list(&split.split.train_ids, &idx, &truth, &args.ground_truth)?;
    let val_pairs = cap_pairs(
        pair_list(&split.split.val_ids, &idx, &truth, &args.ground_truth)?,
        resolved.val_pair_cap,
        resolved.train.seed,
    );
    if train_pairs.is_empty() {
        bail!("split {} has no training pairs", args.split.display());
    }

    let mut model = Model::new(resolved.model.clone())?;
    let log = train(&mut model, &inputs, &train_pairs, &val_pairs, &resolved.train)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let ckpt_path = args.out.join("checkpoint.json");
    save_checkpoint(&model, &ckpt_path)
        .with_context(|| format!("writing {}", ckpt_path.display()))?;
    write_text(&args.out.join("train_log.csv"), &log_csv(&log))?;
    let last = log.last();
    write_json(
        &args.out.join("train_manifest.json"),
        &json!({
            "command": "train",
            "dataset": args.dataset.display().to_string(),
            "split": args.split.display().to_string(),
            "ground_truth": args.ground_truth.display().to_string(),
            "config": resolved,
            "n_train_pairs": train_pairs.len(),
            "n_val_pairs": val_pairs.len(),
            "final_step": last.map(|r| r.step),
            "final_loss": last.map(|r| r.loss),
            "final_val_mse": last.map(|r| r.val_mse),
            "checkpoint": ckpt_path.display().to_string(),
        }),
    )?;
    match last {
        Some(row) => println!(
            "trained: {} steps, loss {:.6}, val mse {:.6} -> {}",
            row.step,
            row.loss,
            row.val_mse,
            ckpt_path.display()
        ),
        None => println!("trained: 0 steps -> {}", ckpt_path.display()),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let model = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let graphs = load_graphs(&args.dataset)?;
    let split = load_split(&args.split)?;
    let truth = load_truth(&args.ground_truth)?;
    if args.k == 0 {
        bail!("--k must be at least 1");
    }
    if args.k > graphs.len() {
        bail!("--k {} exceeds the corpus size {}", args.k, graphs.len());
    }
    let (inputs, idx) = prepare_inputs(&graphs, &model.config)?;
    let corpus_ids: Vec<String> = graphs.iter().map(|g| g.id().to_string()).collect();
    for q in &split.split.test_ids {
        if !idx.contains_key(q) {
            bail!("split references graph id {q:?} missing from the dataset");
        }
    }
    ensure_truth_for_queries(&truth, &split.split.test_ids, &corpus_ids, &args.ground_truth)?;

    let predict = |a: &str, b: &str| -> Result<f64, String> {
        model
            .predict_symmetric(&inputs[idx[a]], &inputs[idx[b]])
            .map_err(|e| e.to_string())
    };
    let report = evaluate_model(predict, &corpus_ids, &split.split.test_ids, &truth, args.k)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let report_path = args.out.join("eval_report.json");
    write_json(
        &report_path,
        &json!({
            "command": "eval",
            "checkpoint": args.checkpoint.display().to_string(),
            "dataset": args.dataset.display().to_string(),
            "split": args.split.display().to_string(),
            "ground_truth": args.ground_truth.display().to_string(),
            "k": args.k,
            "model_config": model.config,
            "report": report,
        }),
    )?;
    write_text(&args.out.join("eval_summary.csv"), &report.summary_csv())?;
    println!(
        "eval: mse {:.6}, spearman {:.4}, kendall {:.4}, p@{} {:.4} over {} queries -> {}",
        report.mse,
        report.spearman_rho,
        report.kendall_tau,
        args.k,
        report.precision_at_k,
        report.n_queries,
        report_path.display()
    );
    Ok(())
}

/// Retrieval evaluation needs a target for every (query, corpus) pair; the
/// cached CSV may cover fewer (e.g. only train-split pairs). Missing ones
/// fail with a pointer at the groundtruth step.
fn ensure_truth_for_queries(
    truth: &SimilarityTable,
    queries: &[String],
    corpus: &[String],
    truth_path: &Path,
) -> Result<()> {
    for q in queries {
        for c in corpus {
            if truth.get(q, c).is_none() {
                bail!(
                    "no ground truth for pair ({q}, {c}) in {}; run `gsim groundtruth` over the full dataset first",
                    truth_path.display()
                );
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// query

fn load_first_graph(path: &Path) -> Result<Graph> {
    let graphs = load_graphs(path)?;
    graphs
        .into_iter()
        .next()
        .ok_or_else(|| anyhow!("{}: no graphs found", path.display()))
}

fn cmd_query(args: QueryArgs) -> Result<()> {
    let model = load_checkpoint(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let g1 = load_first_graph(&args.g1)?;
    let g2 = load_first_graph(&args.g2)?;
    let mode = FeatureMode::Constant { width: model.config.input_dim };
    let vocab = BTreeMap::new();
    let fa = build_features(&g1, &vocab, &mode)?;
    let fb = build_features(&g2, &vocab, &mode)?;
    let ia = prepare_graph(&fa, &model.config)
        .with_context(|| format!("preparing graph {:?}", g1.id()))?;
    let ib = prepare_graph(&fb, &model.config)
        .with_context(|| format!("preparing graph {:?}", g2.id()))?;

    let s12 = model.predict(&ia, &ib)?;
    let s21 = model.predict(&ib, &ia)?;
    println!("model similarity {} -> {}: {:.6}", g1.id(), g2.id(), s12);
    println!("model similarity {} -> {}: {:.6}", g2.id(), g1.id(), s21);
    println!("model similarity (mean of both orders): {:.6}", 0.5 * (s12 + s21));

    let costs = EditCostModel::default();
    if g1.n().max(g2.n()) <= DEFAULT_EXACT_THRESHOLD {
        let result = ged_astar(&g1, &g2, &costs, DEFAULT_NODE_BUDGET)?;
        let sim = ged_to_similarity(result.distance)?;
        let kind = if result.exact { "exact" } else { "upper bound (budget hit)" };
        println!("edit distance ({kind}): {} (similarity {:.6})", result.distance, sim);
    } else {
        let d = ged_beam(&g1, &g2, &costs, DEFAULT_BEAM_WIDTH)?
            .min(ged_bipartite(&g1, &g2, &costs)?);
        let sim = ged_to_similarity(d)?;
        println!(
            "edit distance (upper bound; graphs over {DEFAULT_EXACT_THRESHOLD} nodes): {d} (similarity {sim:.6})"
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

/// Stage-size ladders used by the stage-count sweep: suffixes of the default
/// ladder, so deeper settings only add coarser stages on top.
fn stage_sizes_for(n_stages: usize) -> Vec<usize> {
    const FULL: [usize; 4] = [6, 4, 2, 1];
    let n = n_stages.clamp(1, FULL.len());
    FULL[FULL.len() - n..].to_vec()
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let settings = parse_settings(args.config.as_deref(), &args.set)?;
    let base = build_configs(&settings)?;
    let graphs = load_graphs(&args.dataset)?;
    let split = load_split(&args.split)?;
    let truth = load_truth(&args.ground_truth)?;

    let mut values: Vec<usize> = match &args.values {
        Some(list) => list
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| anyhow!("--values: {t:?} is not an integer"))
            })
            .collect::<Result<Vec<_>>>()?,
        None => match args.param {
            SweepParam::Channels => vec![1, 2, 3, 4],
            SweepParam::Stages => vec![2, 3, 4],
        },
    };
    if values.is_empty() {
        bail!("--values: no parameter values given");
    }
    if let SweepParam::Stages = args.param {
        // Deeper ladders than the default are clamped rather than rejected.
        for v in values.iter_mut() {
            let clamped = (*v).clamp(1, 4);
            if clamped != *v {
                eprintln!("note: stages value {v} clamped to {clamped}");
                *v = clamped;
            }
        }
        values.dedup();
    }
    if let SweepParam::Channels = args.param {
        if values.iter().any(|&v| v == 0) {
            bail!("--values: channel count must be at least 1");
        }
    }

    let param_name = match args.param {
        SweepParam::Channels => "channels",
        SweepParam::Stages => "stages",
    };
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for &value in &values {
        let mut mses = Vec::new();
        for s in 0..args.seeds as u64 {
            let mut model_cfg = base.model.clone();
            match args.param {
                SweepParam::Channels => model_cfg.spectral.n_pool_channels = value,
                SweepParam::Stages => model_cfg.spectral.stage_sizes = stage_sizes_for(value),
            }
            model_cfg.init_seed = base.model.init_seed.wrapping_add(s);
            let mut train_cfg = base.train.clone();
            train_cfg.seed = base.train.seed.wrapping_add(s);

            let (inputs, idx) = prepare_inputs(&graphs, &model_cfg)?;
            let train_pairs =
                pair_list(&split.split.train_ids, &idx, &truth, &args.ground_truth)?;
            let val_pairs = Vec::new();
            let test_pairs =
                pair_list(&split.split.test_ids, &idx, &truth, &args.ground_truth)?;
            if train_pairs.is_empty() || test_pairs.is_empty() {
                bail!("split {} has an empty train or test part", args.split.display());
            }
            let mut model = Model::new(model_cfg)?;
            train(&mut model, &inputs, &train_pairs, &val_pairs, &train_cfg)?;
            let mse = mean_squared_error(&model, &inputs, &test_pairs)?;
            mses.push(mse);
        }
        rows.push((value, mses));
    }

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let csv_path = args.out.join(format!("sweep_{param_name}.csv"));
    let mut csv = String::from("param,value,n_seeds,mean_test_mse,min_test_mse,max_test_mse\n");
    for (value, mses) in &rows {
        let mean = mses.iter().sum::<f64>() / mses.len() as f64;
        let min = mses.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = mses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        writeln!(csv, "{param_name},{value},{},{mean},{min},{max}", mses.len())
            .expect("string write");
    }
    write_text(&csv_path, &csv)?;
    write_json(
        &args.out.join(format!("sweep_{param_name}_manifest.json")),
        &json!({
            "command": "sweep",
            "param": param_name,
            "values": values,
            "seeds": args.seeds,
            "dataset": args.dataset.display().to_string(),
            "split": args.split.display().to_string(),
            "ground_truth": args.ground_truth.display().to_string(),
            "config": base,
            "runs": rows
                .iter()
                .map(|(value, mses)| json!({ "value": value, "test_mse": mses }))
                .collect::<Vec<_>>(),
        }),
    )?;
    println!("sweep: {} settings x {} seeds -> {}", rows.len(), args.seeds, csv_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
