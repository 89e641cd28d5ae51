//! Trainable similarity models.
//!
//! The full model embeds each graph with per-stage graph-convolution
//! encoders over its compaction hierarchy, aligns node embeddings with
//! optimal transport, turns each stage into fixed-size correlation matrices,
//! and regresses a similarity score with a small convolutional network. A
//! mean-pooled-embedding variant ([`Variant::EmbAvg`]) serves as a baseline
//! trained by the same loop. All differentiation happens on the [`Tape`] in
//! [`tape`]; discrete choices (clustering, matching, node orders) are
//! recomputed each forward pass but carry no gradient.

pub mod tape;
pub mod train;

pub use tape::{max_relative_gradient_error, numeric_gradient, NodeId, Tape, Tensor};
pub use train::{mean_squared_error, pair_loss_and_grads, train, LogRow, TrainConfig, TrainPair};

use crate::align::{align_stage, interp_matrix};
use crate::graph::Graph;
use crate::hashing::config_hash;
use crate::mat::Mat;
use crate::spectral::{build_hierarchy, pooling_matrix, SpectralConfig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("graph has no feature matrix; build features first")]
    MissingFeatures,
    #[error("bad model/train config: {0}")]
    BadConfig(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged: non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error(transparent)]
    Align(#[from] crate::align::AlignError),
    #[error(transparent)]
    Spectral(#[from] crate::spectral::SpectralError),
    #[error("unsupported checkpoint version {0}")]
    CheckpointVersion(u32),
    #[error("checkpoint config hash mismatch: stored {stored}, computed {computed}")]
    CheckpointHashMismatch { stored: String, computed: String },
    #[error("checkpoint tensor problem: {0}")]
    CheckpointTensor(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

// ---------------------------------------------------------------------------
// Plain (tape-free) GCN building blocks

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

/// Stand-alone GCN weights (one stage); used by the untrained baseline
/// helpers and extractable from a full [`Model`].
#[derive(Clone, Debug, PartialEq)]
pub struct GcnParams {
    pub layers: Vec<Mat>,
}

/// Self-loop-normalized adjacency `D̃^{-1/2} (A + I) D̃^{-1/2}`.
pub fn gcn_norm_adjacency(adjacency: &Mat) -> Mat {
    let n = adjacency.rows();
    let mut a = adjacency.clone();
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    Mat::from_fn(n, n, |i, j| a[(i, j)] / (deg[i] * deg[j]).sqrt())
}

/// One graph-convolution layer: `δ(D̃^{-1/2}(A+I)D̃^{-1/2} · H · W)`.
pub fn gcn_layer(h: &Mat, adjacency: &Mat, w: &Mat, activation: Activation) -> Result<Mat, NnError> {
    if adjacency.rows() != h.rows() || h.cols() != w.rows() {
        return Err(NnError::Shape(format!(
            "gcn_layer: adjacency {}x{}, h {}x{}, w {}x{}",
            adjacency.rows(),
            adjacency.cols(),
            h.rows(),
            h.cols(),
            w.rows(),
            w.cols()
        )));
    }
    let mut out = gcn_norm_adjacency(adjacency).matmul(h).matmul(w);
    if activation == Activation::Relu {
        for v in out.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    Ok(out)
}

/// Chains [`gcn_layer`] (ReLU) over all layers; empty layer list is the
/// identity.
pub fn gcn_forward(params: &GcnParams, adjacency: &Mat, x: &Mat) -> Result<Mat, NnError> {
    let mut h = x.clone();
    for w in &params.layers {
        h = gcn_layer(&h, adjacency, w, Activation::Relu)?;
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Model configuration

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Hierarchical correlation model (the full pipeline).
    Hierarchical,
    /// Mean-pooled embedding dot-product baseline.
    EmbAvg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    Off,
    /// Random node orders instead of transport-based alignment.
    NoAlignment,
    /// Stage-0 correlation only; hierarchy stages dropped.
    NoHierarchy,
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ablation::Off => write!(f, "off"),
            Ablation::NoAlignment => write!(f, "no-alignment"),
            Ablation::NoHierarchy => write!(f, "no-hierarchy"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub ablation: Ablation,
    /// Hierarchy construction; its stage sizes and pooling channel count
    /// drive the model architecture too.
    pub spectral: SpectralConfig,
    /// Node feature width (must match the dataset's feature matrices).
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub gcn_depth: usize,
    /// Side length correlation matrices are up-sampled to at stage 0; must
    /// be at least the largest graph's node count.
    pub upsample_side: usize,
    pub conv_channels: usize,
    pub fc_hidden: usize,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Hierarchical,
            ablation: Ablation::Off,
            spectral: SpectralConfig::default(),
            input_dim: crate::graph::DEFAULT_CONSTANT_FEATURE_WIDTH,
            hidden_dim: 32,
            gcn_depth: 3,
            upsample_side: 16,
            conv_channels: 8,
            fc_hidden: 128,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        self.spectral.validate()?;
        let positive = [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("conv_channels", self.conv_channels),
            ("fc_hidden", self.fc_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(NnError::BadConfig(format!("{name} must be >= 1")));
            }
        }
        if self.upsample_side < 2 {
            return Err(NnError::BadConfig("upsample_side must be >= 2".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    /// Pooling channels (= correlation channels per stage).
    pub fn n_channels(&self) -> usize {
        self.spectral.n_pool_channels
    }

    /// Correlation side length per stage: the up-sampling side for stage 0,
    /// then the configured stage sizes (skipped entirely when the hierarchy
    /// is ablated away).
    pub fn sides(&self) -> Vec<usize> {
        let mut sides = vec![self.upsample_side];
        if self.ablation != Ablation::NoHierarchy {
            sides.extend(&self.spectral.stage_sizes);
        }
        sides
    }

    /// Flattened feature count a branch contributes to the regressor head.
    fn branch_len(&self, side: usize) -> usize {
        if side == 1 {
            self.n_channels()
        } else {
            let pooled = if side >= 4 { side / 2 } else { side };
            self.conv_channels * pooled * pooled
        }
    }
}

// ---------------------------------------------------------------------------
// Per-graph precomputation

/// Everything about one graph the model consumes: features, per-stage
/// normalized adjacencies, fixed pooling projections, and the degree/label
/// data canonical node ordering uses. Fixed across training (the hierarchy
/// depends only on the graph), so compute it once per graph.
#[derive(Clone, Debug)]
pub struct GraphInput {
    pub id: String,
    pub features: Mat,
    /// Normalized `(A+I)` per stage (index 0 = original graph).
    pub anorm: Vec<Mat>,
    /// Pooling matrices per hierarchy stage (1..), per channel.
    pub pools: Vec<Vec<Mat>>,
    /// Node degrees per stage (for canonical ordering).
    pub degrees: Vec<Vec<usize>>,
    /// Stage-0 label ids (per-graph vocabulary), if the graph is labeled.
    pub labels0: Option<Vec<usize>>,
}

/// Precomputes the model inputs for one graph under a given configuration.
pub fn prepare_graph(g: &Graph, config: &ModelConfig) -> Result<GraphInput, NnError> {
    config.validate()?;
    let features = g.features().ok_or(NnError::MissingFeatures)?.clone();
    if features.cols() != config.input_dim {
        return Err(NnError::Shape(format!(
            "graph {}: feature width {} but model expects {}",
            g.id(),
            features.cols(),
            config.input_dim
        )));
    }
    if config.variant == Variant::Hierarchical && g.n() > config.upsample_side {
        return Err(NnError::Shape(format!(
            "graph {} has {} nodes, above the up-sampling side {}; raise upsample_side",
            g.id(),
            g.n(),
            config.upsample_side
        )));
    }

    let labels0 = g.labels().map(|ls| {
        let vocab: BTreeMap<&str, usize> = {
            let mut uniq: Vec<&str> = ls.iter().map(String::as_str).collect();
            uniq.sort_unstable();
            uniq.dedup();
            uniq.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
        };
        ls.iter().map(|l| vocab[l.as_str()]).collect::<Vec<usize>>()
    });

    let adjacency = g.adjacency();
    let mut anorm = vec![gcn_norm_adjacency(&adjacency)];
    let mut degrees = vec![(0..g.n()).map(|v| g.degree(v)).collect::<Vec<usize>>()];
    let mut pools = Vec::new();

    let hierarchical = config.variant == Variant::Hierarchical
        && config.ablation != Ablation::NoHierarchy;
    if hierarchical {
        let hierarchy = build_hierarchy(g, &config.spectral)?;
        let mut prev_adjacency = adjacency;
        for stage in &hierarchy.stages {
            let mut stage_pools = Vec::with_capacity(config.n_channels());
            for channel in 1..=config.n_channels() {
                stage_pools.push(pooling_matrix(&prev_adjacency, &stage.clusters, channel)?);
            }
            pools.push(stage_pools);
            anorm.push(gcn_norm_adjacency(&stage.adjacency));
            degrees.push(
                (0..stage.adjacency.rows())
                    .map(|i| {
                        (0..stage.adjacency.cols())
                            .filter(|&j| j != i && stage.adjacency[(i, j)] > 0.5)
                            .count()
                    })
                    .collect(),
            );
            prev_adjacency = stage.adjacency.clone();
        }
    }

    Ok(GraphInput {
        id: g.id().to_string(),
        features,
        anorm,
        pools,
        degrees,
        labels0,
    })
}

// ---------------------------------------------------------------------------
// The model

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    names: Vec<String>,
    slots: BTreeMap<String, usize>,
    pub params: Vec<Tensor>,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Model, NnError> {
        config.validate()?;
        let mut model = Model {
            config: config.clone(),
            names: Vec::new(),
            slots: BTreeMap::new(),
            params: Vec::new(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);

        // Per-stage GCN weight chains.
        let n_gcn_stages = match config.variant {
            Variant::EmbAvg => 1,
            Variant::Hierarchical => {
                if config.ablation == Ablation::NoHierarchy {
                    1
                } else {
                    1 + config.spectral.stage_sizes.len()
                }
            }
        };
        let mut stage_in = config.input_dim;
        for l in 0..n_gcn_stages {
            for k in 0..config.gcn_depth {
                let d_in = if k == 0 { stage_in } else { config.hidden_dim };
                model.add_weight(&mut rng, &format!("gcn{l}.w{k}"), &[d_in, config.hidden_dim]);
            }
            if config.gcn_depth > 0 {
                stage_in = config.hidden_dim;
            }
        }

        if config.variant == Variant::Hierarchical {
            let c_in = config.n_channels();
            let f = config.conv_channels;
            for (i, side) in config.sides().iter().enumerate() {
                if *side >= 2 {
                    model.add_weight(&mut rng, &format!("conv{i}.1.w"), &[f, c_in, 3, 3]);
                    model.add_zeros(&format!("conv{i}.1.b"), &[f]);
                    model.add_weight(&mut rng, &format!("conv{i}.2.w"), &[f, f, 3, 3]);
                    model.add_zeros(&format!("conv{i}.2.b"), &[f]);
                }
            }
            let concat: usize = config.sides().iter().map(|&s| config.branch_len(s)).sum();
            model.add_weight(&mut rng, "fc1.w", &[concat, config.fc_hidden]);
            model.add_zeros("fc1.b", &[1, config.fc_hidden]);
            model.add_weight(&mut rng, "fc2.w", &[config.fc_hidden, 1]);
            model.add_zeros("fc2.b", &[1, 1]);
        }
        Ok(model)
    }

    /// Uniform(−a, a) with a = sqrt(6/(fan_in+fan_out)).
    fn add_weight(&mut self, rng: &mut ChaCha8Rng, name: &str, shape: &[usize]) {
        let (fan_in, fan_out) = match shape.len() {
            2 => (shape[0], shape[1]),
            4 => (shape[1] * shape[2] * shape[3], shape[0] * shape[2] * shape[3]),
            _ => unreachable!("weights are matrices or conv kernels"),
        };
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..shape.iter().product::<usize>())
            .map(|_| rng.gen_range(-a..a))
            .collect();
        self.register(name, Tensor { shape: shape.to_vec(), data });
    }

    fn add_zeros(&mut self, name: &str, shape: &[usize]) {
        self.register(name, Tensor::zeros(shape));
    }

    fn register(&mut self, name: &str, t: Tensor) {
        debug_assert!(!self.slots.contains_key(name), "duplicate parameter {name}");
        self.slots.insert(name.to_string(), self.params.len());
        self.names.push(name.to_string());
        self.params.push(t);
    }

    fn slot(&self, name: &str) -> usize {
        *self
            .slots
            .get(name)
            .unwrap_or_else(|| panic!("model has no parameter named {name}"))
    }

    pub fn parameter_names(&self) -> &[String] {
        &self.names
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Human-readable architecture summary.
    pub fn architecture(&self) -> String {
        let c = &self.config;
        match c.variant {
            Variant::EmbAvg => format!(
                "embavg: gcn depth {} ({} -> {}), mean-pool + sigmoid(dot); {} parameters",
                c.gcn_depth,
                c.input_dim,
                c.hidden_dim,
                self.parameter_count()
            ),
            Variant::Hierarchical => format!(
                "hierarchical: gcn depth {} ({} -> {}) on sides {:?}, {} channels, \
                 conv {}x3x3 per branch, fc {} -> 1, ablation {}; {} parameters",
                c.gcn_depth,
                c.input_dim,
                c.hidden_dim,
                c.sides(),
                c.n_channels(),
                c.conv_channels,
                c.fc_hidden,
                c.ablation,
                self.parameter_count()
            ),
        }
    }

    /// Stage-0 GCN weights as plain matrices (for the baseline helpers).
    pub fn stage0_gcn(&self) -> GcnParams {
        GcnParams {
            layers: (0..self.config.gcn_depth)
                .map(|k| self.params[self.slot(&format!("gcn0.w{k}"))].to_mat())
                .collect(),
        }
    }

    /// Runs one stage's GCN chain on the tape.
    fn gcn_on_tape(
        &self,
        tape: &mut Tape,
        stage: usize,
        anorm: NodeId,
        input: NodeId,
    ) -> Result<NodeId, NnError> {
        let mut h = input;
        for k in 0..self.config.gcn_depth {
            let w = tape.param(
                self.slot(&format!("gcn{stage}.w{k}")),
                &self.params[self.slot(&format!("gcn{stage}.w{k}"))],
            );
            let propagated = tape.matmul(anorm, h)?;
            let projected = tape.matmul(propagated, w)?;
            h = tape.relu(projected);
        }
        Ok(h)
    }

    /// Embeds every stage and channel: `out[stage][channel]` is an
    /// `n_stage × d` node-embedding matrix on the tape. Stage 0 is shared
    /// across channels; stage `l` pools stage `l−1` through the fixed
    /// projection, so gradients flow down the whole chain.
    fn embed(&self, tape: &mut Tape, input: &GraphInput) -> Result<Vec<Vec<NodeId>>, NnError> {
        let channels = self.config.n_channels();
        let x0 = tape.constant_mat(&input.features);
        let a0 = tape.constant_mat(&input.anorm[0]);
        let h0 = self.gcn_on_tape(tape, 0, a0, x0)?;
        let mut stages = vec![vec![h0; channels]];
        for (l, stage_pools) in input.pools.iter().enumerate() {
            let anorm = tape.constant_mat(&input.anorm[l + 1]);
            let mut hs = Vec::with_capacity(channels);
            for (c, pool) in stage_pools.iter().enumerate() {
                let u = tape.constant_mat(pool);
                let pooled = tape.matmul(u, stages[l][c])?;
                hs.push(self.gcn_on_tape(tape, l + 1, anorm, pooled)?);
            }
            stages.push(hs);
        }
        Ok(stages)
    }

    /// Full forward pass for an ordered pair, returning the prediction node
    /// (a scalar in (0,1)). `align_seed` only matters under the
    /// no-alignment ablation, which replaces matching with seeded shuffles.
    pub fn forward(
        &self,
        tape: &mut Tape,
        a: &GraphInput,
        b: &GraphInput,
        align_seed: u64,
    ) -> Result<NodeId, NnError> {
        self.forward_impl(tape, a, b, align_seed, None)
    }

    /// Forward pass with the discrete alignment fixed to a precomputed
    /// [`AlignmentPlan`]. With the plan held constant the prediction is a
    /// smooth function of the parameters, which is what gradient checks
    /// need; training recomputes the plan every step via [`Model::forward`].
    pub fn forward_with_plan(
        &self,
        tape: &mut Tape,
        a: &GraphInput,
        b: &GraphInput,
        plan: &AlignmentPlan,
    ) -> Result<NodeId, NnError> {
        self.forward_impl(tape, a, b, 0, Some(plan))
    }

    /// The per-stage node orders the current parameters induce for a pair.
    pub fn alignment_plan(
        &self,
        a: &GraphInput,
        b: &GraphInput,
        align_seed: u64,
    ) -> Result<AlignmentPlan, NnError> {
        let mut stages = Vec::new();
        if self.config.variant == Variant::Hierarchical {
            let mut tape = Tape::new();
            let ea = self.embed(&mut tape, a)?;
            let eb = self.embed(&mut tape, b)?;
            for l in 0..self.config.sides().len() {
                let h1 = tape.mat(ea[l][0]);
                let h2 = tape.mat(eb[l][0]);
                stages.push(self.stage_orders(&h1, a, &h2, b, l, align_seed)?);
            }
        }
        Ok(AlignmentPlan { stages })
    }

    fn forward_impl(
        &self,
        tape: &mut Tape,
        a: &GraphInput,
        b: &GraphInput,
        align_seed: u64,
        plan: Option<&AlignmentPlan>,
    ) -> Result<NodeId, NnError> {
        match self.config.variant {
            Variant::EmbAvg => {
                let ea = self.embed_stage0_only(tape, a)?;
                let eb = self.embed_stage0_only(tape, b)?;
                let mean = |tape: &mut Tape, h: NodeId, n: usize| -> Result<NodeId, NnError> {
                    let row = Mat::from_fn(1, n, |_, _| 1.0 / n as f64);
                    let m = tape.constant_mat(&row);
                    tape.matmul(m, h)
                };
                let na = a.features.rows();
                let nb = b.features.rows();
                let pa = mean(tape, ea, na)?;
                let pb = mean(tape, eb, nb)?;
                let dot = tape.matmul_tb(pa, pb)?;
                Ok(tape.sigmoid(dot))
            }
            Variant::Hierarchical => self.forward_hierarchical(tape, a, b, align_seed, plan),
        }
    }

    fn embed_stage0_only(&self, tape: &mut Tape, input: &GraphInput) -> Result<NodeId, NnError> {
        let x0 = tape.constant_mat(&input.features);
        let a0 = tape.constant_mat(&input.anorm[0]);
        self.gcn_on_tape(tape, 0, a0, x0)
    }

    fn forward_hierarchical(
        &self,
        tape: &mut Tape,
        a: &GraphInput,
        b: &GraphInput,
        align_seed: u64,
        plan: Option<&AlignmentPlan>,
    ) -> Result<NodeId, NnError> {
        let sides = self.config.sides();
        if let Some(p) = plan {
            if p.stages.len() != sides.len() {
                return Err(NnError::Shape(format!(
                    "alignment plan has {} stages, model {}",
                    p.stages.len(),
                    sides.len()
                )));
            }
        }
        let ea = self.embed(tape, a)?;
        let eb = self.embed(tape, b)?;
        if ea.len() != sides.len() || eb.len() != sides.len() {
            return Err(NnError::Shape(format!(
                "graph {} / {}: expected {} stages, got {} / {}",
                a.id,
                b.id,
                sides.len(),
                ea.len(),
                eb.len()
            )));
        }

        let mut branch_rows = Vec::with_capacity(sides.len());
        for (l, &side) in sides.iter().enumerate() {
            let (row_order, cols) = match plan {
                Some(p) => p.stages[l].clone(),
                None => {
                    let h1 = tape.mat(ea[l][0]);
                    let h2 = tape.mat(eb[l][0]);
                    self.stage_orders(&h1, a, &h2, b, l, align_seed)?
                }
            };

            let na = tape.value(ea[l][0]).shape[0];
            let nb = tape.value(eb[l][0]).shape[0];
            let pr = tape.constant_mat(&selection_matrix(&row_order));
            let pc = tape.constant_mat(&selection_matrix(&cols));
            let r = tape.constant_mat(&interp_matrix(na, side));
            let s = tape.constant_mat(&interp_matrix(nb, side));

            let mut channels = Vec::with_capacity(self.config.n_channels());
            for c in 0..self.config.n_channels() {
                let x1 = tape.matmul(pr, ea[l][c])?;
                let x2 = tape.matmul(pc, eb[l][c])?;
                let corr = tape.matmul_tb(x1, x2)?;
                let partial = tape.matmul_tb(corr, s)?;
                channels.push(tape.matmul(r, partial)?);
            }
            branch_rows.push(self.branch(tape, l, side, &channels)?);
        }

        let row = tape.concat_row(&branch_rows)?;
        let w1 = tape.param(self.slot("fc1.w"), &self.params[self.slot("fc1.w")]);
        let b1 = tape.param(self.slot("fc1.b"), &self.params[self.slot("fc1.b")]);
        let z = tape.matmul(row, w1)?;
        let z = tape.add_row_bias(z, b1)?;
        let z = tape.relu(z);
        let w2 = tape.param(self.slot("fc2.w"), &self.params[self.slot("fc2.w")]);
        let b2 = tape.param(self.slot("fc2.b"), &self.params[self.slot("fc2.b")]);
        let z = tape.matmul(z, w2)?;
        let z = tape.add_row_bias(z, b2)?;
        Ok(tape.sigmoid(z))
    }

    /// Node orders feeding the stage-`l` correlation: canonical order plus
    /// transport matching, or seeded shuffles under the ablation.
    fn stage_orders(
        &self,
        h1: &Mat,
        a: &GraphInput,
        h2: &Mat,
        b: &GraphInput,
        l: usize,
        align_seed: u64,
    ) -> Result<(Vec<usize>, Vec<usize>), NnError> {
        if self.config.ablation == Ablation::NoAlignment {
            let mut rng = ChaCha8Rng::seed_from_u64(
                align_seed ^ (l as u64).wrapping_mul(0x9E3779B97F4A7C15),
            );
            let mut rows: Vec<usize> = (0..h1.rows()).collect();
            rows.shuffle(&mut rng);
            let mut cols: Vec<usize> = (0..h2.rows()).collect();
            cols.shuffle(&mut rng);
            return Ok((rows, cols));
        }
        let labels1 = if l == 0 { a.labels0.as_deref() } else { None };
        let labels2 = if l == 0 { b.labels0.as_deref() } else { None };
        let alignment =
            align_stage(h1, &a.degrees[l], labels1, h2, &b.degrees[l], labels2)?;
        let cols: Vec<usize> = alignment
            .matching
            .t
            .iter()
            .chain(&alignment.matching.trailing)
            .copied()
            .collect();
        Ok((alignment.row_order, cols))
    }

    /// One regressor branch: conv → ReLU → (pool if side ≥ 4) → conv → ReLU
    /// → flatten; 1×1 stages feed their channel values straight through.
    fn branch(
        &self,
        tape: &mut Tape,
        l: usize,
        side: usize,
        channels: &[NodeId],
    ) -> Result<NodeId, NnError> {
        let stack = tape.stack_channels(channels)?;
        if side == 1 {
            return tape.reshape(stack, &[1, channels.len()]);
        }
        let w1 = tape.param(self.slot(&format!("conv{l}.1.w")), &self.params[self.slot(&format!("conv{l}.1.w"))]);
        let b1 = tape.param(self.slot(&format!("conv{l}.1.b")), &self.params[self.slot(&format!("conv{l}.1.b"))]);
        let c1 = tape.conv3x3(stack, w1, b1)?;
        let r1 = tape.relu(c1);
        let pooled = if side >= 4 { tape.max_pool2(r1)? } else { r1 };
        let w2 = tape.param(self.slot(&format!("conv{l}.2.w")), &self.params[self.slot(&format!("conv{l}.2.w"))]);
        let b2 = tape.param(self.slot(&format!("conv{l}.2.b")), &self.params[self.slot(&format!("conv{l}.2.b"))]);
        let c2 = tape.conv3x3(pooled, w2, b2)?;
        let r2 = tape.relu(c2);
        let len = self.config.branch_len(side);
        tape.reshape(r2, &[1, len])
    }

    /// Similarity for one ordered pair.
    pub fn predict(&self, a: &GraphInput, b: &GraphInput) -> Result<f64, NnError> {
        let mut tape = Tape::new();
        let pred = self.forward(&mut tape, a, b, 0)?;
        Ok(tape.value(pred).scalar_value())
    }

    /// Mean of both pair orders (the model itself is order-sensitive).
    pub fn predict_symmetric(&self, a: &GraphInput, b: &GraphInput) -> Result<f64, NnError> {
        Ok(0.5 * (self.predict(a, b)? + self.predict(b, a)?))
    }
}

/// Precomputed per-stage node orders (rows for graph 1, columns for graph
/// 2), decoupling the discrete alignment from the differentiable pass.
#[derive(Clone, Debug)]
pub struct AlignmentPlan {
    stages: Vec<(Vec<usize>, Vec<usize>)>,
}

/// Permutation matrix `P` with `P[i, order[i]] = 1`, so `P·H` gathers rows.
fn selection_matrix(order: &[usize]) -> Mat {
    let n = order.len();
    let mut m = Mat::zeros(n, n);
    for (i, &j) in order.iter().enumerate() {
        m[(i, j)] = 1.0;
    }
    m
}

// ---------------------------------------------------------------------------
// Checkpoints

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config: ModelConfig,
    config_hash: String,
    tensors: BTreeMap<String, Tensor>,
}

/// Writes the model as versioned JSON: config, its hash, and every named
/// parameter tensor.
pub fn save_checkpoint(model: &Model, path: &Path) -> Result<(), NnError> {
    let tensors: BTreeMap<String, Tensor> = model
        .names
        .iter()
        .cloned()
        .zip(model.params.iter().cloned())
        .collect();
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        config_hash: model.config.hash(),
        tensors,
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// Loads a checkpoint, rejecting unknown versions, config-hash mismatches,
/// and missing/unknown/ill-shaped tensors.
pub fn load_checkpoint(path: &Path) -> Result<Model, NnError> {
    let file: CheckpointFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if file.version != CHECKPOINT_VERSION {
        return Err(NnError::CheckpointVersion(file.version));
    }
    let computed = file.config.hash();
    if computed != file.config_hash {
        return Err(NnError::CheckpointHashMismatch {
            stored: file.config_hash,
            computed,
        });
    }
    let mut model = Model::new(file.config)?;
    let mut tensors = file.tensors;
    for (name, slot) in model.slots.clone() {
        let t = tensors
            .remove(&name)
            .ok_or_else(|| NnError::CheckpointTensor(format!("missing tensor {name}")))?;
        if t.shape != model.params[slot].shape {
            return Err(NnError::CheckpointTensor(format!(
                "tensor {name}: shape {:?} but model expects {:?}",
                t.shape, model.params[slot].shape
            )));
        }
        model.params[slot] = t;
    }
    if let Some(name) = tensors.into_keys().next() {
        return Err(NnError::CheckpointTensor(format!("unknown tensor {name}")));
    }
    Ok(model)
}
