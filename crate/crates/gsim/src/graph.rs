//! Graph representation, dataset IO (JSON-lines), synthetic generators, and
//! the pairwise ground-truth cache.
//!
//! Graphs are simple undirected graphs: symmetric 0/1 adjacency, no
//! self-loops, optional categorical node labels. They are immutable after
//! construction and cheap to share across worker threads.

use crate::mat::Mat;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("graph {id}: endpoint out of range: edge ({u},{v}) on {n} nodes")]
    EndpointOutOfRange { id: String, u: usize, v: usize, n: usize },
    #[error("graph {id}: self-loop at node {v}")]
    SelfLoop { id: String, v: usize },
    #[error("graph {id}: must have at least one node")]
    EmptyGraph { id: String },
    #[error("graph {id}: {labels} labels for {n} nodes")]
    LabelCountMismatch { id: String, labels: usize, n: usize },
    #[error("duplicate graph id {0}")]
    DuplicateId(String),
    #[error("unknown label {0:?} (not in vocabulary)")]
    UnknownLabel(String),
    #[error("feature matrix has {rows} rows for {n} nodes")]
    FeatureRowMismatch { rows: usize, n: usize },
    #[error("invalid generator parameter: {0}")]
    InvalidParams(String),
    #[error("retry budget exhausted generating a connected graph")]
    RetryBudgetExhausted,
    #[error("need at least 3 graphs to split, got {0}")]
    TooFewGraphs(usize),
    #[error("split ratio must have a positive total")]
    ZeroRatio,
    #[error("id {0:?} cannot be stored in a CSV cache (contains comma, quote, or newline)")]
    UnstorableId(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path, source: std::io::Error) -> GraphError {
    GraphError::Io { path: path.display().to_string(), source }
}

// ---------------------------------------------------------------------------
// Graph

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    id: String,
    n: usize,
    adj: Vec<bool>,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
    labels: Option<Vec<String>>,
    features: Option<Mat>,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicate edges (including reversed
    /// duplicates) collapse to one undirected edge; self-loops are rejected.
    pub fn new(
        id: impl Into<String>,
        n: usize,
        edges: &[(usize, usize)],
        labels: Option<Vec<String>>,
    ) -> Result<Graph, GraphError> {
        let id = id.into();
        if n == 0 {
            return Err(GraphError::EmptyGraph { id });
        }
        if let Some(ls) = &labels {
            if ls.len() != n {
                return Err(GraphError::LabelCountMismatch { id, labels: ls.len(), n });
            }
        }
        let mut adj = vec![false; n * n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::EndpointOutOfRange { id, u, v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop { id, v });
            }
            adj[u * n + v] = true;
            adj[v * n + u] = true;
        }
        let mut edge_list = Vec::new();
        let mut degrees = vec![0usize; n];
        for u in 0..n {
            for v in (u + 1)..n {
                if adj[u * n + v] {
                    edge_list.push((u, v));
                    degrees[u] += 1;
                    degrees[v] += 1;
                }
            }
        }
        Ok(Graph { id, n, adj, edges: edge_list, degrees, labels, features: None })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.n + v]
    }

    /// Edges as (u, v) with u < v, ascending.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&u| self.adj[v * self.n + u])
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label_of(&self, v: usize) -> Option<&str> {
        self.labels.as_ref().map(|ls| ls[v].as_str())
    }

    pub fn features(&self) -> Option<&Mat> {
        self.features.as_ref()
    }

    pub fn with_features(mut self, features: Mat) -> Result<Graph, GraphError> {
        if features.rows() != self.n {
            return Err(GraphError::FeatureRowMismatch { rows: features.rows(), n: self.n });
        }
        self.features = Some(features);
        Ok(self)
    }

    /// Same graph under a relabeling of node ids: node `perm[v]` of the new
    /// graph is node `v` of the old one.
    pub fn renumber(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.n);
        let edges: Vec<(usize, usize)> =
            self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let labels = self.labels.as_ref().map(|ls| {
            let mut out = vec![String::new(); self.n];
            for (v, l) in ls.iter().enumerate() {
                out[perm[v]] = l.clone();
            }
            out
        });
        Graph::new(self.id.clone(), self.n, &edges, labels).expect("renumbering preserves validity")
    }

    pub fn adjacency(&self) -> Mat {
        Mat::from_fn(self.n, self.n, |i, j| if self.adj[i * self.n + j] { 1.0 } else { 0.0 })
    }

    /// Connected component id per node (0-based, in order of first appearance).
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = next;
            while let Some(v) = stack.pop() {
                for u in self.neighbors(v) {
                    if comp[u] == usize::MAX {
                        comp[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn component_count(&self) -> usize {
        self.components().iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} nodes, {} edges)", self.id, self.n, self.edges.len())
    }
}

// ---------------------------------------------------------------------------
// Dataset IO (JSON-lines)

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    labels: Option<Vec<String>>,
    edges: Vec<(usize, usize)>,
}

/// Loads a JSON-lines dataset: one graph record per line,
/// `{"id": str, "labels": [str]|null, "edges": [[u,v],...]}`.
///
/// Unlabeled records should carry an explicit `"n"` field so isolated nodes
/// survive a round-trip; without it the node count is inferred from the
/// largest endpoint.
pub fn load_dataset(path: &Path) -> Result<Vec<Graph>, GraphError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut graphs = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse = |msg: String| GraphError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg,
        };
        let rec: GraphRecord =
            serde_json::from_str(line).map_err(|e| parse(e.to_string()))?;
        let n = match (&rec.labels, rec.n) {
            (Some(ls), Some(n)) if ls.len() != n => {
                return Err(parse(format!("n={} disagrees with {} labels", n, ls.len())));
            }
            (Some(ls), _) => ls.len(),
            (None, Some(n)) => n,
            (None, None) => rec.edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(1),
        };
        let g = Graph::new(rec.id, n, &rec.edges, rec.labels)
            .map_err(|e| parse(e.to_string()))?;
        if !seen.insert(g.id.clone()) {
            return Err(parse(GraphError::DuplicateId(g.id.clone()).to_string()));
        }
        graphs.push(g);
    }
    Ok(graphs)
}

pub fn save_dataset(graphs: &[Graph], path: &Path) -> Result<(), GraphError> {
    let mut out = Vec::new();
    for g in graphs {
        let rec = GraphRecord {
            id: g.id.clone(),
            n: Some(g.n),
            labels: g.labels.clone(),
            edges: g.edges.clone(),
        };
        serde_json::to_writer(&mut out, &rec).expect("graph record serializes");
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------------------
// Node features

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureMode {
    /// One-hot label encoding; width = vocabulary size.
    OneHot,
    /// Constant all-ones features of the given width (for unlabeled graphs).
    Constant { width: usize },
}

pub const DEFAULT_CONSTANT_FEATURE_WIDTH: usize = 8;

/// Sorted label → column index map over a whole dataset.
pub fn label_vocab(graphs: &[Graph]) -> BTreeMap<String, usize> {
    let mut set = BTreeSet::new();
    for g in graphs {
        if let Some(ls) = g.labels() {
            set.extend(ls.iter().cloned());
        }
    }
    set.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
}

/// Attaches initial node features: one row per node, one-hot by label or
/// constant ones.
pub fn build_features(
    g: &Graph,
    vocab: &BTreeMap<String, usize>,
    mode: &FeatureMode,
) -> Result<Graph, GraphError> {
    let feats = match mode {
        FeatureMode::OneHot => {
            let labels = g
                .labels()
                .ok_or_else(|| GraphError::UnknownLabel("<unlabeled graph>".into()))?;
            let mut m = Mat::zeros(g.n(), vocab.len());
            for (v, label) in labels.iter().enumerate() {
                let &col = vocab
                    .get(label)
                    .ok_or_else(|| GraphError::UnknownLabel(label.clone()))?;
                m[(v, col)] = 1.0;
            }
            m
        }
        FeatureMode::Constant { width } => Mat::from_fn(g.n(), *width, |_, _| 1.0),
    };
    g.clone().with_features(feats)
}

// ---------------------------------------------------------------------------
// Synthetic generators

/// Erdős–Rényi G(n, p). With `connected`, regenerates until connected (up to
/// `CONNECT_RETRIES` attempts).
pub fn erdos_renyi(
    id: impl Into<String>,
    n: usize,
    p: f64,
    seed: u64,
    connected: bool,
) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::InvalidParams("erdos_renyi needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::InvalidParams(format!("probability {p} outside [0,1]")));
    }
    const CONNECT_RETRIES: usize = 200;
    let id = id.into();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..CONNECT_RETRIES {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::new(id.clone(), n, &edges, None)?;
        if !connected || g.is_connected() {
            return Ok(g);
        }
    }
    Err(GraphError::RetryBudgetExhausted)
}

/// Two disjoint k-cliques joined by `bridge_edges` distinct cross edges.
pub fn clique_pair(
    id: impl Into<String>,
    clique_size: usize,
    bridge_edges: usize,
    seed: u64,
) -> Result<Graph, GraphError> {
    if clique_size == 0 {
        return Err(GraphError::InvalidParams("clique_pair needs clique_size >= 1".into()));
    }
    if bridge_edges > clique_size * clique_size {
        return Err(GraphError::InvalidParams(format!(
            "at most {} bridge edges possible between two {}-cliques",
            clique_size * clique_size,
            clique_size
        )));
    }
    let k = clique_size;
    let mut edges = Vec::new();
    for base in [0, k] {
        for u in 0..k {
            for v in (u + 1)..k {
                edges.push((base + u, base + v));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut crossings: Vec<(usize, usize)> =
        (0..k).flat_map(|u| (0..k).map(move |v| (u, k + v))).collect();
    crossings.shuffle(&mut rng);
    edges.extend(crossings.into_iter().take(bridge_edges));
    Graph::new(id, 2 * k, &edges, None)
}

/// Applies `edits` random single edit operations (edge insert/delete, isolated
/// node insert/delete, relabel) to a copy of `base`, so the edit distance to
/// the base is at most `edits`.
pub fn perturbed_copy(
    id: impl Into<String>,
    base: &Graph,
    edits: usize,
    seed: u64,
) -> Result<Graph, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n = base.n();
    let mut edges: BTreeSet<(usize, usize)> = base.edges().iter().copied().collect();
    let mut labels = base.labels().map(|ls| ls.to_vec());
    let alphabet: Vec<String> = match &labels {
        Some(ls) => {
            let set: BTreeSet<&String> = ls.iter().collect();
            set.into_iter().cloned().collect()
        }
        None => Vec::new(),
    };

    #[derive(Clone, Copy, PartialEq)]
    enum EditKind {
        EdgeInsert,
        EdgeDelete,
        NodeInsert,
        NodeDelete,
        Relabel,
    }

    for _ in 0..edits {
        let degree = |v: usize, edges: &BTreeSet<(usize, usize)>| {
            edges.iter().filter(|&&(a, b)| a == v || b == v).count()
        };
        let isolated: Vec<usize> = (0..n).filter(|&v| degree(v, &edges) == 0).collect();
        let non_edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
            .filter(|e| !edges.contains(e))
            .collect();

        let mut choices = vec![EditKind::NodeInsert];
        if !non_edges.is_empty() {
            choices.push(EditKind::EdgeInsert);
        }
        if !edges.is_empty() {
            choices.push(EditKind::EdgeDelete);
        }
        if !isolated.is_empty() && n > 1 {
            choices.push(EditKind::NodeDelete);
        }
        if alphabet.len() > 1 {
            choices.push(EditKind::Relabel);
        }

        match *choices.choose(&mut rng).expect("at least one edit is always valid") {
            EditKind::EdgeInsert => {
                let &e = non_edges.choose(&mut rng).unwrap();
                edges.insert(e);
            }
            EditKind::EdgeDelete => {
                let all: Vec<(usize, usize)> = edges.iter().copied().collect();
                let &e = all.choose(&mut rng).unwrap();
                edges.remove(&e);
            }
            EditKind::NodeInsert => {
                if let Some(ls) = &mut labels {
                    ls.push(alphabet.choose(&mut rng).unwrap().clone());
                }
                n += 1;
            }
            EditKind::NodeDelete => {
                let &v = isolated.choose(&mut rng).unwrap();
                edges = edges
                    .iter()
                    .map(|&(a, b)| {
                        let shift = |x: usize| if x > v { x - 1 } else { x };
                        (shift(a), shift(b))
                    })
                    .collect();
                if let Some(ls) = &mut labels {
                    ls.remove(v);
                }
                n -= 1;
            }
            EditKind::Relabel => {
                let ls = labels.as_mut().unwrap();
                let v = rng.gen_range(0..n);
                let others: Vec<&String> =
                    alphabet.iter().filter(|l| **l != ls[v]).collect();
                ls[v] = (*others.choose(&mut rng).unwrap()).clone();
            }
        }
    }

    let edge_vec: Vec<(usize, usize)> = edges.into_iter().collect();
    Graph::new(id, n, &edge_vec, labels)
}

/// A corpus of perturbed copies of one random labeled base graph: graph `i`
/// is the base with `edits_i ~ Uniform{0..=max_edits}` random edits. Node
/// counts stay within `base_n ± max_edits`.
pub fn perturbed_corpus(
    count: usize,
    base_n: usize,
    edge_prob: f64,
    alphabet_size: usize,
    max_edits: usize,
    seed: u64,
) -> Result<Vec<Graph>, GraphError> {
    if count == 0 {
        return Err(GraphError::InvalidParams("corpus needs count >= 1".into()));
    }
    let base_plain = erdos_renyi("base", base_n, edge_prob, seed, true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let labels = (alphabet_size > 0).then(|| {
        (0..base_n)
            .map(|_| format!("{}", (b'a' + rng.gen_range(0..alphabet_size as u8)) as char))
            .collect::<Vec<String>>()
    });
    let base = Graph::new("base", base_n, base_plain.edges(), labels)?;
    let width = (count as f64).log10().floor() as usize + 1;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let edits = if i == 0 { 0 } else { rng.gen_range(0..=max_edits) };
        let id = format!("g{i:0width$}");
        out.push(perturbed_copy(id, &base, edits, rng.gen())?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Dataset split

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Seeded shuffle followed by a largest-remainder partition in the given
/// ratio. Every part is non-empty (guaranteed by `ids.len() >= 3`).
pub fn split_dataset(
    ids: &[String],
    ratio: (usize, usize, usize),
    seed: u64,
) -> Result<DatasetSplit, GraphError> {
    let n = ids.len();
    if n < 3 {
        return Err(GraphError::TooFewGraphs(n));
    }
    let total = ratio.0 + ratio.1 + ratio.2;
    if total == 0 {
        return Err(GraphError::ZeroRatio);
    }
    let mut shuffled: Vec<String> = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let parts = [ratio.0, ratio.1, ratio.2];
    let mut sizes = [0usize; 3];
    let mut remainders: Vec<(usize, f64)> = Vec::new();
    for (i, &r) in parts.iter().enumerate() {
        let exact = n as f64 * r as f64 / total as f64;
        sizes[i] = exact.floor() as usize;
        remainders.push((i, exact - exact.floor()));
    }
    let leftover = n - sizes.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..leftover {
        sizes[remainders[k % 3].0] += 1;
    }
    // No part may be empty; steal from the largest when rounding starves one.
    for i in 0..3 {
        while sizes[i] == 0 {
            let donor = (0..3).max_by_key(|&j| sizes[j]).unwrap();
            sizes[donor] -= 1;
            sizes[i] += 1;
        }
    }

    let train_ids = shuffled[..sizes[0]].to_vec();
    let val_ids = shuffled[sizes[0]..sizes[0] + sizes[1]].to_vec();
    let test_ids = shuffled[sizes[0] + sizes[1]..].to_vec();
    Ok(DatasetSplit { train_ids, val_ids, test_ids })
}

// ---------------------------------------------------------------------------
// Pairwise ground truth

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GedProvenance {
    /// Produced by an exact solver that ran to completion.
    Exact,
    /// Minimum over approximate solvers (upper bound on the true distance).
    MinOfApprox,
}

impl fmt::Display for GedProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GedProvenance::Exact => write!(f, "exact"),
            GedProvenance::MinOfApprox => write!(f, "min_of_approx"),
        }
    }
}

/// Ground-truth values for one unordered graph pair. Either measure may be
/// absent when it has not been computed yet.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphPair {
    pub g1_id: String,
    pub g2_id: String,
    pub ged: Option<u64>,
    pub ged_provenance: Option<GedProvenance>,
    pub mcs: Option<u64>,
}

const GROUND_TRUTH_HEADER: &str = "g1_id,g2_id,ged,ged_provenance,mcs";

fn storable_id(id: &str) -> Result<(), GraphError> {
    if id.contains([',', '"', '\n', '\r']) {
        return Err(GraphError::UnstorableId(id.to_string()));
    }
    Ok(())
}

/// Writes pairs as CSV: `g1_id,g2_id,ged,ged_provenance,mcs`, absent values
/// empty.
pub fn cache_ground_truth(pairs: &[GraphPair], path: &Path) -> Result<(), GraphError> {
    let mut out = Vec::new();
    writeln!(out, "{GROUND_TRUTH_HEADER}").unwrap();
    for p in pairs {
        storable_id(&p.g1_id)?;
        storable_id(&p.g2_id)?;
        let ged = p.ged.map(|d| d.to_string()).unwrap_or_default();
        let prov = p.ged_provenance.map(|pr| pr.to_string()).unwrap_or_default();
        let mcs = p.mcs.map(|m| m.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", p.g1_id, p.g2_id, ged, prov, mcs).unwrap();
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<GraphPair>, GraphError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let parse = |msg: String| GraphError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg,
        };
        if idx == 0 {
            if line.trim() != GROUND_TRUTH_HEADER {
                return Err(parse(format!(
                    "expected header {GROUND_TRUTH_HEADER:?}, got {line:?}"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(parse(format!("expected 5 fields, got {}", fields.len())));
        }
        let non_negative = |s: &str, what: &str| -> Result<Option<u64>, GraphError> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<u64>()
                .map(Some)
                .map_err(|_| parse(format!("{what} must be a nonnegative integer, got {s:?}")))
        };
        let ged = non_negative(fields[2], "ged")?;
        let prov = match fields[3] {
            "" => None,
            "exact" => Some(GedProvenance::Exact),
            "min_of_approx" => Some(GedProvenance::MinOfApprox),
            other => return Err(parse(format!("unknown provenance {other:?}"))),
        };
        let mcs = non_negative(fields[4], "mcs")?;
        pairs.push(GraphPair {
            g1_id: fields[0].to_string(),
            g2_id: fields[1].to_string(),
            ged,
            ged_provenance: prov,
            mcs,
        });
    }
    Ok(pairs)
}
