//! Ground-truth solvers and baselines: exact and approximate graph edit
//! distance, connected maximum common subgraph, the `exp(-d)` similarity
//! transform, and a mean-pooled-embedding baseline score.
//!
//! All edit-distance solvers share one induced-cost convention: a (partial)
//! injective node mapping from graph 1 onto graph 2 prices node relabels,
//! node deletions/insertions, and every edge that the mapping fails to
//! preserve. The searches differ only in how they explore the mapping space.

mod ged;
mod lsap;
mod mcs;

pub use ged::{ged_astar, ged_beam, ged_bruteforce, GedResult, BRUTEFORCE_NODE_CAP};
pub use lsap::{ged_bipartite, solve_lsap};
pub use mcs::{mcs_branch_bound, McsResult};

use crate::graph::{GedProvenance, Graph};
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("graph too large for exhaustive search: {n} nodes exceeds cap {cap}")]
    SizeCap { n: usize, cap: usize },
    #[error("graphs beyond {cap} nodes are not supported by the search oracles (got {n})")]
    TooLarge { n: usize, cap: usize },
    #[error("edit costs must be nonnegative")]
    NegativeCost,
    #[error("beam width must be at least 1")]
    ZeroWidth,
    #[error("distance must be nonnegative, got {0}")]
    NegativeDistance(f64),
    #[error("edit path cannot be applied: {0}")]
    BadEditPath(String),
}

/// Node masks inside the search states cap supported graph sizes.
pub const SEARCH_NODE_CAP: usize = 128;

// ---------------------------------------------------------------------------
// Cost model and mappings

/// Per-operation edit costs; the classical unit-cost model by default.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EditCostModel {
    pub node_insert: f64,
    pub node_delete: f64,
    pub node_relabel: f64,
    pub edge_insert: f64,
    pub edge_delete: f64,
}

impl Default for EditCostModel {
    fn default() -> Self {
        EditCostModel {
            node_insert: 1.0,
            node_delete: 1.0,
            node_relabel: 1.0,
            edge_insert: 1.0,
            edge_delete: 1.0,
        }
    }
}

impl EditCostModel {
    pub fn validate(&self) -> Result<(), OracleError> {
        let all = [
            self.node_insert,
            self.node_delete,
            self.node_relabel,
            self.edge_insert,
            self.edge_delete,
        ];
        if all.iter().any(|&c| !(c >= 0.0)) {
            return Err(OracleError::NegativeCost);
        }
        Ok(())
    }
}

fn labels_differ(g1: &Graph, u: usize, g2: &Graph, v: usize) -> bool {
    g1.label_of(u) != g2.label_of(v)
}

/// Total edit cost induced by a full node mapping (`None` = node deleted):
/// node substitutions/deletions/insertions plus every edge either graph has
/// that the mapping does not carry onto an edge of the other.
pub fn mapping_cost(
    g1: &Graph,
    g2: &Graph,
    mapping: &[Option<usize>],
    costs: &EditCostModel,
) -> f64 {
    debug_assert_eq!(mapping.len(), g1.n());
    let mut cost = 0.0;
    let mut inverse = vec![None; g2.n()];
    for (u, &img) in mapping.iter().enumerate() {
        match img {
            Some(v) => {
                inverse[v] = Some(u);
                if labels_differ(g1, u, g2, v) {
                    cost += costs.node_relabel;
                }
            }
            None => cost += costs.node_delete,
        }
    }
    cost += inverse.iter().filter(|i| i.is_none()).count() as f64 * costs.node_insert;

    for &(u, v) in g1.edges() {
        let preserved = match (mapping[u], mapping[v]) {
            (Some(x), Some(y)) => g2.has_edge(x, y),
            _ => false,
        };
        if !preserved {
            cost += costs.edge_delete;
        }
    }
    for &(x, y) in g2.edges() {
        let covered = match (inverse[x], inverse[y]) {
            (Some(u), Some(v)) => g1.has_edge(u, v),
            _ => false,
        };
        if !covered {
            cost += costs.edge_insert;
        }
    }
    cost
}

// ---------------------------------------------------------------------------
// Edit paths

/// A single edit operation. Node indices refer to the graph as it exists
/// when the operation is applied (deletions shift later indices down;
/// insertions append at the end).
#[derive(Clone, Debug, PartialEq)]
pub enum EditOp {
    DeleteEdge { u: usize, v: usize },
    DeleteNode { v: usize },
    RelabelNode { v: usize, label: Option<String> },
    InsertNode { label: Option<String> },
    InsertEdge { u: usize, v: usize },
}

/// An ordered edit script transforming one graph into (an isomorphic copy
/// of) another, with its total cost under the model that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct EditPath {
    pub ops: Vec<EditOp>,
    pub total_cost: f64,
}

impl EditPath {
    /// Replays the script on a graph. Fails on invalid operations (deleting
    /// a missing edge, deleting a non-isolated node, duplicate insert).
    pub fn apply(&self, g: &Graph) -> Result<Graph, OracleError> {
        let mut n = g.n();
        let mut edges: Vec<(usize, usize)> = g.edges().to_vec();
        let mut labels: Vec<Option<String>> = match g.labels() {
            Some(ls) => ls.iter().map(|l| Some(l.clone())).collect(),
            None => vec![None; n],
        };
        let bad = |msg: String| OracleError::BadEditPath(msg);
        for op in &self.ops {
            match op {
                EditOp::DeleteEdge { u, v } => {
                    let key = (*u.min(v), *u.max(v));
                    let pos = edges
                        .iter()
                        .position(|&e| e == key)
                        .ok_or_else(|| bad(format!("edge {key:?} not present")))?;
                    edges.swap_remove(pos);
                }
                EditOp::DeleteNode { v } => {
                    if *v >= n {
                        return Err(bad(format!("node {v} out of range")));
                    }
                    if edges.iter().any(|&(a, b)| a == *v || b == *v) {
                        return Err(bad(format!("node {v} still has incident edges")));
                    }
                    labels.remove(*v);
                    for (a, b) in edges.iter_mut() {
                        if *a > *v {
                            *a -= 1;
                        }
                        if *b > *v {
                            *b -= 1;
                        }
                    }
                    n -= 1;
                }
                EditOp::RelabelNode { v, label } => {
                    if *v >= n {
                        return Err(bad(format!("node {v} out of range")));
                    }
                    labels[*v] = label.clone();
                }
                EditOp::InsertNode { label } => {
                    labels.push(label.clone());
                    n += 1;
                }
                EditOp::InsertEdge { u, v } => {
                    let key = (*u.min(v), *u.max(v));
                    if key.0 == key.1 || key.1 >= n {
                        return Err(bad(format!("invalid edge {key:?}")));
                    }
                    if edges.contains(&key) {
                        return Err(bad(format!("edge {key:?} already present")));
                    }
                    edges.push(key);
                }
            }
        }
        let labels = if labels.iter().all(|l| l.is_none()) {
            None
        } else if labels.iter().all(|l| l.is_some()) {
            Some(labels.into_iter().map(Option::unwrap).collect())
        } else {
            return Err(bad("path leaves a mix of labeled and unlabeled nodes".into()));
        };
        Graph::new(format!("{}+edits", g.id()), n, &edges, labels)
            .map_err(|e| bad(e.to_string()))
    }
}

/// Expands a full node mapping into a concrete edit script: delete
/// unpreserved edges, delete unmapped nodes (descending, so indices stay
/// valid), relabel substituted nodes, insert missing nodes, insert missing
/// edges. Total cost equals [`mapping_cost`].
pub fn edit_path_from_mapping(
    g1: &Graph,
    g2: &Graph,
    mapping: &[Option<usize>],
    costs: &EditCostModel,
) -> EditPath {
    let mut ops = Vec::new();
    let mut inverse = vec![None; g2.n()];
    for (u, &img) in mapping.iter().enumerate() {
        if let Some(v) = img {
            inverse[v] = Some(u);
        }
    }

    for &(u, v) in g1.edges() {
        let preserved = match (mapping[u], mapping[v]) {
            (Some(x), Some(y)) => g2.has_edge(x, y),
            _ => false,
        };
        if !preserved {
            ops.push(EditOp::DeleteEdge { u, v });
        }
    }

    let deleted: Vec<usize> =
        (0..g1.n()).rev().filter(|&v| mapping[v].is_none()).collect();
    for &v in &deleted {
        ops.push(EditOp::DeleteNode { v });
    }
    // Position of a surviving graph-1 node after the deletions above.
    let survivor_pos = |u: usize| -> usize {
        (0..u).filter(|&x| mapping[x].is_some()).count()
    };

    for u in 0..g1.n() {
        if let Some(v) = mapping[u] {
            if labels_differ(g1, u, g2, v) {
                ops.push(EditOp::RelabelNode {
                    v: survivor_pos(u),
                    label: g2.label_of(v).map(String::from),
                });
            }
        }
    }

    let survivors = mapping.iter().filter(|m| m.is_some()).count();
    let mut inserted_pos = vec![None; g2.n()];
    let mut next = survivors;
    for v in 0..g2.n() {
        if inverse[v].is_none() {
            ops.push(EditOp::InsertNode { label: g2.label_of(v).map(String::from) });
            inserted_pos[v] = Some(next);
            next += 1;
        }
    }

    // Current index of the node that plays the role of graph-2 node v.
    let g2_pos = |v: usize| -> usize {
        match inverse[v] {
            Some(u) => survivor_pos(u),
            None => inserted_pos[v].unwrap(),
        }
    };
    for &(x, y) in g2.edges() {
        let covered = match (inverse[x], inverse[y]) {
            (Some(u), Some(v)) => g1.has_edge(u, v),
            _ => false,
        };
        if !covered {
            ops.push(EditOp::InsertEdge { u: g2_pos(x), v: g2_pos(y) });
        }
    }

    let total_cost = mapping_cost(g1, g2, mapping, costs);
    EditPath { ops, total_cost }
}

/// Lexicographically minimal (adjacency, labels) over all node permutations;
/// equal forms iff isomorphic. Exhaustive, so small graphs only.
pub fn canonical_form(g: &Graph) -> (Vec<bool>, Vec<Option<String>>) {
    let n = g.n();
    assert!(n <= 8, "canonical_form is exhaustive; {n} nodes is too many");
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<(Vec<bool>, Vec<Option<String>>)> = None;
    loop {
        let adj: Vec<bool> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| g.has_edge(perm[i], perm[j]))
            .collect();
        let labels: Vec<Option<String>> =
            (0..n).map(|i| g.label_of(perm[i]).map(String::from)).collect();
        let candidate = (adj, labels);
        if best.as_ref().is_none_or(|b| candidate < *b) {
            best = Some(candidate);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best.unwrap()
}

pub(crate) fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

pub fn isomorphic_small(a: &Graph, b: &Graph) -> bool {
    a.n() == b.n() && canonical_form(a) == canonical_form(b)
}

// ---------------------------------------------------------------------------
// Similarity and ground truth

/// `exp(-d)`: maps distance 0 to similarity 1 and decays toward 0.
pub fn ged_to_similarity(d: f64) -> Result<f64, OracleError> {
    if d < 0.0 || d.is_nan() {
        return Err(OracleError::NegativeDistance(d));
    }
    Ok((-d).exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundTruthGed {
    pub distance: f64,
    pub provenance: GedProvenance,
}

pub const DEFAULT_EXACT_THRESHOLD: usize = 10;
pub const DEFAULT_BEAM_WIDTH: usize = 100;
pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

/// Ground-truth distance policy: exact A* when both graphs are at most
/// `threshold` nodes, otherwise the minimum of the beam and bipartite upper
/// bounds. Identical ids short-circuit to 0.
pub fn ground_truth_ged(
    g1: &Graph,
    g2: &Graph,
    costs: &EditCostModel,
    threshold: usize,
) -> Result<GroundTruthGed, OracleError> {
    if g1.id() == g2.id() {
        return Ok(GroundTruthGed { distance: 0.0, provenance: GedProvenance::Exact });
    }
    if g1.n().max(g2.n()) <= threshold {
        let result = ged_astar(g1, g2, costs, DEFAULT_NODE_BUDGET)?;
        if result.exact {
            return Ok(GroundTruthGed {
                distance: result.distance,
                provenance: GedProvenance::Exact,
            });
        }
        // Budget blown below the threshold: fall back to the approximate
        // route, folding in the partial search's upper bound.
        let beam = ged_beam(g1, g2, costs, DEFAULT_BEAM_WIDTH)?;
        let bipartite = ged_bipartite(g1, g2, costs)?;
        return Ok(GroundTruthGed {
            distance: result.distance.min(beam).min(bipartite),
            provenance: GedProvenance::MinOfApprox,
        });
    }
    let beam = ged_beam(g1, g2, costs, DEFAULT_BEAM_WIDTH)?;
    let bipartite = ged_bipartite(g1, g2, costs)?;
    Ok(GroundTruthGed {
        distance: beam.min(bipartite),
        provenance: GedProvenance::MinOfApprox,
    })
}

/// Ground truth for a list of pairs, parallel across pairs with the output
/// in input order. `pairs` holds indices into `graphs`.
pub fn ground_truth_ged_pairs(
    graphs: &[Graph],
    pairs: &[(usize, usize)],
    costs: &EditCostModel,
    threshold: usize,
) -> Result<Vec<GroundTruthGed>, OracleError> {
    pairs
        .par_iter()
        .map(|&(i, j)| ground_truth_ged(&graphs[i], &graphs[j], costs, threshold))
        .collect()
}

// ---------------------------------------------------------------------------
// Mean-pooled embedding baseline

/// Similarity baseline that ignores structure beyond the encoder: runs the
/// shared graph-convolution encoder on both graphs, mean-pools node
/// embeddings, and squashes their dot product through a sigmoid.
pub fn embavg_baseline(
    g1: &Graph,
    g2: &Graph,
    encoder: &crate::nn::GcnParams,
) -> Result<f64, crate::nn::NnError> {
    let pooled = |g: &Graph| -> Result<Vec<f64>, crate::nn::NnError> {
        let h = crate::nn::gcn_forward(encoder, &g.adjacency(), g.features().ok_or(
            crate::nn::NnError::MissingFeatures,
        )?)?;
        let mut mean = vec![0.0; h.cols()];
        for i in 0..h.rows() {
            for (m, x) in mean.iter_mut().zip(h.row(i)) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= h.rows() as f64;
        }
        Ok(mean)
    };
    let a = pooled(g1)?;
    let b = pooled(g2)?;
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    Ok(1.0 / (1.0 + (-dot).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::erdos_renyi;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn k3() -> Graph {
        Graph::new("k3", 3, &[(0, 1), (1, 2), (0, 2)], None).unwrap()
    }

    pub(crate) fn path3() -> Graph {
        Graph::new("p3", 3, &[(0, 1), (1, 2)], None).unwrap()
    }

    /// Two independent random graphs with node counts in `1..=max_n`.
    pub(crate) fn random_pair(
        rng: &mut ChaCha8Rng,
        max_n: usize,
        alphabet: usize,
    ) -> (Graph, Graph) {
        let n1 = rng.gen_range(1..=max_n);
        let n2 = rng.gen_range(1..=max_n);
        let p1 = rng.gen_range(0.2..0.9);
        let p2 = rng.gen_range(0.2..0.9);
        (
            random_labeled(rng, "a", n1, p1, alphabet),
            random_labeled(rng, "b", n2, p2, alphabet),
        )
    }

    pub(crate) fn random_labeled(
        rng: &mut ChaCha8Rng,
        id: &str,
        n: usize,
        p: f64,
        alphabet: usize,
    ) -> Graph {
        let plain = erdos_renyi(id, n, p, rng.gen(), false).unwrap();
        if alphabet == 0 {
            return plain;
        }
        let labels: Vec<String> = (0..n)
            .map(|_| format!("{}", (b'a' + rng.gen_range(0..alphabet as u8)) as char))
            .collect();
        Graph::new(id, n, plain.edges(), Some(labels)).unwrap()
    }

    #[test]
    fn mapping_cost_identity_is_zero() {
        let g = k3();
        let mapping: Vec<Option<usize>> = (0..3).map(Some).collect();
        assert_eq!(mapping_cost(&g, &g, &mapping, &EditCostModel::default()), 0.0);
    }

    #[test]
    fn mapping_cost_counts_all_op_kinds() {
        // Map K3's nodes 0,1 onto the path's 0,1; delete node 2, insert the
        // path's node 2. Edge ops: K3 edges (0,2),(1,2) deleted, edge (0,1)
        // preserved, path edge (1,2) inserted -> 2 node ops + 3 edge ops.
        let mapping = vec![Some(0), Some(1), None];
        assert_eq!(
            mapping_cost(&k3(), &path3(), &mapping, &EditCostModel::default()),
            5.0
        );
    }

    #[test]
    fn edit_path_matches_mapping_cost_and_applies() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let costs = EditCostModel::default();
        for trial in 0..40 {
            let n1 = rng.gen_range(1..6);
            let n2 = rng.gen_range(1..6);
            let g1 = random_labeled(&mut rng, "a", n1, 0.5, if trial % 2 == 0 { 2 } else { 0 });
            let g2 = random_labeled(&mut rng, "b", n2, 0.5, if trial % 2 == 0 { 2 } else { 0 });
            // Random injective partial mapping.
            let mut available: Vec<usize> = (0..n2).collect();
            available.shuffle(&mut rng);
            let mapping: Vec<Option<usize>> = (0..n1)
                .map(|_| if rng.gen_bool(0.7) { available.pop() } else { None })
                .collect();
            let path = edit_path_from_mapping(&g1, &g2, &mapping, &costs);
            assert_eq!(path.total_cost, mapping_cost(&g1, &g2, &mapping, &costs));
            let rebuilt = path.apply(&g1).unwrap();
            assert!(isomorphic_small(&rebuilt, &g2), "mapping {mapping:?}");
        }
    }

    #[test]
    fn canonical_form_detects_isomorphism() {
        let a = Graph::new("a", 4, &[(0, 1), (1, 2), (2, 3)], None).unwrap();
        let b = Graph::new("b", 4, &[(3, 2), (2, 0), (0, 1)], None).unwrap();
        let c = Graph::new("c", 4, &[(0, 1), (1, 2), (1, 3)], None).unwrap();
        assert!(isomorphic_small(&a, &b));
        assert!(!isomorphic_small(&a, &c));
    }

    #[test]
    fn similarity_transform() {
        assert_eq!(ged_to_similarity(0.0).unwrap(), 1.0);
        assert!((ged_to_similarity(1.0).unwrap() - 0.36787944117144233).abs() < 1e-12);
        assert!((ged_to_similarity(10.0).unwrap() - 4.54e-5).abs() < 1e-7);
        assert!(ged_to_similarity(-0.5).is_err());
        let mut prev = f64::INFINITY;
        for d in [0.0, 0.1, 0.5, 1.0, 2.0, 5.0] {
            let s = ged_to_similarity(d).unwrap();
            assert!(s > 0.0 && s <= 1.0 && s < prev);
            prev = s;
        }
    }

    #[test]
    fn ground_truth_provenance_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let costs = EditCostModel::default();
        let small1 = random_labeled(&mut rng, "s1", 5, 0.5, 0);
        let small2 = random_labeled(&mut rng, "s2", 5, 0.5, 0);
        let gt = ground_truth_ged(&small1, &small2, &costs, DEFAULT_EXACT_THRESHOLD).unwrap();
        assert_eq!(gt.provenance, GedProvenance::Exact);

        let big1 = random_labeled(&mut rng, "b1", 20, 0.2, 0);
        let big2 = random_labeled(&mut rng, "b2", 20, 0.2, 0);
        let gt = ground_truth_ged(&big1, &big2, &costs, DEFAULT_EXACT_THRESHOLD).unwrap();
        assert_eq!(gt.provenance, GedProvenance::MinOfApprox);
        let beam = ged_beam(&big1, &big2, &costs, DEFAULT_BEAM_WIDTH).unwrap();
        let bip = ged_bipartite(&big1, &big2, &costs).unwrap();
        assert_eq!(gt.distance, beam.min(bip));

        let same = ground_truth_ged(&big1, &big1, &costs, DEFAULT_EXACT_THRESHOLD).unwrap();
        assert_eq!(same.distance, 0.0);
        assert_eq!(same.provenance, GedProvenance::Exact);
    }

    #[test]
    fn parallel_ground_truth_keeps_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let graphs: Vec<Graph> = (0..6)
            .map(|i| random_labeled(&mut rng, &format!("g{i}"), 5, 0.4, 2))
            .collect();
        let pairs: Vec<(usize, usize)> =
            (0..6).flat_map(|i| (i..6).map(move |j| (i, j))).collect();
        let costs = EditCostModel::default();
        let par = ground_truth_ged_pairs(&graphs, &pairs, &costs, 10).unwrap();
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let seq = ground_truth_ged(&graphs[i], &graphs[j], &costs, 10).unwrap();
            assert_eq!(par[k], seq);
        }
    }
}
