//! Edit-distance solvers over node mappings.
//!
//! - [`ged_bruteforce`]: exhaustive enumeration of every injective partial
//!   mapping; the reference oracle for tiny graphs.
//! - [`ged_astar`]: best-first search over partial assignments in node-index
//!   order with an admissible lower bound, so the first completed state
//!   popped is optimal. A node budget turns it into an anytime upper bound.
//! - [`ged_beam`]: the same expansion order, but keeping only the best `w`
//!   frontier states per depth. Always an upper bound; unbounded width
//!   reproduces the exact answer.

use super::{
    edit_path_from_mapping, mapping_cost, EditCostModel, EditPath, OracleError,
    SEARCH_NODE_CAP,
};
use crate::graph::Graph;
use std::collections::BinaryHeap;

/// Exhaustive search is factorial; beyond this many nodes it is refused.
pub const BRUTEFORCE_NODE_CAP: usize = 7;

const EPS: u8 = u8::MAX;

/// Outcome of an edit-distance search.
#[derive(Clone, Debug)]
pub struct GedResult {
    pub distance: f64,
    pub path: EditPath,
    /// False when a budget cut the search short; `distance` is then only an
    /// upper bound.
    pub exact: bool,
    /// States expanded (search effort indicator).
    pub expanded: usize,
}

// ---------------------------------------------------------------------------
// Brute force

/// Minimizes [`mapping_cost`] over every injective mapping from graph-1
/// nodes onto graph-2 nodes or deletion. Exact, and deliberately free of the
/// incremental bookkeeping the informed searches use, so it can serve as an
/// independent oracle for them.
pub fn ged_bruteforce(
    g1: &Graph,
    g2: &Graph,
    costs: &EditCostModel,
) -> Result<GedResult, OracleError> {
    costs.validate()?;
    let n = g1.n().max(g2.n());
    if n > BRUTEFORCE_NODE_CAP {
        return Err(OracleError::SizeCap { n, cap: BRUTEFORCE_NODE_CAP });
    }
    let mut mapping: Vec<Option<usize>> = vec![None; g1.n()];
    let mut used = vec![false; g2.n()];
    let mut best_cost = f64::INFINITY;
    let mut best_mapping = mapping.clone();
    let mut leaves = 0usize;

    fn recurse(
        g1: &Graph,
        g2: &Graph,
        costs: &EditCostModel,
        depth: usize,
        mapping: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best_cost: &mut f64,
        best_mapping: &mut Vec<Option<usize>>,
        leaves: &mut usize,
    ) {
        if depth == g1.n() {
            *leaves += 1;
            let cost = mapping_cost(g1, g2, mapping, costs);
            if cost < *best_cost {
                *best_cost = cost;
                best_mapping.clone_from(mapping);
            }
            return;
        }
        for y in 0..g2.n() {
            if !used[y] {
                used[y] = true;
                mapping[depth] = Some(y);
                recurse(g1, g2, costs, depth + 1, mapping, used, best_cost, best_mapping, leaves);
                mapping[depth] = None;
                used[y] = false;
            }
        }
        recurse(g1, g2, costs, depth + 1, mapping, used, best_cost, best_mapping, leaves);
    }

    recurse(
        g1, g2, costs, 0, &mut mapping, &mut used, &mut best_cost, &mut best_mapping,
        &mut leaves,
    );
    Ok(GedResult {
        distance: best_cost,
        path: edit_path_from_mapping(g1, g2, &best_mapping, costs),
        exact: true,
        expanded: leaves,
    })
}

// ---------------------------------------------------------------------------
// Shared machinery for the informed searches

/// Precomputed views of a graph pair shared by A* and beam search.
struct SearchContext<'a> {
    g1: &'a Graph,
    g2: &'a Graph,
    costs: EditCostModel,
    lab1: Vec<usize>,
    lab2: Vec<usize>,
    adj1: Vec<Vec<usize>>,
    adj2: Vec<Vec<usize>>,
    /// `suffix1[d][l]`: graph-1 nodes with index >= d carrying label l.
    suffix1: Vec<Vec<u32>>,
    /// `m1_suffix[d]`: graph-1 edges with at least one endpoint >= d.
    m1_suffix: Vec<usize>,
    counts2: Vec<u32>,
    m2_total: usize,
}

impl<'a> SearchContext<'a> {
    fn new(g1: &'a Graph, g2: &'a Graph, costs: &EditCostModel) -> Result<Self, OracleError> {
        costs.validate()?;
        let n = g1.n().max(g2.n());
        if n > SEARCH_NODE_CAP {
            return Err(OracleError::TooLarge { n, cap: SEARCH_NODE_CAP });
        }
        // Shared label vocabulary; unlabeled nodes collapse to one id.
        let mut vocab = std::collections::BTreeMap::new();
        let mut intern = |label: Option<&str>| -> usize {
            let key = label.unwrap_or("").to_string();
            let next = vocab.len();
            *vocab.entry(key).or_insert(next)
        };
        let lab1: Vec<usize> = (0..g1.n()).map(|v| intern(g1.label_of(v))).collect();
        let lab2: Vec<usize> = (0..g2.n()).map(|v| intern(g2.label_of(v))).collect();
        let n_labels = vocab.len();

        let neighbor_lists = |g: &Graph| -> Vec<Vec<usize>> {
            let mut adj = vec![Vec::new(); g.n()];
            for &(u, v) in g.edges() {
                adj[u].push(v);
                adj[v].push(u);
            }
            adj
        };

        let mut suffix1 = vec![vec![0u32; n_labels]; g1.n() + 1];
        for d in (0..g1.n()).rev() {
            suffix1[d] = suffix1[d + 1].clone();
            suffix1[d][lab1[d]] += 1;
        }
        let mut m1_suffix = vec![0usize; g1.n() + 1];
        for d in (0..g1.n()).rev() {
            let touching =
                g1.edges().iter().filter(|&&(u, v)| u.max(v) == d).count();
            m1_suffix[d] = m1_suffix[d + 1] + touching;
        }
        let mut counts2 = vec![0u32; n_labels];
        for &l in &lab2 {
            counts2[l] += 1;
        }
        Ok(SearchContext {
            g1,
            g2,
            costs: *costs,
            lab1,
            lab2,
            adj1: neighbor_lists(g1),
            adj2: neighbor_lists(g2),
            suffix1,
            m1_suffix,
            counts2,
            m2_total: g2.edges().len(),
        })
    }

    /// Cost increment for assigning graph-1 node `depth` to `image`
    /// (`None` = delete), given the mapping of nodes `0..depth`.
    fn assign_delta(
        &self,
        mapping: &[Option<usize>],
        inverse: &[Option<usize>],
        depth: usize,
        image: Option<usize>,
    ) -> f64 {
        let c = &self.costs;
        match image {
            None => {
                let dying =
                    self.adj1[depth].iter().filter(|&&u| u < depth).count();
                c.node_delete + c.edge_delete * dying as f64
            }
            Some(y) => {
                let mut delta =
                    if self.lab1[depth] != self.lab2[y] { c.node_relabel } else { 0.0 };
                for &u in &self.adj1[depth] {
                    if u < depth {
                        let preserved = match mapping[u] {
                            Some(x) => self.g2.has_edge(x, y),
                            None => false,
                        };
                        if !preserved {
                            delta += c.edge_delete;
                        }
                    }
                }
                for &x in &self.adj2[y] {
                    if let Some(u) = inverse[x] {
                        if !self.g1.has_edge(u, depth) {
                            delta += c.edge_insert;
                        }
                    }
                }
                delta
            }
        }
    }

    /// Cost of finishing once every graph-1 node is assigned: insert the
    /// unused graph-2 nodes and every graph-2 edge touching them.
    fn completion_cost(&self, used: u128) -> f64 {
        let unused_nodes = self.g2.n() - used.count_ones() as usize;
        let unused_edges = self
            .g2
            .edges()
            .iter()
            .filter(|&&(x, y)| used & (1 << x) == 0 || used & (1 << y) == 0)
            .count();
        self.costs.node_insert * unused_nodes as f64
            + self.costs.edge_insert * unused_edges as f64
    }

    /// Admissible lower bound on the remaining cost: a label-multiset bound
    /// on node operations plus half the difference in unaccounted edge
    /// counts (each unpreserved unaccounted edge costs at least one edge
    /// operation, and preserved ones pair up injectively across the graphs).
    fn heuristic(&self, depth: usize, counts2_unused: &[u32], m2_unaccounted: usize) -> f64 {
        let c = &self.costs;
        let c1 = &self.suffix1[depth];
        let r1: u32 = c1.iter().sum();
        let r2: u32 = counts2_unused.iter().sum();
        let common: u32 =
            c1.iter().zip(counts2_unused).map(|(a, b)| (*a).min(*b)).sum();
        let eval = |k: u32| -> f64 {
            c.node_relabel * k.saturating_sub(common) as f64
                + c.node_delete * (r1 - k) as f64
                + c.node_insert * (r2 - k) as f64
        };
        // The per-k cost is piecewise linear with a breakpoint at `common`,
        // so its minimum sits at one of the two candidate match counts.
        let node_lb = eval(common).min(eval(r1.min(r2)));

        let m1 = self.m1_suffix[depth];
        let edge_lb = if m1 >= m2_unaccounted {
            0.5 * (m1 - m2_unaccounted) as f64 * c.edge_delete
        } else {
            0.5 * (m2_unaccounted - m1) as f64 * c.edge_insert
        };
        node_lb + edge_lb
    }

    fn unused_label_counts(&self, used: u128) -> Vec<u32> {
        let mut counts = self.counts2.clone();
        for x in 0..self.g2.n() {
            if used & (1 << x) != 0 {
                counts[self.lab2[x]] -= 1;
            }
        }
        counts
    }

    fn edges_within(&self, used: u128) -> usize {
        self.g2
            .edges()
            .iter()
            .filter(|&&(x, y)| used & (1 << x) != 0 && used & (1 << y) != 0)
            .count()
    }
}

/// Lower bound at the empty assignment (exposed for admissibility tests).
#[cfg(test)]
pub(crate) fn root_heuristic(g1: &Graph, g2: &Graph, costs: &EditCostModel) -> f64 {
    let ctx = SearchContext::new(g1, g2, costs).expect("graphs within search cap");
    ctx.heuristic(0, &ctx.counts2.clone(), ctx.m2_total)
}

// ---------------------------------------------------------------------------
// A*

#[derive(Clone, Copy)]
struct AstarNode {
    parent: u32,
    used: u128,
    g: f64,
    assigned: u8,
    depth: u8,
}

struct HeapEntry {
    f: f64,
    tie: u64,
    idx: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.tie == other.tie
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Max-heap: rank so the smallest (f, tie) is popped first.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.f.total_cmp(&self.f).then(other.tie.cmp(&self.tie))
    }
}

fn reconstruct_mapping(arena: &[AstarNode], mut idx: u32, n1: usize) -> Vec<Option<usize>> {
    let mut mapping = vec![None; n1];
    loop {
        let node = &arena[idx as usize];
        if node.depth == 0 {
            break;
        }
        mapping[node.depth as usize - 1] =
            if node.assigned == EPS { None } else { Some(node.assigned as usize) };
        idx = node.parent;
    }
    mapping
}

/// Best-first search over partial assignments of graph-1 nodes (in index
/// order) to unused graph-2 nodes or deletion. The heuristic is admissible,
/// so the first fully assigned state popped is an exact distance. If more
/// than `node_budget` states get expanded, the cheapest
/// delete-the-rest completion seen so far is returned with `exact: false`.
pub fn ged_astar(
    g1: &Graph,
    g2: &Graph,
    costs: &EditCostModel,
    node_budget: usize,
) -> Result<GedResult, OracleError> {
    let ctx = SearchContext::new(g1, g2, costs)?;
    let n1 = g1.n();
    let n2 = g2.n();

    let mut arena: Vec<AstarNode> =
        vec![AstarNode { parent: 0, used: 0, g: 0.0, assigned: 0, depth: 0 }];
    let mut heap = BinaryHeap::new();
    let mut tie = 0u64;
    let root_f = ctx.heuristic(0, &ctx.counts2.clone(), ctx.m2_total);
    heap.push(HeapEntry { f: root_f, tie, idx: 0 });

    let mut expanded = 0usize;
    let mut best_ub = f64::INFINITY;
    let mut best_ub_idx = 0u32;

    while let Some(entry) = heap.pop() {
        let state = arena[entry.idx as usize];
        let depth = state.depth as usize;
        if depth == n1 {
            let mapping = reconstruct_mapping(&arena, entry.idx, n1);
            return Ok(GedResult {
                distance: state.g,
                path: edit_path_from_mapping(g1, g2, &mapping, costs),
                exact: true,
                expanded,
            });
        }
        expanded += 1;
        if expanded > node_budget {
            break;
        }

        let mapping = reconstruct_mapping(&arena, entry.idx, n1);
        let mut inverse = vec![None; n2];
        for (u, img) in mapping.iter().enumerate().take(depth) {
            if let Some(x) = img {
                inverse[*x] = Some(u);
            }
        }
        let mut counts2_unused = ctx.unused_label_counts(state.used);
        let m2_within = ctx.edges_within(state.used);

        // Cheap always-valid upper bound: delete the rest, insert the rest.
        let trivial = state.g
            + ctx.costs.node_delete * (n1 - depth) as f64
            + ctx.costs.edge_delete * ctx.m1_suffix[depth] as f64
            + ctx.completion_cost(state.used);
        if trivial < best_ub {
            best_ub = trivial;
            best_ub_idx = entry.idx;
        }

        let mut push = |arena: &mut Vec<AstarNode>,
                        heap: &mut BinaryHeap<HeapEntry>,
                        image: Option<usize>,
                        g: f64,
                        h: f64| {
            let used = match image {
                Some(y) => state.used | (1 << y),
                None => state.used,
            };
            arena.push(AstarNode {
                parent: entry.idx,
                used,
                g,
                assigned: image.map_or(EPS, |y| y as u8),
                depth: state.depth + 1,
            });
            tie += 1;
            heap.push(HeapEntry { f: g + h, tie, idx: (arena.len() - 1) as u32 });
        };

        for y in 0..n2 {
            if state.used & (1 << y) != 0 {
                continue;
            }
            let mut g = state.g + ctx.assign_delta(&mapping, &inverse, depth, Some(y));
            let h = if depth + 1 == n1 {
                g += ctx.completion_cost(state.used | (1 << y));
                0.0
            } else {
                counts2_unused[ctx.lab2[y]] -= 1;
                let within = m2_within
                    + ctx.adj2[y].iter().filter(|&&x| state.used & (1 << x) != 0).count();
                let h = ctx.heuristic(depth + 1, &counts2_unused, ctx.m2_total - within);
                counts2_unused[ctx.lab2[y]] += 1;
                h
            };
            push(&mut arena, &mut heap, Some(y), g, h);
        }
        {
            let mut g = state.g + ctx.assign_delta(&mapping, &inverse, depth, None);
            let h = if depth + 1 == n1 {
                g += ctx.completion_cost(state.used);
                0.0
            } else {
                ctx.heuristic(depth + 1, &counts2_unused, ctx.m2_total - m2_within)
            };
            push(&mut arena, &mut heap, None, g, h);
        }
    }

    // Budget exhausted: report the best delete-the-rest completion.
    let mut mapping = reconstruct_mapping(&arena, best_ub_idx, n1);
    for slot in mapping.iter_mut().skip(arena[best_ub_idx as usize].depth as usize) {
        *slot = None;
    }
    Ok(GedResult {
        distance: best_ub,
        path: edit_path_from_mapping(g1, g2, &mapping, costs),
        exact: false,
        expanded,
    })
}

// ---------------------------------------------------------------------------
// Beam search

struct BeamState {
    assignment: Vec<u8>,
    used: u128,
    g: f64,
}

/// Depth-synchronized beam search: expands every frontier state one depth at
/// a time and keeps only the `width` best by optimistic total cost. Returns
/// an upper bound on the distance; `width = usize::MAX` never prunes and so
/// matches [`ged_astar`].
pub fn ged_beam(
    g1: &Graph,
    g2: &Graph,
    costs: &EditCostModel,
    width: usize,
) -> Result<f64, OracleError> {
    if width == 0 {
        return Err(OracleError::ZeroWidth);
    }
    let ctx = SearchContext::new(g1, g2, costs)?;
    let n1 = g1.n();
    let n2 = g2.n();

    let mut frontier = vec![BeamState { assignment: Vec::new(), used: 0, g: 0.0 }];
    for depth in 0..n1 {
        // (optimistic f, generation index) for deterministic pruning.
        let mut scored: Vec<(f64, BeamState)> = Vec::new();
        for state in &frontier {
            let mapping: Vec<Option<usize>> = state
                .assignment
                .iter()
                .map(|&a| if a == EPS { None } else { Some(a as usize) })
                .collect();
            let mut inverse = vec![None; n2];
            for (u, img) in mapping.iter().enumerate() {
                if let Some(x) = img {
                    inverse[*x] = Some(u);
                }
            }
            let mut counts2_unused = ctx.unused_label_counts(state.used);
            let m2_within = ctx.edges_within(state.used);

            let consider = |image: Option<usize>,
                                scored: &mut Vec<(f64, BeamState)>,
                                counts2_unused: &mut Vec<u32>| {
                let mut g = state.g + ctx.assign_delta(&mapping, &inverse, depth, image);
                let used = match image {
                    Some(y) => state.used | (1 << y),
                    None => state.used,
                };
                let h = if depth + 1 == n1 {
                    g += ctx.completion_cost(used);
                    0.0
                } else {
                    match image {
                        Some(y) => {
                            counts2_unused[ctx.lab2[y]] -= 1;
                            let within = m2_within
                                + ctx.adj2[y]
                                    .iter()
                                    .filter(|&&x| state.used & (1 << x) != 0)
                                    .count();
                            let h = ctx.heuristic(
                                depth + 1,
                                counts2_unused,
                                ctx.m2_total - within,
                            );
                            counts2_unused[ctx.lab2[y]] += 1;
                            h
                        }
                        None => ctx.heuristic(
                            depth + 1,
                            counts2_unused,
                            ctx.m2_total - m2_within,
                        ),
                    }
                };
                let mut assignment = state.assignment.clone();
                assignment.push(image.map_or(EPS, |y| y as u8));
                scored.push((g + h, BeamState { assignment, used, g }));
            };

            for y in 0..n2 {
                if state.used & (1 << y) == 0 {
                    consider(Some(y), &mut scored, &mut counts2_unused);
                }
            }
            consider(None, &mut scored, &mut counts2_unused);
        }
        // Stable sort keeps generation order on ties, so pruning is
        // deterministic.
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        scored.truncate(width);
        frontier = scored.into_iter().map(|(_, s)| s).collect();
    }

    Ok(frontier
        .iter()
        .map(|s| s.g)
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::super::tests::{k3, path3, random_labeled, random_pair};
    use super::super::{isomorphic_small, EditCostModel};
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit() -> EditCostModel {
        EditCostModel::default()
    }

    #[test]
    fn bruteforce_identical_graphs_cost_zero() {
        let g = k3();
        let r = ged_bruteforce(&g, &g, &unit()).unwrap();
        assert_eq!(r.distance, 0.0);
        assert!(r.exact);
        assert!(r.path.ops.is_empty());
    }

    #[test]
    fn bruteforce_triangle_vs_path_is_one_edge_deletion() {
        let r = ged_bruteforce(&k3(), &path3(), &unit()).unwrap();
        assert_eq!(r.distance, 1.0);
        assert_eq!(r.path.ops.len(), 1);
    }

    #[test]
    fn bruteforce_single_node_vs_labeled_edge_pair() {
        let g1 = Graph::new("one", 1, &[], Some(vec!["a".into()])).unwrap();
        let g2 =
            Graph::new("two", 2, &[(0, 1)], Some(vec!["a".into(), "a".into()])).unwrap();
        let r = ged_bruteforce(&g1, &g2, &unit()).unwrap();
        assert_eq!(r.distance, 2.0);
    }

    #[test]
    fn bruteforce_rejects_large_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = random_labeled(&mut rng, "big", 8, 0.5, 0);
        assert!(matches!(
            ged_bruteforce(&g, &k3(), &unit()),
            Err(OracleError::SizeCap { n: 8, cap: BRUTEFORCE_NODE_CAP })
        ));
    }

    #[test]
    fn astar_matches_bruteforce_and_paths_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..60 {
            let alphabet = [0, 2, 3][trial % 3];
            let (g1, g2) = random_pair(&mut rng, 6, alphabet);
            let exact = ged_bruteforce(&g1, &g2, &unit()).unwrap();
            let astar = ged_astar(&g1, &g2, &unit(), 10_000_000).unwrap();
            assert!(astar.exact);
            assert_eq!(astar.distance, exact.distance, "trial {trial}");
            assert_eq!(astar.path.total_cost, astar.distance);
            let rebuilt = astar.path.apply(&g1).unwrap();
            assert!(isomorphic_small(&rebuilt, &g2));
        }
    }

    #[test]
    fn astar_handles_general_costs() {
        let costs = EditCostModel {
            node_insert: 0.7,
            node_delete: 1.3,
            node_relabel: 0.4,
            edge_insert: 0.9,
            edge_delete: 1.1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (g1, g2) = random_pair(&mut rng, 5, 2);
            let exact = ged_bruteforce(&g1, &g2, &costs).unwrap();
            let astar = ged_astar(&g1, &g2, &costs, 10_000_000).unwrap();
            assert!((astar.distance - exact.distance).abs() < 1e-9);
        }
    }

    #[test]
    fn astar_budget_exhaustion_yields_upper_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g1 = random_labeled(&mut rng, "a", 6, 0.5, 0);
        let g2 = random_labeled(&mut rng, "b", 6, 0.5, 0);
        let exact = ged_bruteforce(&g1, &g2, &unit()).unwrap();
        let starved = ged_astar(&g1, &g2, &unit(), 3).unwrap();
        assert!(!starved.exact);
        assert!(starved.distance >= exact.distance);
        // The reported path must realize the reported bound.
        assert_eq!(starved.path.total_cost, starved.distance);
        assert!(isomorphic_small(&starved.path.apply(&g1).unwrap(), &g2));
    }

    #[test]
    fn root_heuristic_is_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..200 {
            let alphabet = [0, 2, 4][trial % 3];
            let (g1, g2) = random_pair(&mut rng, 6, alphabet);
            let h0 = root_heuristic(&g1, &g2, &unit());
            let exact = ged_bruteforce(&g1, &g2, &unit()).unwrap();
            assert!(
                h0 <= exact.distance + 1e-9,
                "h0 {h0} exceeds distance {} (trial {trial})",
                exact.distance
            );
        }
    }

    #[test]
    fn beam_is_upper_bound_and_wide_beam_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..40 {
            let alphabet = [0, 2][trial % 2];
            let (g1, g2) = random_pair(&mut rng, 6, alphabet);
            let exact = ged_bruteforce(&g1, &g2, &unit()).unwrap().distance;
            let narrow = ged_beam(&g1, &g2, &unit(), 1).unwrap();
            let wide = ged_beam(&g1, &g2, &unit(), usize::MAX).unwrap();
            assert!(narrow >= exact - 1e-9);
            assert_eq!(wide, exact, "trial {trial}");
        }
    }

    #[test]
    fn beam_identical_graphs_cost_zero() {
        let g = path3();
        assert_eq!(ged_beam(&g, &g, &unit(), 1).unwrap(), 0.0);
    }

    #[test]
    fn beam_rejects_zero_width() {
        assert!(matches!(
            ged_beam(&k3(), &path3(), &unit(), 0),
            Err(OracleError::ZeroWidth)
        ));
    }

    #[test]
    fn searches_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g1 = random_labeled(&mut rng, "a", 6, 0.5, 2);
        let g2 = random_labeled(&mut rng, "b", 6, 0.5, 2);
        let a = ged_astar(&g1, &g2, &unit(), 10_000_000).unwrap();
        let b = ged_astar(&g1, &g2, &unit(), 10_000_000).unwrap();
        assert_eq!(a.distance, b.distance);
        assert_eq!(a.path, b.path);
        assert_eq!(a.expanded, b.expanded);
        assert_eq!(
            ged_beam(&g1, &g2, &unit(), 5).unwrap(),
            ged_beam(&g1, &g2, &unit(), 5).unwrap()
        );
    }
}
