//! Maximum common connected subgraph via branch and bound.
//!
//! The common subgraph is *not* required to be induced: a set of
//! label-preserving node pairs counts as long as the edges shared by both
//! graphs connect all chosen pairs. Search branches on candidate pairs
//! (include it, or forbid it and move on) and prunes with a label-class
//! upper bound on how many more pairs could still be matched.

use super::OracleError;
use crate::graph::Graph;
use crate::oracles::SEARCH_NODE_CAP;

#[derive(Clone, Debug)]
pub struct McsResult {
    /// Node count of the largest common connected subgraph found.
    pub size: usize,
    /// Witness node pairs (graph-1 node, graph-2 node), sorted by the first.
    pub mapping: Vec<(usize, usize)>,
    /// False when the node budget cut the search short; `size` is then only
    /// a lower bound.
    pub exact: bool,
    pub expanded: usize,
}

struct McsSearch<'a> {
    g1: &'a Graph,
    g2: &'a Graph,
    lab1: Vec<usize>,
    lab2: Vec<usize>,
    n_labels: usize,
    /// Per graph-1 node, the graph-2 nodes forbidden by exclusion branches.
    excluded: Vec<u128>,
    mapping: Vec<(usize, usize)>,
    used1: u128,
    used2: u128,
    best: Vec<(usize, usize)>,
    budget: usize,
    expanded: usize,
    truncated: bool,
}

impl McsSearch<'_> {
    /// First candidate pair in lexicographic order: unused on both sides,
    /// same label, not excluded, and sharing an edge with the current
    /// mapping (any pair qualifies while the mapping is empty).
    fn first_candidate(&self) -> Option<(usize, usize)> {
        for u in 0..self.g1.n() {
            if self.used1 & (1 << u) != 0 {
                continue;
            }
            for v in 0..self.g2.n() {
                if self.used2 & (1 << v) != 0
                    || self.excluded[u] & (1 << v) != 0
                    || self.lab1[u] != self.lab2[v]
                {
                    continue;
                }
                let connectable = self.mapping.is_empty()
                    || self.mapping.iter().any(|&(mu, mv)| {
                        self.g1.has_edge(u, mu) && self.g2.has_edge(v, mv)
                    });
                if connectable {
                    return Some((u, v));
                }
            }
        }
        None
    }

    /// Upper bound on additional pairs: per label class, the smaller count
    /// of still-unused nodes (connectivity and exclusions ignored).
    fn label_bound(&self) -> usize {
        let mut avail1 = vec![0usize; self.n_labels];
        let mut avail2 = vec![0usize; self.n_labels];
        for u in 0..self.g1.n() {
            if self.used1 & (1 << u) == 0 {
                avail1[self.lab1[u]] += 1;
            }
        }
        for v in 0..self.g2.n() {
            if self.used2 & (1 << v) == 0 {
                avail2[self.lab2[v]] += 1;
            }
        }
        avail1.iter().zip(&avail2).map(|(a, b)| a.min(b)).sum()
    }

    fn extend(&mut self) {
        if self.truncated {
            return;
        }
        self.expanded += 1;
        if self.expanded > self.budget {
            self.truncated = true;
            return;
        }
        if self.mapping.len() > self.best.len() {
            self.best = self.mapping.clone();
        }
        if self.mapping.len() + self.label_bound() <= self.best.len() {
            return;
        }
        let Some((u, v)) = self.first_candidate() else {
            return;
        };

        self.mapping.push((u, v));
        self.used1 |= 1 << u;
        self.used2 |= 1 << v;
        self.extend();
        self.used2 &= !(1 << v);
        self.used1 &= !(1 << u);
        self.mapping.pop();

        self.excluded[u] |= 1 << v;
        self.extend();
        self.excluded[u] &= !(1 << v);
    }
}

/// Size (and witness) of the maximum common connected subgraph under
/// label-preserving node matching. `node_budget` caps search states; on
/// exhaustion the best mapping found so far is returned with `exact: false`.
pub fn mcs_branch_bound(
    g1: &Graph,
    g2: &Graph,
    node_budget: usize,
) -> Result<McsResult, OracleError> {
    let n = g1.n().max(g2.n());
    if n > SEARCH_NODE_CAP {
        return Err(OracleError::TooLarge { n, cap: SEARCH_NODE_CAP });
    }
    let mut vocab = std::collections::BTreeMap::new();
    let mut intern = |label: Option<&str>| -> usize {
        let key = label.unwrap_or("").to_string();
        let next = vocab.len();
        *vocab.entry(key).or_insert(next)
    };
    let lab1: Vec<usize> = (0..g1.n()).map(|v| intern(g1.label_of(v))).collect();
    let lab2: Vec<usize> = (0..g2.n()).map(|v| intern(g2.label_of(v))).collect();
    let n_labels = vocab.len();

    let mut search = McsSearch {
        g1,
        g2,
        lab1,
        lab2,
        n_labels,
        excluded: vec![0u128; g1.n()],
        mapping: Vec::new(),
        used1: 0,
        used2: 0,
        best: Vec::new(),
        budget: node_budget,
        expanded: 0,
        truncated: false,
    };
    search.extend();
    let mut mapping = search.best;
    mapping.sort_unstable();
    Ok(McsResult {
        size: mapping.len(),
        mapping,
        exact: !search.truncated,
        expanded: search.expanded,
    })
}
