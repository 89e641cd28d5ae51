//! Node alignment between two embedded graphs and the correlation matrices
//! built from it.
//!
//! The pipeline per stage is: solve the earth mover's distance between the
//! two embedding sets exactly (uniform node masses), extract an injective
//! matching from the transport plan greedily, order graph-1 nodes by a
//! canonical embedding-based key, and emit the correlation matrix
//! `C(i,j) = <h1_i, h2_j>` with rows in canonical order and columns arranged
//! by the matching. Stage-0 matrices are up-sampled to a dataset-wide `P x P`
//! so a convolutional regressor sees fixed shapes.

use crate::mat::{dot, squared_distance, Mat};
use std::collections::BTreeSet;

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("non-finite entry in embedding matrix")]
    NonFinite,
    #[error("embedding widths differ: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("cannot up-sample a {n}x{m} matrix to {p}x{p}")]
    UpsampleTooSmall { n: usize, m: usize, p: usize },
    #[error("correlation stacks need matching stage layouts: {0}")]
    StageMismatch(String),
}

// ---------------------------------------------------------------------------
// Earth mover's distance

/// An exactly solved uniform-mass transport problem between two node sets.
#[derive(Clone, Debug)]
pub struct TransportProblem {
    /// Pairwise Euclidean distances between embedding rows, `N x M`.
    pub cost: Mat,
    /// Optimal plan with row sums `1/N` and column sums `1/M`.
    pub plan: Mat,
    /// Total cost `sum(plan ∘ cost)` of the optimal plan.
    pub objective: f64,
}

/// Solves the earth mover's distance between the rows of `h1` and `h2` with
/// uniform masses (`1/N` per graph-1 node, `1/M` per graph-2 node).
///
/// The transport LP is solved exactly by successive shortest augmenting
/// paths on the integer-scaled problem (supplies `M`, demands `N`), so the
/// plan is an exact vertex/optimum rather than an entropic approximation.
pub fn emd(h1: &Mat, h2: &Mat) -> Result<TransportProblem, AlignError> {
    if h1.cols() != h2.cols() {
        return Err(AlignError::DimMismatch(h1.cols(), h2.cols()));
    }
    if !h1.data().iter().all(|x| x.is_finite()) || !h2.data().iter().all(|x| x.is_finite()) {
        return Err(AlignError::NonFinite);
    }
    let n = h1.rows();
    let m = h2.rows();
    let cost = Mat::from_fn(n, m, |i, j| squared_distance(h1.row(i), h2.row(j)).sqrt());
    let flows = solve_transport_units(&cost);
    let scale = 1.0 / (n * m) as f64;
    let plan = Mat::from_fn(n, m, |i, j| flows[i * m + j] as f64 * scale);
    let mut objective = 0.0;
    for i in 0..n {
        for j in 0..m {
            objective += plan[(i, j)] * cost[(i, j)];
        }
    }
    Ok(TransportProblem { cost, plan, objective })
}

/// Min-cost flow for the scaled transport problem: `n` sources with supply
/// `m` each, `m` sinks with demand `n` each. Returns integer flows per
/// (source, sink) cell. Successive shortest paths with node potentials; all
/// arc costs are nonnegative so plain Dijkstra applies throughout.
fn solve_transport_units(cost: &Mat) -> Vec<u64> {
    let n = cost.rows();
    let m = cost.cols();
    let mut flow = vec![0i64; n * m];
    let mut supply = vec![m as i64; n];
    let mut demand = vec![n as i64; m];
    // Potentials for sources (0..n) and sinks (0..m).
    let mut pot_src = vec![0.0f64; n];
    let mut pot_snk = vec![0.0f64; m];
    let mut remaining = (n * m) as i64;

    while remaining > 0 {
        // Multi-source Dijkstra over the bipartite residual graph.
        let total = n + m;
        let mut dist = vec![f64::INFINITY; total];
        let mut prev = vec![usize::MAX; total];
        let mut done = vec![false; total];
        for i in 0..n {
            if supply[i] > 0 {
                dist[i] = 0.0;
            }
        }
        loop {
            let mut at = usize::MAX;
            for v in 0..total {
                if !done[v] && dist[v].is_finite() && (at == usize::MAX || dist[v] < dist[at]) {
                    at = v;
                }
            }
            if at == usize::MAX {
                break;
            }
            done[at] = true;
            // Reduced costs are nonnegative by the potential invariant; the
            // `max(0.0)` guards against round-off, and settled nodes are
            // final so `prev` stays acyclic.
            if at < n {
                let i = at;
                for j in 0..m {
                    // Forward arc source -> sink, unbounded capacity.
                    if done[n + j] {
                        continue;
                    }
                    let rc = (cost[(i, j)] + pot_src[i] - pot_snk[j]).max(0.0);
                    let nd = dist[i] + rc;
                    if nd < dist[n + j] {
                        dist[n + j] = nd;
                        prev[n + j] = i;
                    }
                }
            } else {
                let j = at - n;
                for i in 0..n {
                    // Backward arc sink -> source, capacity = current flow.
                    if !done[i] && flow[i * m + j] > 0 {
                        let rc = (-cost[(i, j)] - pot_src[i] + pot_snk[j]).max(0.0);
                        let nd = dist[n + j] + rc;
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = n + j;
                        }
                    }
                }
            }
        }

        // Cheapest reachable sink with unmet demand.
        let mut target = usize::MAX;
        for j in 0..m {
            if demand[j] > 0
                && dist[n + j].is_finite()
                && (target == usize::MAX || dist[n + j] < dist[n + target])
            {
                target = j;
            }
        }
        assert!(target != usize::MAX, "transport problem is always feasible");

        // Walk back to a source, collecting the bottleneck.
        let mut path = Vec::new();
        let mut at = n + target;
        while prev[at] != usize::MAX {
            path.push((prev[at], at));
            at = prev[at];
        }
        let start = at;
        let mut bottleneck = supply[start].min(demand[target]);
        for &(a, b) in &path {
            if b < n {
                // Backward arc (sink a -> source b): limited by its flow.
                bottleneck = bottleneck.min(flow[b * m + (a - n)]);
            }
        }
        for &(a, b) in &path {
            if a < n {
                flow[a * m + (b - n)] += bottleneck;
            } else {
                flow[b * m + (a - n)] -= bottleneck;
            }
        }
        supply[start] -= bottleneck;
        demand[target] -= bottleneck;
        remaining -= bottleneck;

        // Capping the shift at the target distance keeps every residual
        // reduced cost nonnegative, including arcs out of unreached nodes.
        let reached = dist[n + target];
        for i in 0..n {
            pot_src[i] += dist[i].min(reached);
        }
        for j in 0..m {
            pot_snk[j] += dist[n + j].min(reached);
        }
    }

    flow.into_iter().map(|f| f as u64).collect()
}

// ---------------------------------------------------------------------------
// Greedy matching

/// An injective assignment of graph-1 rows to graph-2 columns plus the order
/// in which leftover graph-2 columns are appended downstream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    /// `t[i]` = graph-2 column matched to plan row `i`, for the first
    /// `min(N, M)` rows.
    pub t: Vec<usize>,
    /// Graph-2 columns left unmatched (ascending by default; callers may
    /// re-sort canonically).
    pub trailing: Vec<usize>,
}

/// Scans plan rows in order; each row takes the still-unused column with the
/// largest plan mass, ties going to the smallest column index.
pub fn greedy_match(plan: &Mat) -> Matching {
    let n = plan.rows();
    let m = plan.cols();
    let mut used = vec![false; m];
    let mut t = Vec::with_capacity(n.min(m));
    for i in 0..n.min(m) {
        let mut best = usize::MAX;
        for j in 0..m {
            if !used[j] && (best == usize::MAX || plan[(i, j)] > plan[(i, best)]) {
                best = j;
            }
        }
        used[best] = true;
        t.push(best);
    }
    let trailing = (0..m).filter(|&j| !used[j]).collect();
    Matching { t, trailing }
}

// ---------------------------------------------------------------------------
// Canonical ordering and correlation matrices

/// A total order on nodes: descending by each embedding column in turn, then
/// descending degree, then ascending label id, then ascending node index.
pub fn canonical_order(h: &Mat, degrees: &[usize], labels: Option<&[usize]>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..h.rows()).collect();
    order.sort_by(|&a, &b| {
        for c in 0..h.cols() {
            let ord = h[(b, c)].total_cmp(&h[(a, c)]);
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        degrees[b]
            .cmp(&degrees[a])
            .then_with(|| match labels {
                Some(ls) => ls[a].cmp(&ls[b]),
                None => std::cmp::Ordering::Equal,
            })
            .then_with(|| a.cmp(&b))
    });
    order
}

/// `C(i,j) = <h1 row row_order[i], h2 row cols[j]>` where `cols` lists the
/// matched graph-2 columns in row order followed by the matching's trailing
/// columns. `row_order` must be the canonical order the matching was built
/// under.
pub fn correlation_matrix(
    h1: &Mat,
    h2: &Mat,
    row_order: &[usize],
    matching: &Matching,
) -> Result<Mat, AlignError> {
    if h1.cols() != h2.cols() {
        return Err(AlignError::DimMismatch(h1.cols(), h2.cols()));
    }
    let cols: Vec<usize> = matching.t.iter().chain(&matching.trailing).copied().collect();
    debug_assert_eq!(cols.len(), h2.rows());
    Ok(Mat::from_fn(row_order.len(), cols.len(), |i, j| {
        dot(h1.row(row_order[i]), h2.row(cols[j]))
    }))
}

/// Everything produced when aligning one stage of two graphs.
#[derive(Clone, Debug)]
pub struct StageAlignment {
    /// Canonical order of graph-1 nodes (plan rows follow this order).
    pub row_order: Vec<usize>,
    /// Injective matching with trailing columns in graph-2 canonical order.
    pub matching: Matching,
    pub transport: TransportProblem,
}

/// Canonically orders graph-1 rows, solves EMD against graph-2, and extracts
/// the greedy matching; trailing (unmatched) graph-2 nodes are put in their
/// own canonical order.
pub fn align_stage(
    h1: &Mat,
    degrees1: &[usize],
    labels1: Option<&[usize]>,
    h2: &Mat,
    degrees2: &[usize],
    labels2: Option<&[usize]>,
) -> Result<StageAlignment, AlignError> {
    let row_order = canonical_order(h1, degrees1, labels1);
    let h1_sorted = gather_rows(h1, &row_order);
    let transport = emd(&h1_sorted, h2)?;
    let mut matching = greedy_match(&transport.plan);
    let leftover: BTreeSet<usize> = matching.trailing.iter().copied().collect();
    matching.trailing = canonical_order(h2, degrees2, labels2)
        .into_iter()
        .filter(|j| leftover.contains(j))
        .collect();
    Ok(StageAlignment { row_order, matching, transport })
}

pub fn gather_rows(h: &Mat, order: &[usize]) -> Mat {
    Mat::from_fn(order.len(), h.cols(), |i, j| h[(order[i], j)])
}

// ---------------------------------------------------------------------------
// Up-sampling

/// Corner-aligned linear interpolation weights mapping `n` samples onto `p`:
/// row `i` of the result holds the (at most two) source weights for output
/// position `i`. `interp_matrix(n, p) · x` resamples a length-`n` signal.
pub fn interp_matrix(n: usize, p: usize) -> Mat {
    let mut w = Mat::zeros(p, n);
    for i in 0..p {
        if n == 1 || p == 1 {
            w[(i, 0)] = 1.0;
            continue;
        }
        let x = i as f64 * (n - 1) as f64 / (p - 1) as f64;
        let lo = (x.floor() as usize).min(n - 1);
        let frac = x - lo as f64;
        if frac == 0.0 || lo + 1 == n {
            w[(i, lo)] = 1.0;
        } else {
            w[(i, lo)] = 1.0 - frac;
            w[(i, lo + 1)] = frac;
        }
    }
    w
}

/// Bilinear, corner-aligned up-sampling of an `n x m` matrix to `p x p`.
/// When `n = m = p` this is exactly the identity.
pub fn upsample_bilinear(c: &Mat, p: usize) -> Result<Mat, AlignError> {
    let (n, m) = (c.rows(), c.cols());
    if n > p || m > p {
        return Err(AlignError::UpsampleTooSmall { n, m, p });
    }
    let rows = interp_matrix(n, p);
    let cols = interp_matrix(m, p);
    Ok(rows.matmul(&c.matmul_transpose_b(&cols)))
}

// ---------------------------------------------------------------------------
// Correlation stacks

/// One stage of one graph as the aligner sees it: per-channel embeddings
/// plus the node keys used for canonical tie-breaking.
#[derive(Clone, Debug)]
pub struct StageData {
    /// One embedding matrix per channel; all channels share node count and
    /// width within a stage.
    pub channels: Vec<Mat>,
    pub degrees: Vec<usize>,
    /// Label ids for stage-0 nodes; compact stages carry none.
    pub labels: Option<Vec<usize>>,
}

/// Aligned correlation matrices, indexed `stages[stage][channel]`. Stage 0
/// is `P x P` after up-sampling; stage `l >= 1` is `s_l x s_l` (clamped
/// stages are up-sampled to the configured size so shapes are uniform
/// across a dataset).
#[derive(Clone, Debug)]
pub struct CorrelationStack {
    pub stages: Vec<Vec<Mat>>,
}

/// Builds the full correlation stack for a pair of graphs.
///
/// One matching per stage is computed from the channel-1 embeddings and
/// reused for every channel of that stage, keeping channels spatially
/// consistent. `stage_sizes[l]` gives the target side length of each stage
/// matrix (`P` for stage 0).
pub fn build_correlation_stack(
    g1: &[StageData],
    g2: &[StageData],
    stage_sizes: &[usize],
) -> Result<CorrelationStack, AlignError> {
    if g1.len() != g2.len() || g1.len() != stage_sizes.len() {
        return Err(AlignError::StageMismatch(format!(
            "stage counts {} vs {} (sizes list {})",
            g1.len(),
            g2.len(),
            stage_sizes.len()
        )));
    }
    let mut stages = Vec::with_capacity(g1.len());
    for (l, (s1, s2)) in g1.iter().zip(g2).enumerate() {
        if s1.channels.len() != s2.channels.len() {
            return Err(AlignError::StageMismatch(format!(
                "stage {l}: channel counts {} vs {}",
                s1.channels.len(),
                s2.channels.len()
            )));
        }
        let alignment = align_stage(
            &s1.channels[0],
            &s1.degrees,
            s1.labels.as_deref(),
            &s2.channels[0],
            &s2.degrees,
            s2.labels.as_deref(),
        )?;
        let mut mats = Vec::with_capacity(s1.channels.len());
        for (h1, h2) in s1.channels.iter().zip(&s2.channels) {
            let c = correlation_matrix(h1, h2, &alignment.row_order, &alignment.matching)?;
            mats.push(upsample_bilinear(&c, stage_sizes[l])?);
        }
        stages.push(mats);
    }
    Ok(CorrelationStack { stages })
}
