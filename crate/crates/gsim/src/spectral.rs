//! Spectral graph compaction: normalized-Laplacian eigenvectors, k-means
//! clustering, and the stage-by-stage coarsening that turns a graph into a
//! hierarchy of successively smaller graphs. Also hosts eigenvector pooling,
//! which projects the node embeddings of a cluster down to a single vector
//! for the next stage.

use crate::graph::Graph;
use crate::hashing::config_hash;
use crate::mat::{norm2, squared_distance, Mat};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("matrix is not symmetric within {0:e}")]
    NonSymmetric(f64),
    #[error("eigendecomposition did not converge within {0} sweeps")]
    NonConvergence(usize),
    #[error("requested {k} eigenpairs from a {dim}x{dim} matrix")]
    BadEigCount { k: usize, dim: usize },
    #[error("k-means asked for {k} clusters over {rows} rows")]
    TooManyClusters { k: usize, rows: usize },
    #[error("invalid spectral config: {0}")]
    InvalidConfig(String),
    #[error("hierarchy cache was built for config {found}, expected {expected}")]
    CacheHashMismatch { expected: String, found: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cache parse error on {path}: {msg}")]
    CacheParse { path: String, msg: String },
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Target node counts of the compact stages, strictly decreasing, last 1.
    pub stage_sizes: Vec<usize>,
    /// Eigenvectors used for clustering; `None` means "same as the stage's
    /// target cluster count", the standard spectral-clustering choice.
    pub k_eig: Option<usize>,
    /// How many intra-cluster Laplacian eigenvectors feed pooling channels.
    pub n_pool_channels: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub seed: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            stage_sizes: vec![6, 4, 2, 1],
            k_eig: None,
            n_pool_channels: 2,
            kmeans_restarts: 8,
            kmeans_max_iter: 100,
            seed: 0,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<(), SpectralError> {
        let s = &self.stage_sizes;
        if s.is_empty() {
            return Err(SpectralError::InvalidConfig("stage_sizes is empty".into()));
        }
        if s.windows(2).any(|w| w[0] <= w[1]) {
            return Err(SpectralError::InvalidConfig(format!(
                "stage_sizes {s:?} must be strictly decreasing"
            )));
        }
        if *s.last().unwrap() != 1 {
            return Err(SpectralError::InvalidConfig("last stage size must be 1".into()));
        }
        if self.k_eig == Some(0) {
            return Err(SpectralError::InvalidConfig("k_eig must be >= 1".into()));
        }
        if self.n_pool_channels == 0 {
            return Err(SpectralError::InvalidConfig("n_pool_channels must be >= 1".into()));
        }
        if self.kmeans_restarts == 0 || self.kmeans_max_iter == 0 {
            return Err(SpectralError::InvalidConfig(
                "kmeans_restarts and kmeans_max_iter must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

// ---------------------------------------------------------------------------
// Laplacians and eigendecomposition

/// `D^{-1/2} (D - A) D^{-1/2}` with the zero-degree convention: rows and
/// columns of isolated nodes are entirely zero.
pub fn normalized_laplacian(adjacency: &Mat) -> Mat {
    let n = adjacency.rows();
    assert_eq!(n, adjacency.cols(), "adjacency must be square");
    let mut inv_sqrt_deg = vec![0.0; n];
    for i in 0..n {
        let deg: f64 = adjacency.row(i).iter().sum();
        if deg > 0.0 {
            inv_sqrt_deg[i] = 1.0 / deg.sqrt();
        }
    }
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            if inv_sqrt_deg[i] > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            -adjacency[(i, j)] * inv_sqrt_deg[i] * inv_sqrt_deg[j]
        }
    })
}

/// Unnormalized Laplacian `D - A`.
pub fn unnormalized_laplacian(adjacency: &Mat) -> Mat {
    let n = adjacency.rows();
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            adjacency.row(i).iter().sum()
        } else {
            -adjacency[(i, j)]
        }
    })
}

const SYMMETRY_TOL: f64 = 1e-9;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns the `k` smallest eigenvalues in ascending order and their
/// eigenvectors as the columns of a `dim x k` matrix. Each eigenvector is
/// sign-fixed so its largest-magnitude entry (first on ties) is positive;
/// equal eigenvalues are ordered by the lexicographic order of the sign-fixed
/// vectors, so the output is deterministic.
pub fn symmetric_eigendecomposition(
    m: &Mat,
    k: usize,
) -> Result<(Vec<f64>, Mat), SpectralError> {
    let n = m.rows();
    if m.cols() != n || !m.is_symmetric(SYMMETRY_TOL) {
        return Err(SpectralError::NonSymmetric(SYMMETRY_TOL));
    }
    if k == 0 || k > n {
        return Err(SpectralError::BadEigCount { k, dim: n });
    }

    let mut a = m.clone();
    let mut v = Mat::identity(n);
    let scale = m.max_abs().max(1.0);
    let tol = 1e-12 * scale;

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off_max = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off_max = off_max.max(a[(p, q)].abs());
            }
        }
        if off_max <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= tol {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = c * aip - s * aiq;
                    a[(i, q)] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = c * apj - s * aqj;
                    a[(q, j)] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }
    if !converged {
        return Err(SpectralError::NonConvergence(JACOBI_MAX_SWEEPS));
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| {
            let mut col: Vec<f64> = (0..n).map(|i| v[(i, j)]).collect();
            sign_fix(&mut col);
            (a[(j, j)], col)
        })
        .collect();
    pairs.sort_by(|x, y| {
        x.0.total_cmp(&y.0).then_with(|| {
            for (a, b) in x.1.iter().zip(&y.1) {
                let ord = a.total_cmp(b);
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    });

    let values: Vec<f64> = pairs.iter().take(k).map(|p| p.0).collect();
    let vectors = Mat::from_fn(n, k, |i, j| pairs[j].1[i]);
    Ok((values, vectors))
}

/// Flips a vector so its largest-magnitude entry (first on ties) is positive.
fn sign_fix(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

// ---------------------------------------------------------------------------
// k-means

/// Seeded k-means++ with Lloyd iterations, best of `restarts` by
/// within-cluster sum of squares. Empty clusters are repaired by moving in
/// the point farthest from its current centroid, so all `k` clusters are
/// nonempty on return.
pub fn kmeans(
    rows: &Mat,
    k: usize,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<usize>, SpectralError> {
    let n = rows.rows();
    if k == 0 || k > n {
        return Err(SpectralError::TooManyClusters { k, rows: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts.max(1) {
        let (wcss, assign) = kmeans_once(rows, k, max_iter, &mut rng);
        if best.as_ref().is_none_or(|(w, _)| wcss < *w) {
            best = Some((wcss, assign));
        }
    }
    Ok(best.unwrap().1)
}

fn kmeans_once(rows: &Mat, k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<usize>) {
    let n = rows.rows();
    let d = rows.cols();

    // k-means++ seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(rows.row(rng.gen_range(0..n)).to_vec());
    while centroids.len() < k {
        let d2: Vec<f64> = (0..n)
            .map(|i| {
                centroids
                    .iter()
                    .map(|c| squared_distance(rows.row(i), c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut picked = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    picked = i;
                    break;
                }
                u -= w;
            }
            picked
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(rows.row(next).to_vec());
    }

    let assign_all = |centroids: &[Vec<f64>]| -> Vec<usize> {
        (0..n)
            .map(|i| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (c, centroid) in centroids.iter().enumerate() {
                    let dist = squared_distance(rows.row(i), centroid);
                    if dist < best_d {
                        best_d = dist;
                        best = c;
                    }
                }
                best
            })
            .collect()
    };

    let mut assignment = assign_all(&centroids);
    for _ in 0..max_iter {
        repair_empty_clusters(rows, k, &centroids, &mut assignment);
        // Recompute centroids as cluster means.
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(rows.row(i)) {
                *s += x;
            }
        }
        for (c, sum) in sums.iter_mut().enumerate() {
            for s in sum.iter_mut() {
                *s /= counts[c] as f64;
            }
        }
        centroids = sums;
        let next = assign_all(&centroids);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    repair_empty_clusters(rows, k, &centroids, &mut assignment);

    // Final WCSS against the means of the final assignment.
    let mut means = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, x) in means[c].iter_mut().zip(rows.row(i)) {
            *s += x;
        }
    }
    for (c, mean) in means.iter_mut().enumerate() {
        for s in mean.iter_mut() {
            *s /= counts[c].max(1) as f64;
        }
    }
    let wcss = (0..n).map(|i| squared_distance(rows.row(i), &means[assignment[i]])).sum();
    (wcss, assignment)
}

/// Moves the point farthest from its current centroid (among clusters that
/// can spare one) into each empty cluster, lowest empty cluster first.
fn repair_empty_clusters(rows: &Mat, k: usize, centroids: &[Vec<f64>], assignment: &mut [usize]) {
    loop {
        let mut counts = vec![0usize; k];
        for &c in assignment.iter() {
            counts[c] += 1;
        }
        let Some(empty) = (0..k).find(|&c| counts[c] == 0) else {
            return;
        };
        let mut donor: Option<(usize, f64)> = None;
        for (i, &c) in assignment.iter().enumerate() {
            if counts[c] < 2 {
                continue;
            }
            let dist = squared_distance(rows.row(i), &centroids[c]);
            if donor.is_none_or(|(_, d)| dist > d) {
                donor = Some((i, dist));
            }
        }
        match donor {
            Some((i, _)) => assignment[i] = empty,
            // Fewer distinct points than clusters can strand an empty cluster
            // with no donor; k <= n guarantees some cluster has >= 2 members.
            None => return,
        }
    }
}

// ---------------------------------------------------------------------------
// Hierarchical compaction

/// One coarsening step: the clusters found on the previous stage's nodes,
/// the compact adjacency between them, and the (row-normalized) spectral
/// embedding the clustering ran on.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactionStage {
    /// Sorted node ids of the previous stage, one set per cluster; a
    /// partition of `0..prev_n`.
    pub clusters: Vec<Vec<usize>>,
    /// Compact adjacency: 1 iff an edge of the previous stage crosses the
    /// two clusters.
    pub adjacency: Mat,
    /// Row-normalized eigenvector matrix the clustering ran on (one row per
    /// previous-stage node).
    pub spectral_embedding: Mat,
}

/// The original graph plus its ordered coarsening stages.
#[derive(Clone, Debug)]
pub struct CompactionHierarchy {
    pub graph: Graph,
    pub stages: Vec<CompactionStage>,
}

impl CompactionHierarchy {
    /// Node counts per stage, starting with the original graph.
    pub fn node_counts(&self) -> Vec<usize> {
        let mut counts = vec![self.graph.n()];
        counts.extend(self.stages.iter().map(|s| s.clusters.len()));
        counts
    }
}

/// One compaction step: normalized Laplacian → k smallest eigenvectors →
/// row-normalize → k-means into `min(target_size, n)` clusters → compact
/// adjacency via the cross-cluster edge rule.
pub fn compact_once(
    adjacency: &Mat,
    target_size: usize,
    config: &SpectralConfig,
) -> Result<CompactionStage, SpectralError> {
    let n = adjacency.rows();
    let s = target_size.clamp(1, n);
    let k = config.k_eig.unwrap_or(s).clamp(1, n);

    let lap = normalized_laplacian(adjacency);
    let (_, f) = symmetric_eigendecomposition(&lap, k)?;
    let mut embedding = f;
    for i in 0..n {
        let norm = norm2(embedding.row(i));
        if norm > 0.0 {
            for x in embedding.row_mut(i) {
                *x /= norm;
            }
        }
    }

    let assignment = kmeans(
        &embedding,
        s,
        config.kmeans_restarts,
        config.kmeans_max_iter,
        config.seed,
    )?;
    let mut clusters = vec![Vec::new(); s];
    for (node, &c) in assignment.iter().enumerate() {
        clusters[c].push(node);
    }

    let mut compact = Mat::zeros(s, s);
    for u in 0..n {
        for v in (u + 1)..n {
            if adjacency[(u, v)] > 0.5 && assignment[u] != assignment[v] {
                compact[(assignment[u], assignment[v])] = 1.0;
                compact[(assignment[v], assignment[u])] = 1.0;
            }
        }
    }

    Ok(CompactionStage { clusters, adjacency: compact, spectral_embedding: embedding })
}

/// Chains [`compact_once`] over `config.stage_sizes`; stage `l` consumes
/// stage `l-1`'s adjacency. Stage sizes larger than the current graph clamp
/// to its node count.
pub fn build_hierarchy(
    g: &Graph,
    config: &SpectralConfig,
) -> Result<CompactionHierarchy, SpectralError> {
    config.validate()?;
    let mut adjacency = g.adjacency();
    let mut stages = Vec::with_capacity(config.stage_sizes.len());
    for &s in &config.stage_sizes {
        let stage = compact_once(&adjacency, s, config)?;
        adjacency = stage.adjacency.clone();
        stages.push(stage);
    }
    Ok(CompactionHierarchy { graph: g.clone(), stages })
}

// ---------------------------------------------------------------------------
// Eigenvector pooling

/// Pools an `m x d` cluster embedding down to a `d`-vector: `u(c)^T H`,
/// where `u(c)` is the eigenvector of the `c`-th *largest* eigenvalue of the
/// unnormalized intra-cluster Laplacian (`c` is 1-based). Channels beyond
/// the cluster size pool to the zero vector.
pub fn eigen_pool(
    cluster_embedding: &Mat,
    cluster_adjacency: &Mat,
    channel: usize,
) -> Result<Vec<f64>, SpectralError> {
    assert!(channel >= 1, "channels are 1-based");
    let m = cluster_embedding.rows();
    let d = cluster_embedding.cols();
    if channel > m {
        return Ok(vec![0.0; d]);
    }
    let u = pooling_vector(cluster_adjacency, channel)?;
    let mut h = vec![0.0; d];
    for (i, &w) in u.iter().enumerate() {
        for (out, x) in h.iter_mut().zip(cluster_embedding.row(i)) {
            *out += w * x;
        }
    }
    Ok(h)
}

/// The pooling weights for one cluster: the sign-fixed eigenvector of the
/// `channel`-th largest eigenvalue of the cluster's unnormalized Laplacian.
fn pooling_vector(cluster_adjacency: &Mat, channel: usize) -> Result<Vec<f64>, SpectralError> {
    let m = cluster_adjacency.rows();
    let lap = unnormalized_laplacian(cluster_adjacency);
    let (_, vecs) = symmetric_eigendecomposition(&lap, m)?;
    // Ascending order; the c-th largest sits at column m - c.
    let col = m - channel;
    Ok((0..m).map(|i| vecs[(i, col)]).collect())
}

/// Stacks the per-cluster pooling weights of one stage into an
/// `s_l x prev_n` matrix `U` with `U[k, v] = u_k(c)[v]` for `v` in cluster
/// `k` and zero elsewhere, so pooled embeddings are just `U · H`.
pub fn pooling_matrix(
    prev_adjacency: &Mat,
    clusters: &[Vec<usize>],
    channel: usize,
) -> Result<Mat, SpectralError> {
    let prev_n = prev_adjacency.rows();
    let mut u = Mat::zeros(clusters.len(), prev_n);
    for (k, members) in clusters.iter().enumerate() {
        if channel > members.len() {
            continue;
        }
        let sub = submatrix(prev_adjacency, members);
        let weights = pooling_vector(&sub, channel)?;
        for (i, &node) in members.iter().enumerate() {
            u[(k, node)] = weights[i];
        }
    }
    Ok(u)
}

pub fn submatrix(m: &Mat, indices: &[usize]) -> Mat {
    Mat::from_fn(indices.len(), indices.len(), |i, j| m[(indices[i], indices[j])])
}

// ---------------------------------------------------------------------------
// Hierarchy cache

/// JSON-serializable form of a hierarchy, keyed by graph id and config hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedHierarchy {
    pub clusters: Vec<Vec<Vec<usize>>>,
    pub adjacencies: Vec<Vec<Vec<u8>>>,
}

#[derive(Serialize, Deserialize)]
struct HierarchyCacheFile {
    config_hash: String,
    records: BTreeMap<String, CachedHierarchy>,
}

impl CachedHierarchy {
    pub fn from_hierarchy(h: &CompactionHierarchy) -> CachedHierarchy {
        let clusters = h.stages.iter().map(|s| s.clusters.clone()).collect();
        let adjacencies = h
            .stages
            .iter()
            .map(|s| {
                (0..s.adjacency.rows())
                    .map(|i| s.adjacency.row(i).iter().map(|&x| x as u8).collect())
                    .collect()
            })
            .collect();
        CachedHierarchy { clusters, adjacencies }
    }
}

pub fn save_hierarchy_cache(
    path: &Path,
    config: &SpectralConfig,
    records: &BTreeMap<String, CachedHierarchy>,
) -> Result<(), SpectralError> {
    let file = HierarchyCacheFile { config_hash: config.hash(), records: records.clone() };
    let json = serde_json::to_string_pretty(&file).expect("cache serializes");
    fs::write(path, json).map_err(|e| SpectralError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Loads a hierarchy cache, rejecting files built under a different config.
pub fn load_hierarchy_cache(
    path: &Path,
    config: &SpectralConfig,
) -> Result<BTreeMap<String, CachedHierarchy>, SpectralError> {
    let text = fs::read_to_string(path).map_err(|e| SpectralError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let file: HierarchyCacheFile =
        serde_json::from_str(&text).map_err(|e| SpectralError::CacheParse {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
    let expected = config.hash();
    if file.config_hash != expected {
        return Err(SpectralError::CacheHashMismatch { expected, found: file.config_hash });
    }
    Ok(file.records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{clique_pair, erdos_renyi};

    fn edge_graph() -> Mat {
        Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])
    }

    #[test]
    fn laplacian_of_single_edge() {
        let l = normalized_laplacian(&edge_graph());
        assert_eq!(l, Mat::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]));
    }

    #[test]
    fn laplacian_of_isolated_node_is_zero() {
        let l = normalized_laplacian(&Mat::zeros(1, 1));
        assert_eq!(l, Mat::zeros(1, 1));
    }

    #[test]
    fn laplacian_of_triangle() {
        let adj = Mat::from_fn(3, 3, |i, j| if i != j { 1.0 } else { 0.0 });
        let l = normalized_laplacian(&adj);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { -0.5 };
                assert!((l[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eig_of_single_edge_laplacian() {
        let (vals, _) = symmetric_eigendecomposition(&normalized_laplacian(&edge_graph()), 2).unwrap();
        assert!((vals[0] - 0.0).abs() < 1e-10);
        assert!((vals[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn eig_of_identity_respects_sign_convention() {
        let (vals, vecs) = symmetric_eigendecomposition(&Mat::identity(3), 1).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        let col: Vec<f64> = (0..3).map(|i| vecs[(i, 0)]).collect();
        let first_big = col.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        assert!(first_big > 0.0);
    }

    #[test]
    fn eig_of_diagonal_matrix() {
        let m = Mat::from_fn(3, 3, |i, j| if i == j { [3.0, 1.0, 2.0][i] } else { 0.0 });
        let (vals, vecs) = symmetric_eigendecomposition(&m, 2).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
        // Axis eigenvectors: e_1 for eigenvalue 1, e_2 for eigenvalue 2.
        assert!((vecs[(1, 0)] - 1.0).abs() < 1e-9);
        assert!((vecs[(2, 1)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn eig_rejects_non_symmetric() {
        let m = Mat::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.0]]);
        assert!(matches!(
            symmetric_eigendecomposition(&m, 1),
            Err(SpectralError::NonSymmetric(_))
        ));
    }

    #[test]
    fn eig_residual_on_random_symmetric_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = rng.gen_range(2..12);
            let mut m = Mat::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let x = rng.gen_range(-2.0..2.0);
                    m[(i, j)] = x;
                    m[(j, i)] = x;
                }
            }
            let (vals, vecs) = symmetric_eigendecomposition(&m, n).unwrap();
            let bound = 1e-8 * m.max_abs().max(1.0);
            for j in 0..n {
                for i in 0..n {
                    let mv: f64 = (0..n).map(|t| m[(i, t)] * vecs[(t, j)]).sum();
                    assert!((mv - vals[j] * vecs[(i, j)]).abs() <= bound);
                }
            }
            // Ascending eigenvalues.
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn laplacian_zero_multiplicity_counts_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(2..14);
            let p = rng.gen_range(0.05..0.5);
            let g = erdos_renyi("g", n, p, rng.gen(), false).unwrap();
            let lap = normalized_laplacian(&g.adjacency());
            let (vals, _) = symmetric_eigendecomposition(&lap, n).unwrap();
            assert!(vals[0] >= -1e-9);
            let zeros = vals.iter().filter(|&&v| v.abs() < 1e-8).count();
            assert_eq!(zeros, g.component_count(), "graph {:?}", g.edges());
        }
    }

    /// Exhaustive minimum WCSS over every assignment of n points into k
    /// nonempty clusters (test oracle).
    fn brute_force_wcss(rows: &Mat, k: usize) -> f64 {
        let n = rows.rows();
        let mut best = f64::INFINITY;
        let mut assign = vec![0usize; n];
        loop {
            let mut counts = vec![0usize; k];
            for &a in &assign {
                counts[a] += 1;
            }
            if counts.iter().all(|&c| c > 0) {
                let mut wcss = 0.0;
                for c in 0..k {
                    let members: Vec<usize> = (0..n).filter(|&i| assign[i] == c).collect();
                    let mut mean = vec![0.0; rows.cols()];
                    for &i in &members {
                        for (m, x) in mean.iter_mut().zip(rows.row(i)) {
                            *m += x;
                        }
                    }
                    for m in mean.iter_mut() {
                        *m /= members.len() as f64;
                    }
                    for &i in &members {
                        wcss += squared_distance(rows.row(i), &mean);
                    }
                }
                best = best.min(wcss);
            }
            // Next assignment in base-k counting.
            let mut pos = 0;
            loop {
                if pos == n {
                    return best;
                }
                assign[pos] += 1;
                if assign[pos] < k {
                    break;
                }
                assign[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn kmeans_matches_exhaustive_wcss_on_tiny_input() {
        let rows = Mat::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        let assign = kmeans(&rows, 2, 4, 50, 0).unwrap();
        assert_eq!(assign[0], assign[1]);
        assert_ne!(assign[0], assign[2]);

        let mut wcss = 0.0;
        for c in 0..2 {
            let members: Vec<usize> = (0..3).filter(|&i| assign[i] == c).collect();
            let mut mean = vec![0.0; 2];
            for &i in &members {
                for (m, x) in mean.iter_mut().zip(rows.row(i)) {
                    *m += x;
                }
            }
            for m in mean.iter_mut() {
                *m /= members.len() as f64;
            }
            for &i in &members {
                wcss += squared_distance(rows.row(i), &mean);
            }
        }
        assert!((wcss - brute_force_wcss(&rows, 2)).abs() < 1e-12);
    }

    #[test]
    fn kmeans_degenerate_cluster_counts() {
        let rows = Mat::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        let singletons = kmeans(&rows, 3, 2, 10, 0).unwrap();
        let mut sorted = singletons.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 3);

        let one = kmeans(&rows, 1, 2, 10, 0).unwrap();
        assert!(one.iter().all(|&c| c == 0));

        assert!(kmeans(&rows, 4, 1, 10, 0).is_err());
    }

    #[test]
    fn kmeans_repairs_empty_clusters() {
        // Two distinct points, three copies each, k=2: both clusters must be
        // nonempty even though seeding may pick duplicates.
        let rows = Mat::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![5.0, 5.0],
            vec![5.0, 5.0],
            vec![5.0, 5.0],
        ]);
        for seed in 0..10 {
            let assign = kmeans(&rows, 2, 1, 20, seed).unwrap();
            assert!(assign.contains(&0) && assign.contains(&1));
        }
    }

    #[test]
    fn kmeans_is_deterministic() {
        let rows = Mat::from_fn(12, 3, |i, j| ((i * 7 + j * 3) % 5) as f64);
        assert_eq!(kmeans(&rows, 3, 4, 50, 9).unwrap(), kmeans(&rows, 3, 4, 50, 9).unwrap());
    }

    /// Normalized cut of a 2-partition (test oracle for the clique split).
    fn ncut(adj: &Mat, side: &[bool]) -> f64 {
        let n = adj.rows();
        let mut cut = 0.0;
        let mut vol = [0.0, 0.0];
        for u in 0..n {
            for v in 0..n {
                if adj[(u, v)] > 0.5 {
                    vol[side[u] as usize] += 1.0;
                    if side[u] != side[v] {
                        cut += 0.5;
                    }
                }
            }
        }
        if vol[0] == 0.0 || vol[1] == 0.0 {
            return f64::INFINITY;
        }
        cut / vol[0] + cut / vol[1]
    }

    #[test]
    fn compact_once_recovers_clique_pair() {
        let g = clique_pair("g", 5, 1, 7).unwrap();
        let adj = g.adjacency();
        let stage = compact_once(&adj, 2, &SpectralConfig::default()).unwrap();
        let mut clusters = stage.clusters.clone();
        clusters.sort();
        assert_eq!(clusters, vec![(0..5).collect::<Vec<_>>(), (5..10).collect::<Vec<_>>()]);
        assert_eq!(stage.adjacency, Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]));

        // Oracle: the clique split is the normalized-cut optimum over all
        // 2-partitions.
        let clique_side: Vec<bool> = (0..10).map(|v| v >= 5).collect();
        let best = (1..(1u32 << 9))
            .map(|mask| {
                let side: Vec<bool> = (0..10).map(|v| mask >> v & 1 == 1).collect();
                ncut(&adj, &side)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(ncut(&adj, &clique_side) <= best + 1e-12);
    }

    #[test]
    fn compact_once_clamps_to_singletons() {
        let g = erdos_renyi("g", 4, 0.9, 1, true).unwrap();
        let adj = g.adjacency();
        let stage = compact_once(&adj, 9, &SpectralConfig::default()).unwrap();
        assert_eq!(stage.clusters.len(), 4);
        assert!(stage.clusters.iter().all(|c| c.len() == 1));
        assert_eq!(stage.adjacency, adj);
    }

    #[test]
    fn compact_once_single_cluster() {
        let stage = compact_once(&edge_graph(), 1, &SpectralConfig::default()).unwrap();
        assert_eq!(stage.clusters, vec![vec![0, 1]]);
        assert_eq!(stage.adjacency, Mat::zeros(1, 1));
    }

    #[test]
    fn hierarchy_respects_and_clamps_stage_sizes() {
        let g = clique_pair("g", 5, 1, 3).unwrap();
        let h = build_hierarchy(&g, &SpectralConfig::default()).unwrap();
        assert_eq!(h.node_counts(), vec![10, 6, 4, 2, 1]);

        let small = Graph::new("s", 3, &[(0, 1), (1, 2)], None).unwrap();
        let h = build_hierarchy(&small, &SpectralConfig::default()).unwrap();
        assert_eq!(h.node_counts(), vec![3, 3, 3, 2, 1]);
    }

    #[test]
    fn k3_two_stage_hierarchy() {
        let k3 = Graph::new("k3", 3, &[(0, 1), (1, 2), (0, 2)], None).unwrap();
        let config = SpectralConfig { stage_sizes: vec![2, 1], ..Default::default() };
        let h = build_hierarchy(&k3, &config).unwrap();
        assert_eq!(h.stages[0].clusters.len(), 2);
        // Any 2-partition of a triangle has a crossing edge.
        assert_eq!(h.stages[0].adjacency, Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]));
    }

    #[test]
    fn hierarchy_partitions_every_stage() {
        let g = erdos_renyi("g", 17, 0.25, 5, false).unwrap();
        let h = build_hierarchy(&g, &SpectralConfig::default()).unwrap();
        let mut prev_n = g.n();
        for stage in &h.stages {
            let mut seen = vec![false; prev_n];
            for cluster in &stage.clusters {
                assert!(!cluster.is_empty());
                for &v in cluster {
                    assert!(!seen[v], "node {v} in two clusters");
                    seen[v] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
            assert!(stage.adjacency.is_symmetric(0.0));
            for i in 0..stage.adjacency.rows() {
                assert_eq!(stage.adjacency[(i, i)], 0.0);
            }
            prev_n = stage.clusters.len();
        }
    }

    #[test]
    fn hierarchy_is_deterministic() {
        let g = erdos_renyi("g", 14, 0.3, 11, true).unwrap();
        let config = SpectralConfig::default();
        let a = build_hierarchy(&g, &config).unwrap();
        let b = build_hierarchy(&g, &config).unwrap();
        assert_eq!(a.stages.iter().map(|s| &s.clusters).collect::<Vec<_>>(),
                   b.stages.iter().map(|s| &s.clusters).collect::<Vec<_>>());
    }

    #[test]
    fn eigen_pool_singleton_returns_row() {
        let h = Mat::from_rows(&[vec![3.0, -1.5, 2.0]]);
        let pooled = eigen_pool(&h, &Mat::zeros(1, 1), 1).unwrap();
        assert_eq!(pooled, vec![3.0, -1.5, 2.0]);
    }

    #[test]
    fn eigen_pool_two_node_cluster() {
        let h = Mat::identity(2);
        let pooled = eigen_pool(&h, &edge_graph(), 1).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert!((pooled[0] - s).abs() < 1e-10);
        assert!((pooled[1] + s).abs() < 1e-10);
    }

    #[test]
    fn eigen_pool_pads_missing_channels() {
        let h = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(eigen_pool(&h, &edge_graph(), 3).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn eigen_pool_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let adj = erdos_renyi("g", 5, 0.6, 2, true).unwrap().adjacency();
        for _ in 0..10 {
            let h1 = Mat::from_fn(5, 3, |_, _| rng.gen_range(-1.0..1.0));
            let h2 = Mat::from_fn(5, 3, |_, _| rng.gen_range(-1.0..1.0));
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mix = Mat::from_fn(5, 3, |i, j| a * h1[(i, j)] + b * h2[(i, j)]);
            let p1 = eigen_pool(&h1, &adj, 2).unwrap();
            let p2 = eigen_pool(&h2, &adj, 2).unwrap();
            let pm = eigen_pool(&mix, &adj, 2).unwrap();
            for i in 0..3 {
                assert!((pm[i] - (a * p1[i] + b * p2[i])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pooling_matrix_matches_per_cluster_pooling() {
        let g = erdos_renyi("g", 8, 0.4, 6, true).unwrap();
        let adj = g.adjacency();
        let stage = compact_once(&adj, 3, &SpectralConfig::default()).unwrap();
        let h = Mat::from_fn(8, 4, |i, j| (i * 3 + j) as f64 * 0.25 - 1.0);
        for channel in 1..=2 {
            let u = pooling_matrix(&adj, &stage.clusters, channel).unwrap();
            let pooled = u.matmul(&h);
            for (k, members) in stage.clusters.iter().enumerate() {
                let sub_h = Mat::from_fn(members.len(), 4, |i, j| h[(members[i], j)]);
                let sub_a = submatrix(&adj, members);
                let want = eigen_pool(&sub_h, &sub_a, channel).unwrap();
                for j in 0..4 {
                    assert!((pooled[(k, j)] - want[j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn hierarchy_cache_round_trip_and_hash_guard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let config = SpectralConfig::default();
        let g = clique_pair("g", 4, 2, 1).unwrap();
        let h = build_hierarchy(&g, &config).unwrap();
        let mut records = BTreeMap::new();
        records.insert(g.id().to_string(), CachedHierarchy::from_hierarchy(&h));
        save_hierarchy_cache(&path, &config, &records).unwrap();
        assert_eq!(load_hierarchy_cache(&path, &config).unwrap(), records);

        let other = SpectralConfig { seed: 99, ..SpectralConfig::default() };
        assert!(matches!(
            load_hierarchy_cache(&path, &other),
            Err(SpectralError::CacheHashMismatch { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SpectralConfig::default().validate().is_ok());
        let bad = SpectralConfig { stage_sizes: vec![4, 4, 1], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SpectralConfig { stage_sizes: vec![4, 2], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SpectralConfig { n_pool_channels: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
