//! Ranking and regression metrics plus the query-style retrieval protocol:
//! every test graph queries the whole corpus, per-query rank metrics are
//! averaged, and squared error is pooled over all scored pairs.
//!
//! Tie conventions are fixed for reproducibility: Spearman uses average
//! ranks, Kendall is the tie-adjusted tau-b, and precision-at-k breaks score
//! ties deterministically by (score descending, id ascending).

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::GraphPair;
use crate::oracles::ged_to_similarity;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction/target lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("metric needs at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("k = {k} exceeds the corpus size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no ground truth for pair ({0}, {1})")]
    MissingPair(String, String),
    #[error("ground truth for ({0}, {1}) has no usable distance")]
    MissingDistance(String, String),
    #[error("no queries to evaluate")]
    NoQueries,
    #[error("prediction failed for pair ({0}, {1}): {2}")]
    Predictor(String, String, String),
}

// ---------------------------------------------------------------------------
// Metrics

/// Mean squared difference between two equal-length nonempty slices.
pub fn metric_mse(preds: &[f64], targets: &[f64]) -> Result<f64, EvalError> {
    check_lengths(preds, targets, 1)?;
    let n = preds.len() as f64;
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// Spearman rank correlation with average ranks for ties: the Pearson
/// correlation of the two rank vectors. Zero rank variance on either side
/// yields `None` (the caller decides how to score a degenerate query).
pub fn metric_spearman(preds: &[f64], targets: &[f64]) -> Result<Option<f64>, EvalError> {
    check_lengths(preds, targets, 2)?;
    let rp = average_ranks(preds);
    let rt = average_ranks(targets);
    Ok(pearson(&rp, &rt))
}

/// Kendall rank correlation, tie-adjusted (tau-b). All-tied sides yield
/// `None`.
pub fn metric_kendall(preds: &[f64], targets: &[f64]) -> Result<Option<f64>, EvalError> {
    check_lengths(preds, targets, 2)?;
    let n = preds.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_p, mut ties_t) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dp = preds[i] - preds[j];
            let dt = targets[i] - targets[j];
            if dp == 0.0 && dt == 0.0 {
                ties_p += 1;
                ties_t += 1;
            } else if dp == 0.0 {
                ties_p += 1;
            } else if dt == 0.0 {
                ties_t += 1;
            } else if dp * dt > 0.0 {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = ((n0 - ties_p) as f64 * (n0 - ties_t) as f64).sqrt();
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some((concordant - discordant) as f64 / denom))
}

/// Fraction of the true top-k items recovered in the predicted top-k. Both
/// top-k sets are the lexicographically-first k items under
/// (score descending, id ascending), so boundary ties are deterministic.
pub fn metric_precision_at_k(
    pred_scores: &[f64],
    true_scores: &[f64],
    ids: &[String],
    k: usize,
) -> Result<f64, EvalError> {
    check_lengths(pred_scores, true_scores, 1)?;
    if ids.len() != pred_scores.len() {
        return Err(EvalError::LengthMismatch(ids.len(), pred_scores.len()));
    }
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if k > pred_scores.len() {
        return Err(EvalError::KTooLarge { k, n: pred_scores.len() });
    }
    let pred_top = top_k(pred_scores, ids, k);
    let true_top = top_k(true_scores, ids, k);
    let hits = pred_top.iter().filter(|i| true_top.contains(i)).count();
    Ok(hits as f64 / k as f64)
}

fn check_lengths(a: &[f64], b: &[f64], needed: usize) -> Result<(), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < needed {
        return Err(EvalError::TooFew { needed, got: a.len() });
    }
    Ok(())
}

/// 1-based ranks with ties sharing the average of their positions.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j + 1 < xs.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for t in i..=j {
            ranks[idx[t]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` when either side has zero variance.
fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Indices of the first k items under (score descending, id ascending).
fn top_k(scores: &[f64], ids: &[String], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(ids[a].cmp(&ids[b])));
    idx.truncate(k);
    idx
}

// ---------------------------------------------------------------------------
// Ground-truth similarity lookup

/// Unordered-pair similarity lookup built from cached ground-truth rows.
#[derive(Clone, Debug, Default)]
pub struct SimilarityTable {
    map: BTreeMap<(String, String), f64>,
}

impl SimilarityTable {
    pub fn new() -> SimilarityTable {
        SimilarityTable { map: BTreeMap::new() }
    }

    /// Builds the table from cached pairs, transforming each integer edit
    /// distance into `exp(-d)`. Rows without a distance are skipped; lookups
    /// for them fail later with a named-pair error.
    pub fn from_ground_truth(pairs: &[GraphPair]) -> SimilarityTable {
        let mut map = BTreeMap::new();
        for p in pairs {
            if let Some(d) = p.ged {
                let sim = ged_to_similarity(d as f64).expect("u64 distance is nonnegative");
                map.insert(Self::key(&p.g1_id, &p.g2_id), sim);
            }
        }
        SimilarityTable { map }
    }

    pub fn insert(&mut self, a: &str, b: &str, similarity: f64) {
        self.map.insert(Self::key(a, b), similarity);
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        if a == b {
            // An identical pair is always similarity 1, cached or not.
            return Some(self.map.get(&Self::key(a, b)).copied().unwrap_or(1.0));
        }
        self.map.get(&Self::key(a, b)).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }
}

// ---------------------------------------------------------------------------
// Query-style evaluation

/// Rank metrics for a single query against the corpus.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QueryReport {
    pub query_id: String,
    pub spearman_rho: f64,
    pub kendall_tau: f64,
    pub precision_at_k: f64,
    /// True when predictions or targets had zero variance for this query,
    /// in which case the rank correlations are recorded as 0 by convention.
    pub degenerate: bool,
}

/// Aggregate evaluation: pooled mse plus per-query rank metrics averaged
/// over all queries.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub spearman_rho: f64,
    pub kendall_tau: f64,
    pub precision_at_k: f64,
    pub k: usize,
    pub n_queries: usize,
    pub corpus_size: usize,
    pub degenerate_queries: usize,
    pub per_query: Vec<QueryReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One-row summary table: `mse,spearman_rho,kendall_tau,precision_at_k`.
    pub fn summary_csv(&self) -> String {
        format!(
            "mse,spearman_rho,kendall_tau,precision_at_k\n{},{},{},{}\n",
            self.mse, self.spearman_rho, self.kendall_tau, self.precision_at_k
        )
    }
}

/// Scores every query against the whole corpus with `predict` and compares
/// against ground-truth similarities. `predict` receives graph ids; queries
/// run in parallel with a deterministic output order.
pub fn evaluate_model<F>(
    predict: F,
    corpus_ids: &[String],
    query_ids: &[String],
    truth: &SimilarityTable,
    k: usize,
) -> Result<EvalReport, EvalError>
where
    F: Fn(&str, &str) -> Result<f64, String> + Sync,
{
    if query_ids.is_empty() {
        return Err(EvalError::NoQueries);
    }
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if k > corpus_ids.len() {
        return Err(EvalError::KTooLarge { k, n: corpus_ids.len() });
    }

    struct QueryOutcome {
        report: QueryReport,
        preds: Vec<f64>,
        targets: Vec<f64>,
    }

    let outcomes: Vec<QueryOutcome> = query_ids
        .par_iter()
        .map(|q| -> Result<QueryOutcome, EvalError> {
            let mut preds = Vec::with_capacity(corpus_ids.len());
            let mut targets = Vec::with_capacity(corpus_ids.len());
            for c in corpus_ids {
                let target = truth
                    .get(q, c)
                    .ok_or_else(|| EvalError::MissingPair(q.clone(), c.clone()))?;
                let pred = predict(q, c)
                    .map_err(|e| EvalError::Predictor(q.clone(), c.clone(), e))?;
                preds.push(pred);
                targets.push(target);
            }
            let rho = metric_spearman(&preds, &targets)?;
            let tau = metric_kendall(&preds, &targets)?;
            let p_at_k = metric_precision_at_k(&preds, &targets, corpus_ids, k)?;
            let degenerate = rho.is_none() || tau.is_none();
            Ok(QueryOutcome {
                report: QueryReport {
                    query_id: q.clone(),
                    spearman_rho: rho.unwrap_or(0.0),
                    kendall_tau: tau.unwrap_or(0.0),
                    precision_at_k: p_at_k,
                    degenerate,
                },
                preds,
                targets,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut all_preds = Vec::new();
    let mut all_targets = Vec::new();
    for o in &outcomes {
        all_preds.extend_from_slice(&o.preds);
        all_targets.extend_from_slice(&o.targets);
    }
    let mse = metric_mse(&all_preds, &all_targets)?;

    let nq = outcomes.len() as f64;
    let per_query: Vec<QueryReport> = outcomes.into_iter().map(|o| o.report).collect();
    Ok(EvalReport {
        mse,
        spearman_rho: per_query.iter().map(|r| r.spearman_rho).sum::<f64>() / nq,
        kendall_tau: per_query.iter().map(|r| r.kendall_tau).sum::<f64>() / nq,
        precision_at_k: per_query.iter().map(|r| r.precision_at_k).sum::<f64>() / nq,
        k,
        n_queries: per_query.len(),
        corpus_size: corpus_ids.len(),
        degenerate_queries: per_query.iter().filter(|r| r.degenerate).count(),
        per_query,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn ids(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn mse_hand_cases() {
        assert_eq!(metric_mse(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(metric_mse(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert!((metric_mse(&[0.5], &[0.3]).unwrap() - 0.04).abs() < 1e-15);
        assert!(metric_mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(metric_mse(&[], &[]).is_err());
    }

    #[test]
    fn spearman_identities_and_hand_case() {
        assert_eq!(metric_spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), Some(1.0));
        assert_eq!(metric_spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), Some(-1.0));
        let rho = metric_spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap().unwrap();
        assert!((rho - 0.5).abs() < 1e-12, "rho = {rho}");
        // Zero variance on one side.
        assert_eq!(metric_spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), None);
    }

    #[test]
    fn spearman_average_ranks_for_ties() {
        // Ranks of (1, 1, 2) are (1.5, 1.5, 3): correlating with itself is 1.
        assert_eq!(metric_spearman(&[1.0, 1.0, 2.0], &[5.0, 5.0, 9.0]).unwrap(), Some(1.0));
        assert_eq!(average_ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn kendall_identities_and_hand_cases() {
        assert_eq!(metric_kendall(&[1.0, 2.0, 3.0], &[5.0, 6.0, 7.0]).unwrap(), Some(1.0));
        assert_eq!(metric_kendall(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), Some(-1.0));
        let tau = metric_kendall(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap().unwrap();
        assert!((tau - 1.0 / 3.0).abs() < 1e-12, "tau = {tau}");
        // Tau-b with one tied pair on the prediction side:
        // concordant {(0,2),(1,2)}, tied (0,1); 2/sqrt((3-1)(3-0)) = 2/sqrt(6).
        let tau = metric_kendall(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap().unwrap();
        assert!((tau - 2.0 / 6.0_f64.sqrt()).abs() < 1e-12, "tau = {tau}");
        assert_eq!(metric_kendall(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), None);
    }

    #[test]
    fn precision_at_k_hand_cases() {
        let names = ids(&["a", "b", "c"]);
        let same = metric_precision_at_k(&[0.9, 0.8, 0.1], &[0.9, 0.8, 0.1], &names, 2).unwrap();
        assert_eq!(same, 1.0);
        // Pred top-2 {a,b}, true top-2 {a,c} -> overlap {a}.
        let half = metric_precision_at_k(&[0.9, 0.8, 0.1], &[0.9, 0.1, 0.8], &names, 2).unwrap();
        assert_eq!(half, 0.5);
        // Disjoint top-1.
        let zero = metric_precision_at_k(&[1.0, 0.0], &[0.0, 1.0], &ids(&["a", "b"]), 1).unwrap();
        assert_eq!(zero, 0.0);
        assert!(matches!(
            metric_precision_at_k(&[1.0], &[1.0], &ids(&["a"]), 2),
            Err(EvalError::KTooLarge { .. })
        ));
    }

    #[test]
    fn precision_at_k_breaks_ties_by_id() {
        // All true scores tied: the true top-2 under (score desc, id asc) is
        // {a, b} regardless of input order.
        let names = ids(&["c", "a", "b"]);
        let p = metric_precision_at_k(&[0.1, 0.9, 0.8], &[0.5, 0.5, 0.5], &names, 2).unwrap();
        // pred top-2 = {a, b}; true top-2 = {a, b} by id tie-break.
        assert_eq!(p, 1.0);
        let p = metric_precision_at_k(&[0.9, 0.1, 0.8], &[0.5, 0.5, 0.5], &names, 2).unwrap();
        // pred top-2 = {c, b}; true top-2 = {a, b} -> overlap {b}.
        assert_eq!(p, 0.5);
    }

    #[test]
    fn rank_metrics_are_monotone_transform_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let n = rng.gen_range(3..12);
            let preds: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let targets: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let names: Vec<String> = (0..n).map(|i| format!("g{i}")).collect();
            let scaled: Vec<f64> = preds.iter().map(|p| 2.0 * p + 1.0).collect();
            let k = rng.gen_range(1..=n);
            assert_eq!(
                metric_spearman(&preds, &targets).unwrap(),
                metric_spearman(&scaled, &targets).unwrap()
            );
            assert_eq!(
                metric_kendall(&preds, &targets).unwrap(),
                metric_kendall(&scaled, &targets).unwrap()
            );
            assert_eq!(
                metric_precision_at_k(&preds, &targets, &names, k).unwrap(),
                metric_precision_at_k(&scaled, &targets, &names, k).unwrap()
            );
            // mse is not invariant (sanity check of the property statement).
            if preds.iter().any(|&p| p != 0.5) {
                assert_ne!(
                    metric_mse(&preds, &targets).unwrap(),
                    metric_mse(&scaled, &targets).unwrap()
                );
            }
        }
    }

    #[test]
    fn rank_metrics_are_antisymmetric_under_negation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..25 {
            let n = rng.gen_range(3..12);
            // Distinct values so no ties arise.
            let preds: Vec<f64> = (0..n).map(|i| i as f64 + rng.gen_range(0.0..0.5)).collect();
            let targets: Vec<f64> = {
                let mut t: Vec<f64> =
                    (0..n).map(|i| i as f64 + rng.gen_range(0.0..0.5)).collect();
                t.shuffle(&mut rng);
                t
            };
            let negated: Vec<f64> = preds.iter().map(|p| -p).collect();
            let rho = metric_spearman(&preds, &targets).unwrap().unwrap();
            let rho_neg = metric_spearman(&negated, &targets).unwrap().unwrap();
            assert!((rho + rho_neg).abs() < 1e-12);
            let tau = metric_kendall(&preds, &targets).unwrap().unwrap();
            let tau_neg = metric_kendall(&negated, &targets).unwrap().unwrap();
            assert!((tau + tau_neg).abs() < 1e-12);
        }
    }

    #[test]
    fn precision_values_live_on_the_k_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(2..10);
            let k = rng.gen_range(1..=n);
            let preds: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let targets: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let names: Vec<String> = (0..n).map(|i| format!("g{i}")).collect();
            let p = metric_precision_at_k(&preds, &targets, &names, k).unwrap();
            let grid = (p * k as f64).round() / k as f64;
            assert!((p - grid).abs() < 1e-12 && (0.0..=1.0).contains(&p));
        }
    }

    fn toy_truth() -> (Vec<String>, SimilarityTable) {
        let corpus = ids(&["a", "b", "c"]);
        let mut truth = SimilarityTable::default();
        truth.insert("a", "a", 1.0);
        truth.insert("a", "b", 0.6);
        truth.insert("a", "c", 0.2);
        truth.insert("b", "b", 1.0);
        truth.insert("b", "c", 0.5);
        truth.insert("c", "c", 1.0);
        (corpus, truth)
    }

    #[test]
    fn perfect_predictor_scores_perfectly() {
        let (corpus, truth) = toy_truth();
        let t = truth.clone();
        let report = evaluate_model(
            move |a, b| t.get(a, b).ok_or_else(|| "missing".to_string()),
            &corpus,
            &corpus.clone(),
            &truth,
            2,
        )
        .unwrap();
        assert_eq!(report.mse, 0.0);
        assert_eq!(report.spearman_rho, 1.0);
        assert_eq!(report.kendall_tau, 1.0);
        assert_eq!(report.precision_at_k, 1.0);
        assert_eq!(report.degenerate_queries, 0);
        assert_eq!(report.n_queries, 3);
        assert_eq!(report.corpus_size, 3);
    }

    #[test]
    fn constant_predictor_is_degenerate_and_flagged() {
        let (corpus, truth) = toy_truth();
        let report =
            evaluate_model(|_, _| Ok(0.5), &corpus, &corpus.clone(), &truth, 1).unwrap();
        assert_eq!(report.spearman_rho, 0.0);
        assert_eq!(report.kendall_tau, 0.0);
        assert_eq!(report.degenerate_queries, 3);
        // Constant predictions rank every corpus item equally; the id
        // tie-break picks "a" as predicted top-1 for every query.
        // True top-1 is the query itself (similarity 1), so only query "a"
        // scores a hit.
        assert!((report.precision_at_k - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_three_graph_report() {
        let (corpus, truth) = toy_truth();
        // A slightly wrong predictor for query "a": swaps the ranking of b
        // and c, and scores everything else exactly right.
        let preds: BTreeMap<(&str, &str), f64> = [
            (("a", "a"), 0.9),
            (("a", "b"), 0.1),
            (("a", "c"), 0.3),
            (("b", "a"), 0.6),
            (("b", "b"), 1.0),
            (("b", "c"), 0.5),
            (("c", "a"), 0.2),
            (("c", "b"), 0.5),
            (("c", "c"), 1.0),
        ]
        .into_iter()
        .collect();
        let report = evaluate_model(
            move |a, b| Ok(preds[&(a, b)]),
            &corpus,
            &corpus.clone(),
            &truth,
            2,
        )
        .unwrap();
        // Query "a": preds (0.9, 0.1, 0.3) vs targets (1.0, 0.6, 0.2):
        // rho = 0.5, tau = 1/3, top-2 {a,c} vs {a,b} -> p@2 = 0.5.
        // Queries "b" and "c" are exact -> 1.0 everywhere.
        let qa = &report.per_query[0];
        assert!((qa.spearman_rho - 0.5).abs() < 1e-12);
        assert!((qa.kendall_tau - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(qa.precision_at_k, 0.5);
        assert!((report.spearman_rho - (0.5 + 1.0 + 1.0) / 3.0).abs() < 1e-12);
        assert!((report.kendall_tau - (1.0 / 3.0 + 2.0) / 3.0).abs() < 1e-12);
        assert!((report.precision_at_k - (0.5 + 2.0) / 3.0).abs() < 1e-12);
        // mse pools all 9 ordered (query, corpus) pairs; only query "a"
        // contributes error: 0.1² + 0.5² + 0.1².
        let expect_mse = (0.01 + 0.25 + 0.01) / 9.0;
        assert!((report.mse - expect_mse).abs() < 1e-12, "mse = {}", report.mse);
        assert!(report.to_json().contains("per_query"));
        assert!(report.summary_csv().starts_with("mse,"));
    }

    #[test]
    fn evaluate_model_rejects_bad_inputs() {
        let (corpus, truth) = toy_truth();
        assert!(matches!(
            evaluate_model(|_, _| Ok(0.0), &corpus, &[], &truth, 1),
            Err(EvalError::NoQueries)
        ));
        assert!(matches!(
            evaluate_model(|_, _| Ok(0.0), &corpus, &corpus.clone(), &truth, 4),
            Err(EvalError::KTooLarge { .. })
        ));
        let incomplete = SimilarityTable::default();
        assert!(matches!(
            evaluate_model(|_, _| Ok(0.0), &corpus, &corpus.clone(), &incomplete, 1),
            Err(EvalError::MissingPair(..))
        ));
    }

    #[test]
    fn similarity_table_from_ground_truth_rows() {
        let pairs = vec![
            GraphPair {
                g1_id: "x".into(),
                g2_id: "y".into(),
                ged: Some(2),
                ged_provenance: None,
                mcs: None,
            },
            GraphPair {
                g1_id: "x".into(),
                g2_id: "z".into(),
                ged: None,
                ged_provenance: None,
                mcs: Some(3),
            },
        ];
        let table = SimilarityTable::from_ground_truth(&pairs);
        assert!((table.get("y", "x").unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(table.get("x", "z"), None);
        // Identity lookups succeed even when uncached.
        assert_eq!(table.get("w", "w"), Some(1.0));
        assert_eq!(table.len(), 1);
    }
}
