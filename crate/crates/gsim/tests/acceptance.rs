//! Acceptance gate: one integration test per promised behavior. Every test
//! prints a single `criterion N [PASS|FAIL] ...` line on the real stdout
//! (bypassing libtest's capture) before asserting, so a plain
//! `cargo test --workspace` run shows the full scorecard.
//!
//! Oracles used here (exhaustive enumeration, LP vertex enumeration) are
//! implemented locally and independently of the library's search code.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::sync::OnceLock;
use std::time::Instant;

use gsim::align::{align_stage, correlation_matrix, emd, gather_rows};
use gsim::eval::{
    evaluate_model, metric_kendall, metric_mse, metric_precision_at_k, metric_spearman,
    SimilarityTable,
};
use gsim::graph::{
    build_features, clique_pair, erdos_renyi, label_vocab, perturbed_corpus, split_dataset,
    DatasetSplit, FeatureMode, Graph,
};
use gsim::mat::Mat;
use gsim::nn::{
    max_relative_gradient_error, mean_squared_error, numeric_gradient, prepare_graph, train,
    Ablation, GraphInput, Model, ModelConfig, Tape, Tensor, TrainConfig, TrainPair, Variant,
};
use gsim::oracles::{
    ged_astar, ged_beam, ged_bipartite, ged_bruteforce, ged_to_similarity,
    ground_truth_ged_pairs, mcs_branch_bound, EditCostModel, DEFAULT_NODE_BUDGET,
};
use gsim::spectral::{
    compact_once, normalized_laplacian, symmetric_eigendecomposition, SpectralConfig,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Prints the scorecard line for one criterion straight to the process
/// stdout (libtest only captures the `print!` macros), then asserts.
fn report(criterion: usize, name: &str, pass: bool, details: &str) {
    let line = format!(
        "criterion {criterion} [{}] {name}: {details}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "{line}");
}

/// Connected random graph, optionally with uniformly random labels.
fn random_graph(id: &str, n: usize, p: f64, alphabet: usize, seed: u64) -> Graph {
    let g = erdos_renyi(id, n, p, seed, true).unwrap();
    if alphabet == 0 {
        return g;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd_ef01);
    let labels: Vec<String> = (0..n)
        .map(|_| format!("{}", (b'a' + rng.gen_range(0..alphabet as u8)) as char))
        .collect();
    Graph::new(g.id(), n, g.edges(), Some(labels)).unwrap()
}

// ---------------------------------------------------------------------------
// Criterion 1: exact search agrees with brute force

#[test]
fn c01_exact_ged_search_matches_bruteforce() {
    let t0 = Instant::now();
    let costs = EditCostModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut pairs = 0usize;
    let mut disagreements = 0usize;
    for k in 0..50u64 {
        // Alternate labeled and unlabeled pairs.
        let alphabet = if k % 2 == 0 { 0 } else { rng.gen_range(2..=3) };
        let n1 = rng.gen_range(3..=6);
        let n2 = rng.gen_range(3..=6);
        let p = rng.gen_range(0.3..0.7);
        let g1 = random_graph(&format!("a{k}"), n1, p, alphabet, 7000 + 2 * k);
        let g2 = random_graph(&format!("b{k}"), n2, p, alphabet, 7001 + 2 * k);
        let brute = ged_bruteforce(&g1, &g2, &costs).unwrap();
        let astar = ged_astar(&g1, &g2, &costs, DEFAULT_NODE_BUDGET).unwrap();
        assert!(astar.exact, "A* must be exact at n <= 6");
        if astar.distance != brute.distance {
            disagreements += 1;
        }
        pairs += 1;
    }
    let elapsed = t0.elapsed();
    let pass = disagreements == 0 && pairs >= 50 && elapsed.as_secs() <= 120;
    report(
        1,
        "exact search equals brute force",
        pass,
        &format!(
            "{pairs} labeled+unlabeled pairs (n<=6), {disagreements} disagreements, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: beam and bipartite are upper bounds; beam tightens with width

#[test]
fn c02_ged_bounds_dominate_exact_and_tighten_with_width() {
    let costs = EditCostModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut below_exact = 0usize;
    let mut monotone = 0usize;
    let total = 100usize;
    for k in 0..total as u64 {
        let alphabet = if k % 2 == 0 { 0 } else { 2 };
        let n1 = rng.gen_range(3..=6);
        let n2 = rng.gen_range(3..=6);
        let p = rng.gen_range(0.3..0.7);
        let g1 = random_graph(&format!("a{k}"), n1, p, alphabet, 9000 + 2 * k);
        let g2 = random_graph(&format!("b{k}"), n2, p, alphabet, 9001 + 2 * k);
        let exact = ged_astar(&g1, &g2, &costs, DEFAULT_NODE_BUDGET).unwrap().distance;
        let b1 = ged_beam(&g1, &g2, &costs, 1).unwrap();
        let b10 = ged_beam(&g1, &g2, &costs, 10).unwrap();
        let b100 = ged_beam(&g1, &g2, &costs, 100).unwrap();
        let bp = ged_bipartite(&g1, &g2, &costs).unwrap();
        if [b1, b10, b100, bp].iter().any(|&b| b < exact - 1e-9) {
            below_exact += 1;
        }
        if b1 >= b10 - 1e-9 && b10 >= b100 - 1e-9 {
            monotone += 1;
        }
    }
    let pass = below_exact == 0 && monotone * 100 >= total * 95;
    report(
        2,
        "beam/bipartite are upper bounds, beam tightens with width",
        pass,
        &format!(
            "{total} pairs, {below_exact} bounds below exact, monotone in width on {monotone}/{total}"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: MCS search agrees with exhaustive enumeration

/// Exhaustive oracle: maximizes the size of an injective label-preserving
/// node pairing whose shared edges (present in both graphs) connect it.
fn mcs_exhaustive_oracle(g1: &Graph, g2: &Graph) -> usize {
    fn pairs_connected(pairs: &[(usize, usize)], g1: &Graph, g2: &Graph) -> bool {
        let k = pairs.len();
        if k <= 1 {
            return true;
        }
        let mut seen = vec![false; k];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            for j in 0..k {
                if !seen[j]
                    && g1.has_edge(pairs[i].0, pairs[j].0)
                    && g2.has_edge(pairs[i].1, pairs[j].1)
                {
                    seen[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
        reached == k
    }
    fn walk(
        u: usize,
        g1: &Graph,
        g2: &Graph,
        used2: &mut [bool],
        pairs: &mut Vec<(usize, usize)>,
        best: &mut usize,
    ) {
        if u == g1.n() {
            if pairs.len() > *best && pairs_connected(pairs, g1, g2) {
                *best = pairs.len();
            }
            return;
        }
        // u unmapped:
        walk(u + 1, g1, g2, used2, pairs, best);
        for v in 0..g2.n() {
            if !used2[v] && g1.label_of(u) == g2.label_of(v) {
                used2[v] = true;
                pairs.push((u, v));
                walk(u + 1, g1, g2, used2, pairs, best);
                pairs.pop();
                used2[v] = false;
            }
        }
    }
    let mut best = 0;
    let mut used2 = vec![false; g2.n()];
    walk(0, g1, g2, &mut used2, &mut Vec::new(), &mut best);
    best
}

#[test]
fn c03_mcs_search_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut pairs = 0usize;
    let mut disagreements = 0usize;
    for k in 0..50u64 {
        let alphabet = if k % 2 == 0 { 0 } else { 2 };
        let n1 = rng.gen_range(2..=7);
        let n2 = rng.gen_range(2..=7);
        let p = rng.gen_range(0.3..0.7);
        let g1 = random_graph(&format!("a{k}"), n1, p, alphabet, 11_000 + 2 * k);
        let g2 = random_graph(&format!("b{k}"), n2, p, alphabet, 11_001 + 2 * k);
        let found = mcs_branch_bound(&g1, &g2, 50_000_000).unwrap();
        assert!(found.exact);
        if found.size != mcs_exhaustive_oracle(&g1, &g2) {
            disagreements += 1;
        }
        pairs += 1;
    }
    // Self-similarity: a connected graph is its own maximum common subgraph.
    let mut self_failures = 0usize;
    for k in 0..10u64 {
        let n = rng.gen_range(2..=7);
        let g = random_graph(&format!("s{k}"), n, 0.5, (k % 3) as usize, 13_000 + k);
        if mcs_branch_bound(&g, &g, 50_000_000).unwrap().size != n {
            self_failures += 1;
        }
    }
    let pass = disagreements == 0 && self_failures == 0 && pairs >= 50;
    report(
        3,
        "connected MCS equals exhaustive enumeration",
        pass,
        &format!(
            "{pairs} pairs (n<=7), {disagreements} disagreements; 10 self-pairs, {self_failures} wrong sizes"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: transport objective equals LP vertex enumeration

/// Exact transportation-LP oracle: enumerates every spanning tree of the
/// bipartite supply/demand graph (each basic solution of the LP lives on
/// one), solves the tree flows by leaf peeling, and keeps the cheapest
/// feasible one. Row masses are `1/n`, column masses `1/m`.
fn emd_oracle(cost: &Mat) -> f64 {
    let n = cost.rows();
    let m = cost.cols();
    let arcs = n * m;
    let verts = n + m;
    let need = verts - 1;
    let mut best = f64::INFINITY;
    let full: u64 = if arcs == 64 { u64::MAX } else { (1u64 << arcs) - 1 };
    let mut mask: u64 = (1u64 << need) - 1;
    loop {
        if let Some(c) = tree_flow_cost(mask, n, m, cost) {
            best = best.min(c);
        }
        if mask == full >> (arcs - need) << (arcs - need) {
            // Highest `need` bits set: last combination.
            break;
        }
        // Gosper's hack: next bitmask with the same popcount.
        let c0 = mask & mask.wrapping_neg();
        let r = mask + c0;
        mask = (((r ^ mask) >> 2) / c0) | r;
        if mask > full {
            break;
        }
    }
    best
}

/// Cost of the unique flow on a candidate arc set if it is a spanning tree
/// with non-negative flows, else `None`. Arc `a = i * m + j` joins row
/// vertex `i` to column vertex `n + j`.
fn tree_flow_cost(mask: u64, n: usize, m: usize, cost: &Mat) -> Option<f64> {
    let verts = n + m;
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); verts]; // (arc, other)
    for a in 0..n * m {
        if mask & (1u64 << a) != 0 {
            let (i, j) = (a / m, a % m);
            incident[i].push((a, n + j));
            incident[n + j].push((a, i));
        }
    }
    // `need` edges over `verts` vertices form a tree iff connected.
    let mut seen = vec![false; verts];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut reached = 1;
    while let Some(v) = stack.pop() {
        for &(_, w) in &incident[v] {
            if !seen[w] {
                seen[w] = true;
                reached += 1;
                stack.push(w);
            }
        }
    }
    if reached != verts {
        return None;
    }
    // Leaf peeling: each leaf's single arc must carry exactly its balance.
    let mut balance: Vec<f64> = (0..verts)
        .map(|v| if v < n { 1.0 / n as f64 } else { -(1.0 / m as f64) })
        .collect();
    let mut degree: Vec<usize> = incident.iter().map(|inc| inc.len()).collect();
    let mut removed = vec![false; n * m];
    let mut alive = vec![true; verts];
    let mut total = 0.0;
    for _ in 0..verts - 1 {
        let leaf = (0..verts).find(|&v| alive[v] && degree[v] == 1)?;
        let &(arc, other) = incident[leaf].iter().find(|&&(a, _)| !removed[a])?;
        // Flow is oriented row -> column; a row leaf ships its remaining
        // supply, a column leaf draws its remaining demand.
        let flow = if leaf < n { balance[leaf] } else { -balance[leaf] };
        if flow < -1e-12 {
            return None;
        }
        let (i, j) = (arc / m, arc % m);
        total += flow.max(0.0) * cost[(i, j)];
        balance[other] += balance[leaf];
        balance[leaf] = 0.0;
        removed[arc] = true;
        alive[leaf] = false;
        degree[leaf] -= 1;
        degree[other] -= 1;
    }
    Some(total)
}

fn euclidean_cost(h1: &Mat, h2: &Mat) -> Mat {
    Mat::from_fn(h1.rows(), h2.rows(), |i, j| {
        h1.row(i)
            .iter()
            .zip(h2.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
}

fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(0.0..1.0))
}

#[test]
fn c04_transport_objective_matches_lp_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut max_gap: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=5);
        let d = rng.gen_range(1..=3);
        let h1 = random_mat(&mut rng, n, d);
        let h2 = random_mat(&mut rng, m, d);
        let solved = emd(&h1, &h2).unwrap();
        let oracle = emd_oracle(&euclidean_cost(&h1, &h2));
        max_gap = max_gap.max((solved.objective - oracle).abs());
    }
    // Self-distance is zero.
    let mut max_self: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(1..=5);
        let d = rng.gen_range(1..=3);
        let h = random_mat(&mut rng, n, d);
        max_self = max_self.max(emd(&h, &h).unwrap().objective.abs());
    }
    // The objective ignores row order on both sides.
    let mut max_perm: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(2..=5);
        let m = rng.gen_range(2..=5);
        let d = rng.gen_range(1..=3);
        let h1 = random_mat(&mut rng, n, d);
        let h2 = random_mat(&mut rng, m, d);
        let mut p1: Vec<usize> = (0..n).collect();
        let mut p2: Vec<usize> = (0..m).collect();
        p1.shuffle(&mut rng);
        p2.shuffle(&mut rng);
        let base = emd(&h1, &h2).unwrap().objective;
        let perm = emd(&gather_rows(&h1, &p1), &gather_rows(&h2, &p2)).unwrap().objective;
        max_perm = max_perm.max((base - perm).abs());
    }
    let pass = max_gap <= 1e-9 && max_self <= 1e-9 && max_perm <= 1e-9;
    report(
        4,
        "transport objective equals LP vertex enumeration",
        pass,
        &format!(
            "100 instances (sizes<=5): max |objective - oracle| {max_gap:.2e}; \
             self-distance max {max_self:.2e}; 50 permutations max drift {max_perm:.2e}"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: correlation matrices are bit-identical under renumbering

/// True when every greedy step has a strict maximum, so the matching cannot
/// depend on index-based tie-breaking.
fn greedy_maxima_unique(plan: &Mat) -> bool {
    let m = plan.cols();
    let mut used = vec![false; m];
    for i in 0..plan.rows().min(m) {
        let mut best = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        let mut arg = usize::MAX;
        for (j, &u) in used.iter().enumerate() {
            if u {
                continue;
            }
            let v = plan[(i, j)];
            if v > best {
                second = best;
                best = v;
                arg = j;
            } else if v > second {
                second = v;
            }
        }
        if second != f64::NEG_INFINITY && best == second {
            return false;
        }
        used[arg] = true;
    }
    true
}

fn rows_pairwise_distinct(h: &Mat) -> bool {
    for i in 0..h.rows() {
        for j in (i + 1)..h.rows() {
            if h.row(i) == h.row(j) {
                return false;
            }
        }
    }
    true
}

#[test]
fn c05_stage0_correlations_bit_identical_under_renumbering() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut trials = 0usize;
    let mut rejected = 0usize;
    let mut mismatches = 0usize;
    while trials < 100 {
        assert!(rejected < 10_000, "rejection sampling runaway");
        let n1 = rng.gen_range(3..=6);
        let n2 = rng.gen_range(3..=6);
        let d = rng.gen_range(2..=4);
        let h1 = random_mat(&mut rng, n1, d);
        let h2 = random_mat(&mut rng, n2, d);
        let deg1: Vec<usize> = (0..n1).map(|_| rng.gen_range(1..=4)).collect();
        let deg2: Vec<usize> = (0..n2).map(|_| rng.gen_range(1..=4)).collect();
        let lab1: Vec<usize> = (0..n1).map(|_| rng.gen_range(0..3)).collect();
        let lab2: Vec<usize> = (0..n2).map(|_| rng.gen_range(0..3)).collect();
        let mut p1: Vec<usize> = (0..n1).collect();
        let mut p2: Vec<usize> = (0..n2).collect();
        p1.shuffle(&mut rng);
        p2.shuffle(&mut rng);

        let base =
            align_stage(&h1, &deg1, Some(&lab1), &h2, &deg2, Some(&lab2)).unwrap();
        // Only accept instances whose discrete choices are forced: distinct
        // canonical keys on both sides and strict greedy maxima.
        if !rows_pairwise_distinct(&h1)
            || !rows_pairwise_distinct(&h2)
            || !greedy_maxima_unique(&base.transport.plan)
        {
            rejected += 1;
            continue;
        }
        let c_base = correlation_matrix(&h1, &h2, &base.row_order, &base.matching).unwrap();

        let h1p = gather_rows(&h1, &p1);
        let h2p = gather_rows(&h2, &p2);
        let deg1p: Vec<usize> = p1.iter().map(|&i| deg1[i]).collect();
        let deg2p: Vec<usize> = p2.iter().map(|&i| deg2[i]).collect();
        let lab1p: Vec<usize> = p1.iter().map(|&i| lab1[i]).collect();
        let lab2p: Vec<usize> = p2.iter().map(|&i| lab2[i]).collect();
        let perm =
            align_stage(&h1p, &deg1p, Some(&lab1p), &h2p, &deg2p, Some(&lab2p)).unwrap();
        let c_perm =
            correlation_matrix(&h1p, &h2p, &perm.row_order, &perm.matching).unwrap();

        let identical = c_base.rows() == c_perm.rows()
            && c_base.cols() == c_perm.cols()
            && c_base
                .data()
                .iter()
                .zip(c_perm.data())
                .all(|(a, b)| a.to_bits() == b.to_bits());
        if !identical {
            mismatches += 1;
        }
        trials += 1;
    }
    let pass = mismatches == 0;
    report(
        5,
        "stage-0 correlations bit-identical under node renumbering",
        pass,
        &format!("100 accepted trials ({rejected} tie-rejected), {mismatches} bit mismatches"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: compaction recovers planted structure; spectra count components

#[test]
fn c06_compaction_recovers_planted_cliques_and_spectra_count_components() {
    let mut recovered = 0usize;
    let total = 20usize;
    for seed in 0..total as u64 {
        let k = 4 + (seed as usize % 5); // clique sizes 4..=8
        let g = clique_pair(format!("cp{seed}"), k, 1, seed).unwrap();
        let stage = compact_once(&g.adjacency(), 2, &SpectralConfig::default()).unwrap();
        let mut clusters = stage.clusters.clone();
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.sort();
        let left: Vec<usize> = (0..k).collect();
        let right: Vec<usize> = (k..2 * k).collect();
        if clusters == vec![left, right] {
            recovered += 1;
        }
    }

    let mut off_by = 0usize;
    let graphs = 50usize;
    for seed in 0..graphs as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + seed);
        let n = rng.gen_range(4..=12);
        let g = erdos_renyi(format!("r{seed}"), n, 0.18, seed, false).unwrap();
        let lap = normalized_laplacian(&g.adjacency());
        let (vals, _) = symmetric_eigendecomposition(&lap, n).unwrap();
        let zeros = vals.iter().filter(|v| v.abs() < 1e-8).count();
        if zeros != g.component_count() {
            off_by += 1;
        }
    }
    let pass = recovered == total && off_by == 0;
    report(
        6,
        "two-clique partition recovered; zero eigenvalues count components",
        pass,
        &format!(
            "{recovered}/{total} planted partitions recovered; \
             {graphs} random graphs, {off_by} wrong zero-eigenvalue multiplicities"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: analytic gradients match finite differences

#[test]
fn c07_pipeline_gradients_match_finite_differences() {
    let mut worst: f64 = 0.0;
    let trials = 20usize;
    for t in 0..trials as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + t);
        let config = ModelConfig {
            spectral: SpectralConfig { stage_sizes: vec![3, 1], ..SpectralConfig::default() },
            input_dim: rng.gen_range(2..=4),
            hidden_dim: rng.gen_range(3..=8),
            gcn_depth: rng.gen_range(1..=2),
            upsample_side: rng.gen_range(6..=8),
            conv_channels: rng.gen_range(1..=3),
            fc_hidden: rng.gen_range(4..=8),
            ..ModelConfig::default()
        };
        let mut model = Model::new(config.clone()).unwrap();
        // Push every parameter off the zero-bias init so no ReLU sits
        // exactly on its kink, where central differences are meaningless.
        for tensor in &mut model.params {
            for v in &mut tensor.data {
                *v = rng.gen_range(-0.4..0.4);
            }
        }
        let make_input = |id: &str, n: usize, seed: u64| -> GraphInput {
            let g = erdos_renyi(id, n, 0.5, seed, true).unwrap();
            let g = build_features(
                &g,
                &BTreeMap::new(),
                &FeatureMode::Constant { width: config.input_dim },
            )
            .unwrap();
            prepare_graph(&g, &config).unwrap()
        };
        let a = make_input("a", rng.gen_range(4..=8), 7100 + 2 * t);
        let b = make_input("b", rng.gen_range(4..=8), 7101 + 2 * t);
        let target = rng.gen_range(0.2..0.8);
        // Freeze the discrete alignment so both differentiation methods see
        // the same smooth function.
        let plan = model.alignment_plan(&a, &b, 0).unwrap();
        let loss_at = |m: &Model| {
            let mut tape = Tape::new();
            let pred = m.forward_with_plan(&mut tape, &a, &b, &plan).unwrap();
            let tgt = tape.constant(Tensor::scalar(target));
            let loss = tape.squared_error(pred, tgt).unwrap();
            (tape, loss)
        };
        let (tape, loss) = loss_at(&model);
        let analytic = tape.backward(loss, model.params.len()).unwrap();
        let numeric = numeric_gradient(&model.params, 1e-5, |ps| {
            let mut probe = model.clone();
            probe.params = ps.to_vec();
            let (tape, loss) = loss_at(&probe);
            tape.value(loss).scalar_value()
        });
        worst = worst.max(max_relative_gradient_error(&analytic, &numeric));
    }
    let pass = worst <= 1e-4;
    report(
        7,
        "full-pipeline gradients match central differences",
        pass,
        &format!("{trials} random configs (graphs<=8 nodes, stages (3,1), width<=8), max relative error {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// Criteria 8-10 share one corpus with exact ground truth.

struct Fixture {
    ids: Vec<String>,
    split: DatasetSplit,
    truth: SimilarityTable,
    /// Mean squared error of the best constant predictor on the
    /// query x corpus evaluation pairs.
    const_mse: f64,
    vocab: BTreeMap<String, usize>,
    config: ModelConfig,
    graphs: Vec<Graph>,
    /// Inputs prepared for `config`.
    inputs: Vec<GraphInput>,
    /// Distance-stratified training pairs.
    train_pairs: Vec<TrainPair>,
    /// All test-internal pairs (with identity pairs), for cheap evaluation.
    test_pairs: Vec<TrainPair>,
    /// Seconds spent building the whole fixture (dataset, exact ground
    /// truth, input preparation); charged to criterion 8's time budget.
    build_seconds: f64,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let t_build = Instant::now();
        let graphs = perturbed_corpus(300, 12, 0.35, 3, 4, 1).unwrap();
        assert!(graphs.iter().all(|g| (8..=16).contains(&g.n())));
        let ids: Vec<String> = graphs.iter().map(|g| g.id().to_string()).collect();
        let split = split_dataset(&ids, (7, 2, 1), 0).unwrap();
        let idx: BTreeMap<&str, usize> =
            ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

        // Exact edit distances for every pair the runs below look at.
        let mut wanted: Vec<(usize, usize)> = Vec::new();
        for (i, a) in split.train_ids.iter().enumerate() {
            for b in &split.train_ids[i..] {
                wanted.push((idx[a.as_str()], idx[b.as_str()]));
            }
        }
        for a in &split.test_ids {
            for b in &ids {
                let (x, y) = (idx[a.as_str()], idx[b.as_str()]);
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
        let results =
            ground_truth_ged_pairs(&graphs, &wanted, &EditCostModel::default(), 16).unwrap();
        assert!(results.iter().all(|r| r.provenance == gsim::graph::GedProvenance::Exact));
        let mut truth = SimilarityTable::new();
        for (&(i, j), r) in wanted.iter().zip(&results) {
            truth.insert(&ids[i], &ids[j], ged_to_similarity(r.distance).unwrap());
        }

        let vocab = label_vocab(&graphs);
        let config = ModelConfig {
            spectral: SpectralConfig {
                stage_sizes: vec![6, 4, 2, 1],
                ..SpectralConfig::default()
            },
            upsample_side: 16,
            input_dim: vocab.len(),
            ..ModelConfig::default()
        };
        let inputs: Vec<GraphInput> = graphs
            .iter()
            .map(|g| {
                prepare_graph(&build_features(g, &vocab, &FeatureMode::OneHot).unwrap(), &config)
                    .unwrap()
            })
            .collect();

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
        // Distance-stratified subsample: equal counts per similarity band so
        // the scarce near-duplicates are not swamped by far pairs.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut buckets: BTreeMap<u64, Vec<TrainPair>> = BTreeMap::new();
        for p in &all_train {
            let band = (-p.target.ln()).round() as u64;
            buckets.entry(band.min(4)).or_default().push(*p);
        }
        let per = 3500 / buckets.len();
        let mut train_pairs = Vec::new();
        for (_, mut v) in buckets {
            v.shuffle(&mut rng);
            v.truncate(per);
            train_pairs.extend(v);
        }

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

        // Best-constant baseline on the query x corpus evaluation pairs.
        let targets: Vec<f64> = split
            .test_ids
            .iter()
            .flat_map(|q| ids.iter().map(move |c| (q, c)))
            .map(|(q, c)| truth.get(q, c).unwrap())
            .collect();
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        let const_mse =
            targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / targets.len() as f64;

        Fixture {
            ids,
            split,
            truth,
            const_mse,
            vocab,
            config,
            graphs,
            inputs,
            train_pairs,
            test_pairs,
            build_seconds: t_build.elapsed().as_secs_f64(),
        }
    })
}

/// Two-phase schedule used by criterion 8: a high-rate pass then a decayed
/// polishing pass.
fn train_full_schedule(model: &mut Model, inputs: &[GraphInput], pairs: &[TrainPair], seed: u64) {
    let phase1 = TrainConfig {
        batch_size: 32,
        learning_rate: 0.1,
        epochs: 25,
        seed,
        loss_scale: 1.0,
        eval_interval: 200,
    };
    train(model, inputs, pairs, &[], &phase1).unwrap();
    let phase2 = TrainConfig { learning_rate: 0.02, epochs: 10, seed: 1000 + seed, ..phase1 };
    train(model, inputs, pairs, &[], &phase2).unwrap();
}

const ENSEMBLE: usize = 3;

/// Trains the criterion-8 ensemble for one variant and returns the
/// evaluation report of the averaged predictor.
fn run_variant(fx: &Fixture, variant: Variant) -> gsim::eval::EvalReport {
    let cfg = ModelConfig { variant, ..fx.config.clone() };
    let holder: Vec<GraphInput>;
    let inputs: &[GraphInput] = if variant == Variant::Hierarchical {
        &fx.inputs
    } else {
        holder = fx
            .graphs
            .iter()
            .map(|g| {
                prepare_graph(&build_features(g, &fx.vocab, &FeatureMode::OneHot).unwrap(), &cfg)
                    .unwrap()
            })
            .collect();
        &holder
    };
    let mut members = Vec::new();
    for m in 0..ENSEMBLE as u64 {
        let mut model = Model::new(ModelConfig { init_seed: m, ..cfg.clone() }).unwrap();
        train_full_schedule(&mut model, inputs, &fx.train_pairs, m);
        members.push(model);
    }
    let idx: BTreeMap<&str, usize> =
        fx.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let predict = |a: &str, b: &str| -> Result<f64, String> {
        let mut sum = 0.0;
        for m in &members {
            sum += m
                .predict_symmetric(&inputs[idx[a]], &inputs[idx[b]])
                .map_err(|e| e.to_string())?;
        }
        Ok(sum / members.len() as f64)
    };
    evaluate_model(predict, &fx.ids, &fx.split.test_ids, &fx.truth, 10).unwrap()
}

#[test]
fn c08_training_beats_constant_and_embavg_baselines() {
    let fx = fixture();
    let t0 = Instant::now();
    let full = run_variant(fx, Variant::Hierarchical);
    let embavg = run_variant(fx, Variant::EmbAvg);
    // The run's budget covers dataset generation, exact ground truth, and
    // input preparation even when another test built the shared fixture.
    let minutes = (fx.build_seconds + t0.elapsed().as_secs_f64()) / 60.0;
    let pass = minutes <= 30.0
        && full.mse <= 0.5 * fx.const_mse
        && full.mse <= embavg.mse
        && full.spearman_rho >= 0.5;
    report(
        8,
        "trained model beats constant and mean-pooled baselines",
        pass,
        &format!(
            "300 graphs, exact truth; test mse {:.4} (<= half of constant {:.4}), \
             mean-pooled baseline mse {:.4}, mean spearman {:.3} (>= 0.5), {:.1} min (<= 30)",
            full.mse, fx.const_mse, embavg.mse, full.spearman_rho, minutes
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: ablations do not beat the full model

/// Reduced-budget training used by the comparison grids (criteria 9 and 10).
fn quick_mse(fx: &Fixture, cfg: &ModelConfig, inputs: &[GraphInput], seed: u64) -> f64 {
    let mut model = Model::new(ModelConfig { init_seed: seed, ..cfg.clone() }).unwrap();
    let tc = TrainConfig {
        batch_size: 32,
        learning_rate: 0.1,
        epochs: 6,
        seed,
        loss_scale: 1.0,
        eval_interval: 200,
    };
    train(&mut model, inputs, &fx.train_pairs, &[], &tc).unwrap();
    mean_squared_error(&model, inputs, &fx.test_pairs).unwrap()
}

fn mean3(fx: &Fixture, cfg: &ModelConfig, inputs: &[GraphInput]) -> (f64, Vec<f64>) {
    let per_seed: Vec<f64> = (0..3).map(|s| quick_mse(fx, cfg, inputs, s)).collect();
    (per_seed.iter().sum::<f64>() / per_seed.len() as f64, per_seed)
}

#[test]
fn c09_ablations_do_not_beat_full_model() {
    let fx = fixture();
    let (full, _) = mean3(fx, &fx.config, &fx.inputs);
    let no_align_cfg = ModelConfig { ablation: Ablation::NoAlignment, ..fx.config.clone() };
    let (no_align, _) = mean3(fx, &no_align_cfg, &fx.inputs);
    let no_hier_cfg = ModelConfig { ablation: Ablation::NoHierarchy, ..fx.config.clone() };
    let (no_hier, _) = mean3(fx, &no_hier_cfg, &fx.inputs);
    let pass = full <= no_align && full <= no_hier;
    report(
        9,
        "alignment and hierarchy ablations do not beat the full model",
        pass,
        &format!(
            "3-seed mean test mse: full {full:.4}, no-alignment {no_align:.4}, no-hierarchy {no_hier:.4}"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 10: capacity sweeps plateau and the best is above the minimum

fn sweep_curve(fx: &Fixture, configs: &[ModelConfig]) -> Vec<(f64, f64)> {
    configs
        .iter()
        .map(|cfg| {
            let inputs: Vec<GraphInput> = fx
                .graphs
                .iter()
                .map(|g| {
                    prepare_graph(
                        &build_features(g, &fx.vocab, &FeatureMode::OneHot).unwrap(),
                        cfg,
                    )
                    .unwrap()
                })
                .collect();
            let (mean, per_seed) = mean3(fx, cfg, &inputs);
            let var = per_seed.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>()
                / per_seed.len() as f64;
            (mean, var.sqrt())
        })
        .collect()
}

/// Monotone non-worsening then flat within noise: each step along the curve
/// may improve freely but may worsen by at most the noise tolerance; the
/// best setting must not be the smallest one.
fn plateau_shape_ok(curve: &[(f64, f64)]) -> (bool, f64) {
    let spread = curve.iter().map(|&(_, s)| s).fold(0.0f64, f64::max);
    let tol = (2.0 * spread).max(0.002);
    let non_worsening =
        curve.windows(2).all(|w| w[1].0 <= w[0].0 + tol);
    let best = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, _)| i)
        .unwrap();
    (non_worsening && best != 0, tol)
}

#[test]
fn c10_capacity_sweeps_plateau_with_best_above_minimum() {
    let fx = fixture();
    let channel_cfgs: Vec<ModelConfig> = (1..=4)
        .map(|c| {
            let mut cfg = fx.config.clone();
            cfg.spectral.n_pool_channels = c;
            cfg
        })
        .collect();
    let channels = sweep_curve(fx, &channel_cfgs);
    let (ch_ok, ch_tol) = plateau_shape_ok(&channels);

    let ladder = [6usize, 4, 2, 1];
    let stage_cfgs: Vec<ModelConfig> = (2..=4)
        .map(|s| {
            let mut cfg = fx.config.clone();
            cfg.spectral.stage_sizes = ladder[ladder.len() - s..].to_vec();
            cfg
        })
        .collect();
    let stages = sweep_curve(fx, &stage_cfgs);
    let (st_ok, st_tol) = plateau_shape_ok(&stages);

    let fmt = |curve: &[(f64, f64)]| {
        curve.iter().map(|(m, _)| format!("{m:.4}")).collect::<Vec<_>>().join(" -> ")
    };
    let pass = ch_ok && st_ok;
    report(
        10,
        "channel and stage sweeps plateau with the best above the minimum",
        pass,
        &format!(
            "3-seed mean test mse; channels 1->4: {} (tol {ch_tol:.4}); stages 2->4: {} (tol {st_tol:.4})",
            fmt(&channels),
            fmt(&stages)
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 11: retrieval metric battery

#[test]
fn c11_metric_battery_hand_checks() {
    let up = [0.1, 0.4, 0.7, 0.9];
    let down = [0.9, 0.7, 0.4, 0.1];
    let identical_rho = metric_spearman(&up, &up).unwrap().unwrap();
    let identical_tau = metric_kendall(&up, &up).unwrap().unwrap();
    let reversed_rho = metric_spearman(&down, &up).unwrap().unwrap();
    let reversed_tau = metric_kendall(&down, &up).unwrap().unwrap();

    let rho = metric_spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap().unwrap();
    let tau = metric_kendall(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap().unwrap();
    let abc: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let p_at_2 =
        metric_precision_at_k(&[0.9, 0.8, 0.1], &[0.9, 0.1, 0.8], &abc, 2).unwrap();
    let mse = metric_mse(&[1.0, 0.0], &[0.0, 0.0]).unwrap();

    // Rank metrics ignore strictly increasing transforms of predictions.
    let preds = [0.13, 0.82, 0.44, 0.27, 0.66];
    let targets = [0.3, 0.9, 0.1, 0.5, 0.7];
    let five: Vec<String> = (0..5).map(|i| format!("v{i}")).collect();
    let scaled: Vec<f64> = preds.iter().map(|p| 2.0 * p + 1.0).collect();
    let transform_stable = metric_spearman(&preds, &targets).unwrap()
        == metric_spearman(&scaled, &targets).unwrap()
        && metric_kendall(&preds, &targets).unwrap()
            == metric_kendall(&scaled, &targets).unwrap()
        && metric_precision_at_k(&preds, &targets, &five, 2).unwrap()
            == metric_precision_at_k(&scaled, &targets, &five, 2).unwrap();

    let pass = (identical_rho - 1.0).abs() <= 1e-15
        && (identical_tau - 1.0).abs() <= 1e-15
        && (reversed_rho + 1.0).abs() <= 1e-15
        && (reversed_tau + 1.0).abs() <= 1e-15
        && (rho - 0.5).abs() <= 1e-12
        && (tau - 1.0 / 3.0).abs() <= 1e-12
        && p_at_2 == 0.5
        && mse == 0.5
        && transform_stable;
    report(
        11,
        "metric battery hand checks",
        pass,
        &format!(
            "identities rho/tau {identical_rho}/{identical_tau}, reversed {reversed_rho}/{reversed_tau}; \
             hand cases rho {rho:.3} tau {tau:.3} p@2 {p_at_2} mse {mse}; \
             monotone-transform stable: {transform_stable}"
        ),
    );
}
