//! Acceptance suite: eight verification criteria covering the whole
//! pipeline, each printing one pass line (visible with `--nocapture`).
//!
//! Run with:
//!
//! ```text
//! cargo test -p hyperscene-cli --test acceptance -- --nocapture
//! ```
//!
//! The oracle implementations in [`oracle`] are written independently of
//! the library code they check: naive loss evaluators with raw exp/ln,
//! union-find DBSCAN, and exponential-recursion LCS.

use hyperscene_core::enrich::{EnrichProvenance, EnrichedHypergraph, Provenance};
use hyperscene_core::hypergraph::{
    cluster_positions, incidence_of, ClusteringParams, HyperNode, Hyperedge, SceneHypergraph,
};
use hyperscene_core::plan::{lcs_score, Action, Verb};
use hyperscene_core::triview::{
    area_loss, cross_view_retrieval_accuracy, grad_check, make_views, membership_loss, node_loss,
    train, TriViewConfig,
};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

mod oracle {
    use ndarray::Array2;

    fn cos(u: &[f64], v: &[f64]) -> f64 {
        let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nu == 0.0 || nv == 0.0 {
            0.0
        } else {
            dot / (nu * nv)
        }
    }

    fn row(m: &Array2<f64>, i: usize) -> Vec<f64> {
        m.row(i).to_vec()
    }

    fn pair_loss(a: &Array2<f64>, b: &Array2<f64>, i: usize, tau: f64) -> f64 {
        let n = a.nrows();
        let numerator = (cos(&row(a, i), &row(b, i)) / tau).exp();
        let denominator: f64 = (0..n)
            .map(|k| (cos(&row(a, i), &row(b, k)) / tau).exp())
            .sum();
        -(numerator / denominator).ln()
    }

    /// Symmetrized InfoNCE, transcribed directly.
    pub fn infonce(w1: &Array2<f64>, w2: &Array2<f64>, tau: f64) -> f64 {
        let n = w1.nrows();
        if n == 0 {
            return 0.0;
        }
        let sum: f64 = (0..n)
            .map(|i| pair_loss(w1, w2, i, tau) + pair_loss(w2, w1, i, tau))
            .sum();
        sum / (2.0 * n as f64)
    }

    fn disc(w: &[f64], b: &Array2<f64>, d: &[f64]) -> f64 {
        let p = b.nrows();
        let mut total = 0.0;
        for r in 0..p {
            for c in 0..p {
                total += w[r] * b[(r, c)] * d[c];
            }
        }
        total
    }

    fn membership_pair(
        w: &Array2<f64>,
        d: &Array2<f64>,
        h: &Array2<u8>,
        b: &Array2<f64>,
        i: usize,
        j: usize,
        tau: f64,
    ) -> f64 {
        let pos = (disc(&row(w, i), b, &row(d, j)) / tau).exp();
        let mut denominator = pos;
        for neg in 0..d.nrows() {
            if h[(i, neg)] == 0 {
                denominator += (disc(&row(w, i), b, &row(d, neg)) / tau).exp();
            }
        }
        -(pos / denominator).ln()
    }

    /// Membership contrast over both view directions, 1/(2K) normalized.
    #[allow(clippy::too_many_arguments)]
    pub fn membership(
        w1: &Array2<f64>,
        w2: &Array2<f64>,
        d1: &Array2<f64>,
        d2: &Array2<f64>,
        h: &Array2<u8>,
        b: &Array2<f64>,
        tau: f64,
    ) -> f64 {
        let (n, k) = h.dim();
        if k == 0 {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..k {
                if h[(i, j)] == 1 {
                    sum += membership_pair(w1, d2, h, b, i, j, tau);
                    sum += membership_pair(w2, d1, h, b, i, j, tau);
                }
            }
        }
        sum / (2.0 * k as f64)
    }

    /// O(n^2) DBSCAN by union-find over core points.
    pub fn dbscan(
        points: &[(f64, f64)],
        epsilon: f64,
        min_pts: usize,
    ) -> (Vec<Vec<usize>>, Vec<usize>) {
        let n = points.len();
        let eps2 = epsilon * epsilon;
        let within = |i: usize, j: usize| {
            let dx = points[i].0 - points[j].0;
            let dy = points[i].1 - points[j].1;
            dx * dx + dy * dy <= eps2
        };
        let core: Vec<bool> = (0..n)
            .map(|i| (0..n).filter(|&j| within(i, j)).count() >= min_pts)
            .collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if core[i] && core[j] && within(i, j) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
        let mut roots: Vec<usize> = Vec::new();
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            if core[i] {
                let root = find(&mut parent, i);
                if !roots.contains(&root) {
                    roots.push(root);
                    clusters.push(Vec::new());
                }
                let idx = roots.iter().position(|&r| r == root).unwrap();
                clusters[idx].push(i);
            }
        }
        let mut noise = Vec::new();
        for i in 0..n {
            if core[i] {
                continue;
            }
            let mut joined = None;
            for (idx, cluster) in clusters.iter().enumerate() {
                if cluster.iter().any(|&c| core[c] && within(i, c)) {
                    joined = Some(idx);
                    break;
                }
            }
            match joined {
                Some(idx) => clusters[idx].push(i),
                None => noise.push(i),
            }
        }
        for cluster in &mut clusters {
            cluster.sort_unstable();
        }
        (clusters, noise)
    }

    /// Memoless recursive LCS length; exponential on purpose.
    pub fn lcs_recursive<T: PartialEq>(a: &[T], b: &[T]) -> usize {
        match (a.first(), b.first()) {
            (None, _) | (_, None) => 0,
            (Some(x), Some(y)) => {
                if x == y {
                    1 + lcs_recursive(&a[1..], &b[1..])
                } else {
                    lcs_recursive(&a[1..], b).max(lcs_recursive(a, &b[1..]))
                }
            }
        }
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for v in m.iter_mut() {
        *v = 2.0 * rng.random::<f64>() - 1.0;
    }
    m
}

fn random_incidence(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Array2<u8> {
    let mut h = Array2::zeros((n, k));
    for i in 0..n {
        h[(i, rng.random_range(0..k))] = 1;
        for j in 0..k {
            if rng.random::<f64>() < 0.35 {
                h[(i, j)] = 1;
            }
        }
    }
    h
}

/// A hypergraph with planted cluster structure: 4 hyperedges of 8 nodes,
/// node texts sharing one per-cluster vocabulary word plus node-specific
/// tokens.
fn planted_graph() -> EnrichedHypergraph {
    let cluster_words = ["kitchen", "garage", "garden", "studio"];
    let area_names = ["Kitchen Area", "Garage Area", "Garden Area", "Studio Area"];
    let mut nodes = Vec::new();
    let mut hyperedges = Vec::new();
    let mut assignment = BTreeMap::new();
    let mut area_labels = BTreeMap::new();
    let mut cf_scores = BTreeMap::new();
    let mut provenance = EnrichProvenance::default();
    for cluster in 0..4usize {
        let members: Vec<usize> = (cluster * 8..cluster * 8 + 8).collect();
        for &i in &members {
            nodes.push(HyperNode {
                id: i,
                category: format!(
                    "{} n{i:02}a n{i:02}b n{i:02}c n{i:02}d",
                    cluster_words[cluster]
                ),
                attributes: String::new(),
            });
            assignment.insert(i, vec![cluster]);
            cf_scores.insert(i, 0.0);
            provenance.scores.insert(i, Provenance::Fallback);
        }
        hyperedges.push(Hyperedge {
            id: cluster,
            members,
        });
        area_labels.insert(cluster, area_names[cluster].to_string());
        provenance.areas.insert(cluster, Provenance::Fallback);
    }
    EnrichedHypergraph {
        base: SceneHypergraph {
            scene_id: "planted".to_string(),
            nodes,
            hyperedges,
            assignment,
            task: None,
        },
        area_labels,
        cf_scores,
        provenance,
    }
}

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

#[test]
fn criterion_1_loss_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97_1);
    for trial in 0..200 {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(1..=4);
        let d_p = rng.random_range(2..=6);
        let tau = 0.05 + 0.3 * rng.random::<f64>();
        let w1 = random_matrix(n, d_p, &mut rng);
        let w2 = random_matrix(n, d_p, &mut rng);
        let d1 = random_matrix(k, d_p, &mut rng);
        let d2 = random_matrix(k, d_p, &mut rng);
        let h = random_incidence(n, k, &mut rng);
        let b = random_matrix(d_p, d_p, &mut rng);

        let node_diff = (node_loss(&w1, &w2, tau) - oracle::infonce(&w1, &w2, tau)).abs();
        assert!(node_diff < 1e-12, "trial {trial}: node loss off by {node_diff}");
        let area_diff = (area_loss(&d1, &d2, tau) - oracle::infonce(&d1, &d2, tau)).abs();
        assert!(area_diff < 1e-12, "trial {trial}: area loss off by {area_diff}");
        let mem_diff = (membership_loss(&w1, &w2, &d1, &d2, &h, &b, tau, false)
            - oracle::membership(&w1, &w2, &d1, &d2, &h, &b, tau))
        .abs();
        assert!(mem_diff < 1e-12, "trial {trial}: membership loss off by {mem_diff}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}, budget 10 s");
    println!(
        "criterion 1 (loss-oracle equivalence, 200 instances @ 1e-12): PASS in {elapsed:?}"
    );
}

#[test]
fn criterion_2_gradient_correctness() {
    let started = Instant::now();
    let report = grad_check(&TriViewConfig::desk(), 50);
    assert!(
        report.max_rel_err < 1e-5,
        "max relative error {} over {} parameters",
        report.max_rel_err,
        report.params_checked
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget 60 s");
    println!(
        "criterion 2 (gradient correctness, 50 instances, max rel err {:.2e} < 1e-5): PASS in {elapsed:?}",
        report.max_rel_err
    );
}

#[test]
fn criterion_3_clustering_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97_3);
    let as_sets = |clusters: &[Vec<usize>]| -> BTreeSet<BTreeSet<usize>> {
        clusters.iter().map(|c| c.iter().copied().collect()).collect()
    };
    for trial in 0..100 {
        let n = rng.random_range(0..=200);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| (100.0 * rng.random::<f64>(), 100.0 * rng.random::<f64>()))
            .collect();
        let epsilon = 2.0 + 10.0 * rng.random::<f64>();
        let min_pts = rng.random_range(1..=5);
        let params = ClusteringParams::new(epsilon, min_pts).unwrap();
        let (clusters, noise) = cluster_positions(&points, &params);
        let (expected_clusters, expected_noise) = oracle::dbscan(&points, epsilon, min_pts);
        assert_eq!(
            as_sets(&clusters),
            as_sets(&expected_clusters),
            "trial {trial} (n = {n}, eps = {epsilon}, min_pts = {min_pts})"
        );
        assert_eq!(noise, expected_noise, "trial {trial}: noise diverges");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, budget 30 s");
    println!("criterion 3 (clustering vs brute-force oracle, 100 instances): PASS in {elapsed:?}");
}

#[test]
fn criterion_4_training_sanity_on_planted_structure() {
    let started = Instant::now();
    let graph = planted_graph();
    let config = TriViewConfig {
        steps: 500,
        ..TriViewConfig::desk()
    };
    let outcome = train(&graph, &config).expect("training runs");
    let first = outcome.trace.first().expect("steps ran").total;
    let last = outcome.trace.last().expect("steps ran").total;
    assert!(
        last < 0.5 * first,
        "final loss {last} is not below half the step-0 loss {first}"
    );
    let accuracy = cross_view_retrieval_accuracy(&graph, &outcome.params, &config, config.seed + 1);
    assert!(
        accuracy >= 0.95,
        "cross-view retrieval accuracy {accuracy} below 0.95"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}, budget 2 min");
    println!(
        "criterion 4 (training sanity: loss {first:.3} -> {last:.3}, retrieval {accuracy:.3}): PASS in {elapsed:?}"
    );
}

#[test]
fn criterion_5_metric_suite() {
    let started = Instant::now();

    // DP LCS equals the exponential oracle on 1000 random short pairs.
    let alphabet = [
        Action::new(Verb::Goto, &["counter"]),
        Action::new(Verb::Goto, &["table"]),
        Action::new(Verb::Pickup, &["apple"]),
        Action::new(Verb::Place, &["apple", "table"]),
        Action::new(Verb::Open, &["fridge"]),
        Action::new(Verb::Slice, &["apple"]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97_5);
    for trial in 0..1000 {
        let draw = |rng: &mut ChaCha8Rng| -> Vec<Action> {
            let len = rng.random_range(0..=10);
            (0..len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())].clone())
                .collect()
        };
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let expected_len = oracle::lcs_recursive(&a, &b);
        let longest = a.len().max(b.len());
        let expected = if longest == 0 {
            1.0
        } else {
            expected_len as f64 / longest as f64
        };
        assert_eq!(lcs_score(&a, &b), expected, "trial {trial}");
        assert_eq!(lcs_score(&a, &a), 1.0, "identical plans must score 1");
    }

    // Executability and correctness examples reproduce exactly via the
    // fixture corpus through the real binary.
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_hyperscene"))
        .args([
            "eval",
            "--plans",
            Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("tests/fixtures/eval/plans")
                .to_str()
                .unwrap(),
            "--envs",
            Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("tests/fixtures/eval/envs")
                .to_str()
                .unwrap(),
            "--golds",
            Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("tests/fixtures/eval/golds")
                .to_str()
                .unwrap(),
            "-o",
            "/dev/stdout",
        ])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    for expected_row in [
        "s1,1,1,true",
        "s2,0.5,0.75,false",
        "s3,0,0.25,false",
        "aggregate,0.5,0.6666666666666666,0.3333333333333333",
    ] {
        assert!(stdout.contains(expected_row), "missing {expected_row} in:\n{stdout}");
    }

    let elapsed = started.elapsed();
    println!("criterion 5 (metric suite, 1000 LCS trials + exact examples): PASS in {elapsed:?}");
}

#[test]
fn criterion_6_pipeline_determinism() {
    let started = Instant::now();
    let scene = core_fixture("kitchen_small.json");
    let run_pipeline = |dir: &Path| -> Vec<(String, Vec<u8>)> {
        let run = |args: &[&str]| {
            let output = std::process::Command::new(env!("CARGO_BIN_EXE_hyperscene"))
                .args(args)
                .current_dir(dir)
                .output()
                .expect("binary runs");
            assert_eq!(
                output.status.code(),
                Some(0),
                "stderr: {}",
                String::from_utf8_lossy(&output.stderr)
            );
        };
        run(&["build", scene.to_str().unwrap(), "-o", "g.graph.json"]);
        run(&["train", "g.graph.json", "--steps", "30", "--seed", "11"]);
        run(&["export", "g.graph.json"]);
        ["g.graph.json", "g.trace.csv", "g.graph.xml"]
            .iter()
            .map(|name| {
                (
                    name.to_string(),
                    std::fs::read(dir.join(name)).expect("artifact exists"),
                )
            })
            .collect()
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let first = run_pipeline(dir_a.path());
    let second = run_pipeline(dir_b.path());
    for ((name, bytes_a), (_, bytes_b)) in first.iter().zip(&second) {
        assert_eq!(bytes_a, bytes_b, "{name} differs between runs");
    }
    let elapsed = started.elapsed();
    println!(
        "criterion 6 (fixed-seed build/train/export byte-identical across runs): PASS in {elapsed:?}"
    );
}

#[test]
fn criterion_7_golden_end_to_end() {
    let started = Instant::now();
    let scene = core_fixture("kitchen_small.json");
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let output = std::process::Command::new(env!("CARGO_BIN_EXE_hyperscene"))
            .args(args)
            .current_dir(dir.path())
            .output()
            .expect("binary runs");
        assert_eq!(output.status.code(), Some(0));
    };
    run(&["build", scene.to_str().unwrap(), "-o", "g.graph.json"]);
    run(&["export", "g.graph.json"]);
    let xml = std::fs::read(dir.path().join("g.graph.xml")).unwrap();
    let golden = std::fs::read(core_fixture("kitchen_small.graph.xml")).unwrap();
    assert_eq!(xml, golden, "exported XML differs from the golden file");

    let graph =
        hyperscene_core::graph_io::load_graph(dir.path().join("g.graph.json")).unwrap();
    assert!(graph.base.edge_count() >= 2, "expected at least 2 areas");
    let incidence = incidence_of(&graph.base);
    for i in 0..incidence.nrows() {
        let memberships: usize = incidence.row(i).iter().map(|&v| v as usize).sum();
        assert_eq!(memberships, 1, "node {i} must sit in exactly one area");
    }
    for (&node, &score) in &graph.cf_scores {
        assert!((0.0..=1.0).contains(&score), "node {node} score {score}");
    }
    let elapsed = started.elapsed();
    println!("criterion 7 (golden end-to-end on kitchen_small): PASS in {elapsed:?}");
}

#[test]
fn criterion_8_invariant_suite() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97_8);

    // Non-negativity of all three losses.
    for _ in 0..50 {
        let n = rng.random_range(1..=7);
        let k = rng.random_range(1..=4);
        let d_p = rng.random_range(2..=6);
        let w1 = random_matrix(n, d_p, &mut rng);
        let w2 = random_matrix(n, d_p, &mut rng);
        let d1 = random_matrix(k, d_p, &mut rng);
        let d2 = random_matrix(k, d_p, &mut rng);
        let h = random_incidence(n, k, &mut rng);
        let b = random_matrix(d_p, d_p, &mut rng);
        assert!(node_loss(&w1, &w2, 0.07) >= 0.0);
        assert!(area_loss(&d1, &d2, 0.07) >= 0.0);
        assert!(membership_loss(&w1, &w2, &d1, &d2, &h, &b, 0.07, false) >= 0.0);
    }

    // Permutation invariance of node and area losses.
    for _ in 0..20 {
        let n = rng.random_range(2..=7);
        let d_p = rng.random_range(2..=6);
        let a = random_matrix(n, d_p, &mut rng);
        let b = random_matrix(n, d_p, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        let permute = |m: &Array2<f64>| {
            let mut out = Array2::zeros(m.dim());
            for (dst, &src) in perm.iter().enumerate() {
                out.row_mut(dst).assign(&m.row(src));
            }
            out
        };
        let original = node_loss(&a, &b, 0.07);
        let permuted = node_loss(&permute(&a), &permute(&b), 0.07);
        assert!((original - permuted).abs() < 1e-9);
    }

    // Positive row scaling: invariant for cosine-based losses, NOT for
    // the bilinear membership loss.
    let n = 5;
    let k = 3;
    let d_p = 4;
    let w1 = random_matrix(n, d_p, &mut rng);
    let w2 = random_matrix(n, d_p, &mut rng);
    let d1 = random_matrix(k, d_p, &mut rng);
    let d2 = random_matrix(k, d_p, &mut rng);
    let h = random_incidence(n, k, &mut rng);
    let b = random_matrix(d_p, d_p, &mut rng);
    let mut w1_scaled = w1.clone();
    let mut d1_scaled = d1.clone();
    for (i, factor) in [3.0, 0.25, 11.0, 1.7, 0.6].iter().enumerate() {
        for v in w1_scaled.row_mut(i) {
            *v *= factor;
        }
    }
    for (j, factor) in [2.0, 5.0, 0.1].iter().enumerate() {
        for v in d1_scaled.row_mut(j) {
            *v *= factor;
        }
    }
    assert!((node_loss(&w1, &w2, 0.07) - node_loss(&w1_scaled, &w2, 0.07)).abs() < 1e-9);
    assert!((area_loss(&d1, &d2, 0.07) - area_loss(&d1_scaled, &d2, 0.07)).abs() < 1e-9);
    let membership_base = membership_loss(&w1, &w2, &d1, &d2, &h, &b, 0.07, false);
    let membership_scaled = membership_loss(&w1_scaled, &w2, &d1_scaled, &d2, &h, &b, 0.07, false);
    assert!(
        (membership_base - membership_scaled).abs() > 1e-6,
        "membership loss must be scale sensitive ({membership_base} vs {membership_scaled})"
    );

    // Masked views never gain entries and keep every row and column.
    let graph = planted_graph();
    let incidence = incidence_of(&graph.base);
    let config = TriViewConfig {
        mask_prob_incidence: 0.8,
        ..TriViewConfig::desk()
    };
    let mut view_rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..30 {
        let (v1, v2) = make_views(&graph, &config, &mut view_rng);
        for view in [&v1, &v2] {
            for ((i, j), &value) in view.incidence.indexed_iter() {
                assert!(value <= incidence[(i, j)], "masking added an entry");
            }
            for i in 0..view.incidence.nrows() {
                assert!(view.incidence.row(i).iter().any(|&v| v == 1), "row {i} emptied");
            }
            for j in 0..view.incidence.ncols() {
                assert!(
                    view.incidence.column(j).iter().any(|&v| v == 1),
                    "column {j} emptied"
                );
            }
        }
    }

    let elapsed = started.elapsed();
    println!("criterion 8 (invariant suite): PASS in {elapsed:?}");
}
