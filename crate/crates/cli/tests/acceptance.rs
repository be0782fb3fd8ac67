//! Acceptance suite: one test per criterion, each printing a `[PASS]` line
//! with its measured numbers. Run with
//! `cargo test -p ckmrag-cli --test acceptance -- --nocapture`.
//!
//! The criteria:
//!
//! 1. Round-trip fidelity: render -> chunk -> extract -> merge recovers
//!    exactly the distinct-station and distinct-pair counts of an
//!    independent quadratic-scan oracle on 20 seeded CKMs (100..2000
//!    pairs), under 30 s.
//! 2. Chunk-size invariance: the merged extraction is identical across
//!    chunk sizes {500, 1000, 1500, 2000} on the same document.
//! 3. Community detection: the two-5-cliques-plus-bridge graph splits into
//!    exactly the cliques at level 0, and on 50 random <= 10-node graphs
//!    the returned modularity is >= 0.95 x the brute-force optimum, under
//!    20 s.
//! 4. Retrieval oracle equivalence: local search equals an exhaustive
//!    independent reimplementation on 100 random queries over a 500-pair
//!    graph, exactly, under 10 s.
//! 5. Exact-match prediction: querying 50 stored pairs' coordinates
//!    through the CLI (`query --mode local`, mock backend) returns each
//!    stored gain within 1e-9 dB.
//! 6. Path-loss baseline: noiseless data recovers (intercept, exponent)
//!    within 1e-6; with 6 dB shadowing and 10,000 samples the exponent is
//!    within +-0.05 on each of 5 seeds.
//! 7. Retrieval-quality trend: on 2000-pair CKMs with 6 dB / 30 m
//!    correlated shadowing (80/20 split, powers {0,5,10,15,20} dBm, mock
//!    generator, seeds 1..5): mean sum rate at 20 dBm is ordered
//!    graphrag-local >= vanilla-flat >= pl-model, and gain RMSE of
//!    graphrag-local beats pl-model on every seed, under 5 min.
//! 8. Sum-rate unit: an SNR = 0 dB pair yields exactly 1.0 bit/s/Hz and
//!    the rate is monotone in transmit power across the sweep.
//! 9. Determinism: end-to-end runs with seed 42 at 1 thread and 8 threads
//!    produce byte-identical graph exports, eval JSON, and plot CSVs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ckmrag_core::docline::parse_line;
use ckmrag_core::{
    chunk_document, extract_all_rule_based, fit_path_loss, generate_synthetic_ckm,
    label_stations, leiden_flat, local_search, merge_extractions, sum_rate, Aabb, EntityType,
    ExtractionMode, GainQuery, GraphDelta, KnowledgeGraph, LeidenParams, Point3, RawCkmRecord,
    SyntheticCkmConfig, DEFAULT_DEDUP_TOL,
};

fn ckmrag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ckmrag"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = ckmrag(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth_cfg(seed: u64, n_pairs: usize) -> SyntheticCkmConfig {
    SyntheticCkmConfig {
        n_pairs,
        area: Aabb::new(Point3::new(0.0, 0.0, 1.5), Point3::new(200.0, 200.0, 30.0)),
        pl_intercept_db: -40.0,
        pl_exponent: 3.0,
        shadowing_sigma_db: 6.0,
        shadowing_correlation_m: 30.0,
        station_reuse_prob: 0.5,
        seed,
    }
}

/// Quadratic-scan labeling oracle: distinct-station counts and distinct
/// (tx, rx) pair keys, independent of StationRegistry.
fn scan_oracle(records: &[RawCkmRecord], tol: f64) -> (usize, usize, usize) {
    let mut tx_canon: Vec<Point3> = Vec::new();
    let mut rx_canon: Vec<Point3> = Vec::new();
    let mut pair_keys: BTreeSet<(usize, usize)> = BTreeSet::new();
    for r in records {
        let ti = match tx_canon.iter().position(|c| c.distance(&r.tx_pos) <= tol) {
            Some(i) => i,
            None => {
                tx_canon.push(r.tx_pos);
                tx_canon.len() - 1
            }
        };
        let ri = match rx_canon.iter().position(|c| c.distance(&r.rx_pos) <= tol) {
            Some(i) => i,
            None => {
                rx_canon.push(r.rx_pos);
                rx_canon.len() - 1
            }
        };
        pair_keys.insert((ti, ri));
    }
    (tx_canon.len(), rx_canon.len(), pair_keys.len())
}

fn merged_delta(records: &[RawCkmRecord], chunk_size: usize) -> GraphDelta {
    let (_, _, pairs) = label_stations(records, DEFAULT_DEDUP_TOL);
    let doc = ckmrag_core::render_document(&pairs);
    let chunks = chunk_document(&doc, chunk_size).unwrap();
    let deltas =
        extract_all_rule_based(&chunks, &EntityType::ALL, ExtractionMode::Attribute).unwrap();
    merge_extractions(&deltas).unwrap()
}

#[test]
fn criterion_1_round_trip_fidelity() {
    let start = Instant::now();
    for i in 0..20usize {
        let n_pairs = 100 + i * 100;
        let cfg = synth_cfg(1000 + i as u64, n_pairs);
        let records = generate_synthetic_ckm(&cfg).unwrap();
        let (tx_count, rx_count, pair_count) = scan_oracle(&records, DEFAULT_DEDUP_TOL);
        let delta = merged_delta(&records, 1000);
        assert_eq!(
            delta.entities.len(),
            tx_count + rx_count,
            "entity count mismatch at {n_pairs} pairs"
        );
        assert_eq!(
            delta.relationships.len(),
            pair_count,
            "relationship count mismatch at {n_pairs} pairs"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, budget 30 s");
    println!(
        "[PASS] criterion 1: round-trip counts equal the quadratic-scan oracle on 20 CKMs (100..2000 pairs) in {elapsed:.2?}"
    );
}

type EntityContent = (String, String, String);
type RelationshipContent = (String, String, String, Option<u64>);

/// Graph content of a delta with chunk-index provenance erased; provenance
/// indices cannot be invariant across chunkings (a 500-token chunking and a
/// 2000-token chunking number their chunks differently by construction).
fn content_of(delta: &GraphDelta) -> (Vec<EntityContent>, Vec<RelationshipContent>) {
    let entities = delta
        .entities
        .iter()
        .map(|e| {
            (
                e.name.clone(),
                e.entity_type.to_string(),
                format!("{:?}", e.attributes),
            )
        })
        .collect();
    let relationships = delta
        .relationships
        .iter()
        .map(|r| {
            (
                r.source.clone(),
                r.target.clone(),
                r.rel_type.clone(),
                r.gain_db.map(f64::to_bits),
            )
        })
        .collect();
    (entities, relationships)
}

#[test]
fn criterion_2_chunk_size_invariance() {
    let records = generate_synthetic_ckm(&synth_cfg(77, 800)).unwrap();
    let reference = merged_delta(&records, 500);
    for chunk_size in [1000, 1500, 2000] {
        let delta = merged_delta(&records, chunk_size);
        assert_eq!(
            content_of(&reference),
            content_of(&delta),
            "merged extraction differs at chunk size {chunk_size}"
        );
    }
    println!(
        "[PASS] criterion 2: merged extraction identical across chunk sizes {{500, 1000, 1500, 2000}}"
    );
}

/// Direct-formula modularity over an edge list, written independently of
/// the implementation in the library.
fn direct_modularity(n: usize, edges: &[(usize, usize)], membership: &[usize]) -> f64 {
    let m = edges.len() as f64;
    if edges.is_empty() {
        return 0.0;
    }
    let two_m = 2.0 * m;
    let mut degree = vec![0.0f64; n];
    for &(u, v) in edges {
        degree[u] += 1.0;
        degree[v] += 1.0;
    }
    let intra = edges
        .iter()
        .filter(|(u, v)| membership[*u] == membership[*v])
        .count() as f64;
    let mut comm_degree = vec![0.0f64; n];
    for (v, &c) in membership.iter().enumerate() {
        comm_degree[c] += degree[v];
    }
    intra / m
        - comm_degree
            .iter()
            .map(|&d| (d / two_m) * (d / two_m))
            .sum::<f64>()
}

/// Exhaustive maximum modularity over all partitions (restricted growth
/// string enumeration); n <= 10 keeps this tractable.
fn brute_force_best_modularity(n: usize, edges: &[(usize, usize)]) -> f64 {
    fn recurse(
        i: usize,
        max_used: usize,
        membership: &mut Vec<usize>,
        n: usize,
        edges: &[(usize, usize)],
        best: &mut f64,
    ) {
        if i == n {
            let q = direct_modularity(n, edges, membership);
            if q > *best {
                *best = q;
            }
            return;
        }
        for c in 0..=max_used + 1 {
            membership[i] = c;
            recurse(i + 1, max_used.max(c), membership, n, edges, best);
        }
    }
    let mut membership = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    recurse(1, 0, &mut membership, n, edges, &mut best);
    best
}

fn clique_edges(nodes: &[usize]) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for (i, &u) in nodes.iter().enumerate() {
        for &v in &nodes[i + 1..] {
            edges.push((u, v));
        }
    }
    edges
}

#[test]
fn criterion_3_community_detection() {
    let start = Instant::now();

    // two 5-cliques joined by a single bridge: level 0 must be the cliques
    let mut edges = clique_edges(&[0, 1, 2, 3, 4]);
    edges.extend(clique_edges(&[5, 6, 7, 8, 9]));
    edges.push((4, 5));
    let adj = ckmrag_core::community::adjacency_from_edges(10, &edges);
    let levels = ckmrag_core::hierarchical_leiden(&adj, &LeidenParams::default());
    let members: Vec<Vec<usize>> = levels[0].iter().map(|c| c.members.clone()).collect();
    assert_eq!(members, vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]]);
    // and the brute force agrees that this is optimal
    let best = brute_force_best_modularity(10, &edges);
    let got = direct_modularity(10, &edges, &[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
    assert!((got - best).abs() < 1e-12);

    // 50 random graphs: returned modularity >= 0.95 x brute-force optimum
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut done = 0;
    while done < 50 {
        let n = rng.gen_range(4..=10usize);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen_bool(0.45) {
                    edges.push((u, v));
                }
            }
        }
        if edges.is_empty() {
            continue;
        }
        done += 1;
        let adj = ckmrag_core::community::adjacency_from_edges(n, &edges);
        let mut leiden_rng = ChaCha8Rng::seed_from_u64(done as u64);
        let membership = leiden_flat(&adj, 1.0, 10, &mut leiden_rng);
        let returned = direct_modularity(n, &edges, &membership);
        let best = brute_force_best_modularity(n, &edges);
        assert!(
            returned >= 0.95 * best - 1e-12,
            "graph {done} (n={n}, m={}): returned {returned:.6} < 0.95 x optimal {best:.6}",
            edges.len()
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 20, "took {elapsed:?}, budget 20 s");
    println!(
        "[PASS] criterion 3: two-clique partition exact; 50 random graphs within 0.95 of brute-force optimum in {elapsed:.2?}"
    );
}

/// Independent local-search oracle over document-precision pairs: nearest
/// anchors by (distance, entity name), BFS over the pair graph, exhaustive
/// combined-distance ranking.
fn oracle_local_search(
    doc: &str,
    query: &GainQuery,
    k_anchor: usize,
    hops: usize,
    m: usize,
) -> Vec<(u32, u32, f64, f64)> {
    let mut tx_pos: BTreeMap<u32, Point3> = BTreeMap::new();
    let mut rx_pos: BTreeMap<u32, Point3> = BTreeMap::new();
    let mut pair_gains: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for line in doc.lines() {
        let p = parse_line(line).expect("document line parses");
        tx_pos.insert(p.tx_label, p.tx_pos);
        rx_pos.insert(p.rx_label, p.rx_pos);
        pair_gains.insert((p.tx_label, p.rx_label), p.gain_db);
    }

    let anchors = |positions: &BTreeMap<u32, Point3>, target: &Point3, prefix: &str| {
        let mut ranked: Vec<(f64, String, u32)> = positions
            .iter()
            .map(|(&label, pos)| (pos.distance(target), format!("{prefix}_{label}"), label))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked
            .into_iter()
            .take(k_anchor)
            .map(|(_, _, l)| l)
            .collect::<Vec<u32>>()
    };

    // node space: (true, label) = transmitter, (false, label) = receiver
    let mut adjacency: BTreeMap<(bool, u32), Vec<(bool, u32)>> = BTreeMap::new();
    for &(t, r) in pair_gains.keys() {
        adjacency.entry((true, t)).or_default().push((false, r));
        adjacency.entry((false, r)).or_default().push((true, t));
    }

    let mut visited: BTreeSet<(bool, u32)> = BTreeSet::new();
    let mut frontier: VecDeque<((bool, u32), usize)> = VecDeque::new();
    for t in anchors(&tx_pos, &query.tx_pos, "transmitter") {
        if visited.insert((true, t)) {
            frontier.push_back(((true, t), 0));
        }
    }
    for r in anchors(&rx_pos, &query.rx_pos, "receiver") {
        if visited.insert((false, r)) {
            frontier.push_back(((false, r), 0));
        }
    }
    while let Some((node, depth)) = frontier.pop_front() {
        if depth == hops {
            continue;
        }
        for next in adjacency.get(&node).into_iter().flatten() {
            if visited.insert(*next) {
                frontier.push_back((*next, depth + 1));
            }
        }
    }

    let mut triples: Vec<(u32, u32, f64, f64)> = pair_gains
        .iter()
        .filter(|((t, r), _)| visited.contains(&(true, *t)) && visited.contains(&(false, *r)))
        .map(|(&(t, r), &gain)| {
            let combined =
                query.tx_pos.distance(&tx_pos[&t]) + query.rx_pos.distance(&rx_pos[&r]);
            (t, r, gain, combined)
        })
        .collect();
    triples.sort_by(|a, b| a.3.total_cmp(&b.3).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    triples.truncate(m);
    triples
}

#[test]
fn criterion_4_retrieval_oracle_equivalence() {
    let start = Instant::now();
    let records = generate_synthetic_ckm(&synth_cfg(505, 500)).unwrap();
    let (_, _, pairs) = label_stations(&records, DEFAULT_DEDUP_TOL);
    let doc = ckmrag_core::render_document(&pairs);
    let chunks = chunk_document(&doc, 1000).unwrap();
    let deltas =
        extract_all_rule_based(&chunks, &EntityType::ALL, ExtractionMode::Attribute).unwrap();
    let delta = merge_extractions(&deltas).unwrap();
    let mut graph = KnowledgeGraph::build(&delta, &chunks, 64).unwrap();
    graph.finalize_communities(&LeidenParams::default());

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for qi in 0..100 {
        let query = GainQuery {
            tx_pos: Point3::new(
                rng.gen_range(0.0..200.0),
                rng.gen_range(0.0..200.0),
                rng.gen_range(1.5..30.0),
            ),
            rx_pos: Point3::new(
                rng.gen_range(0.0..200.0),
                rng.gen_range(0.0..200.0),
                rng.gen_range(1.5..30.0),
            ),
        };
        let ctx = local_search(&graph, &query, 4, 1, 8, 2500).unwrap();
        let got: Vec<(u32, u32, f64, f64)> = ctx
            .triples
            .iter()
            .map(|t| (t.tx_label, t.rx_label, t.gain_db, t.combined_distance))
            .collect();
        let expected = oracle_local_search(&doc, &query, 4, 1, 8);
        assert_eq!(got, expected, "query {qi} diverged from the oracle");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}, budget 10 s");
    println!(
        "[PASS] criterion 4: local search equals the exhaustive oracle on 100 queries over a 500-pair graph in {elapsed:.2?}"
    );
}

#[test]
fn criterion_5_exact_match_prediction_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let dir_s = dir.path().display().to_string();
    run_ok(&[
        "synth", "--workdir", &dir_s, "--seed", "4242", "--synth-pairs", "300",
    ]);
    let ckm = dir.path().join("ckm.csv").display().to_string();
    run_ok(&[
        "build", "--workdir", &dir_s, "--input-ckm", &ckm, "--seed", "4242",
    ]);
    let graph = dir.path().join("graph.json").display().to_string();
    let document = fs::read_to_string(dir.path().join("document.txt")).unwrap();
    let lines: Vec<&str> = document.lines().collect();

    let mut checked = 0;
    for i in (0..lines.len()).step_by(lines.len() / 50).take(50) {
        let stored = parse_line(lines[i]).unwrap();
        let tx = format!("{},{},{}", stored.tx_pos.x, stored.tx_pos.y, stored.tx_pos.z);
        let rx = format!("{},{},{}", stored.rx_pos.x, stored.rx_pos.y, stored.rx_pos.z);
        let out = ckmrag(&["query", &graph, "--tx", &tx, "--rx", &rx, "--mode", "local"]);
        assert!(out.status.success());
        let value: serde_json::Value =
            serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
        let predicted = value["answer"]["predicted_gain_db"].as_f64().unwrap();
        assert!(
            (predicted - stored.gain_db).abs() < 1e-9,
            "line {i}: predicted {predicted} vs stored {}",
            stored.gain_db
        );
        checked += 1;
    }
    assert_eq!(checked, 50);
    println!(
        "[PASS] criterion 5: 50 stored pairs recovered exactly through `query --mode local` with the mock backend"
    );
}

#[test]
fn criterion_6_path_loss_baseline() {
    // noiseless: exact recovery
    let noiseless = SyntheticCkmConfig {
        shadowing_sigma_db: 0.0,
        station_reuse_prob: 0.0,
        pl_intercept_db: -40.0,
        pl_exponent: 2.0,
        area: Aabb::new(Point3::new(0.0, 0.0, 1.5), Point3::new(300.0, 300.0, 30.0)),
        n_pairs: 500,
        shadowing_correlation_m: 30.0,
        seed: 606,
    };
    let records = generate_synthetic_ckm(&noiseless).unwrap();
    let (_, _, pairs) = label_stations(&records, DEFAULT_DEDUP_TOL);
    let model = fit_path_loss(&pairs).unwrap();
    assert!((model.intercept_db - -40.0).abs() < 1e-6);
    assert!((model.exponent - 2.0).abs() < 1e-6);

    // sigma = 6 dB, 10k samples: exponent within +-0.05 on every seed. The
    // correlation length is short relative to the area so the fit sees many
    // independent shadowing cells.
    let mut worst = 0.0f64;
    for seed in 1..=5u64 {
        let shadowed = SyntheticCkmConfig {
            shadowing_sigma_db: 6.0,
            shadowing_correlation_m: 3.0,
            station_reuse_prob: 0.0,
            n_pairs: 10_000,
            area: Aabb::new(Point3::new(0.0, 0.0, 1.5), Point3::new(600.0, 600.0, 30.0)),
            pl_intercept_db: -40.0,
            pl_exponent: 2.0,
            seed,
        };
        let records = generate_synthetic_ckm(&shadowed).unwrap();
        let (_, _, pairs) = label_stations(&records, DEFAULT_DEDUP_TOL);
        let model = fit_path_loss(&pairs).unwrap();
        let err = (model.exponent - 2.0).abs();
        worst = worst.max(err);
        assert!(err <= 0.05, "seed {seed}: exponent error {err:.4} > 0.05");
    }
    println!(
        "[PASS] criterion 6: noiseless fit exact to 1e-6; shadowed exponent within +-0.05 on 5 seeds (worst {worst:.4})"
    );
}

/// The qualitative-trend scenario: pinned parameters per the criterion
/// (sigma 6 dB, correlation 30 m, 2000 pairs, 80/20, powers 0..20 dBm, mock
/// generator, seeds 1..5); free parameters frozen to a dense D2D layout
/// where anchor locality has evidence to work with.
fn trend_args(seed: u64) -> Vec<String> {
    [
        "--seed",
        &seed.to_string(),
        "--synth-pairs",
        "2000",
        "--synth-area",
        "0,0,1.5,100,100,10",
        "--station-reuse-prob",
        "0.9",
        "--pl-intercept",
        "-40",
        "--pl-exponent",
        "3.1",
        "--shadowing-sigma",
        "6",
        "--shadowing-correlation",
        "30",
        "--chunk-size",
        "500",
        "--train-fraction",
        "0.8",
        "--power-levels",
        "0,5,10,15,20",
        "--noise-dbm",
        "-90",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[test]
fn criterion_7_sum_rate_trend() {
    let start = Instant::now();
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for seed in 1..=5u64 {
        let dir = tempfile::tempdir().unwrap();
        let dir_s = dir.path().display().to_string();
        let extra = trend_args(seed);
        let extra_refs: Vec<&str> = extra.iter().map(|s| s.as_str()).collect();

        let mut args = vec!["synth", "--workdir", &dir_s];
        args.extend(&extra_refs);
        run_ok(&args);
        let ckm = dir.path().join("ckm.csv").display().to_string();
        let mut args = vec!["evaluate", "--workdir", &dir_s, "--input-ckm", &ckm];
        args.extend(&extra_refs);
        run_ok(&args);

        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("eval.json")).unwrap())
                .unwrap();
        let mut rmse: BTreeMap<&str, f64> = BTreeMap::new();
        for p in report["predictors"].as_array().unwrap() {
            let name = p["predictor"].as_str().unwrap();
            let sr20 = p["sum_rate_curve"]
                .as_array()
                .unwrap()
                .iter()
                .find(|pt| pt["power_dbm"] == 20.0)
                .unwrap()["sum_rate_bps_hz"]
                .as_f64()
                .unwrap();
            let key = match name {
                "graphrag-local" => "graphrag-local",
                "vanilla-flat" => "vanilla-flat",
                "pl-model" => "pl-model",
                other => panic!("unexpected predictor {other}"),
            };
            *sums.entry(key).or_insert(0.0) += sr20;
            rmse.insert(key, p["rmse_db"].as_f64().unwrap());
        }
        assert!(
            rmse["graphrag-local"] < rmse["pl-model"],
            "seed {seed}: RMSE(graphrag-local) {:.3} !< RMSE(pl-model) {:.3}",
            rmse["graphrag-local"],
            rmse["pl-model"]
        );
    }
    let g = sums["graphrag-local"] / 5.0;
    let f = sums["vanilla-flat"] / 5.0;
    let p = sums["pl-model"] / 5.0;
    assert!(
        g >= f && f >= p,
        "mean sum rates at 20 dBm not ordered: graphrag {g:.1} / flat {f:.1} / pl {p:.1}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}, budget 5 min");
    println!(
        "[PASS] criterion 7: mean sum rate at 20 dBm ordered graphrag {g:.1} >= flat {f:.1} >= pl {p:.1}; RMSE(graphrag) < RMSE(pl) on all 5 seeds; {elapsed:.2?}"
    );
}

#[test]
fn criterion_8_sum_rate_unit() {
    // SNR = 0 dB -> exactly 1 bit/s/Hz
    assert_eq!(sum_rate(&[-70.0], -20.0, -90.0), 1.0);
    assert_eq!(sum_rate(&[-110.0], 20.0, -90.0), 1.0);
    let gains = [-70.0, -85.0, -100.0];
    let mut previous = f64::NEG_INFINITY;
    for p in [0.0, 5.0, 10.0, 15.0, 20.0] {
        let rate = sum_rate(&gains, p, -90.0);
        assert!(rate > previous, "sum rate not increasing at {p} dBm");
        previous = rate;
    }
    println!("[PASS] criterion 8: SNR = 0 dB gives exactly 1.0 bit/s/Hz; monotone in power across the sweep");
}

#[test]
fn criterion_9_thread_count_determinism() {
    let run = |threads: &str, dir: &Path| {
        let dir_s = dir.display().to_string();
        run_ok(&[
            "synth", "--workdir", &dir_s, "--seed", "42", "--synth-pairs", "500", "--threads",
            threads,
        ]);
        let ckm = dir.join("ckm.csv").display().to_string();
        run_ok(&[
            "build", "--workdir", &dir_s, "--input-ckm", &ckm, "--seed", "42", "--threads",
            threads,
        ]);
        run_ok(&[
            "evaluate", "--workdir", &dir_s, "--input-ckm", &ckm, "--seed", "42", "--threads",
            threads,
        ]);
    };
    let dir_1 = tempfile::tempdir().unwrap();
    let dir_8 = tempfile::tempdir().unwrap();
    run("1", dir_1.path());
    run("8", dir_8.path());
    for file in ["graph.json", "eval.json", "plot.csv"] {
        let a = fs::read(dir_1.path().join(file)).unwrap();
        let b = fs::read(dir_8.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between 1-thread and 8-thread runs");
    }
    println!(
        "[PASS] criterion 9: graph export, eval JSON, and plot CSV byte-identical for threads 1 vs 8 (seed 42)"
    );
}
