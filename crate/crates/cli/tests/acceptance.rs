//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};
use taxa_core::assist::{cluster_count, cluster_taxon, embed_file, kmeans, EmbeddingTable, KMeans, FALLBACK_DIM};
use taxa_core::compare::{exact_match_ratio, majority_merge, node_iou, pairwise_jaccard};
use taxa_core::model::{CoderSession, Labeling, Op, Origin, PartSpec, TaxonNode, TaxonPath, TaxonomyTree};
use taxa_core::persist::{
    load_captions, load_dataset, load_embeddings, load_probabilities, load_session, read_labeling, sample_batches,
    save_session, PersistError,
};
use taxa_core::predict::{close_labeling, evaluate, loo_evaluate, similarity_predict, zero_shot_predict, ProbabilityRow};
use taxa_testkit::{check, corpus, gen, oracle, rng};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn p(s: &str) -> TaxonPath {
    TaxonPath::parse(s)
}

fn ac1_operator_semantics() -> Outcome {
    let start = Instant::now();
    let images = corpus(30);
    let (mut ops, mut accepted) = (0usize, 0usize);
    for seed in 0..10_000u64 {
        let mut r = rng(seed);
        let mut s = CoderSession::new("C1").unwrap();
        let len = r.random_range(1..=50);
        for _ in 0..len {
            let op = gen::random_op(&mut r, &s, &images);
            accepted += check::step(&mut s, op).map_err(|e| format!("seed {seed}: {e}"))? as usize;
            ops += 1;
        }
        check::replays_exactly(&s).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}, limit 60s"))?;
    Ok(format!(
        "10000 sequences, {ops} ops ({:.0}% accepted), invariants and replay hold, {elapsed:.1?}",
        100.0 * accepted as f64 / ops as f64
    ))
}

fn ac2_divide_flatten() -> Outcome {
    let images = corpus(30);
    let (mut cases, mut seed, mut with_images) = (0, 0u64, 0);
    while cases < 1000 {
        seed += 1;
        let mut r = rng(seed);
        let mut s = gen::random_session(&mut r, "C1", &images, 40);
        let leaves = s.tree().leaves();
        let Some(leaf) = leaves.choose(&mut r).cloned() else { continue };
        let holders: Vec<String> = s.state().holders(&leaf).into_iter().collect();
        let k = r.random_range(1..=3);
        let mut parts: Vec<PartSpec> = (0..k)
            .map(|i| PartSpec { name: format!("part-{i}"), members: BTreeSet::new() })
            .collect();
        for u in &holders {
            parts[r.random_range(0..k)].members.insert(u.clone());
        }
        let origin = if r.random_bool(0.5) { Origin::MachineCluster } else { Origin::Manual };
        let before = s.state().clone();
        s.apply_partition(&leaf, parts, origin).map_err(|e| format!("seed {seed}: partition of {leaf}: {e}"))?;
        s.flatten_taxon(&leaf).map_err(|e| format!("seed {seed}: flatten of {leaf}: {e}"))?;
        ensure(s.state() == &before, || format!("seed {seed}: state differs after divide+flatten of {leaf}"))?;
        cases += 1;
        with_images += !holders.is_empty() as usize;
    }
    Ok(format!("1000 cases ({with_images} on leaves holding images) restored exactly"))
}

/// Trees over a fixed universe and, per tree, every assignment of non-empty
/// leaf sets to the images.
fn enumerate_coders(trees: &[&[&str]], images: &[String]) -> Vec<(TaxonomyTree, Labeling)> {
    let mut out = Vec::new();
    for paths in trees {
        let mut tree = TaxonomyTree::new();
        for path in paths.iter().map(|s| p(s)) {
            tree.get_mut(&path.parent().unwrap()).unwrap().children.push(TaxonNode::new(path.name().unwrap()));
        }
        let leaves = tree.leaves();
        let subsets: Vec<BTreeSet<TaxonPath>> = (1..1u32 << leaves.len())
            .map(|mask| leaves.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, l)| l.clone()).collect())
            .collect();
        let mut labelings = vec![Labeling::new()];
        for u in images {
            labelings = labelings
                .into_iter()
                .flat_map(|l| {
                    subsets.iter().map(move |s| {
                        let mut l = l.clone();
                        l.insert(u.clone(), s.clone());
                        l
                    })
                })
                .collect();
        }
        out.extend(labelings.into_iter().map(|l| (tree.clone(), l)));
    }
    out
}

fn check_majority(sessions: &[CoderSession], what: &str) -> Result<(), String> {
    let merged = majority_merge(sessions).map_err(|e| format!("{what}: {e}"))?;
    let node_sets: Vec<BTreeSet<TaxonPath>> = sessions.iter().map(|s| s.tree().paths().into_iter().collect()).collect();
    let labelings: Vec<Labeling> = sessions.iter().map(CoderSession::labeling).collect();
    let refs: Vec<&Labeling> = labelings.iter().collect();
    let (nodes, labels) = oracle::majority(&node_sets, &refs);
    let got_nodes: BTreeSet<TaxonPath> = merged.tree.paths().into_iter().collect();
    ensure(got_nodes == nodes, || format!("{what}: nodes {got_nodes:?} != voter {nodes:?}"))?;
    let got_labels: BTreeMap<String, BTreeSet<TaxonPath>> = merged.labels.clone().into_iter().collect();
    ensure(got_labels == labels, || format!("{what}: labels {got_labels:?} != voter {labels:?}"))?;
    for (u, paths) in &merged.labels {
        for path in paths {
            ensure(merged.tree.is_leaf(path), || format!("{what}: {u} labeled {path}, not a leaf of the merged tree"))?;
        }
    }
    Ok(())
}

fn ac3_majority_oracle() -> Outcome {
    let mut exhaustive = 0;
    let spaces: [(&[&[&str]], usize); 2] = [
        (&[&["a"], &["a", "a/x"], &["a", "a/y"], &["a", "a/x", "a/y"], &["b"], &["a", "b"], &["a", "a/x", "b"], &["a", "a/y", "b"], &["a", "a/x", "a/y", "b"]], 1),
        (&[&["a"], &["a", "a/x"], &["b"], &["a", "b"], &["a", "a/x", "b"]], 2),
    ];
    for (trees, n_img) in spaces {
        let images = corpus(n_img);
        let options = enumerate_coders(trees, &images);
        let per_coder: Vec<Vec<CoderSession>> = (1..=3)
            .map(|c| options.iter().map(|(t, l)| gen::snapshot_session(&format!("C{c}"), t.clone(), l, &[])).collect())
            .collect();
        for a in &per_coder[0] {
            for b in &per_coder[1] {
                for c in &per_coder[2] {
                    check_majority(&[a.clone(), b.clone(), c.clone()], "exhaustive")?;
                    exhaustive += 1;
                }
            }
        }
    }
    let names = ["a", "b", "c", "d"];
    for seed in 0..1000u64 {
        let mut r = rng(seed);
        let images = corpus(r.random_range(1..=6));
        let sessions: Vec<CoderSession> = (0..3)
            .map(|c| {
                let tree = gen::random_tree(&mut r, 7, &names);
                let labels = gen::random_leaf_labels(&mut r, &tree, &images);
                gen::snapshot_session(&format!("C{c}"), tree, &labels, &[])
            })
            .collect();
        check_majority(&sessions, &format!("random seed {seed}"))?;
    }
    Ok(format!("{exhaustive} exhaustive 3-coder fixtures + 1000 random equal the brute-force voter; merged labels are merged-tree leaves"))
}

fn ac4_metrics_oracle() -> Outcome {
    let universe: Vec<TaxonPath> = gen::path_universe(&["a", "b"], 2).into_iter().take(6).collect();
    for seed in 0..1000u64 {
        let mut r = rng(seed);
        let coders = r.random_range(2..=5);
        let images = corpus(r.random_range(1..=8));
        let labelings: Vec<Labeling> = (0..coders).map(|_| gen::random_labeling(&mut r, &images, &universe)).collect();
        let refs: Vec<&Labeling> = labelings.iter().collect();
        let em = exact_match_ratio(&refs).unwrap();
        ensure(oracle::score_is(&em, oracle::exact_match(&refs)), || format!("seed {seed}: exact match {em} != {}", oracle::exact_match(&refs)))?;
        let pj = pairwise_jaccard(&refs).unwrap();
        ensure(oracle::score_is(&pj, oracle::pairwise_jaccard(&refs)), || format!("seed {seed}: jaccard {pj} != {}", oracle::pairwise_jaccard(&refs)))?;
        let trees: Vec<TaxonomyTree> = (0..coders).map(|_| gen::random_tree(&mut r, 7, &["a", "b", "c"])).collect();
        let tree_refs: Vec<&TaxonomyTree> = trees.iter().collect();
        let sets: Vec<BTreeSet<TaxonPath>> = trees.iter().map(|t| t.paths().into_iter().collect()).collect();
        let iou = node_iou(&tree_refs).unwrap();
        ensure(oracle::score_is(&iou, oracle::node_iou(&sets)), || format!("seed {seed}: node IoU {iou} != {}", oracle::node_iou(&sets)))?;
    }
    Ok("1000 fixtures: exact match, pairwise Jaccard and node IoU equal the oracle as exact rationals".into())
}

fn ac5_clustering() -> Outcome {
    let expected = [(1, 1), (2, 1), (3, 1), (4, 2), (9, 3), (10, 3), (99, 9), (100, 10)];
    for (n, k) in expected {
        ensure(cluster_count(n) == k, || format!("cluster_count({n}) = {}, want {k}", cluster_count(n)))?;
    }

    // Seed determinism through the full divide path.
    let mut r = rng(5);
    let images = corpus(30);
    let mut emb = EmbeddingTable::new(8).unwrap();
    for u in &images {
        emb.insert(u.clone(), (0..8).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
    }
    let mut s = CoderSession::new("C1").unwrap();
    s.load_batch(images.iter().cloned()).unwrap();
    let leaf = p("ungrouped");
    let first = cluster_taxon(&s, &leaf, &emb, &Default::default(), 11).map_err(|e| e.to_string())?;
    ensure(first.parts.len() == 5, || format!("30 images gave {} parts", first.parts.len()))?;
    let vectors: Vec<&[f64]> = images.iter().map(|u| emb.get(u).unwrap()).collect();
    let fit = KMeans::new(5, 11).fit(&vectors).unwrap();
    for _ in 0..4 {
        let again = cluster_taxon(&s, &leaf, &emb, &Default::default(), 11).unwrap();
        ensure(again == first, || "cluster_taxon differs between runs".into())?;
        let refit = KMeans::new(5, 11).fit(&vectors).unwrap();
        let bits = |f: &taxa_core::assist::KMeansFit| f.centroids.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
        ensure(refit.assignment == fit.assignment && bits(&refit) == bits(&fit), || "k-means fit differs bitwise".into())?;
    }
    for part in &first.parts {
        let idx: Vec<usize> = part.members.iter().map(|m| images.iter().position(|u| u == m).unwrap()).collect();
        let rep = images[oracle::representative(&vectors, &idx)].clone();
        ensure(part.representative == rep, || format!("{}: representative {} but scan gives {rep}", part.name, part.representative))?;
    }

    // Four blobs 10 sigma apart, 40 points.
    let centers = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0], vec![10.0, 10.0]];
    let mut recovered = 0;
    for seed in 0..20u64 {
        let (points, truth) = gen::blobs(&mut rng(1000 + seed), &centers, 10, 1.0);
        let named: Vec<(String, Vec<f64>)> = points.iter().enumerate().map(|(i, v)| (format!("b{i:02}"), v.clone())).collect();
        let clusters = kmeans(named.iter().map(|(u, v)| (u.as_str(), v.as_slice())), 4, seed).unwrap();
        let mut got = vec![usize::MAX; named.len()];
        for (c, members) in clusters.iter().enumerate() {
            for m in members {
                got[named.iter().position(|(u, _)| u == m).unwrap()] = c;
            }
        }
        let exact = oracle::same_partition(&got, &truth);
        // The fixture at the default seed is the gate; other seeds are reported.
        ensure(seed != 0 || exact, || "blob fixture at seed 0: partition differs from the generating blobs".into())?;
        recovered += exact as usize;
    }
    Ok(format!("k for n in {{1,2,3,4,9,10,99,100}} correct; 5 runs bitwise equal; blob fixture recovered exactly at seed 0 ({recovered}/20 over seeds 0..20, single k-means++ run); representatives match exhaustive scan"))
}

fn ac6_zero_shot() -> Outcome {
    let row = |probs: &[(&str, f64)]| ProbabilityRow {
        uuid: "x".into(),
        probs: probs.iter().map(|(k, v)| (p(k), *v)).collect(),
    };
    let pred = zero_shot_predict(&[row(&[("map/cartogram", 0.5), ("chart", 0.3), ("table", 0.29999999)])], 0.3).unwrap();
    ensure(pred["x"].contains(&p("chart")) && !pred["x"].contains(&p("table")), || format!("boundary: {:?}", pred["x"]))?;
    let pred = zero_shot_predict(&[row(&[("a/b", 0.1), ("c", 0.2)])], 0.3).unwrap();
    ensure(pred["x"] == BTreeSet::from([p("c")]), || format!("argmax below threshold: {:?}", pred["x"]))?;

    let universe = gen::path_universe(&["a", "b", "c"], 3);
    let mut r = rng(6);
    let rows: Vec<ProbabilityRow> = (0..500)
        .map(|i| ProbabilityRow {
            uuid: format!("r{i:03}"),
            probs: (0..r.random_range(1..=8))
                .map(|_| {
                    let path = universe.choose(&mut r).unwrap().clone();
                    let v = if r.random_bool(0.3) { *[0.0, 0.3, 1.0].choose(&mut r).unwrap() } else { r.random::<f64>() };
                    (path, v)
                })
                .collect(),
        })
        .collect();
    let pred = zero_shot_predict(&rows, 0.3).unwrap();
    for row in &rows {
        let got = &pred[&row.uuid];
        ensure(got == &oracle::zero_shot(&row.probs, 0.3), || format!("{}: {got:?} differs from the rule", row.uuid))?;
        ensure(got == &oracle::closure(got), || format!("{}: not ancestor-closed", row.uuid))?;
    }
    Ok("0.3 included, argmax always present, 500 random rows equal the rule oracle and are ancestor-closed".into())
}

fn ac7_loo() -> Outcome {
    let mut r = rng(7);
    let label_sets = [
        BTreeSet::from([p("map"), p("map/cartogram")]),
        BTreeSet::from([p("chart"), p("chart/bar")]),
        BTreeSet::from([p("table")]),
    ];
    let centers = [[10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 10.0]];
    let mut emb = EmbeddingTable::new(3).unwrap();
    let mut labeled = Labeling::new();
    for i in 0..30 {
        let c = i % 3;
        let u = format!("s{i:02}");
        emb.insert(u.clone(), centers[c].iter().map(|x| x + r.random_range(-0.5..0.5)).collect()).unwrap();
        labeled.insert(u, label_sets[c].clone());
    }
    let rep = loo_evaluate(&labeled, &emb, None).map_err(|e| e.to_string())?;
    ensure(rep.exact_match.to_f64() == 1.0 && rep.jaccard.to_f64() == 1.0, || format!("3-cluster set: match {} jaccard {}", rep.exact_match, rep.jaccard))?;

    let mut emb = EmbeddingTable::new(2).unwrap();
    emb.insert("u1", vec![1.0, 0.0]).unwrap();
    emb.insert("u2", vec![0.0, 1.0]).unwrap();
    let pair: Labeling = [("u1".to_string(), BTreeSet::from([p("a")])), ("u2".to_string(), BTreeSet::from([p("b")]))].into_iter().collect();
    let rep = loo_evaluate(&pair, &emb, None).map_err(|e| e.to_string())?;
    ensure(rep.exact_match.to_f64() == 0.0, || format!("orthogonal pair: match {}", rep.exact_match))?;

    // Exact match can only rise under truncation; Jaccard is measured.
    let universe = gen::path_universe(&["a", "b"], 3);
    let mut jaccard_drops = Vec::new();
    for seed in 0..200u64 {
        let mut r = rng(7000 + seed);
        let images = corpus(r.random_range(2..=10));
        let gold = close_labeling(&gen::random_labeling(&mut r, &images, &universe));
        let mut emb = EmbeddingTable::new(4).unwrap();
        for u in &images {
            emb.insert(u.clone(), (0..4).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        }
        let full = loo_evaluate(&gold, &emb, None).unwrap();
        let d1 = loo_evaluate(&gold, &emb, Some(1)).unwrap();
        ensure(d1.exact_match >= full.exact_match, || format!("fixture {seed}: D=1 match {} < full {}", d1.exact_match, full.exact_match))?;
        if d1.jaccard < full.jaccard {
            jaccard_drops.push(seed);
        }
    }
    ensure(jaccard_drops.is_empty(), || format!("D=1 Jaccard below full depth on fixtures {jaccard_drops:?}"))?;
    Ok("3-cluster set scores 1.0/1.0; orthogonal pair scores 0.0; D=1 >= full on 200 closed fixtures (match and Jaccard)".into())
}

fn ac8_persistence() -> Outcome {
    let images = corpus(20);
    for seed in 0..1000u64 {
        let mut r = rng(8000 + seed);
        let n = r.random_range(0..60);
        let s = gen::random_session(&mut r, "C1", &images, n);
        let text = save_session(&s);
        let back = load_session(text.as_bytes()).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(save_session(&back) == text && back == s, || format!("seed {seed}: round trip not byte-identical"))?;
    }
    let mut golden = 0;
    for entry in std::fs::read_dir(fixtures().join("golden")).unwrap() {
        let path = entry.unwrap().path();
        let bytes = std::fs::read(&path).unwrap();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let parsed = match name.as_str() {
            "dataset.json" => load_dataset(&bytes).map(drop),
            "embeddings.jsonl" => load_embeddings(&bytes).map(drop),
            "captions.jsonl" => load_captions(&bytes).map(drop),
            "probs.jsonl" => load_probabilities(&bytes).map(drop),
            "merged-union.json" => serde_json::from_slice::<Value>(&bytes).map(drop).map_err(|e| PersistError::Format(e.to_string())),
            n if n.starts_with("coder-") || n == "session.json" => load_session(&bytes).map(drop),
            _ => read_labeling(&bytes).map(drop),
        };
        parsed.map_err(|e| format!("golden {name}: {e}"))?;
        golden += 1;
    }
    let mut corrupt = 0;
    for entry in std::fs::read_dir(fixtures().join("corrupt")).unwrap() {
        let path = entry.unwrap().path();
        let bytes = std::fs::read(&path).unwrap();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let result = match name.split('-').next().unwrap() {
            "session" => load_session(&bytes).map(drop),
            "dataset" => load_dataset(&bytes).map(drop),
            "embeddings" => load_embeddings(&bytes).map(drop),
            "captions" => load_captions(&bytes).map(drop),
            "probs" => load_probabilities(&bytes).map(drop),
            _ => read_labeling(&bytes).map(drop),
        };
        ensure(matches!(result, Err(PersistError::Format(_))), || format!("corrupt {name}: {result:?}"))?;
        corrupt += 1;
    }
    Ok(format!("1000 random sessions byte-identical; {golden} golden files parse; {corrupt} corrupt files raise FormatError"))
}

async fn ac9_service() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sessions");
    let config = taxa_server::ServerConfig {
        data_dir: data.clone(),
        ..Default::default()
    };
    let (addr, _task) = taxa_server::spawn(config, "127.0.0.1:0".parse().unwrap()).await.map_err(|e| e.to_string())?;
    let base = format!("http://{addr}");
    let c = reqwest::Client::new();
    let post = |path: String, body: Value| {
        let c = c.clone();
        async move {
            let r = c.post(path).json(&body).send().await.map_err(|e| e.to_string())?;
            let status = r.status().as_u16();
            Ok::<_, String>((status, r.json::<Value>().await.unwrap_or(Value::Null)))
        }
    };

    // 1 create + 49 operator requests, mirrored against the library.
    let (st, _) = post(format!("{base}/api/sessions"), json!({"coder_id": "C1"})).await?;
    ensure(st == 201, || format!("create returned {st}"))?;
    let mut local = CoderSession::new("C1").unwrap();
    let images = corpus(15);
    let mut r = rng(9);
    let (mut ok, mut rejected) = (0, 0);
    for i in 0..49 {
        let op: Op = gen::random_op(&mut r, &local, &images);
        let mut body = serde_json::to_value(&op).unwrap();
        body["expected_version"] = json!(local.version());
        let (st, resp) = post(format!("{base}/api/sessions/C1/ops"), body).await?;
        match local.apply(op) {
            Ok(v) => {
                ensure(st == 200 && resp["version"] == json!(v), || format!("request {i}: library accepted, service said {st} {resp}"))?;
                ok += 1;
            }
            Err(e) => {
                ensure(st == 422 && resp["code"] == e.code(), || format!("request {i}: library rejected {}, service said {st} {resp}", e.code()))?;
                rejected += 1;
            }
        }
    }
    let on_disk = std::fs::read_to_string(data.join("C1.json")).unwrap();
    ensure(on_disk == save_session(&local), || "service session file differs from direct application".into())?;

    // Two clients racing on one session.
    post(format!("{base}/api/sessions"), json!({"coder_id": "C2"})).await?;
    let get_version = || {
        let c = c.clone();
        let url = format!("{base}/api/sessions/C2");
        async move {
            let v: Value = c.get(url).send().await.unwrap().json().await.unwrap();
            v["version"].as_u64().unwrap()
        }
    };
    let mut conflicts = 0;
    let mut pending: Vec<Vec<String>> = vec![(0..10).map(|i| format!("A{i}")).collect(), (0..10).map(|i| format!("B{i}")).collect()];
    while pending.iter().any(|q| !q.is_empty()) {
        let (va, vb) = tokio::join!(get_version(), get_version());
        let send = |who: usize, v: u64| {
            let memo = pending[who].first().cloned();
            let post = &post;
            let base = &base;
            async move {
                match memo {
                    Some(m) => post(format!("{base}/api/sessions/C2/ops"), json!({"op": "add_memo", "text": m, "expected_version": v})).await.map(|x| x.0),
                    None => Ok(0),
                }
            }
        };
        let (sa, sb) = tokio::join!(send(0, va), send(1, vb));
        for (who, st) in [(0, sa?), (1, sb?)] {
            match st {
                200 => {
                    pending[who].remove(0);
                }
                409 => conflicts += 1,
                0 => {}
                other => return Err(format!("racing client got {other}")),
            }
        }
    }
    let final_doc: Value = c.get(format!("{base}/api/sessions/C2")).send().await.unwrap().json().await.unwrap();
    let memos: BTreeSet<String> = final_doc["session"]["memos"].as_array().unwrap().iter().map(|m| m.as_str().unwrap().to_owned()).collect();
    ensure(memos.len() == 20 && final_doc["version"] == 20, || format!("lost updates: {} memos at version {}", memos.len(), final_doc["version"]))?;
    ensure(conflicts > 0, || "no version conflict was observed".into())?;
    Ok(format!("50 requests ({ok} accepted, {rejected} rejected as in the library) give the same session file; 20/20 racing updates kept after {conflicts} conflicts"))
}

fn ac10_pipeline() -> Outcome {
    let start = Instant::now();
    let root = fixtures().join("corpus");
    let records = load_dataset(&std::fs::read(root.join("dataset.json")).unwrap()).map_err(|e| e.to_string())?;
    let family: BTreeMap<String, String> = records.iter().map(|r| (r.uuid.clone(), r.source_fields["family"].as_str().unwrap().to_owned())).collect();
    let plan = sample_batches(records.iter().map(|r| r.uuid.as_str()), 10, 2, 2024).map_err(|e| e.to_string())?;
    let coded: BTreeSet<&String> = plan.batches.iter().flatten().collect();
    ensure(plan.batches.iter().all(|b| b.len() == 10) && coded.len() == 20, || "batches are not 2 disjoint sets of 10".into())?;

    let leaf_for = |fam: &str| match fam {
        "red" => "warm/red",
        "yellow" => "warm/yellow",
        "blue" => "cool/blue",
        _ => "cool/green",
    };
    let mut sessions = Vec::new();
    for coder in ["C1", "C2", "C3"] {
        let mut s = CoderSession::new(coder).unwrap();
        for batch in &plan.batches {
            s.load_batch(batch.iter().cloned()).unwrap();
            for u in batch {
                let mut leaf = p(leaf_for(&family[u]));
                // C3 lumps yellow with red and marks those unsure.
                if coder == "C3" && family[u] == "yellow" {
                    leaf = p("warm/red");
                }
                for prefix in leaf.prefixes().collect::<Vec<_>>() {
                    if !s.tree().contains(&prefix) {
                        s.create_taxon(&prefix.parent().unwrap(), prefix.name().unwrap()).unwrap();
                    }
                }
                s.label_image(u, &leaf).map_err(|e| format!("{coder} {u}: {e}"))?;
                if coder == "C3" && family[u] == "yellow" {
                    s.set_unsure(u, true).unwrap();
                }
            }
        }
        check::core_invariants(&s).map_err(|e| format!("{coder}: {e}"))?;
        check::replays_exactly(&s).map_err(|e| format!("{coder}: {e}"))?;
        sessions.push(s);
    }
    let merged = majority_merge(&sessions).map_err(|e| e.to_string())?;
    for (u, paths) in &merged.labels {
        ensure(!paths.is_empty() && paths.iter().all(|p| merged.tree.is_leaf(p)), || format!("merged label of {u} is not a merged leaf"))?;
        ensure(paths == &BTreeSet::from([p(leaf_for(&family[u]))]), || format!("majority for {u} is {paths:?}"))?;
    }

    let mut emb = EmbeddingTable::new(FALLBACK_DIM).unwrap();
    for r in &records {
        let path = root.join(r.source_fields["path"].as_str().unwrap());
        emb.insert(r.uuid.clone(), embed_file(&path).map_err(|e| e.to_string())?).unwrap();
    }
    let targets: Vec<String> = records.iter().map(|r| r.uuid.clone()).filter(|u| !coded.contains(u)).collect();
    let pred = similarity_predict(&merged.labels, &emb, &targets).map_err(|e| e.to_string())?;
    ensure(pred.len() == 20, || format!("{} predictions for 20 targets", pred.len()))?;
    for paths in pred.values() {
        ensure(paths.iter().all(|p| merged.tree.is_leaf(p)), || "prediction outside the merged tree".into())?;
    }
    let gold: Labeling = targets.iter().map(|u| (u.clone(), BTreeSet::from([p(leaf_for(&family[u]))]))).collect();
    let full = evaluate(&pred, &gold, None).map_err(|e| e.to_string())?;
    let d1 = evaluate(&pred, &gold, Some(1)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:.1?}, limit 30s"))?;
    Ok(format!(
        "sample -> 3 coders -> majority -> similarity over fallback embeddings -> evaluate: match {:.3}, Jaccard {:.3}, D=1 match {:.3}; {elapsed:.1?}",
        full.exact_match.to_f64(),
        full.jaccard.to_f64(),
        d1.exact_match.to_f64()
    ))
}

fn main() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let criteria: Vec<(&str, &str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("AC1", "operator semantics", Box::new(ac1_operator_semantics)),
        ("AC2", "divide/flatten inverse", Box::new(ac2_divide_flatten)),
        ("AC3", "majority-merge oracle", Box::new(ac3_majority_oracle)),
        ("AC4", "metrics oracle", Box::new(ac4_metrics_oracle)),
        ("AC5", "clustering", Box::new(ac5_clustering)),
        ("AC6", "zero-shot", Box::new(ac6_zero_shot)),
        ("AC7", "leave-one-out", Box::new(ac7_loo)),
        ("AC8", "persistence", Box::new(ac8_persistence)),
        ("AC9", "service equivalence", Box::new(move || rt.block_on(ac9_service()))),
        ("AC10", "end-to-end pipeline", Box::new(ac10_pipeline)),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("{id:<5} PASS  {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("{id:<5} FAIL  {name}: {why} [{:.1?}]", start.elapsed());
            }
        }
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
