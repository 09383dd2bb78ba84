//! End-to-end acceptance checks. Each test covers one property of the
//! system and prints a one-line PASS summary with the tolerances it used.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use etcoref::config::{Config, TypePredConfig};
use etcoref::coref::{resolve, train, CorefModel, ModelVariant, SynthEmbedder, TokenEmbeddings};
use etcoref::corpus::{map_to_common, propagate_cluster_types, Document, MentionSpan, TypeScheme};
use etcoref::embeddings::synth_embeddings;
use etcoref::experiment::run_single;
use etcoref::metrics::{b_cubed, ceaf_e, muc, ScoreReport};
use etcoref::neural::{Gradients, Matrix, Parameters};
use etcoref::synthetic::{synthetic_corpus, SynthSpec};
use etcoref::typepred::{crossval_predict, evaluate_typepred, mention_key, TypeClassifier};

fn words(s: &str) -> Vec<String> {
    s.split(' ').map(String::from).collect()
}

// ---------------------------------------------------------------- metrics

/// Vilain et al. link counting, written out per cluster.
fn oracle_muc(key: &[Vec<u32>], resp: &[Vec<u32>]) -> (f64, f64) {
    fn side(a: &[Vec<u32>], b: &[Vec<u32>]) -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in a {
            let mut parts: Vec<HashSet<u32>> = Vec::new();
            for m in k {
                let owner = b.iter().position(|r| r.contains(m));
                match owner {
                    Some(o) => {
                        let c: HashSet<u32> = b[o].iter().copied().filter(|x| k.contains(x)).collect();
                        if !parts.contains(&c) {
                            parts.push(c);
                        }
                    }
                    None => parts.push(HashSet::from([*m])),
                }
            }
            num += k.len() as f64 - parts.len() as f64;
            den += k.len() as f64 - 1.0;
        }
        (num, den)
    }
    let (rn, rd) = side(key, resp);
    let (pn, pd) = side(resp, key);
    (if rd > 0.0 { rn / rd } else { 0.0 }, if pd > 0.0 { pn / pd } else { 0.0 })
}

/// Per-mention B³ average.
fn oracle_b_cubed(key: &[Vec<u32>], resp: &[Vec<u32>]) -> (f64, f64) {
    fn side(a: &[Vec<u32>], b: &[Vec<u32>]) -> f64 {
        let mentions: Vec<u32> = a.iter().flatten().copied().collect();
        let total: f64 = mentions
            .iter()
            .map(|m| {
                let ka = a.iter().find(|c| c.contains(m)).unwrap();
                match b.iter().find(|c| c.contains(m)) {
                    Some(kb) => ka.iter().filter(|x| kb.contains(x)).count() as f64 / ka.len() as f64,
                    None => 0.0,
                }
            })
            .sum();
        total / mentions.len() as f64
    }
    (side(key, resp), side(resp, key))
}

fn phi(a: &[u32], b: &[u32]) -> f64 {
    2.0 * a.iter().filter(|x| b.contains(x)).count() as f64 / (a.len() + b.len()) as f64
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Best alignment by trying every permutation of the padded grid.
fn oracle_ceaf_total(key: &[Vec<u32>], resp: &[Vec<u32>]) -> f64 {
    let n = key.len().max(resp.len());
    permutations(n)
        .iter()
        .map(|p| {
            (0..key.len())
                .filter(|&i| p[i] < resp.len())
                .map(|i| phi(&key[i], &resp[p[i]]))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn random_partition(rng: &mut ChaCha8Rng, mentions: &[u32], max_clusters: usize) -> Vec<Vec<u32>> {
    let k = rng.gen_range(1..=max_clusters.min(mentions.len()));
    let mut clusters = vec![Vec::new(); k];
    for &m in mentions {
        clusters[rng.gen_range(0..k)].push(m);
    }
    clusters.retain(|c| !c.is_empty());
    clusters
}

#[test]
fn metric_oracles() {
    const TOL: f64 = 1e-9;
    let t = Instant::now();
    let key = vec![vec![1, 2, 3], vec![4]];
    let resp = vec![vec![1, 2], vec![3, 4]];

    let m = muc(&key, &resp);
    let (or, op) = oracle_muc(&key, &resp);
    assert!((m.f1 - 0.5).abs() < TOL && (m.recall - or).abs() < TOL && (m.precision - op).abs() < TOL);
    let b = b_cubed(&key, &resp);
    let (or, op) = oracle_b_cubed(&key, &resp);
    assert!((b.f1 - 12.0 / 17.0).abs() < TOL);
    assert!((b.recall - or).abs() < TOL && (b.precision - op).abs() < TOL);
    assert!((b.recall - 2.0 / 3.0).abs() < TOL && (b.precision - 0.75).abs() < TOL);
    let c = ceaf_e(&key, &resp);
    let total = oracle_ceaf_total(&key, &resp);
    assert!((total - (0.8 + 2.0 / 3.0)).abs() < TOL);
    assert!((c.f1 - 11.0 / 15.0).abs() < TOL);
    for p in [muc(&key, &key), b_cubed(&key, &key), ceaf_e(&key, &key)] {
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let n = rng.gen_range(1..=9);
        let universe: Vec<u32> = (0..n).collect();
        let k = random_partition(&mut rng, &universe, 6);
        // responses may drop mentions and add spurious ones
        let mut resp_universe: Vec<u32> = universe.iter().copied().filter(|_| rng.gen_bool(0.85)).collect();
        resp_universe.extend((100..100 + rng.gen_range(0..3)).map(|x| x as u32));
        if resp_universe.is_empty() {
            resp_universe.push(0);
        }
        let r = random_partition(&mut rng, &resp_universe, 6);

        let got = ceaf_e(&k, &r);
        let total = oracle_ceaf_total(&k, &r);
        let (er, ep) = (total / k.len() as f64, total / r.len() as f64);
        assert!((got.recall - er).abs() < TOL, "case {case}: {k:?} vs {r:?}");
        assert!((got.precision - ep).abs() < TOL, "case {case}");
        assert!((got.f1 - f1(ep, er)).abs() < TOL, "case {case}");

        let got = b_cubed(&k, &r);
        let (er, ep) = oracle_b_cubed(&k, &r);
        assert!((got.recall - er).abs() < TOL && (got.precision - ep).abs() < TOL, "case {case}");
        let got = muc(&k, &r);
        let (er, ep) = oracle_muc(&k, &r);
        assert!((got.recall - er).abs() < TOL && (got.precision - ep).abs() < TOL, "case {case}");
    }
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 5.0, "took {secs:.2}s");
    println!("PASS metric oracles: worked example and 200 random CEAFe/B3/MUC cases within {TOL:e}, {secs:.2}s (limit 5s)");
}

// -------------------------------------------------------------- gradients

const GRAD_TOL: f64 = 1e-3;
/// Gradients below this magnitude are compared absolutely.
const GRAD_FLOOR: f64 = 1e-5;
/// Small enough that no perturbation crosses a ReLU kink on this model.
const STEP: f64 = 1e-4;

/// Central differences over every scalar of `params`, stepping in f32 and
/// dividing by the step actually taken.
fn check_gradients(
    label: &str,
    params: &mut Parameters,
    analytic: &Gradients,
    loss: &dyn Fn(&Parameters) -> f64,
) -> (usize, f64) {
    let names: Vec<String> = params.names().map(String::from).collect();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for name in names {
        let len = params.get(&name).unwrap().data.len();
        for i in 0..len {
            let orig = params.get(&name).unwrap().data[i];
            let up = (f64::from(orig) + STEP) as f32;
            let down = (f64::from(orig) - STEP) as f32;
            params.get_mut(&name).unwrap().data[i] = up;
            let lu = loss(params);
            params.get_mut(&name).unwrap().data[i] = down;
            let ld = loss(params);
            params.get_mut(&name).unwrap().data[i] = orig;
            let numeric = (lu - ld) / (f64::from(up) - f64::from(down));
            let a = analytic.get(&name).unwrap().data()[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
            assert!(err < GRAD_TOL, "{label} {name}[{i}]: analytic {a:e}, numeric {numeric:e}");
            worst = worst.max(err);
            checked += 1;
        }
    }
    (checked, worst)
}

#[test]
fn gradients_match_finite_differences() {
    let t = Instant::now();
    let docs = [
        Document::with_clusters(
            "g1",
            vec![words("Ann said \" she saw Rome"), words("It was far")],
            vec![
                vec![MentionSpan::new(0, 0, 0).typed("PER"), MentionSpan::new(0, 3, 3).typed("PER")],
                vec![MentionSpan::new(0, 5, 5).typed("LOC"), MentionSpan::new(1, 0, 0)],
                vec![MentionSpan::new(1, 1, 2).typed("OTHER")],
            ],
        ),
        Document::with_clusters(
            "g2",
            vec![words("the old mill near the river closed")],
            vec![
                vec![MentionSpan::new(0, 0, 2).typed("FAC"), MentionSpan::new(0, 1, 2).typed("FAC")],
                vec![MentionSpan::new(0, 4, 5).typed("LOC")],
            ],
        ),
    ];
    assert!(docs.iter().all(|d| d.token_count() <= 10));
    let config = Config {
        bilstm_hidden: 8,
        type_embedding_dim: 4,
        feature_embedding_dim: 4,
        fc_sizes: vec![10, 10],
        dropout: 0.0,
        seed: 11,
        ..Config::default()
    };
    let dim = 16;
    let model = CorefModel::new(config, ModelVariant::EtFull, TypeScheme::common(), dim).unwrap();
    let embs: Vec<Matrix> = docs.iter().map(|d| synth_embeddings(d, dim, 3)).collect();
    let total_loss = |p: &Parameters| -> f64 {
        let mut m = model.clone();
        m.params = p.clone();
        docs.iter().zip(&embs).map(|(d, e)| m.document_loss(d, e).unwrap()).sum()
    };
    let mut analytic = Gradients::zeros_like(&model.params);
    for (d, e) in docs.iter().zip(&embs) {
        let (_, g) = model.document_gradients(d, e).unwrap();
        for (name, m) in g.iter() {
            analytic.accumulate(name, m);
        }
    }
    let mut params = model.params.clone();
    let (pair_count, pair_worst) = check_gradients("pair loss", &mut params, &analytic, &total_loss);

    let labels: Vec<String> = TypeScheme::common().class_labels().into_iter().map(String::from).collect();
    let clf = TypeClassifier::new(labels, dim, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let xs = Matrix::from_vec(6, dim, (0..6 * dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let ys = [0, 1, 2, 3, 4, 1];
    let (_, clf_grads) = clf.loss_and_gradients(&xs, &ys).unwrap();
    let clf_loss = |p: &Parameters| TypeClassifier { params: p.clone(), ..clf.clone() }.loss(&xs, &ys).unwrap();
    let mut clf_params = clf.params.clone();
    let (clf_count, clf_worst) = check_gradients("classifier loss", &mut clf_params, &clf_grads, &clf_loss);

    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 60.0, "took {secs:.1}s");
    println!(
        "PASS gradients: {pair_count} pair-loss and {clf_count} classifier scalars, worst relative error {:.2e} (limit {GRAD_TOL:e}, floor {GRAD_FLOOR:e}), {secs:.1}s (limit 60s)",
        pair_worst.max(clf_worst)
    );
}

// ----------------------------------------------------------------- layout

fn tensor_row(p: &Parameters, name: &str, row: usize) -> Vec<f64> {
    let t = p.get(name).unwrap();
    t.data[row * t.cols..(row + 1) * t.cols].iter().map(|&v| f64::from(v)).collect()
}

#[test]
fn representation_layout() {
    let common = TypeScheme::common();
    for (variant, mention, pair_extra) in [
        (ModelVariant::Baseline, 1240, 40),
        (ModelVariant::EtSelf, 1260, 40),
        (ModelVariant::EtCross, 1240, 60),
        (ModelVariant::EtFull, 1260, 60),
    ] {
        let m = CorefModel::new(Config::default(), variant, common, 8).unwrap();
        let l = m.mention_layout();
        assert_eq!(l.len(), mention, "{variant}");
        assert_eq!((l.start(), l.end(), l.attention()), (0..400, 400..800, 800..1200));
        assert_eq!((l.width(), l.quote()), (1200..1220, 1220..1240));
        assert_eq!(l.entity_type(), variant.uses_self().then_some(1240..1260));
        let p = m.pair_layout();
        assert_eq!(p.len(), 3 * mention + pair_extra, "{variant}");
        assert_eq!(p.consistency().is_some(), variant.uses_cross());
    }

    // segment contents against straight-line recomputation
    let doc = Document::with_clusters(
        "lay",
        vec![words("Mr Smith went to \" New York City \" today")],
        vec![
            vec![MentionSpan::new(0, 0, 1).typed("PER")],
            vec![MentionSpan::new(0, 5, 7).typed("LOC")],
        ],
    );
    let emb = synth_embeddings(&doc, 8, 1);
    let model = CorefModel::new(Config::default(), ModelVariant::EtFull, common, 8).unwrap();
    let states = model.bilstm_states(&emb).unwrap();
    let rep = model.encode_mention(&doc, &states, 1).unwrap();
    let l = rep.layout;
    assert_eq!(rep.segment(l.start()), states.row(5));
    assert_eq!(rep.segment(l.end()), states.row(7));
    let w: Vec<f64> = model.params.get("attn.w").unwrap().data.iter().map(|&v| f64::from(v)).collect();
    let b = f64::from(model.params.get("attn.b").unwrap().data[0]);
    let scores: Vec<f64> = (5..=7).map(|t| states.row(t).iter().zip(&w).map(|(x, y)| x * y).sum::<f64>() + b).collect();
    let z: f64 = scores.iter().map(|s| s.exp()).sum();
    for c in 0..400 {
        let expect: f64 = (5..=7).zip(&scores).map(|(t, s)| s.exp() / z * states.get(t, c)).sum();
        assert!((rep.vector[l.attention().start + c] - expect).abs() < 1e-12);
    }
    assert_eq!(rep.width_bucket, 2);
    assert!(rep.quoted);
    assert_eq!(rep.segment(l.width()), tensor_row(&model.params, "emb.width", 2));
    assert_eq!(rep.segment(l.quote()), tensor_row(&model.params, "emb.quote", 1));
    let loc = common.type_index(Some("LOC")).unwrap();
    assert_eq!(rep.segment(l.entity_type().unwrap()), tensor_row(&model.params, "emb.type", loc));

    // baseline ignores annotations; typed variants do not
    let small = Config { bilstm_hidden: 4, fc_sizes: vec![8], ..Config::default() };
    let mut retyped = doc.clone();
    retyped.mentions[0].entity_type = Some("LOC".into());
    let mut untyped = doc.clone();
    untyped.mentions.iter_mut().for_each(|m| m.entity_type = None);
    for variant in ModelVariant::ALL {
        let m = CorefModel::new(small.clone(), variant, common, 8).unwrap();
        let a = m.score_document(&doc, &emb).unwrap();
        let b = m.score_document(&retyped, &emb).unwrap();
        let c = m.score_document(&untyped, &emb).unwrap();
        if variant.uses_types() {
            assert_ne!(a, b, "{variant}");
        } else {
            assert_eq!(a, b);
            assert_eq!(a, c);
        }
    }

    // tc truth table
    let tc_doc = Document::with_clusters(
        "tc",
        vec![words("a b c d e")],
        vec![
            vec![MentionSpan::new(0, 0, 0).typed("LOC"), MentionSpan::new(0, 1, 1).typed("LOC")],
            vec![MentionSpan::new(0, 2, 2).typed("PER")],
            vec![MentionSpan::new(0, 3, 3), MentionSpan::new(0, 4, 4)],
        ],
    );
    let full = CorefModel::new(small.clone(), ModelVariant::EtFull, common, 8).unwrap();
    let base = CorefModel::new(small, ModelVariant::Baseline, common, 8).unwrap();
    let table = [((0, 1), 0), ((0, 2), 1), ((2, 3), 1), ((3, 4), 0)];
    for ((j, k), expect) in table {
        assert_eq!(full.pair_features(&tc_doc, j, k).type_consistency, Some(expect), "{j},{k}");
        assert_eq!(base.pair_features(&tc_doc, j, k).type_consistency, None);
    }
    println!("PASS layout: |m| = 1240, |m'| = 1260, segments exact (attention within 1e-12), baseline type-invariant, tc table of 4 cases");
}

// ------------------------------------------------------------ directional

#[test]
fn synthetic_types_help() {
    const MARGIN: f64 = 3.0;
    let t = Instant::now();
    let mut base = (0.0, 0.0);
    let mut full = (0.0, 0.0);
    let seeds = [0u64, 1, 2];
    for &seed in &seeds {
        let docs = synthetic_corpus(&SynthSpec { documents: 60, seed, ..SynthSpec::default() });
        let embedder = SynthEmbedder { dim: 32, seed };
        let config = Config {
            bilstm_hidden: 16,
            type_embedding_dim: 8,
            feature_embedding_dim: 8,
            fc_sizes: vec![32, 32],
            epochs: 10,
            seed,
            ..Config::default()
        };
        for (variant, acc) in [(ModelVariant::Baseline, &mut base), (ModelVariant::EtFull, &mut full)] {
            let (_, r) =
                run_single(&docs[..40], &docs[40..], &embedder, variant, TypeScheme::common(), &config).unwrap();
            acc.0 += 100.0 * r.report.avg_f1 / seeds.len() as f64;
            acc.1 += r.report.impure_clusters as f64 / seeds.len() as f64;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let gain = full.0 - base.0;
    assert!(gain >= MARGIN, "Avg F1 gain {gain:.2} (baseline {:.2}, et_full {:.2})", base.0, full.0);
    assert!(full.1 < base.1, "#IC et_full {:.1} vs baseline {:.1}", full.1, base.1);
    println!(
        "PASS synthetic: Avg F1 baseline {:.2} -> et_full {:.2} (+{gain:.2}, need +{MARGIN}), #IC {:.1} -> {:.1}, 3 seeds in {secs:.1}s",
        base.0, full.0, base.1, full.1
    );
}

// ------------------------------------------------------ types and mapping

#[test]
fn type_propagation_and_common_mapping() {
    let wiki = TypeScheme::by_name("wikicoref-orig").unwrap();
    let doc = Document::with_clusters(
        "la",
        vec![words("Los Angeles is big and it is sunny")],
        vec![vec![MentionSpan::new(0, 0, 1).typed("PLACE"), MentionSpan::new(0, 5, 5)]],
    );
    let out = propagate_cluster_types(&doc);
    assert!(out.mentions.iter().all(|m| m.entity_type.as_deref() == Some("PLACE")));
    assert_eq!(wiki.canonical("Place").unwrap(), "PLACE");

    let tables: [(&str, &[(&str, &str)]); 4] = [
        ("litbank-orig", &[("PER", "PER"), ("LOC", "LOC"), ("FAC", "FAC"), ("GPE", "LOC"), ("VEH", "Other"), ("ORG", "ORG")]),
        ("emailcoref-orig", &[("PER", "PER"), ("ORG", "ORG"), ("LOC", "LOC"), ("DIG", "Other")]),
        (
            "wikicoref-orig",
            &[
                ("Organization", "ORG"),
                ("Person", "PER"),
                ("Corporation", "FAC"),
                ("Event", "Other"),
                ("Place", "LOC"),
                ("Thing", "Other"),
                ("OTHER", "Other"),
                ("NA", "Other"),
            ],
        ),
        (
            "ontonotes-orig",
            &[
                ("ORG", "ORG"),
                ("WORK_OF_ART", "Other"),
                ("LOC", "LOC"),
                ("CARDINAL", "Other"),
                ("EVENT", "Other"),
                ("NORP", "Other"),
                ("GPE", "LOC"),
                ("DATE", "Other"),
                ("PERSON", "PER"),
                ("FAC", "FAC"),
                ("QUANTITY", "Other"),
                ("ORDINAL", "Other"),
                ("TIME", "Other"),
                ("PRODUCT", "Other"),
                ("PERCENT", "Other"),
                ("MONEY", "Other"),
                ("LAW", "Other"),
                ("LANGUAGE", "Other"),
                ("NA", "Other"),
            ],
        ),
    ];
    let common = TypeScheme::common();
    let mut rows = 0;
    for (scheme, table) in tables {
        let s = TypeScheme::by_name(scheme).unwrap();
        assert_eq!(s.labels().len(), table.len(), "{scheme}");
        for (orig, target) in table {
            let expect = common.canonical(target).unwrap();
            assert_eq!(map_to_common(orig, s).unwrap(), expect, "{scheme}: {orig}");
            rows += 1;
        }
    }
    println!("PASS propagation and mapping: worked example typed PLACE, {rows} mapping rows exact");
}

// ------------------------------------------------------- cross-validation

fn toy_typed_corpus(n: usize) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let kinds = ["PER", "ORG", "LOC", "FAC", "OTHER"];
    (0..n)
        .map(|i| {
            let tokens: Vec<String> = (0..8).map(|t| format!("w{i}_{t}")).collect();
            let clusters = (0..8)
                .step_by(2)
                .map(|t| {
                    let m = MentionSpan::new(0, t, t);
                    vec![if rng.gen_bool(0.85) { m.typed(kinds.choose(&mut rng).unwrap()) } else { m }]
                })
                .collect();
            Document::with_clusters(format!("cv{i:02}"), vec![tokens], clusters)
        })
        .collect()
}

#[test]
fn crossval_contract() {
    let docs = toy_typed_corpus(20);
    let scheme = TypeScheme::common();
    let labels = scheme.class_labels();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    for d in &docs {
        for m in &d.mentions {
            let mut v: Vec<f64> = (0..labels.len() + 3).map(|_| rng.gen_range(-0.1..0.1)).collect();
            if let Some(t) = &m.entity_type {
                v[labels.iter().position(|l| l == t).unwrap()] += 1.0;
            }
            vectors.insert(mention_key(&d.doc_id, m), v);
        }
    }
    let config = TypePredConfig::default();
    let out = crossval_predict(&docs, &vectors, scheme, &config).unwrap();
    let total: usize = docs.iter().map(|d| d.mentions.len()).sum();
    assert_eq!(out.predictions.len(), total);
    let keys: HashSet<&str> = out.predictions.iter().map(|p| p.key.as_str()).collect();
    assert_eq!(keys.len(), total);
    let index: HashMap<&str, usize> = docs.iter().enumerate().map(|(i, d)| (d.doc_id.as_str(), i)).collect();
    for p in &out.predictions {
        let i = index[p.doc_id.as_str()];
        assert_eq!(p.fold, out.folds[i]);
        assert!(!out.seen[p.fold].contains(&i), "fold {} saw document {i}", p.fold);
    }
    let report = evaluate_typepred(&docs, &out.sidecar());
    assert_eq!(report.missing, 0);
    assert!(report.overall.samples < total, "untyped mentions should not be scored");
    assert_eq!(report.overall.macro_f1, 1.0, "{}", report.to_table());
    assert_eq!(out, crossval_predict(&docs, &vectors, scheme, &config).unwrap());
    println!(
        "PASS cross-validation: {total} mentions predicted once each by an unseen-fold model, Macro F1 = {:.4} on {} typed mentions",
        report.overall.macro_f1, report.overall.samples
    );
}

// ------------------------------------------------------------ determinism

#[test]
fn training_is_deterministic() {
    let docs = synthetic_corpus(&SynthSpec { documents: 6, seed: 4, ..SynthSpec::default() });
    let embedder = SynthEmbedder { dim: 12, seed: 4 };
    let config = Config {
        bilstm_hidden: 6,
        type_embedding_dim: 4,
        feature_embedding_dim: 4,
        fc_sizes: vec![12],
        epochs: 2,
        seed: 9,
        ..Config::default()
    };
    let run = || train(&docs[..4], &embedder, ModelVariant::EtFull, TypeScheme::common(), config.clone()).unwrap();
    let (a, _) = run();
    let (b, _) = run();
    let (bytes_a, bytes_b) = (a.to_checkpoint_bytes(), b.to_checkpoint_bytes());
    assert_eq!(bytes_a, bytes_b);

    let test = &docs[4..];
    let scores = |m: &CorefModel| -> Vec<_> {
        test.iter().map(|d| m.score_document(d, &embedder.embed(d).unwrap()).unwrap()).collect()
    };
    let s1 = scores(&a);
    assert_eq!(s1, scores(&a));
    let clusters: Vec<_> = s1.iter().map(|s| resolve(s, true)).collect();
    assert_eq!(clusters, s1.iter().map(|s| resolve(s, true)).collect::<Vec<_>>());
    let predicted: Vec<Document> = test.iter().map(|d| a.predict(d, &embedder.embed(d).unwrap()).unwrap()).collect();
    let r1 = ScoreReport::score(test, &predicted).unwrap();
    assert_eq!(r1, ScoreReport::score(test, &predicted).unwrap());
    println!("PASS determinism: two training runs gave identical {}-byte checkpoints; scoring and resolve repeat exactly", bytes_a.len());
}
