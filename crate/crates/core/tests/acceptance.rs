//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctxner::corpus::{unique_entity_strings, Document, Tag};
use ctxner::datagen::{generate_dataset, write_dataset, GenerationOptions, MockLlm, Provenance};
use ctxner::eval::{entity_prf, make_folds, run_experiment, ExperimentConfig, RetrievalMethod};
use ctxner::nerbridge::GazetteerPredictor;
use ctxner::rerank::{assemble_context, train_lexical_scorer, LogisticObjective, ScorerSpec, TrainOptions, PARAM_COUNT};
use ctxner::retrieval::{tf_weight, Bm25Params, Candidate, ContextWindow, Retriever, Source};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const VOCAB: [&str; 24] = [
    "the", "a", "wolf", "river", "Croaker", "sword", "night", "ran", "fell", "cold", "and", "of", "Elmo", "tower",
    "red", "stone", "went", "north", "fire", "old", "ship", "rain", ",", ".",
];

fn random_doc(rng: &mut ChaCha8Rng, id: &str, max_sentences: usize) -> Document {
    let count = rng.random_range(2..=max_sentences);
    let vocab = rng.random_range(4..=VOCAB.len());
    let sentences = (0..count)
        .map(|_| {
            let len = rng.random_range(1..=12);
            let tokens = (0..len).map(|_| VOCAB[rng.random_range(0..vocab)].to_string()).collect();
            (tokens, None)
        })
        .collect();
    let chapter = rng.random_range(1..=count);
    Document::new(id, id, sentences, chapter).unwrap()
}

/// Exhaustive BM25 written out from the formula, independent of the index.
fn brute_force_bm25(doc: &Document, window: ContextWindow, query: usize, params: Bm25Params) -> Vec<(usize, f64)> {
    let lower = |toks: &[String]| -> Vec<String> {
        toks.iter()
            .filter(|t| t.chars().any(char::is_alphanumeric))
            .map(|t| t.to_lowercase())
            .collect()
    };
    let range = window.range(doc);
    let bags: Vec<Vec<String>> = range.clone().map(|i| lower(&doc.sentences[i].tokens)).collect();
    let n = bags.len() as f64;
    let avg = (bags.iter().map(Vec::len).sum::<usize>() as f64 / n).max(1.0);
    let q: BTreeSet<String> = lower(&doc.sentences[query].tokens).into_iter().collect();
    let mut out = Vec::new();
    for (slot, i) in range.enumerate() {
        if i == query {
            continue;
        }
        let mut score = 0.0;
        for t in &q {
            let tf = bags[slot].iter().filter(|x| *x == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = bags.iter().filter(|b| b.contains(t)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let len = bags[slot].len() as f64;
            score += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * len / avg));
        }
        if score > 0.0 {
            out.push((i, score));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

fn bm25_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut compared = 0;
    for c in 0..20 {
        let doc = random_doc(&mut rng, &format!("c{c}"), 50);
        let window = if rng.random_bool(0.5) { ContextWindow::FirstChapter } else { ContextWindow::FullBook };
        let params = Bm25Params {
            k1: rng.random_range(0.5..2.0),
            b: rng.random_range(0.0..=1.0),
        };
        let r = Retriever::with_heuristic_nouns(&doc, window, params).map_err(|e| e.to_string())?;
        for q in 0..doc.len() {
            let n = rng.random_range(1..=doc.len());
            let got = r.bm25_topn(q, n);
            let mut want = brute_force_bm25(&doc, window, q, params);
            want.truncate(n);
            ensure(got.len() == want.len(), || format!("corpus {c} query {q}: {} vs {} results", got.len(), want.len()))?;
            for (g, (wi, ws)) in got.iter().zip(&want) {
                ensure(g.index == *wi && (g.heuristic_score - ws).abs() <= 1e-9, || {
                    format!("corpus {c} query {q}: got ({}, {}), want ({wi}, {ws})", g.index, g.heuristic_score)
                })?;
            }
            compared += 1;
        }
    }
    // keep the helper honest: tf_weight at tf=0 contributes nothing
    ensure(tf_weight(0.0, 3.0, 3.0, Bm25Params::default()) == 0.0, || "tf_weight(0) != 0".into())?;
    Ok(format!("20 corpora, {compared} queries match the exhaustive scorer"))
}

fn pooling_contract() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let docs: Vec<Document> = (0..25).map(|i| random_doc(&mut rng, &format!("p{i}"), 60)).collect();
    for case in 0..1000 {
        let doc = &docs[case % docs.len()];
        let window = if rng.random_bool(0.5) { ContextWindow::FirstChapter } else { ContextWindow::FullBook };
        let r = Retriever::with_heuristic_nouns(doc, window, Bm25Params::default()).map_err(|e| e.to_string())?;
        let query = rng.random_range(0..doc.len());
        let n = rng.random_range(1..=24);
        let seed = rng.random();
        let pool = r.pool(query, n, seed);
        let range = window.range(doc);
        ensure(pool.len() <= 4 * n, || format!("case {case}: |pool| = {} > 4n", pool.len()))?;
        ensure(pool.iter().all(|c| c.index != query), || format!("case {case}: query in its own pool"))?;
        ensure(pool.iter().all(|c| range.contains(&c.index)), || format!("case {case}: candidate outside window"))?;
        let (before, after) = r.surrounding(query, n);
        let mut oracle: BTreeMap<usize, Source> = BTreeMap::new();
        for c in r.bm25_topn(query, n).into_iter().chain(r.samenoun_topn(query, n, seed)).chain(before).chain(after) {
            if c.index != query {
                oracle.entry(c.index).or_insert(c.source);
            }
        }
        let got: BTreeMap<usize, Source> = pool.iter().map(|c| (c.index, c.source)).collect();
        ensure(got.len() == pool.len(), || format!("case {case}: duplicate in pool"))?;
        ensure(got == oracle, || format!("case {case}: pool differs from set-union oracle"))?;
        ensure(pool.windows(2).all(|w| w[0].index < w[1].index), || format!("case {case}: pool not sorted"))?;
    }
    Ok("1000 random (query, n) cases".into())
}

fn datagen_invariants() -> Check {
    let docs = common::mock_corpus();
    let llm = MockLlm::new(5).with_miss_rate(0.1);
    let options = GenerationOptions {
        seed: 21,
        ..GenerationOptions::default()
    };
    let run = || -> Result<(Vec<u8>, Vec<u8>, _, _), String> {
        let (train, eval, report) = generate_dataset(&docs, &llm, &options).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &train, &eval).map_err(|e| e.to_string())?;
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        let report_bytes = serde_json::to_vec(&report).map_err(|e| e.to_string())?;
        Ok((bytes, report_bytes, train.into_iter().chain(eval).collect::<Vec<_>>(), report))
    };
    let (bytes_a, report_a, all, report) = run()?;
    let (bytes_b, report_b, _, _) = run()?;
    ensure(bytes_a == bytes_b && report_a == report_b, || "two seeded runs differ".into())?;

    let unique: usize = unique_entity_strings(&docs).values().map(BTreeSet::len).sum();
    let positives: Vec<_> = all.iter().filter(|e| e.label == 1).collect();
    let keys: HashSet<_> = positives.iter().map(|p| (p.entity_class, p.entity_surface.clone())).collect();
    ensure(keys.len() == positives.len(), || "two positives share an entity string".into())?;
    ensure(positives.len() + report.skipped.len() == unique && report.unique_entities == unique, || {
        format!("{} positives + {} skipped != {unique} entities", positives.len(), report.skipped.len())
    })?;
    ensure(report.filtered > 0, || "mock misses never exercised the filter".into())?;
    for p in &positives {
        let s = p.entity_surface.as_deref().unwrap_or("\u{0}");
        ensure(p.context_text.contains(s), || format!("positive lacks {s:?}: {}", p.context_text))?;
    }
    let contexts: HashSet<&str> = positives.iter().map(|p| p.context_text.as_str()).collect();
    let swapped: Vec<_> = all.iter().filter(|e| e.provenance == Provenance::PositiveSwap).collect();
    ensure(!swapped.is_empty(), || "no swapped negatives".into())?;
    for s in &swapped {
        let foreign = s.entity_surface.as_deref().unwrap_or("\u{0}");
        ensure(
            s.context_text.contains(foreign) && !s.query_text.contains(foreign) && contexts.contains(s.context_text.as_str()),
            || format!("swapped negative breaks the rule: {s:?}"),
        )?;
    }
    Ok(format!(
        "{} positives for {unique} entity strings ({} filtered), {} swapped negatives, byte-identical reruns",
        positives.len(),
        report.filtered,
        swapped.len()
    ))
}

fn tags(s: &str) -> Vec<Tag> {
    s.split_whitespace().map(|t| t.parse().unwrap()).collect()
}

type Fixture = (Vec<&'static str>, Vec<&'static str>, f64, f64, f64);

fn metric_fixtures() -> Check {
    // (gold sentences, predicted sentences, P, R, F1), all counted by hand
    let cases: Vec<Fixture> = vec![
        (vec!["B-PER O B-LOC O B-ORG I-ORG", "B-PER I-PER"], vec!["B-PER O B-LOC O B-ORG I-ORG", "B-PER I-PER"], 1.0, 1.0, 1.0),
        (vec!["B-PER I-PER O"], vec!["B-PER O O"], 0.0, 0.0, 0.0),
        (vec!["B-PER O B-LOC"], vec!["B-PER O B-PER"], 0.5, 0.5, 0.5),
        (vec!["B-PER O O"], vec!["B-PER O B-LOC"], 0.5, 1.0, 2.0 / 3.0),
        (vec!["B-PER O B-LOC"], vec!["B-PER O O"], 1.0, 0.5, 2.0 / 3.0),
        // lenient decoding: a bare I- opens an entity
        (vec!["B-PER I-PER O"], vec!["I-PER I-PER O"], 1.0, 1.0, 1.0),
        // class switch inside a span splits it
        (vec!["B-PER I-PER"], vec!["B-PER I-LOC"], 0.0, 0.0, 0.0),
        (vec!["O O O"], vec!["B-ORG O O"], 0.0, 0.0, 0.0),
        (vec!["B-LOC O", "B-LOC O", "O B-ORG"], vec!["B-LOC O", "O O", "O B-ORG"], 1.0, 2.0 / 3.0, 0.8),
        (vec!["B-PER B-PER O"], vec!["B-PER I-PER O"], 0.0, 0.0, 0.0),
        (vec!["B-PER O B-PER O", "B-LOC I-LOC I-LOC"], vec!["B-PER O B-PER B-LOC", "B-LOC I-LOC O"], 0.5, 2.0 / 3.0, 4.0 / 7.0),
        (vec!["O I-ORG I-ORG B-ORG"], vec!["B-ORG I-ORG I-ORG B-ORG"], 0.5, 0.5, 0.5),
    ];
    for (i, (gold, pred, p, r, f)) in cases.iter().enumerate() {
        let g: Vec<Vec<Tag>> = gold.iter().map(|s| tags(s)).collect();
        let q: Vec<Vec<Tag>> = pred.iter().map(|s| tags(s)).collect();
        let prf = entity_prf(&g, &q).map_err(|e| e.to_string())?;
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        ensure(close(prf.precision, *p) && close(prf.recall, *r) && close(prf.f1, *f), || {
            format!("fixture {i}: got ({}, {}, {}), want ({p}, {r}, {f})", prf.precision, prf.recall, prf.f1)
        })?;
    }
    let flagged = entity_prf(&[tags("B-PER")], &[tags("O")]).map_err(|e| e.to_string())?;
    ensure(flagged.precision_undefined && flagged.precision == 0.0, || "empty prediction not flagged".into())?;
    Ok(format!("{} hand-computed fixtures reproduced exactly", cases.len()))
}

fn end_to_end() -> Check {
    let docs = common::mock_corpus();
    let predictor = GazetteerPredictor::new(&common::gazetteer(), true).map_err(|e| e.to_string())?;
    let (train, _eval, _) = generate_dataset(
        &docs,
        &MockLlm::new(3),
        &GenerationOptions {
            seed: 3,
            ..GenerationOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let model = train_lexical_scorer(&train, TrainOptions::default()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model_path = dir.path().join("lexical.json");
    model.save(&model_path).map_err(|e| e.to_string())?;

    let config = |method, scorer: Option<ScorerSpec>, seed| ExperimentConfig {
        scorer,
        k: vec![3],
        n: 8,
        runs: 3,
        seed,
        ..ExperimentConfig::new(method)
    };
    let run_f1 = |c: &ExperimentConfig| -> Result<Vec<f64>, String> {
        let report = run_experiment(c, &docs, &predictor).map_err(|e| e.to_string())?;
        Ok((0..c.runs)
            .map(|run| {
                let (tp, pred, gold) = report
                    .rows
                    .iter()
                    .filter(|r| r.run == run)
                    .fold((0, 0, 0), |a, r| (a.0 + r.true_positives, a.1 + r.predicted, a.2 + r.gold));
                let (p, r) = (tp as f64 / pred.max(1) as f64, tp as f64 / gold.max(1) as f64);
                if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 }
            })
            .collect())
    };
    let mut summary = Vec::new();
    for seed in [1u64, 2, 3] {
        let lexical = run_f1(&config(
            RetrievalMethod::NeuralPool,
            Some(ScorerSpec::Lexical { model_path: model_path.clone() }),
            seed,
        ))?;
        let random = run_f1(&config(RetrievalMethod::NeuralPool, Some(ScorerSpec::Random { seed }), seed))?;
        let none = run_f1(&config(RetrievalMethod::NoRetrieval, None, seed))?;
        for run in 0..3 {
            ensure(lexical[run] > none[run] && lexical[run] > random[run], || {
                format!(
                    "seed {seed} run {run}: lexical {:.4}, random {:.4}, none {:.4}",
                    lexical[run], random[run], none[run]
                )
            })?;
        }
        summary.push(format!("seed {seed}: {:.3} > {:.3} / {:.3}", lexical[0], random[0], none[0]));
    }
    Ok(format!("lexical > random / no_retrieval in every run ({})", summary.join("; ")))
}

fn ordering_contract() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for case in 0..1000 {
        let len = rng.random_range(1..=200);
        let query = rng.random_range(0..len);
        let mut others: Vec<usize> = (0..len).filter(|&i| i != query).collect();
        others.shuffle(&mut rng);
        others.truncate(rng.random_range(0..=others.len().min(24)));
        let sources = [Source::Bm25, Source::Samenoun, Source::Before, Source::After];
        let selected: Vec<Candidate> = others
            .iter()
            .map(|&index| Candidate {
                index,
                source: sources[rng.random_range(0..4)],
                heuristic_score: rng.random(),
            })
            .collect();
        let ctx = assemble_context(query, &selected).map_err(|e| e.to_string())?;
        ensure(ctx.sentences.windows(2).all(|w| w[0] < w[1]), || format!("case {case}: not increasing"))?;
        ensure(ctx.sentences.iter().filter(|&&i| i == query).count() == 1, || format!("case {case}: query count"))?;
        ensure(ctx.query_index() == query && ctx.len() == selected.len() + 1, || format!("case {case}: wrong shape"))?;
    }
    Ok("1000 random assemblies".into())
}

fn fold_protocol() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let docs: Vec<Document> = (0..40).map(|i| random_doc(&mut rng, &format!("novel{i:02}"), 4)).collect();
    let plan = make_folds(&docs, 5, 42).map_err(|e| e.to_string())?;
    ensure(plan.sizes() == vec![8; 5], || format!("fold sizes {:?}", plan.sizes()))?;
    ensure(plan.assignment.len() == 40, || "not a partition".into())?;
    ensure(plan == make_folds(&docs, 5, 42).map_err(|e| e.to_string())?, || "not deterministic".into())?;
    ensure(plan != make_folds(&docs, 5, 43).map_err(|e| e.to_string())?, || "seed ignored".into())?;
    Ok("40 documents -> 5 folds of 8, stable under seed".into())
}

fn gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let objective = LogisticObjective {
        features: (0..60).map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0))).collect(),
        labels: (0..60).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect(),
        l2: 0.01,
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for point in 0..100 {
        let params: [f64; PARAM_COUNT] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let analytic = objective.gradient(&params);
        for i in 0..PARAM_COUNT {
            let (mut up, mut down) = (params, params);
            up[i] += h;
            down[i] -= h;
            let numeric = (objective.loss(&up) - objective.loss(&down)) / (2.0 * h);
            let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            ensure(rel <= 1e-5, || format!("point {point} param {i}: analytic {} numeric {numeric}", analytic[i]))?;
        }
    }
    Ok(format!("100 points, worst relative error {worst:.2e}"))
}

type Criterion = (&'static str, Duration, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("bm25 oracle equivalence", Duration::from_secs(5), bm25_oracle),
        ("pooling contract", Duration::from_secs(10), pooling_contract),
        ("datagen invariants", Duration::from_secs(10), datagen_invariants),
        ("evaluation metric fixtures", Duration::from_secs(10), metric_fixtures),
        ("end-to-end synthetic benefit", Duration::from_secs(60), end_to_end),
        ("ordering contract", Duration::from_secs(10), ordering_contract),
        ("fold protocol", Duration::from_secs(10), fold_protocol),
        ("lexical gradient check", Duration::from_secs(10), gradient_check),
    ];
    let mut failures = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > budget => Err(format!("{detail}; took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{took:.2?}]"),
            Err(why) => {
                failures += 1;
                println!("FAIL  {name}: {why} [{took:.2?}]");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
