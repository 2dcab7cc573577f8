//! Fold × run × sentence orchestration.

use std::collections::{BTreeMap, HashMap};
use std::slice;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::folds::{make_folds, FoldPlan};
use super::metrics::{class_counts, entity_counts, EntityCounts};
use super::report::{BookRow, ClassRow, CurveRow, RunRow, SummaryRow};
use super::{ExperimentConfig, RetrievalMethod};
use crate::corpus::{Document, EntityClass, Tag};
use crate::error::{Error, Result};
use crate::nerbridge::{predict_query_tags, NerPredictor};
use crate::rerank::{assemble_context, bucket_random_topk, rank_topk, score_batch, RelevanceScorer, ScorerSpec};
use crate::retrieval::{Candidate, Retriever};
use crate::seed::SeedKey;

/// Tags predicted for one query sentence under one `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SentencePrediction {
    pub k: usize,
    pub fold: usize,
    pub run: usize,
    pub doc_id: String,
    pub sentence: usize,
    /// Sentences fed to the tagger, query included, in document order.
    pub context: Vec<usize>,
    pub tags: Vec<Tag>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub config_id: String,
    pub config: ExperimentConfig,
    pub fold_plan: FoldPlan,
    pub rows: Vec<RunRow>,
    pub curves: Vec<CurveRow>,
    pub per_book: Vec<BookRow>,
    pub per_class: Vec<ClassRow>,
    pub summary: SummaryRow,
    #[serde(skip)]
    pub predictions: Vec<SentencePrediction>,
}

type SentenceOutcome = Vec<(Vec<usize>, Vec<Tag>)>;

struct Setup<'a> {
    config: &'a ExperimentConfig,
    docs: &'a [Document],
    retrievers: Vec<Option<Retriever<'a>>>,
    predictor: &'a dyn NerPredictor,
    ks: Vec<usize>,
}

fn prefixes(ranked: &[Candidate], ks: &[usize]) -> Vec<Vec<Candidate>> {
    ks.iter().map(|&k| ranked[..k.min(ranked.len())].to_vec()).collect()
}

impl Setup<'_> {
    fn select(&self, scorer: Option<&dyn RelevanceScorer>, d: usize, q: usize, run_seed: u64) -> Result<Vec<Vec<Candidate>>> {
        let ks = &self.ks;
        if self.config.method == RetrievalMethod::NoRetrieval {
            return Ok(vec![Vec::new(); ks.len()]);
        }
        let doc = &self.docs[d];
        let r = self.retrievers[d]
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("no retriever for {}", doc.doc_id)))?;
        let k_max = ks.last().copied().unwrap_or(0);
        Ok(match self.config.method {
            RetrievalMethod::NoRetrieval => unreachable!(),
            RetrievalMethod::Surrounding => ks
                .iter()
                .map(|&k| {
                    // ⌈k/2⌉ before, ⌊k/2⌋ after
                    let (before, after) = r.surrounding(q, k);
                    let from = before.len().saturating_sub(k.div_ceil(2));
                    let mut out = before[from..].to_vec();
                    out.extend(after.into_iter().take(k / 2));
                    out
                })
                .collect(),
            RetrievalMethod::Bm25 => prefixes(&r.bm25_topn(q, k_max), ks),
            RetrievalMethod::Samenoun => prefixes(&r.samenoun_topn(q, k_max, run_seed), ks),
            RetrievalMethod::NeuralPool => {
                let pool = r.pool(q, self.config.n, run_seed);
                if pool.is_empty() {
                    return Ok(vec![Vec::new(); ks.len()]);
                }
                if let Some(ScorerSpec::BucketRandom { .. }) = self.config.scorer {
                    ks.iter()
                        .map(|&k| {
                            let seed = SeedKey::new(run_seed).str(&doc.doc_id).u64(q as u64).u64(k as u64);
                            bucket_random_topk(&pool, k, seed.finish())
                        })
                        .collect()
                } else {
                    let scorer = scorer.ok_or_else(|| Error::Contract("neural_pool without scorer".into()))?;
                    let rerank = |e| Error::stage(&doc.doc_id, q, "rerank", e);
                    let scores = score_batch(scorer, doc, q, &pool).map_err(rerank)?;
                    prefixes(&rank_topk(&pool, &scores, k_max).map_err(rerank)?, ks)
                }
            }
        })
    }

    fn evaluate(&self, scorer: Option<&dyn RelevanceScorer>, d: usize, q: usize, run_seed: u64) -> Result<SentenceOutcome> {
        let doc = &self.docs[d];
        let selections = self
            .select(scorer, d, q, run_seed)
            .map_err(|e| match e {
                Error::Stage { .. } => e,
                e => Error::stage(&doc.doc_id, q, "retrieval", e),
            })?;
        let mut cache: HashMap<Vec<usize>, Vec<Tag>> = HashMap::new();
        let mut out = Vec::with_capacity(selections.len());
        for selected in selections {
            let assembled = assemble_context(q, &selected).map_err(|e| Error::stage(&doc.doc_id, q, "rerank", e))?;
            let tags = match cache.get(&assembled.sentences) {
                Some(tags) => tags.clone(),
                None => {
                    let tags = predict_query_tags(self.predictor, doc, &assembled)
                        .map_err(|e| Error::stage(&doc.doc_id, q, "ner", e))?;
                    cache.insert(assembled.sentences.clone(), tags.clone());
                    tags
                }
            };
            out.push((assembled.sentences, tags));
        }
        Ok(out)
    }
}

/// Runs one configuration over all folds and runs. Sentences are evaluated
/// on the current rayon pool; any failure aborts with the document,
/// sentence and stage involved.
pub fn run_experiment(config: &ExperimentConfig, docs: &[Document], predictor: &dyn NerPredictor) -> Result<EvalReport> {
    config.validate()?;
    let config_id = config.config_id();
    let plan = make_folds(docs, config.folds, config.seed)?;
    let ks = config.k_values();
    let retrievers = docs
        .iter()
        .map(|d| {
            if config.method == RetrievalMethod::NoRetrieval || d.annotated_sentences().next().is_none() {
                return Ok(None);
            }
            Retriever::with_heuristic_nouns(d, config.window, config.bm25)
                .map(Some)
                .map_err(|e| Error::stage(&d.doc_id, 0, "retrieval", e))
        })
        .collect::<Result<Vec<_>>>()?;
    let fixed_scorer: Option<Arc<dyn RelevanceScorer>> = match &config.scorer {
        Some(spec) if config.method == RetrievalMethod::NeuralPool && !spec.is_random() => Some(spec.build()?),
        _ => None,
    };
    let setup = Setup {
        config,
        docs,
        retrievers,
        predictor,
        ks: ks.clone(),
    };
    let position: HashMap<&str, usize> = docs.iter().enumerate().map(|(i, d)| (d.doc_id.as_str(), i)).collect();

    let mut counts: BTreeMap<(usize, usize, usize, usize), EntityCounts> = BTreeMap::new();
    let mut by_class: BTreeMap<(usize, EntityClass), EntityCounts> = BTreeMap::new();
    let mut predictions = Vec::new();
    let mut sentences = 0;
    for fold in 0..plan.fold_count {
        let mut test_docs: Vec<usize> = plan.fold(fold).iter().map(|id| position[id]).collect();
        test_docs.sort_unstable();
        let units: Vec<(usize, usize)> = test_docs
            .iter()
            .flat_map(|&d| docs[d].annotated_sentences().map(move |s| (d, s.index)))
            .collect();
        sentences += units.len();
        let mut first_run: Option<Vec<SentenceOutcome>> = None;
        for run in 0..config.runs {
            let outcomes = match &first_run {
                Some(previous) if !config.is_stochastic() => previous.clone(),
                _ => {
                    let run_seed = SeedKey::new(config.seed)
                        .str(&config_id)
                        .u64(fold as u64)
                        .u64(run as u64)
                        .finish();
                    let run_scorer = match &config.scorer {
                        Some(spec) if spec.is_random() => Some(spec.with_seed(run_seed).build()?),
                        _ => fixed_scorer.clone(),
                    };
                    let scorer = run_scorer.as_deref();
                    units
                        .par_iter()
                        .map(|&(d, q)| setup.evaluate(scorer, d, q, run_seed))
                        .collect::<Result<Vec<_>>>()?
                }
            };
            for &k in &ks {
                for &d in &test_docs {
                    counts.entry((k, fold, run, d)).or_default();
                }
            }
            for (&(d, q), per_k) in units.iter().zip(&outcomes) {
                let sentence = &docs[d].sentences[q];
                let gold = sentence.tags.as_ref().expect("annotated");
                for (&k, (context, tags)) in ks.iter().zip(per_k) {
                    let gold = slice::from_ref(gold);
                    let pred = slice::from_ref(tags);
                    let stage = |e| Error::stage(&sentence.doc_id, q, "ner", e);
                    counts.entry((k, fold, run, d)).or_default().add(entity_counts(gold, pred).map_err(stage)?);
                    for (class, c) in class_counts(gold, pred).map_err(stage)? {
                        by_class.entry((k, class)).or_default().add(c);
                    }
                    predictions.push(SentencePrediction {
                        k,
                        fold,
                        run,
                        doc_id: sentence.doc_id.clone(),
                        sentence: q,
                        context: context.clone(),
                        tags: tags.clone(),
                    });
                }
            }
            if first_run.is_none() {
                first_run = Some(outcomes);
            }
        }
    }

    let rows: Vec<RunRow> = counts
        .iter()
        .map(|(&(k, fold, run, d), c)| RunRow::new(&config_id, k, fold, run, &docs[d].doc_id, *c))
        .collect();

    let mut fold_runs: BTreeMap<(usize, usize, usize), EntityCounts> = BTreeMap::new();
    let mut pooled: BTreeMap<usize, EntityCounts> = BTreeMap::new();
    let mut books: BTreeMap<(usize, usize), EntityCounts> = BTreeMap::new();
    for (&(k, fold, run, d), c) in &counts {
        fold_runs.entry((k, fold, run)).or_default().add(*c);
        pooled.entry(k).or_default().add(*c);
        books.entry((k, d)).or_default().add(*c);
    }
    let curves: Vec<CurveRow> = ks
        .iter()
        .map(|&k| {
            let per: Vec<_> = fold_runs.range((k, 0, 0)..=(k, usize::MAX, usize::MAX)).map(|(_, c)| c.prf()).collect();
            let mean = |f: fn(&super::Prf) -> f64| per.iter().map(f).sum::<f64>() / per.len() as f64;
            CurveRow::new(
                &config_id,
                k,
                [mean(|p| p.precision), mean(|p| p.recall), mean(|p| p.f1)],
                pooled[&k],
            )
        })
        .collect();
    let per_book = books
        .iter()
        .map(|(&(k, d), c)| BookRow::new(&config_id, k, &docs[d].doc_id, *c))
        .collect();
    let per_class = by_class
        .iter()
        .map(|(&(k, class), c)| ClassRow::new(&config_id, k, class, *c))
        .collect();
    let summary = SummaryRow::new(config, &config_id, &curves, sentences);
    Ok(EvalReport {
        config_id,
        config: config.clone(),
        fold_plan: plan,
        rows,
        curves,
        per_book,
        per_class,
        summary,
        predictions,
    })
}
