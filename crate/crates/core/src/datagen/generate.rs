//! Positive generation, the two negative sources and the train/eval split.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::llm::{llm_generate, LlmClient, LlmRequest};
use super::{allowed_kinds, build_prompt, Provenance, RetrievalExample};
use crate::corpus::{extract_mentions, Document, EntityClass, Mention};
use crate::error::{Error, Result};
use crate::seed::SeedKey;

type EntityKey = (EntityClass, String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationOptions {
    pub seed: u64,
    /// Concurrent LLM requests.
    pub parallelism: usize,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
    /// Cross-document negatives drawn per accepted positive.
    pub sampled_negatives_per_positive: usize,
    /// Whether to add one swapped negative per positive.
    pub positive_swap: bool,
    pub eval_fraction: f64,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions {
            seed: 0,
            parallelism: 4,
            max_tokens: LlmRequest::DEFAULT_MAX_TOKENS,
            temperature: LlmRequest::DEFAULT_TEMPERATURE,
            stop: vec!["\n".into()],
            sampled_negatives_per_positive: 1,
            positive_swap: true,
            eval_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedEntity {
    pub entity_class: EntityClass,
    pub surface: String,
    pub reason: String,
}

/// Summary of one generation run. Contains no timings, so two runs with the
/// same seed serialize identically.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub unique_entities: usize,
    pub accepted: usize,
    /// LLM answered but the entity string was missing.
    pub filtered: usize,
    pub empty: usize,
    pub failed: usize,
    pub skipped: Vec<SkippedEntity>,
    pub negative_sampling: usize,
    pub positive_swap: usize,
    /// Positives for which no swap partner was eligible.
    pub swap_skipped: usize,
    pub train: usize,
    pub eval: usize,
}

enum Outcome {
    Accepted(RetrievalExample),
    Filtered,
    Empty,
    Failed(String),
}

struct Job<'a> {
    class: EntityClass,
    surface: &'a str,
    query_text: String,
    request: LlmRequest,
}

/// One LLM-generated positive per unique `(class, surface)`, in that order.
pub fn generate_positives(
    docs: &[Document],
    llm: &dyn LlmClient,
    options: &GenerationOptions,
) -> Result<(Vec<RetrievalExample>, GenerationReport)> {
    let mut occurrences: BTreeMap<EntityKey, Vec<(usize, usize, Mention)>> = BTreeMap::new();
    for (d, doc) in docs.iter().enumerate() {
        for sentence in doc.annotated_sentences() {
            for mention in extract_mentions(sentence)? {
                occurrences
                    .entry((mention.entity_class, mention.surface.clone()))
                    .or_default()
                    .push((d, sentence.index, mention));
            }
        }
    }

    let mut jobs = Vec::with_capacity(occurrences.len());
    for ((class, surface), occ) in &occurrences {
        let key = SeedKey::new(options.seed).str(class.as_str()).str(surface);
        let (d, s, mention) = &occ[key.str("occurrence").rng().random_range(0..occ.len())];
        let kinds = allowed_kinds(*class);
        let kind = kinds[key.str("kind").rng().random_range(0..kinds.len())];
        let sentence = &docs[*d].sentences[*s];
        let request = LlmRequest {
            prompt: build_prompt(kind, mention, sentence)?,
            max_tokens: options.max_tokens,
            temperature: options.temperature,
            stop: options.stop.clone(),
        };
        request.validate()?;
        jobs.push(Job {
            class: *class,
            surface,
            query_text: sentence.text(),
            request,
        });
    }

    let run = |job: &Job| match llm_generate(llm, &job.request) {
        Err(e) => Outcome::Failed(e.to_string()),
        Ok(text) if text.is_empty() => Outcome::Empty,
        Ok(text) if !text.contains(job.surface) => Outcome::Filtered,
        Ok(text) => Outcome::Accepted(RetrievalExample {
            query_text: job.query_text.clone(),
            context_text: text,
            label: 1,
            provenance: Provenance::LlmPositive,
            entity_surface: Some(job.surface.to_string()),
            entity_class: Some(job.class),
        }),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start LLM worker pool: {e}")))?;
    // collect() keeps input order, whatever the completion order
    let outcomes: Vec<Outcome> = pool.install(|| jobs.par_iter().map(run).collect());

    let mut report = GenerationReport {
        unique_entities: jobs.len(),
        ..GenerationReport::default()
    };
    let mut positives = Vec::new();
    for (job, outcome) in jobs.iter().zip(outcomes) {
        let reason = match outcome {
            Outcome::Accepted(example) => {
                positives.push(example);
                report.accepted += 1;
                continue;
            }
            Outcome::Filtered => {
                report.filtered += 1;
                "entity missing from generated sentence".to_string()
            }
            Outcome::Empty => {
                report.empty += 1;
                "empty generation".to_string()
            }
            Outcome::Failed(message) => {
                log::warn!("LLM request for {} {:?} failed: {message}", job.class, job.surface);
                report.failed += 1;
                message
            }
        };
        report.skipped.push(SkippedEntity {
            entity_class: job.class,
            surface: job.surface.to_string(),
            reason,
        });
    }
    Ok((positives, report))
}

/// Label-0 pairs of an annotated query sentence and a sentence from another
/// document. Example `i` only depends on `(seed, i)`.
pub fn negative_sampling(docs: &[Document], count: usize, seed: u64) -> Result<Vec<RetrievalExample>> {
    if docs.len() < 2 {
        return Err(Error::InvalidInput("negative sampling needs at least two documents".into()));
    }
    let queries: Vec<(usize, usize)> = docs
        .iter()
        .enumerate()
        .flat_map(|(d, doc)| doc.annotated_sentences().map(move |s| (d, s.index)))
        .collect();
    if count > 0 && queries.is_empty() {
        return Err(Error::InvalidInput("negative sampling needs annotated sentences".into()));
    }
    let non_empty: Vec<usize> = (0..docs.len()).filter(|&d| !docs[d].is_empty()).collect();
    (0..count)
        .map(|i| {
            let mut rng = SeedKey::new(seed).str("negative_sampling").u64(i as u64).rng();
            let (qd, qs) = queries[rng.random_range(0..queries.len())];
            let others: Vec<usize> = non_empty.iter().copied().filter(|&d| d != qd).collect();
            if others.is_empty() {
                return Err(Error::InvalidInput("no other non-empty document to sample from".into()));
            }
            let other = &docs[others[rng.random_range(0..others.len())]];
            let context = &other.sentences[rng.random_range(0..other.len())];
            Ok(RetrievalExample {
                query_text: docs[qd].sentences[qs].text(),
                context_text: context.text(),
                label: 0,
                provenance: Provenance::NegativeSampling,
                entity_surface: None,
                entity_class: None,
            })
        })
        .collect()
}

/// Gives each positive the context of another positive whose entity does not
/// occur in its query. Returns the negatives and the indices of positives
/// that had no eligible partner.
pub fn positive_swap(positives: &[RetrievalExample], seed: u64) -> Result<(Vec<RetrievalExample>, Vec<usize>)> {
    if positives.len() < 2 {
        return Err(Error::InvalidInput("positive swap needs at least two positives".into()));
    }
    let surfaces: Vec<&str> = positives
        .iter()
        .map(|p| {
            p.entity_surface
                .as_deref()
                .ok_or_else(|| Error::InvalidInput("positive example without entity_surface".into()))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(positives.len());
    let mut skipped = Vec::new();
    for (i, p) in positives.iter().enumerate() {
        let eligible: Vec<usize> = (0..positives.len())
            .filter(|&j| j != i && !p.query_text.contains(surfaces[j]))
            .collect();
        if eligible.is_empty() {
            skipped.push(i);
            continue;
        }
        let mut rng = SeedKey::new(seed).str("positive_swap").u64(i as u64).rng();
        let donor = &positives[eligible[rng.random_range(0..eligible.len())]];
        out.push(RetrievalExample {
            query_text: p.query_text.clone(),
            context_text: donor.context_text.clone(),
            label: 0,
            provenance: Provenance::PositiveSwap,
            entity_surface: donor.entity_surface.clone(),
            entity_class: donor.entity_class,
        });
    }
    Ok((out, skipped))
}

/// Seeded split that keeps every query sentence in a single split and the
/// eval label counts at `round(fraction * count)` where the groups allow.
pub fn assemble_dataset(
    positives: &[RetrievalExample],
    negatives: &[RetrievalExample],
    eval_fraction: f64,
    seed: u64,
) -> Result<(Vec<RetrievalExample>, Vec<RetrievalExample>)> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("eval_fraction must be in (0, 1), got {eval_fraction}")));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&RetrievalExample>> = HashMap::new();
    for e in positives.iter().chain(negatives) {
        e.validate()?;
        groups
            .entry(e.query_text.as_str())
            .or_insert_with(|| {
                order.push(e.query_text.as_str());
                Vec::new()
            })
            .push(e);
    }
    let count = |g: &[&RetrievalExample], label: u8| g.iter().filter(|e| e.label == label).count();
    for label in [0u8, 1] {
        let n = groups.values().filter(|g| count(g, label) > 0).count();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least two query groups with label {label}, found {n}"
            )));
        }
    }

    order.shuffle(&mut SeedKey::new(seed).str("assemble_dataset").rng());
    let total = |label: u8| positives.iter().chain(negatives).filter(|e| e.label == label).count();
    let target = [0u8, 1].map(|l| ((total(l) as f64 * eval_fraction).round() as usize).max(1));
    let mut taken = [0usize; 2];
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for q in order {
        let g = &groups[q];
        let c = [count(g, 0), count(g, 1)];
        if taken[0] + c[0] <= target[0] && taken[1] + c[1] <= target[1] {
            taken[0] += c[0];
            taken[1] += c[1];
            eval.extend(g.iter().map(|e| (*e).clone()));
        } else {
            train.extend(g.iter().map(|e| (*e).clone()));
        }
    }
    if eval.is_empty() || train.is_empty() {
        return Err(Error::InvalidInput(
            "query groups are too large to form both a train and an eval split".into(),
        ));
    }
    Ok((train, eval))
}

/// Full pipeline: positives, both negative sources, split.
pub fn generate_dataset(
    docs: &[Document],
    llm: &dyn LlmClient,
    options: &GenerationOptions,
) -> Result<(Vec<RetrievalExample>, Vec<RetrievalExample>, GenerationReport)> {
    let (positives, mut report) = generate_positives(docs, llm, options)?;
    let mut negatives = negative_sampling(
        docs,
        positives.len() * options.sampled_negatives_per_positive,
        options.seed,
    )?;
    report.negative_sampling = negatives.len();
    if options.positive_swap {
        let (swapped, skipped) = positive_swap(&positives, options.seed)?;
        report.positive_swap = swapped.len();
        report.swap_skipped = skipped.len();
        negatives.extend(swapped);
    }
    let (train, eval) = assemble_dataset(&positives, &negatives, options.eval_fraction, options.seed)?;
    report.train = train.len();
    report.eval = eval.len();
    Ok((train, eval, report))
}
