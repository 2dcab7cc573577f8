//! Trainable lexical relevance scorer.
//!
//! A logistic regression over five pair features:
//!
//! | feature          | value                                                         |
//! |------------------|---------------------------------------------------------------|
//! | `token_overlap`  | distinct lowercased terms shared by query and context          |
//! | `entity_match`   | 1 if a capitalized, non-function word of the query appears in the context |
//! | `shared_nouns`   | size of the intersection of both heuristic noun sets           |
//! | `context_length` | token count of the context                                    |
//! | `bm25`           | BM25 of the context for the query terms, with term statistics from the training contexts |
//!
//! Features are standardized with training-set moments; the model is fit
//! by full-batch gradient descent on L2-regularized cross-entropy.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RelevanceScore, RelevanceScorer};
use crate::corpus::tokenize;
use crate::datagen::RetrievalExample;
use crate::error::{Error, Result};
use crate::retrieval::{idf, is_capitalized, is_stopword, terms, tf_weight, Bm25Params, HeuristicNounTagger, NounTagger};

pub const FEATURE_COUNT: usize = 5;
pub const PARAM_COUNT: usize = FEATURE_COUNT + 1;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] =
    ["token_overlap", "entity_match", "shared_nouns", "context_length", "bm25"];

pub type Features = [f64; FEATURE_COUNT];
/// Feature weights followed by the bias.
pub type Params = [f64; PARAM_COUNT];

/// Corpus statistics for the BM25 feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermStats {
    pub doc_freq: BTreeMap<String, usize>,
    pub n_docs: usize,
    pub avg_len: f64,
    pub params: Bm25Params,
}

impl TermStats {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
        let mut n_docs = 0;
        let mut total = 0;
        for text in texts {
            let t = terms(&tokenize(text));
            total += t.len();
            n_docs += 1;
            for term in t.into_iter().collect::<BTreeSet<_>>() {
                *doc_freq.entry(term).or_default() += 1;
            }
        }
        let avg_len = if n_docs == 0 { 1.0 } else { (total as f64 / n_docs as f64).max(1.0) };
        TermStats {
            doc_freq,
            n_docs,
            avg_len,
            params: Bm25Params::default(),
        }
    }

    pub fn bm25(&self, query_terms: &BTreeSet<String>, context_terms: &[String]) -> f64 {
        let mut tf: HashMap<&str, u32> = HashMap::new();
        for t in context_terms {
            *tf.entry(t.as_str()).or_default() += 1;
        }
        let len = context_terms.len() as f64;
        query_terms
            .iter()
            .filter_map(|t| tf.get(t.as_str()).map(|&f| (t, f)))
            .map(|(t, f)| {
                let df = self.doc_freq.get(t).copied().unwrap_or(0).min(self.n_docs);
                idf(self.n_docs, df) * tf_weight(f64::from(f), len, self.avg_len, self.params)
            })
            .sum()
    }
}

/// Capitalized content words of a sentence, used as cheap entity candidates.
pub fn entity_candidates(tokens: &[String]) -> BTreeSet<&str> {
    tokens
        .iter()
        .filter(|t| is_capitalized(t) && !is_stopword(&t.to_lowercase()))
        .map(String::as_str)
        .collect()
}

pub fn extract_features(stats: &TermStats, query: &str, context: &str) -> Features {
    let q_tokens = tokenize(query);
    let c_tokens = tokenize(context);
    let q_terms: BTreeSet<String> = terms(&q_tokens).into_iter().collect();
    let c_terms_list = terms(&c_tokens);
    let c_terms: BTreeSet<&String> = c_terms_list.iter().collect();
    let overlap = q_terms.iter().filter(|t| c_terms.contains(t)).count() as f64;

    let c_token_set: BTreeSet<&str> = c_tokens.iter().map(String::as_str).collect();
    let entity = entity_candidates(&q_tokens).iter().any(|e| c_token_set.contains(e));

    let tagger = HeuristicNounTagger::from_sentences([q_tokens.as_slice(), c_tokens.as_slice()]);
    let shared = tagger.nouns(&q_tokens).intersection(&tagger.nouns(&c_tokens)).count() as f64;

    [
        overlap,
        if entity { 1.0 } else { 0.0 },
        shared,
        c_tokens.len() as f64,
        stats.bm25(&q_terms, &c_terms_list),
    ]
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logit(params: &Params, x: &Features) -> f64 {
    params[FEATURE_COUNT] + x.iter().zip(params).map(|(a, w)| a * w).sum::<f64>()
}

/// Mean cross-entropy of a logistic model, plus `l2 / 2 · |w|²` on the
/// weights (not the bias).
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    pub features: Vec<Features>,
    pub labels: Vec<f64>,
    pub l2: f64,
}

impl LogisticObjective {
    pub fn loss(&self, params: &Params) -> f64 {
        let n = self.features.len() as f64;
        let data: f64 = self
            .features
            .iter()
            .zip(&self.labels)
            .map(|(x, &y)| {
                let z = logit(params, x);
                softplus(z) - y * z
            })
            .sum::<f64>()
            / n;
        let reg: f64 = params[..FEATURE_COUNT].iter().map(|w| w * w).sum::<f64>() * self.l2 / 2.0;
        data + reg
    }

    pub fn gradient(&self, params: &Params) -> Params {
        let n = self.features.len() as f64;
        let mut grad = [0.0; PARAM_COUNT];
        for (x, &y) in self.features.iter().zip(&self.labels) {
            let residual = sigmoid(logit(params, x)) - y;
            for (g, a) in grad.iter_mut().zip(x) {
                *g += residual * a;
            }
            grad[FEATURE_COUNT] += residual;
        }
        for g in &mut grad {
            *g /= n;
        }
        for (g, w) in grad.iter_mut().zip(params).take(FEATURE_COUNT) {
            *g += self.l2 * w;
        }
        grad
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 500,
            learning_rate: 0.5,
            l2: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalModel {
    pub feature_names: Vec<String>,
    pub params: Params,
    pub mean: Features,
    pub scale: Features,
    pub stats: TermStats,
    pub train_loss: f64,
}

impl LexicalModel {
    pub fn standardize(&self, raw: &Features) -> Features {
        std::array::from_fn(|i| (raw[i] - self.mean[i]) / self.scale[i])
    }

    pub fn features(&self, query: &str, context: &str) -> Features {
        self.standardize(&extract_features(&self.stats, query, context))
    }

    pub fn predict(&self, query: &str, context: &str) -> f64 {
        sigmoid(logit(&self.params, &self.features(query, context)))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: LexicalModel = serde_json::from_str(&text)?;
        if model.scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidInput(format!("{}: invalid feature scale", path.display())));
        }
        Ok(model)
    }
}

impl RelevanceScorer for LexicalModel {
    fn score_pairs(&self, query: &str, contexts: &[&str]) -> Result<Vec<RelevanceScore>> {
        contexts
            .iter()
            .map(|c| RelevanceScore::new(self.predict(query, c)))
            .collect()
    }
}

/// Thresholded classification quality on labeled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub examples: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl LexicalModel {
    pub fn evaluate(&self, data: &[RetrievalExample], threshold: f64) -> ClassifierMetrics {
        let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
        for e in data {
            let predicted = self.predict(&e.query_text, &e.context_text) >= threshold;
            let actual = e.label == 1;
            match (predicted, actual) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
            correct += usize::from(predicted == actual);
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        ClassifierMetrics {
            examples: data.len(),
            accuracy: ratio(correct, data.len()),
            precision,
            recall,
            f1: if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 },
        }
    }
}

fn moments(rows: &[Features]) -> (Features, Features) {
    let n = rows.len() as f64;
    let mean: Features = std::array::from_fn(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n);
    let scale: Features = std::array::from_fn(|i| {
        let var = rows.iter().map(|r| (r[i] - mean[i]).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 1e-12 { sd } else { 1.0 }
    });
    (mean, scale)
}

/// Fits the lexical scorer on labeled (query, context) pairs.
pub fn train_lexical_scorer(dataset: &[RetrievalExample], options: TrainOptions) -> Result<LexicalModel> {
    let positives = dataset.iter().filter(|e| e.label == 1).count();
    if positives == 0 || positives == dataset.len() {
        return Err(Error::InvalidInput(
            "training data must contain both relevant and irrelevant pairs".into(),
        ));
    }
    if options.epochs == 0 || options.learning_rate.is_nan() || options.learning_rate <= 0.0 || options.l2 < 0.0 {
        return Err(Error::InvalidInput(format!("invalid training options {options:?}")));
    }
    let mut contexts: Vec<&str> = dataset.iter().map(|e| e.context_text.as_str()).collect();
    contexts.sort_unstable();
    contexts.dedup();
    let stats = TermStats::from_texts(contexts);

    let raw: Vec<Features> = dataset
        .iter()
        .map(|e| extract_features(&stats, &e.query_text, &e.context_text))
        .collect();
    let (mean, scale) = moments(&raw);
    let mut model = LexicalModel {
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        params: [0.0; PARAM_COUNT],
        mean,
        scale,
        stats,
        train_loss: f64::NAN,
    };
    let objective = LogisticObjective {
        features: raw.iter().map(|r| model.standardize(r)).collect(),
        labels: dataset.iter().map(|e| f64::from(e.label)).collect(),
        l2: options.l2,
    };
    for epoch in 0..options.epochs {
        let grad = objective.gradient(&model.params);
        for (p, g) in model.params.iter_mut().zip(grad) {
            *p -= options.learning_rate * g;
        }
        if epoch % 100 == 0 {
            log::debug!("epoch {epoch}: loss {:.6}", objective.loss(&model.params));
        }
    }
    model.train_loss = objective.loss(&model.params);
    Ok(model)
}
