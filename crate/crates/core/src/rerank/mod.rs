//! Relevance scoring and re-ranking of candidate contexts.
//!
//! Every scorer rates (query, context) pairs independently with a value in
//! `[0, 1]`. The pooled candidates are then cut down to the top `k` and
//! assembled with the query in document order.

mod lexical;
mod remote;
mod select;

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use lexical::{
    entity_candidates, extract_features, ClassifierMetrics, train_lexical_scorer, Features, LexicalModel, LogisticObjective, Params,
    TermStats, TrainOptions, FEATURE_COUNT, FEATURE_NAMES, PARAM_COUNT,
};
pub use remote::{
    HealthResponse, RemoteOptions, RemoteScorer, ScorePair, ScoreRequest, ScoreResponse, DEFAULT_BATCH_SIZE,
    HEALTH_PATH, SCORE_PATH,
};
pub use select::{assemble_context, bucket_random_topk, rank_topk, AssembledContext};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::retrieval::Candidate;
use crate::seed::SeedKey;

/// Relevance of a context to a query, always within `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RelevanceScore(f64);

impl RelevanceScore {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(RelevanceScore(value))
        } else {
            Err(Error::InvalidInput(format!("relevance {value} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for RelevanceScore {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        RelevanceScore::new(value)
    }
}

impl From<RelevanceScore> for f64 {
    fn from(s: RelevanceScore) -> f64 {
        s.0
    }
}

impl fmt::Display for RelevanceScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

/// Pairwise relevance scorer. Implementations must tolerate concurrent calls.
pub trait RelevanceScorer: Send + Sync {
    /// One score per context, order-aligned.
    fn score_pairs(&self, query: &str, contexts: &[&str]) -> Result<Vec<RelevanceScore>>;
}

/// Uniform pseudo-random scores keyed by `(seed, query, context)`, so the
/// same pair always gets the same score under a given seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomScorer {
    pub seed: u64,
}

impl RelevanceScorer for RandomScorer {
    fn score_pairs(&self, query: &str, contexts: &[&str]) -> Result<Vec<RelevanceScore>> {
        Ok(contexts
            .iter()
            .map(|c| RelevanceScore(SeedKey::new(self.seed).str(query).str(c).unit()))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScorerSpec {
    Random {
        #[serde(default)]
        seed: u64,
    },
    BucketRandom {
        #[serde(default)]
        seed: u64,
    },
    Lexical {
        model_path: PathBuf,
    },
    Remote {
        endpoint: String,
    },
}

impl ScorerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ScorerSpec::Random { .. } => "random",
            ScorerSpec::BucketRandom { .. } => "bucket_random",
            ScorerSpec::Lexical { .. } => "lexical",
            ScorerSpec::Remote { .. } => "remote",
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, ScorerSpec::Random { .. } | ScorerSpec::BucketRandom { .. })
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ScorerSpec::Random { seed } | ScorerSpec::BucketRandom { seed } => Some(*seed),
            _ => None,
        }
    }

    /// Replaces the seed of the random kinds; other kinds are unchanged.
    pub fn with_seed(&self, new_seed: u64) -> ScorerSpec {
        match self {
            ScorerSpec::Random { .. } => ScorerSpec::Random { seed: new_seed },
            ScorerSpec::BucketRandom { .. } => ScorerSpec::BucketRandom { seed: new_seed },
            other => other.clone(),
        }
    }

    /// Instantiates the scorer. Bucket-random selection happens in
    /// [`bucket_random_topk`]; as a plain scorer it behaves like `random`.
    pub fn build(&self) -> Result<Arc<dyn RelevanceScorer>> {
        self.build_with(RemoteOptions::default())
    }

    pub fn build_with(&self, remote: RemoteOptions) -> Result<Arc<dyn RelevanceScorer>> {
        Ok(match self {
            ScorerSpec::Random { seed } | ScorerSpec::BucketRandom { seed } => Arc::new(RandomScorer { seed: *seed }),
            ScorerSpec::Lexical { model_path } => Arc::new(LexicalModel::load(model_path)?),
            ScorerSpec::Remote { endpoint } => Arc::new(RemoteScorer::with_options(endpoint, remote)),
        })
    }
}

/// Scores candidate sentences of `doc` against the query sentence.
pub fn score_batch(
    scorer: &dyn RelevanceScorer,
    doc: &Document,
    query: usize,
    candidates: &[Candidate],
) -> Result<Vec<RelevanceScore>> {
    if candidates.is_empty() {
        return Err(Error::Contract("score_batch needs at least one candidate".into()));
    }
    let query_text = doc.sentences[query].text();
    let texts: Vec<String> = candidates.iter().map(|c| doc.sentences[c.index].text()).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let scores = scorer.score_pairs(&query_text, &refs)?;
    if scores.len() != candidates.len() {
        return Err(Error::Contract(format!(
            "scorer returned {} scores for {} candidates",
            scores.len(),
            candidates.len()
        )));
    }
    Ok(scores)
}
