//! Entity-level evaluation of retrieval-augmented tagging.
//!
//! An experiment tags every annotated sentence of every document once per
//! fold and run, for each requested `k`, and reports micro-averaged
//! precision, recall and F1 overall, per book and per class.

mod experiment;
mod folds;
mod metrics;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

pub use experiment::{run_experiment, EvalReport, SentencePrediction};
pub use folds::{make_folds, make_folds_for_ids, FoldPlan};
pub use metrics::{class_counts, entity_counts, entity_prf, EntityCounts, Prf};
pub use report::{emit_report, BookRow, ClassRow, CurveRow, ReportFormat, RunRow, SummaryRow};

use crate::error::{Error, Result};
use crate::rerank::ScorerSpec;
use crate::retrieval::{Bm25Params, ContextWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMethod {
    NoRetrieval,
    Surrounding,
    Bm25,
    Samenoun,
    NeuralPool,
}

impl RetrievalMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RetrievalMethod::NoRetrieval => "no_retrieval",
            RetrievalMethod::Surrounding => "surrounding",
            RetrievalMethod::Bm25 => "bm25",
            RetrievalMethod::Samenoun => "samenoun",
            RetrievalMethod::NeuralPool => "neural_pool",
        }
    }
}

impl fmt::Display for RetrievalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RetrievalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidInput(format!("unknown retrieval method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Defaults to a name derived from the other fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub method: RetrievalMethod,
    /// Required for `neural_pool`, ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scorer: Option<ScorerSpec>,
    /// Candidates per heuristic in the pool.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Retrieved sentences per query; several values produce a curve.
    #[serde(default = "default_k", deserialize_with = "one_or_many")]
    pub k: Vec<usize>,
    #[serde(default = "default_window")]
    pub window: ContextWindow,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub bm25: Bm25Params,
}

fn default_n() -> usize {
    8
}

fn default_k() -> Vec<usize> {
    (1..=8).collect()
}

fn default_window() -> ContextWindow {
    ContextWindow::FirstChapter
}

fn default_runs() -> usize {
    3
}

fn default_folds() -> usize {
    5
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(k) => vec![k],
        OneOrMany::Many(ks) => ks,
    })
}

impl ExperimentConfig {
    pub fn new(method: RetrievalMethod) -> Self {
        ExperimentConfig {
            id: None,
            method,
            scorer: None,
            n: default_n(),
            k: default_k(),
            window: default_window(),
            runs: default_runs(),
            seed: 0,
            folds: default_folds(),
            bm25: Bm25Params::default(),
        }
    }

    pub fn config_id(&self) -> String {
        if let Some(id) = &self.id {
            return id.clone();
        }
        match (self.method, &self.scorer) {
            (RetrievalMethod::NoRetrieval, _) => "no_retrieval".to_string(),
            (RetrievalMethod::NeuralPool, Some(scorer)) => {
                format!("neural_pool-{}-n{}-{}", scorer.kind(), self.n, self.window)
            }
            (method, _) => format!("{method}-{}", self.window),
        }
    }

    /// Requested `k` values, sorted and deduplicated.
    pub fn k_values(&self) -> Vec<usize> {
        let mut ks = self.k.clone();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    /// Whether two runs with different seeds can differ.
    pub fn is_stochastic(&self) -> bool {
        matches!(self.method, RetrievalMethod::Samenoun | RetrievalMethod::NeuralPool)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.k.is_empty() {
            return Err(Error::Config("at least one k value is required".into()));
        }
        if self.method != RetrievalMethod::NoRetrieval && self.k.contains(&0) {
            return Err(Error::Config(format!("k must be >= 1 for {}", self.method)));
        }
        match (self.method, &self.scorer) {
            (RetrievalMethod::NeuralPool, None) => {
                return Err(Error::Config("neural_pool needs a scorer".into()));
            }
            (RetrievalMethod::NeuralPool, Some(_)) if self.n == 0 => {
                return Err(Error::Config("neural_pool needs n >= 1".into()));
            }
            _ => {}
        }
        self.bm25.validate()
    }
}
