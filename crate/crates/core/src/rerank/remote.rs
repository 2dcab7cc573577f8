//! Client for the remote scoring protocol.
//!
//! ```text
//! POST /v1/score   {"pairs": [{"query": "...", "context": "..."}]}  ->  {"scores": [0.93, ...]}
//! GET  /v1/health                                                   ->  {"status": "ok"}
//! ```
//!
//! Errors come back as `{"error": "..."}` with a 4xx/5xx status.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{RelevanceScore, RelevanceScorer};
use crate::error::{Error, Result};
use crate::http::{ClientOptions, JsonClient, RetryPolicy};

pub const SCORE_PATH: &str = "/v1/score";
pub const HEALTH_PATH: &str = "/v1/health";
pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorePair {
    pub query: String,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub pairs: Vec<ScorePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
}

#[derive(Debug, Clone, Copy)]
pub struct RemoteOptions {
    pub batch_size: usize,
    pub timeout: Duration,
    /// Retries after the first attempt.
    pub retries: usize,
    pub backoff: Duration,
    pub pool_size: usize,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        RemoteOptions {
            batch_size: DEFAULT_BATCH_SIZE,
            timeout: Duration::from_secs(30),
            retries: 3,
            backoff: Duration::from_millis(200),
            pool_size: 4,
        }
    }
}

impl RemoteOptions {
    pub(crate) fn client_options(&self) -> ClientOptions {
        ClientOptions {
            timeout: self.timeout,
            pool_size: self.pool_size,
            retry: RetryPolicy {
                attempts: self.retries + 1,
                base_delay: self.backoff,
            },
        }
    }
}

/// Scores pairs through a remote cross-encoder service, `batch_size` pairs
/// per request. Cloning shares the underlying connection pool.
#[derive(Clone)]
pub struct RemoteScorer {
    client: JsonClient,
    batch_size: usize,
}

impl RemoteScorer {
    pub fn new(endpoint: &str) -> Self {
        Self::with_options(endpoint, RemoteOptions::default())
    }

    pub fn with_options(endpoint: &str, options: RemoteOptions) -> Self {
        RemoteScorer {
            client: JsonClient::new(endpoint, options.client_options()),
            batch_size: options.batch_size.max(1),
        }
    }

    pub fn endpoint(&self) -> &str {
        self.client.base()
    }

    pub fn health(&self) -> Result<()> {
        let resp: HealthResponse = self.client.get(HEALTH_PATH)?;
        if resp.status == "ok" {
            Ok(())
        } else {
            Err(Error::Protocol {
                endpoint: self.client.url(HEALTH_PATH),
                message: format!("unhealthy status {:?}", resp.status),
            })
        }
    }

    fn score_chunk(&self, query: &str, contexts: &[&str]) -> Result<Vec<RelevanceScore>> {
        let request = ScoreRequest {
            pairs: contexts
                .iter()
                .map(|c| ScorePair {
                    query: query.to_string(),
                    context: c.to_string(),
                })
                .collect(),
        };
        let resp: ScoreResponse = self.client.post(SCORE_PATH, &request)?;
        let violation = |message: String| Error::Protocol {
            endpoint: self.client.url(SCORE_PATH),
            message,
        };
        if resp.scores.len() != contexts.len() {
            return Err(violation(format!(
                "sent {} pairs, got {} scores",
                contexts.len(),
                resp.scores.len()
            )));
        }
        resp.scores
            .into_iter()
            .map(|s| RelevanceScore::new(s).map_err(|_| violation(format!("score {s} outside [0, 1]"))))
            .collect()
    }
}

impl RelevanceScorer for RemoteScorer {
    fn score_pairs(&self, query: &str, contexts: &[&str]) -> Result<Vec<RelevanceScore>> {
        let mut out = Vec::with_capacity(contexts.len());
        for chunk in contexts.chunks(self.batch_size) {
            out.extend(self.score_chunk(query, chunk)?);
        }
        Ok(out)
    }
}
