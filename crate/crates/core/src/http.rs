//! Blocking JSON-over-HTTP client shared by the remote scorer, the LLM
//! client and the remote NER predictor.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use ureq::Agent;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct RetryPolicy {
    /// Total attempts, including the first one.
    pub attempts: usize,
    /// Delay before the second attempt; doubles after each failure.
    pub base_delay: Duration,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ClientOptions {
    pub timeout: Duration,
    pub pool_size: usize,
    pub retry: RetryPolicy,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
}

#[derive(Clone)]
pub(crate) struct JsonClient {
    agent: Agent,
    base: String,
    retry: RetryPolicy,
}

enum Failure {
    Retryable(String),
    Fatal(Error),
}

impl JsonClient {
    pub fn new(base: &str, options: ClientOptions) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(options.timeout))
            .max_idle_connections(options.pool_size)
            .max_idle_connections_per_host(options.pool_size)
            .build()
            .into();
        JsonClient {
            agent,
            base: base.trim_end_matches('/').to_string(),
            retry: options.retry,
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp> {
        let url = self.url(path);
        self.with_retries(&url, || self.agent.post(&url).send_json(body))
    }

    pub fn get<Resp: DeserializeOwned>(&self, path: &str) -> Result<Resp> {
        let url = self.url(path);
        self.with_retries(&url, || self.agent.get(&url).call())
    }

    fn with_retries<Resp: DeserializeOwned>(
        &self,
        url: &str,
        send: impl Fn() -> std::result::Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<Resp> {
        let mut delay = self.retry.base_delay;
        let mut last = String::new();
        for attempt in 1..=self.retry.attempts.max(1) {
            match Self::attempt(url, send()) {
                Ok(resp) => return Ok(resp),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(msg)) => {
                    log::debug!("{url}: attempt {attempt} failed: {msg}");
                    last = msg;
                }
            }
            if attempt < self.retry.attempts {
                thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(Error::Transport {
            endpoint: url.to_string(),
            attempts: self.retry.attempts.max(1),
            message: last,
        })
    }

    fn attempt<Resp: DeserializeOwned>(
        url: &str,
        result: std::result::Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> std::result::Result<Resp, Failure> {
        let mut resp = result.map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        if status == 200 {
            return serde_json::from_str(&body).map_err(|e| {
                Failure::Fatal(Error::Protocol {
                    endpoint: url.to_string(),
                    message: format!("malformed response body: {e}"),
                })
            });
        }
        let message = serde_json::from_str::<ErrorBody>(&body)
            .map(|b| b.error)
            .unwrap_or(body);
        if status >= 500 {
            Err(Failure::Retryable(format!("HTTP {status}: {message}")))
        } else {
            Err(Failure::Fatal(Error::Remote {
                endpoint: url.to_string(),
                status,
                message,
            }))
        }
    }
}
