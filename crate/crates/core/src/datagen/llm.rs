//! Completion-style LLM transport.
//!
//! The wire contract is `POST {"prompt", "max_tokens", "temperature", "stop"}`
//! answered by `{"text": "..."}`. [`LlmAdapter`] renames the request fields
//! and locates the text in other server schemas.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::first_sentence;
use crate::error::{Error, Result};
use crate::http::{ClientOptions, JsonClient, RetryPolicy};
use crate::seed::SeedKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
}

impl LlmRequest {
    pub const DEFAULT_MAX_TOKENS: u32 = 96;
    pub const DEFAULT_TEMPERATURE: f64 = 0.7;

    pub fn new(prompt: impl Into<String>) -> Self {
        LlmRequest {
            prompt: prompt.into(),
            max_tokens: Self::DEFAULT_MAX_TOKENS,
            temperature: Self::DEFAULT_TEMPERATURE,
            stop: vec!["\n".into()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_tokens < 16 {
            return Err(Error::InvalidInput(format!("max_tokens must be >= 16, got {}", self.max_tokens)));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::InvalidInput(format!(
                "temperature must be within [0, 2], got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

pub trait LlmClient: Send + Sync {
    /// Raw completion text, before any post-processing.
    fn complete(&self, request: &LlmRequest) -> Result<String>;
}

impl<F> LlmClient for F
where
    F: Fn(&LlmRequest) -> Result<String> + Send + Sync,
{
    fn complete(&self, request: &LlmRequest) -> Result<String> {
        self(request)
    }
}

/// Sends `request` and reduces the completion to one sentence. May return
/// an empty string.
pub fn llm_generate(client: &dyn LlmClient, request: &LlmRequest) -> Result<String> {
    request.validate()?;
    let raw = client.complete(request)?;
    Ok(postprocess_completion(&request.prompt, &request.stop, &raw))
}

/// Drops an echoed prompt, cuts at the first stop sequence and the first
/// line break, then keeps the first sentence.
pub fn postprocess_completion(prompt: &str, stop: &[String], raw: &str) -> String {
    let trimmed = raw.trim_start();
    let mut text = trimmed.strip_prefix(prompt).unwrap_or(trimmed).trim_start();
    for s in stop.iter().filter(|s| !s.is_empty()) {
        if let Some(at) = text.find(s.as_str()) {
            text = &text[..at];
        }
    }
    let line = text.lines().next().unwrap_or("");
    first_sentence(line).unwrap_or("").trim().to_string()
}

/// Maps the canonical request onto another server's field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmAdapter {
    /// Appended to the endpoint URL.
    pub path: String,
    pub prompt_field: String,
    pub max_tokens_field: String,
    pub temperature_field: String,
    pub stop_field: String,
    /// JSON pointer to the generated text in the response.
    pub text_pointer: String,
    /// Merged into every request body, e.g. `model`.
    pub extra: BTreeMap<String, Value>,
}

impl Default for LlmAdapter {
    fn default() -> Self {
        LlmAdapter {
            path: String::new(),
            prompt_field: "prompt".into(),
            max_tokens_field: "max_tokens".into(),
            temperature_field: "temperature".into(),
            stop_field: "stop".into(),
            text_pointer: "/text".into(),
            extra: BTreeMap::new(),
        }
    }
}

impl LlmAdapter {
    pub fn request_body(&self, request: &LlmRequest) -> Value {
        let mut body: serde_json::Map<String, Value> =
            self.extra.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        body.insert(self.prompt_field.clone(), request.prompt.clone().into());
        body.insert(self.max_tokens_field.clone(), request.max_tokens.into());
        body.insert(self.temperature_field.clone(), request.temperature.into());
        body.insert(self.stop_field.clone(), request.stop.clone().into());
        Value::Object(body)
    }
}

pub struct HttpLlmClient {
    client: JsonClient,
    adapter: LlmAdapter,
}

impl HttpLlmClient {
    pub const ATTEMPTS: usize = 3;

    pub fn new(endpoint: &str, adapter: LlmAdapter, pool_size: usize) -> Self {
        Self::with_timeout(endpoint, adapter, pool_size, Duration::from_secs(120), Duration::from_millis(500))
    }

    pub fn with_timeout(
        endpoint: &str,
        adapter: LlmAdapter,
        pool_size: usize,
        timeout: Duration,
        backoff: Duration,
    ) -> Self {
        let options = ClientOptions {
            timeout,
            pool_size: pool_size.max(1),
            retry: RetryPolicy {
                attempts: Self::ATTEMPTS,
                base_delay: backoff,
            },
        };
        HttpLlmClient {
            client: JsonClient::new(endpoint, options),
            adapter,
        }
    }
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, request: &LlmRequest) -> Result<String> {
        let resp: Value = self.client.post(&self.adapter.path, &self.adapter.request_body(request))?;
        match resp.pointer(&self.adapter.text_pointer) {
            Some(Value::String(s)) => Ok(s.clone()),
            _ => Err(Error::Protocol {
                endpoint: self.client.url(&self.adapter.path),
                message: format!("no string at {:?} in response", self.adapter.text_pointer),
            }),
        }
    }
}

/// Offline stand-in for an instruction-following model. Recognizes the
/// three prompt templates and invents a sentence naming the entity. A
/// `miss_rate` fraction of answers leaves the entity out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockLlm {
    pub seed: u64,
    pub miss_rate: f64,
}

const MOCK_DESCRIPTION: [&str; 3] = [
    "{E} is a weathered figure with a sharp tongue and a long memory.",
    "{E} is known across the land for stubborn courage.",
    "{E} is quiet and watchful, always counting the exits.",
];
const MOCK_ACTION: [&str; 3] = [
    "{E} drew a blade and stepped into the rain.",
    "{E} slammed the door and walked out into the night.",
    "{E} counted the coins twice before hiding them.",
];
const MOCK_MOVEMENT: [&str; 3] = [
    "Captain Hale marched toward {E} before dawn.",
    "A tired courier named Tobin finally reached {E}.",
    "Mira rode hard for {E} with the letter.",
];
const MOCK_MISS: &str = "A stranger waited in silence by the road.";

impl MockLlm {
    pub fn new(seed: u64) -> Self {
        MockLlm { seed, miss_rate: 0.0 }
    }

    pub fn with_miss_rate(mut self, rate: f64) -> Self {
        self.miss_rate = rate;
        self
    }

    fn parse(prompt: &str) -> Option<(&'static [&'static str; 3], &str)> {
        if let Some((_, rest)) = prompt.rsplit_once(" - In the preceding sentence, ") {
            let (entity, _) = rest.split_once(" is a character.")?;
            return Some((&MOCK_DESCRIPTION, entity));
        }
        if let Some(rest) = prompt.strip_prefix("Invent a single sentence depicting the character '") {
            let (entity, _) = rest.rsplit_once("' performing an action")?;
            return Some((&MOCK_ACTION, entity));
        }
        if let Some(rest) = prompt.strip_prefix("Invent a single sentence depicting a character of your invention going to ") {
            let (entity, _) = rest.rsplit_once(". You must mention")?;
            return Some((&MOCK_MOVEMENT, entity));
        }
        None
    }
}

impl LlmClient for MockLlm {
    fn complete(&self, request: &LlmRequest) -> Result<String> {
        let key = SeedKey::new(self.seed).str(&request.prompt);
        let Some((templates, entity)) = Self::parse(&request.prompt) else {
            return Ok(MOCK_MISS.to_string());
        };
        if key.str("miss").unit() < self.miss_rate {
            return Ok(MOCK_MISS.to_string());
        }
        let pick = (key.finish() % templates.len() as u64) as usize;
        // a trailing second line, as chatty models produce
        Ok(format!("{}\nAnything else?", templates[pick].replace("{E}", entity)))
    }
}

/// `mock` or `mock://<seed>` selects [`MockLlm`]; anything else must be an
/// http(s) URL.
pub fn llm_client_from_endpoint(endpoint: &str, adapter: &LlmAdapter, pool_size: usize) -> Result<Arc<dyn LlmClient>> {
    if endpoint == "mock" {
        return Ok(Arc::new(MockLlm::new(0)));
    }
    if let Some(seed) = endpoint.strip_prefix("mock://") {
        let seed = seed
            .parse()
            .map_err(|_| Error::Config(format!("bad mock LLM seed in {endpoint:?}")))?;
        return Ok(Arc::new(MockLlm::new(seed)));
    }
    if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
        return Ok(Arc::new(HttpLlmClient::new(endpoint, adapter.clone(), pool_size)));
    }
    Err(Error::Config(format!("unsupported LLM endpoint {endpoint:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{prompt_text, PromptKind};

    #[test]
    fn request_validation() {
        assert!(LlmRequest::new("p").validate().is_ok());
        let mut r = LlmRequest::new("p");
        r.max_tokens = 15;
        assert!(r.validate().is_err());
        r.max_tokens = 16;
        r.temperature = 2.5;
        assert!(r.validate().is_err());
    }

    #[test]
    fn postprocess_strips_echo_and_extra_sentences() {
        let stop = vec!["\n".to_string()];
        assert_eq!(postprocess_completion("P", &stop, "  Bob ran. Then he slept."), "Bob ran.");
        assert_eq!(postprocess_completion("Say it.", &stop, "Say it. Bob ran.\nmore"), "Bob ran.");
        assert_eq!(postprocess_completion("P", &stop, "\n\nBob ran"), "Bob ran");
        assert_eq!(postprocess_completion("P", &[], "Bob\nran."), "Bob");
        assert_eq!(postprocess_completion("P", &stop, "   "), "");
        assert_eq!(postprocess_completion("P", &["###".into()], "Bob ### ran."), "Bob");
    }

    #[test]
    fn mock_mentions_entity_for_every_template() {
        let llm = MockLlm::new(3);
        for (kind, entity) in [
            (PromptKind::Description, "One-Eye"),
            (PromptKind::Action, "Croaker"),
            (PromptKind::Movement, "Necropolitan Hill"),
        ] {
            let req = LlmRequest::new(prompt_text(kind, entity, "It's a 'quoted' input - fine."));
            let out = llm_generate(&llm, &req).unwrap();
            assert!(out.contains(entity), "{out}");
            assert_eq!(out, llm_generate(&llm, &req).unwrap());
        }
        let always_miss = MockLlm::new(3).with_miss_rate(1.0);
        let req = LlmRequest::new(prompt_text(PromptKind::Action, "Croaker", ""));
        assert!(!llm_generate(&always_miss, &req).unwrap().contains("Croaker"));
    }

    #[test]
    fn adapter_renames_fields() {
        let adapter = LlmAdapter {
            prompt_field: "inputs".into(),
            max_tokens_field: "max_new_tokens".into(),
            extra: BTreeMap::from([("model".to_string(), Value::from("m"))]),
            ..LlmAdapter::default()
        };
        let body = adapter.request_body(&LlmRequest::new("hi"));
        assert_eq!(body["inputs"], "hi");
        assert_eq!(body["max_new_tokens"], 96);
        assert_eq!(body["stop"], serde_json::json!(["\n"]));
        assert_eq!(body["model"], "m");
        assert!(body.get("prompt").is_none());
    }

    #[test]
    fn endpoint_selection() {
        let a = LlmAdapter::default();
        assert!(llm_client_from_endpoint("mock", &a, 1).is_ok());
        assert!(llm_client_from_endpoint("mock://42", &a, 1).is_ok());
        assert!(llm_client_from_endpoint("mock://x", &a, 1).is_err());
        assert!(llm_client_from_endpoint("ftp://x", &a, 1).is_err());
        assert!(llm_client_from_endpoint("http://127.0.0.1:1", &a, 1).is_ok());
    }
}
