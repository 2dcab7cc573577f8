//! Bridge between assembled contexts and an NER tagger.
//!
//! The query and its retrieved sentences are concatenated in document order
//! without separators, tagged as one sequence, and only the tags covering the
//! query survive.
//!
//! Remote taggers speak `POST /v1/tag {"tokens": [...]}` → `{"tags": [...]}`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EntityClass, Tag};
use crate::error::{Error, Result};
use crate::http::{ClientOptions, JsonClient, RetryPolicy};
use crate::rerank::AssembledContext;
use crate::retrieval::{is_capitalized, is_stopword};

pub const TAG_PATH: &str = "/v1/tag";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NerRequest {
    pub tokens: Vec<String>,
    /// Where the query sentence sits inside `tokens`.
    pub query_span: Range<usize>,
}

impl NerRequest {
    pub fn new(tokens: Vec<String>, query_span: Range<usize>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("NER request without tokens".into()));
        }
        if query_span.start > query_span.end || query_span.end > tokens.len() {
            return Err(Error::InvalidInput(format!(
                "query span {query_span:?} out of bounds for {} tokens",
                tokens.len()
            )));
        }
        Ok(NerRequest { tokens, query_span })
    }

    /// Flattens `context` into one token sequence.
    pub fn from_context(doc: &Document, context: &AssembledContext) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut span = 0..0;
        for (pos, &idx) in context.sentences.iter().enumerate() {
            let sentence = doc
                .sentences
                .get(idx)
                .ok_or_else(|| Error::Contract(format!("sentence {idx} not in {}", doc.doc_id)))?;
            if pos == context.query_position {
                span = tokens.len()..tokens.len() + sentence.len();
            }
            tokens.extend(sentence.tokens.iter().cloned());
        }
        Self::new(tokens, span)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerPrediction {
    pub tags: Vec<Tag>,
}

pub trait NerPredictor: Send + Sync {
    /// One tag per request token.
    fn predict(&self, request: &NerRequest) -> Result<NerPrediction>;
}

/// Tags the assembled context and returns the slice over the query sentence.
pub fn predict_query_tags(predictor: &dyn NerPredictor, doc: &Document, context: &AssembledContext) -> Result<Vec<Tag>> {
    let request = NerRequest::from_context(doc, context)?;
    let prediction = predictor.predict(&request)?;
    if prediction.tags.len() != request.tokens.len() {
        return Err(Error::Contract(format!(
            "predictor returned {} tags for {} tokens",
            prediction.tags.len(),
            request.tokens.len()
        )));
    }
    Ok(prediction.tags[request.query_span].to_vec())
}

#[derive(Serialize)]
struct TagRequest<'a> {
    tokens: &'a [String],
}

#[derive(Deserialize)]
struct TagResponse {
    tags: Vec<String>,
}

#[derive(Clone)]
pub struct RemoteNerPredictor {
    client: JsonClient,
}

impl RemoteNerPredictor {
    pub fn new(endpoint: &str) -> Self {
        Self::with_options(endpoint, Duration::from_secs(60), 4, 3, Duration::from_millis(200))
    }

    pub fn with_options(endpoint: &str, timeout: Duration, pool_size: usize, retries: usize, backoff: Duration) -> Self {
        let options = ClientOptions {
            timeout,
            pool_size: pool_size.max(1),
            retry: RetryPolicy {
                attempts: retries + 1,
                base_delay: backoff,
            },
        };
        RemoteNerPredictor {
            client: JsonClient::new(endpoint, options),
        }
    }
}

impl NerPredictor for RemoteNerPredictor {
    fn predict(&self, request: &NerRequest) -> Result<NerPrediction> {
        let resp: TagResponse = self.client.post(TAG_PATH, &TagRequest { tokens: &request.tokens })?;
        let violation = |message: String| Error::Protocol {
            endpoint: self.client.url(TAG_PATH),
            message,
        };
        if resp.tags.len() != request.tokens.len() {
            return Err(violation(format!(
                "sent {} tokens, got {} tags",
                request.tokens.len(),
                resp.tags.len()
            )));
        }
        let tags = resp
            .tags
            .iter()
            .map(|t| t.parse::<Tag>().map_err(|_| violation(format!("malformed tag {t:?}"))))
            .collect::<Result<_>>()?;
        Ok(NerPrediction { tags })
    }
}

/// Deterministic stand-in tagger.
///
/// Gazetteer surfaces are matched token-exactly, longest first. With the
/// context rule, a capitalized token missing from the gazetteer becomes
/// `B-PER` when the context part of the request shows it within two tokens
/// of a gazetteer person. The query alone never corroborates itself.
#[derive(Debug, Clone)]
pub struct GazetteerPredictor {
    entries: HashMap<String, Vec<(Vec<String>, EntityClass)>>,
    known: HashSet<String>,
    context_rule: bool,
}

/// Largest token distance between a name and a gazetteer person that still
/// counts as adjacent.
pub const CONTEXT_RULE_DISTANCE: usize = 2;

impl GazetteerPredictor {
    pub fn new(gazetteer: &BTreeMap<String, EntityClass>, context_rule: bool) -> Result<Self> {
        if gazetteer.is_empty() {
            return Err(Error::InvalidInput("empty gazetteer".into()));
        }
        let mut entries: HashMap<String, Vec<(Vec<String>, EntityClass)>> = HashMap::new();
        let mut known = HashSet::new();
        for (surface, &class) in gazetteer {
            let tokens: Vec<String> = surface.split_whitespace().map(String::from).collect();
            let Some(first) = tokens.first() else { continue };
            known.extend(tokens.iter().cloned());
            entries.entry(first.clone()).or_default().push((tokens, class));
        }
        for list in entries.values_mut() {
            list.sort_by_key(|e| std::cmp::Reverse(e.0.len()));
        }
        Ok(GazetteerPredictor {
            entries,
            known,
            context_rule,
        })
    }

    fn gazetteer_tags(&self, tokens: &[String]) -> Vec<Tag> {
        let mut tags = vec![Tag::O; tokens.len()];
        let mut i = 0;
        while i < tokens.len() {
            let hit = self.entries.get(&tokens[i]).and_then(|cands| {
                cands
                    .iter()
                    .find(|(surface, _)| tokens[i..].starts_with(surface))
            });
            match hit {
                Some((surface, class)) => {
                    tags[i] = Tag::B(*class);
                    for t in &mut tags[i + 1..i + surface.len()] {
                        *t = Tag::I(*class);
                    }
                    i += surface.len();
                }
                None => i += 1,
            }
        }
        tags
    }

    fn unknown_name(&self, token: &str) -> bool {
        is_capitalized(token) && !self.known.contains(token) && !is_stopword(&token.to_lowercase())
    }
}

impl NerPredictor for GazetteerPredictor {
    fn predict(&self, request: &NerRequest) -> Result<NerPrediction> {
        let tokens = &request.tokens;
        let mut tags = self.gazetteer_tags(tokens);
        if self.context_rule {
            let q = &request.query_span;
            let mut corroborated = HashSet::new();
            for part in [0..q.start, q.end..tokens.len()] {
                for i in part.clone() {
                    if !self.unknown_name(&tokens[i]) {
                        continue;
                    }
                    let lo = i.saturating_sub(CONTEXT_RULE_DISTANCE).max(part.start);
                    let hi = (i + CONTEXT_RULE_DISTANCE + 1).min(part.end);
                    if (lo..hi).any(|j| j != i && tags[j].class() == Some(EntityClass::Per)) {
                        corroborated.insert(tokens[i].as_str());
                    }
                }
            }
            for (tag, token) in tags.iter_mut().zip(tokens) {
                if *tag == Tag::O && corroborated.contains(token.as_str()) {
                    *tag = Tag::B(EntityClass::Per);
                }
            }
        }
        Ok(NerPrediction { tags })
    }
}

pub fn mock_gazetteer_predictor(gazetteer: &BTreeMap<String, EntityClass>, context_rule: bool) -> Result<GazetteerPredictor> {
    GazetteerPredictor::new(gazetteer, context_rule)
}

/// Reads `surface<TAB>class` lines. Blank lines and `#` comments are skipped.
pub fn load_gazetteer(path: impl AsRef<Path>) -> Result<BTreeMap<String, EntityClass>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_error = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (surface, class) = line
            .rsplit_once('\t')
            .ok_or_else(|| parse_error("expected surface<TAB>class".into()))?;
        let class: EntityClass = class.trim().parse().map_err(|e: Error| parse_error(e.to_string()))?;
        if surface.trim().is_empty() {
            return Err(parse_error("empty surface".into()));
        }
        out.insert(surface.trim().to_string(), class);
    }
    Ok(out)
}

/// Which tagger an experiment talks to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorSpec {
    Gazetteer {
        path: PathBuf,
        #[serde(default = "default_true")]
        context_rule: bool,
    },
    Remote {
        endpoint: String,
    },
}

fn default_true() -> bool {
    true
}

impl PredictorSpec {
    pub fn build(&self) -> Result<Arc<dyn NerPredictor>> {
        Ok(match self {
            PredictorSpec::Gazetteer { path, context_rule } => {
                Arc::new(GazetteerPredictor::new(&load_gazetteer(path)?, *context_rule)?)
            }
            PredictorSpec::Remote { endpoint } => Arc::new(RemoteNerPredictor::new(endpoint)),
        })
    }
}
