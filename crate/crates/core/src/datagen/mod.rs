//! Synthetic context-retrieval dataset: (query, context, label) triples.
//!
//! Positives come from an instruction-following LLM asked to invent a
//! sentence about an entity seen in the query. Negatives come from random
//! cross-document pairing and from swapping contexts between positives.

mod generate;
mod llm;

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use generate::{
    assemble_dataset, generate_dataset, generate_positives, negative_sampling, positive_swap, GenerationOptions,
    GenerationReport, SkippedEntity,
};
pub use llm::{
    llm_client_from_endpoint, llm_generate, postprocess_completion, HttpLlmClient, LlmAdapter, LlmClient,
    LlmRequest, MockLlm,
};

use crate::corpus::{EntityClass, Mention, Sentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Description,
    Action,
    Movement,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Description => "description",
            PromptKind::Action => "action",
            PromptKind::Movement => "movement",
        }
    }

    pub fn compatible_with(self, class: EntityClass) -> bool {
        allowed_kinds(class).contains(&self)
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "description" => Ok(PromptKind::Description),
            "action" => Ok(PromptKind::Action),
            "movement" => Ok(PromptKind::Movement),
            _ => Err(Error::InvalidInput(format!("unknown prompt kind {s:?}"))),
        }
    }
}

/// Prompt kinds usable for an entity class, in a fixed order.
pub fn allowed_kinds(class: EntityClass) -> &'static [PromptKind] {
    match class {
        EntityClass::Per => &[PromptKind::Description, PromptKind::Action],
        EntityClass::Loc => &[PromptKind::Description, PromptKind::Movement],
        EntityClass::Org => &[PromptKind::Description],
    }
}

/// Instantiates the prompt template for `kind`.
pub fn build_prompt(kind: PromptKind, entity: &Mention, input: &Sentence) -> Result<String> {
    if !kind.compatible_with(entity.entity_class) {
        return Err(Error::InvalidInput(format!(
            "prompt kind {kind} does not apply to {} entities",
            entity.entity_class
        )));
    }
    Ok(prompt_text(kind, &entity.surface, &input.text()))
}

pub(crate) fn prompt_text(kind: PromptKind, entity: &str, input: &str) -> String {
    match kind {
        PromptKind::Description => format!(
            "'{input}' - In the preceding sentence, {entity} is a character. \
             Invent a one-sentence description for this character, mentioning their name."
        ),
        PromptKind::Action => format!(
            "Invent a single sentence depicting the character '{entity}' performing an action, mentioning their name."
        ),
        PromptKind::Movement => format!(
            "Invent a single sentence depicting a character of your invention going to {entity}. \
             You must mention the name of the character."
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    LlmPositive,
    NegativeSampling,
    PositiveSwap,
}

/// One `(query, context, label)` triple.
///
/// For swapped negatives `entity_surface` names the donor positive's entity,
/// which is what makes the context look relevant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalExample {
    pub query_text: String,
    pub context_text: String,
    pub label: u8,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_surface: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_class: Option<EntityClass>,
}

impl RetrievalExample {
    pub fn validate(&self) -> Result<()> {
        match (self.label, self.provenance) {
            (1, Provenance::LlmPositive) => {
                let surface = self
                    .entity_surface
                    .as_deref()
                    .ok_or_else(|| Error::InvalidInput("positive example without entity_surface".into()))?;
                if !self.context_text.contains(surface) {
                    return Err(Error::InvalidInput(format!(
                        "positive context does not contain {surface:?}"
                    )));
                }
                Ok(())
            }
            (0, Provenance::NegativeSampling | Provenance::PositiveSwap) => Ok(()),
            (0 | 1, p) => Err(Error::InvalidInput(format!(
                "label {} is inconsistent with provenance {p:?}",
                self.label
            ))),
            (l, _) => Err(Error::InvalidInput(format!("label must be 0 or 1, got {l}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Serialize, Deserialize)]
struct DatasetRecord {
    split: Split,
    #[serde(flatten)]
    example: RetrievalExample,
}

/// Writes both splits as JSON lines, train first, each record tagged with
/// its split. Refuses examples that `read_dataset` would reject.
pub fn write_dataset(path: impl AsRef<Path>, train: &[RetrievalExample], eval: &[RetrievalExample]) -> Result<()> {
    let path = path.as_ref();
    train.iter().chain(eval).try_for_each(RetrievalExample::validate)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let tagged = train
        .iter()
        .map(|e| (Split::Train, e))
        .chain(eval.iter().map(|e| (Split::Eval, e)));
    for (split, example) in tagged {
        let record = DatasetRecord {
            split,
            example: example.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a dataset file into `(train, eval)`. Blank lines are ignored.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<(Vec<RetrievalExample>, Vec<RetrievalExample>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_error = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let record: DatasetRecord = serde_json::from_str(line).map_err(|e| parse_error(e.to_string()))?;
        record.example.validate().map_err(|e| parse_error(e.to_string()))?;
        match record.split {
            Split::Train => train.push(record.example),
            Split::Eval => eval.push(record.example),
        }
    }
    Ok((train, eval))
}
