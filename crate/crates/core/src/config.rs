//! The TOML run configuration shared by all subcommands.
//!
//! ```toml
//! seed = 7
//! corpus = "corpus"
//! out_dir = "out"
//!
//! [llm]
//! endpoint = "http://localhost:8000/generate"
//!
//! [ner]
//! kind = "gazetteer"
//! path = "gazetteer.tsv"
//!
//! [[experiment]]
//! method = "neural_pool"
//! scorer = { kind = "lexical", model_path = "out/lexical_model.json" }
//! n = 8
//! k = [1, 2, 3, 4, 5, 6, 7, 8]
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! Endpoints can be overridden from the environment through
//! `CTXNER_LLM_ENDPOINT`, `CTXNER_SCORER_ENDPOINT` and `CTXNER_NER_ENDPOINT`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{GenerationOptions, LlmAdapter};
use crate::error::{Error, Result};
use crate::eval::{ExperimentConfig, ReportFormat};
use crate::nerbridge::PredictorSpec;
use crate::rerank::{ScorerSpec, TrainOptions};

pub const ENV_LLM_ENDPOINT: &str = "CTXNER_LLM_ENDPOINT";
pub const ENV_SCORER_ENDPOINT: &str = "CTXNER_SCORER_ENDPOINT";
pub const ENV_NER_ENDPOINT: &str = "CTXNER_NER_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// When set, replaces the seed of the datagen section and of every
    /// experiment.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
    pub corpus: PathBuf,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/dataset.jsonl`.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Lexical scorer written by `train-scorer`; defaults to
    /// `<out_dir>/lexical_model.json`.
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub llm: LlmSection,
    #[serde(default)]
    pub datagen: GenerationOptions,
    #[serde(default)]
    pub training: TrainOptions,
    #[serde(default)]
    pub ner: Option<PredictorSpec>,
    #[serde(default)]
    pub experiment: Vec<ExperimentConfig>,
    #[serde(default)]
    pub report: ReportSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    /// `mock`, `mock://<seed>` or an http(s) URL.
    pub endpoint: String,
    pub adapter: LlmAdapter,
}

impl Default for LlmSection {
    fn default() -> Self {
        LlmSection {
            endpoint: "mock".into(),
            adapter: LlmAdapter::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub formats: Vec<String>,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

impl ReportSection {
    pub fn parsed(&self) -> Result<Vec<ReportFormat>> {
        self.formats.iter().map(|f| f.parse()).collect()
    }
}

/// Endpoint overrides, usually collected from flags and the environment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EndpointOverrides {
    pub llm: Option<String>,
    pub scorer: Option<String>,
    pub ner: Option<String>,
}

impl EndpointOverrides {
    pub fn from_env() -> Self {
        let var = |name| std::env::var(name).ok().filter(|v: &String| !v.is_empty());
        EndpointOverrides {
            llm: var(ENV_LLM_ENDPOINT),
            scorer: var(ENV_SCORER_ENDPOINT),
            ner: var(ENV_NER_ENDPOINT),
        }
    }

    /// `self` wins over `fallback` field by field.
    pub fn or(self, fallback: EndpointOverrides) -> Self {
        EndpointOverrides {
            llm: self.llm.or(fallback.llm),
            scorer: self.scorer.or(fallback.scorer),
            ner: self.ner.or(fallback.ner),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.resolve_paths(base);
        config.apply_seed();
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.corpus);
        resolve(&mut self.out_dir);
        self.dataset.iter_mut().for_each(resolve);
        self.model.iter_mut().for_each(resolve);
        if let Some(PredictorSpec::Gazetteer { path, .. }) = &mut self.ner {
            resolve(path);
        }
        for e in &mut self.experiment {
            if let Some(ScorerSpec::Lexical { model_path }) = &mut e.scorer {
                resolve(model_path);
            }
        }
    }

    fn apply_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.datagen.seed = seed;
            for e in &mut self.experiment {
                e.seed = seed;
            }
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.apply_seed();
    }

    pub fn apply_endpoints(&mut self, overrides: &EndpointOverrides) {
        if let Some(llm) = &overrides.llm {
            self.llm.endpoint = llm.clone();
        }
        if let Some(scorer) = &overrides.scorer {
            for e in &mut self.experiment {
                if let Some(ScorerSpec::Remote { endpoint }) = &mut e.scorer {
                    *endpoint = scorer.clone();
                }
            }
        }
        if let Some(ner) = &overrides.ner {
            self.ner = Some(PredictorSpec::Remote { endpoint: ner.clone() });
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out_dir.join("dataset.jsonl"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.out_dir.join("lexical_model.json"))
    }

    pub fn validate(&self) -> Result<()> {
        self.report.parsed()?;
        for e in &self.experiment {
            e.validate()
                .map_err(|err| Error::Config(format!("experiment {}: {err}", e.config_id())))?;
        }
        let mut ids: Vec<String> = self.experiment.iter().map(|e| e.config_id()).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate experiment id {:?}; set `id`", w[0])));
        }
        Ok(())
    }
}
