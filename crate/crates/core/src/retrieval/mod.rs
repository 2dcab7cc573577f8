//! Unsupervised candidate generation.
//!
//! Four heuristics propose context sentences for a query sentence: BM25
//! similarity, sharing a noun, and the sentences immediately before and
//! after. [`Retriever::pool`] merges `n` candidates from each into a
//! deduplicated pool of at most `4n` sentences for re-ranking.

mod bm25;
mod nouns;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use bm25::{bm25_topn, build_bm25_index, idf, terms, tf_weight, Bm25Index, Bm25Params};
pub use nouns::{noun_set, HeuristicNounTagger, NounTagger};
pub(crate) use nouns::{is_capitalized, is_stopword};

use crate::corpus::{Document, Sentence};
use crate::error::{Error, Result};
use crate::seed::SeedKey;

/// Pool sizes surveyed in the original experiments.
pub const POOL_GRID: [usize; 5] = [4, 8, 12, 16, 24];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextWindow {
    #[serde(alias = "chapter")]
    FirstChapter,
    #[serde(alias = "book")]
    FullBook,
}

impl ContextWindow {
    /// Sentence indices retrieval may draw from.
    pub fn range(self, doc: &Document) -> Range<usize> {
        match self {
            ContextWindow::FirstChapter => 0..doc.first_chapter_end,
            ContextWindow::FullBook => 0..doc.len(),
        }
    }
}

impl fmt::Display for ContextWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextWindow::FirstChapter => "first_chapter",
            ContextWindow::FullBook => "full_book",
        })
    }
}

impl FromStr for ContextWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chapter" | "first_chapter" => Ok(ContextWindow::FirstChapter),
            "book" | "full_book" => Ok(ContextWindow::FullBook),
            other => Err(Error::InvalidInput(format!("unknown context window {other:?}"))),
        }
    }
}

/// Heuristic that proposed a candidate, in pooling priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Bm25,
    Samenoun,
    Before,
    After,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Bm25, Source::Samenoun, Source::Before, Source::After];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Sentence index in the query's document.
    pub index: usize,
    pub source: Source,
    /// BM25 score for BM25 candidates, a rank- or distance-derived value otherwise.
    pub heuristic_score: f64,
}

/// Retrieval state for one document and window: the BM25 index plus the
/// noun set of every sentence. Immutable once built, so queries can run
/// concurrently.
pub struct Retriever<'a> {
    doc: &'a Document,
    window: ContextWindow,
    index: Bm25Index,
    nouns: Vec<BTreeSet<String>>,
}

impl<'a> Retriever<'a> {
    pub fn new(
        doc: &'a Document,
        window: ContextWindow,
        params: Bm25Params,
        tagger: &dyn NounTagger,
    ) -> Result<Self> {
        let index = Bm25Index::build(doc, window, params)?;
        let nouns = doc.sentences.iter().map(|s| tagger.nouns(&s.tokens)).collect();
        Ok(Retriever {
            doc,
            window,
            index,
            nouns,
        })
    }

    /// Same as [`Retriever::new`] with the built-in noun heuristic.
    pub fn with_heuristic_nouns(doc: &'a Document, window: ContextWindow, params: Bm25Params) -> Result<Self> {
        Self::new(doc, window, params, &HeuristicNounTagger::for_document(doc))
    }

    pub fn document(&self) -> &'a Document {
        self.doc
    }

    pub fn window(&self) -> ContextWindow {
        self.window
    }

    pub fn bm25(&self) -> &Bm25Index {
        &self.index
    }

    pub fn nouns(&self, sentence: usize) -> &BTreeSet<String> {
        &self.nouns[sentence]
    }

    fn query(&self, query: usize) -> &'a Sentence {
        &self.doc.sentences[query]
    }

    pub fn bm25_topn(&self, query: usize, n: usize) -> Vec<Candidate> {
        self.index.topn(self.query(query), n)
    }

    /// Window sentences sharing at least one noun with the query, ascending.
    pub fn samenoun_matches(&self, query: usize) -> Vec<usize> {
        let q = &self.nouns[query];
        if q.is_empty() {
            return Vec::new();
        }
        self.window
            .range(self.doc)
            .filter(|&i| i != query && !self.nouns[i].is_disjoint(q))
            .collect()
    }

    /// Up to `n` noun-sharing sentences sampled uniformly without
    /// replacement. The draw depends only on `(seed, doc_id, query)`, and a
    /// smaller `n` returns a prefix of a larger one.
    pub fn samenoun_topn(&self, query: usize, n: usize, seed: u64) -> Vec<Candidate> {
        let mut matches = self.samenoun_matches(query);
        let mut rng = SeedKey::new(seed)
            .str("samenoun")
            .str(&self.doc.doc_id)
            .u64(query as u64)
            .rng();
        let take = n.min(matches.len());
        for i in 0..take {
            let j = rng.random_range(i..matches.len());
            matches.swap(i, j);
        }
        matches
            .into_iter()
            .take(take)
            .enumerate()
            .map(|(rank, index)| Candidate {
                index,
                source: Source::Samenoun,
                heuristic_score: 1.0 / (rank + 1) as f64,
            })
            .collect()
    }

    /// The `n` sentences right before and right after the query, clipped to
    /// the window, in document order.
    pub fn surrounding(&self, query: usize, n: usize) -> (Vec<Candidate>, Vec<Candidate>) {
        let range = self.window.range(self.doc);
        let near = |index: usize, source| Candidate {
            index,
            source,
            heuristic_score: 1.0 / index.abs_diff(query) as f64,
        };
        let before_start = query.saturating_sub(n).max(range.start);
        let before = (before_start..query.min(range.end))
            .map(|i| near(i, Source::Before))
            .collect();
        let after_start = (query + 1).max(range.start);
        let after_end = query.saturating_add(1).saturating_add(n).min(range.end);
        let after = (after_start..after_end).map(|i| near(i, Source::After)).collect();
        (before, after)
    }

    /// Union of `n` candidates from each heuristic. Duplicates keep the
    /// first source in bm25 > samenoun > before > after order. Sorted by
    /// sentence index.
    pub fn pool(&self, query: usize, n: usize, seed: u64) -> Vec<Candidate> {
        if !POOL_GRID.contains(&n) {
            log::debug!("pool size n={n} is outside the usual grid {POOL_GRID:?}");
        }
        let (before, after) = self.surrounding(query, n);
        let mut seen = HashSet::new();
        let mut pool: Vec<Candidate> = self
            .bm25_topn(query, n)
            .into_iter()
            .chain(self.samenoun_topn(query, n, seed))
            .chain(before)
            .chain(after)
            .filter(|c| c.index != query && seen.insert(c.index))
            .collect();
        pool.sort_by_key(|c| c.index);
        pool
    }

    pub fn pool_records(&self, query: usize, n: usize, seed: u64) -> Vec<PoolRecord> {
        self.pool(query, n, seed)
            .into_iter()
            .map(|c| PoolRecord {
                doc_id: self.doc.doc_id.clone(),
                query_index: query,
                candidate_index: c.index,
                source: c.source,
                heuristic_score: c.heuristic_score,
            })
            .collect()
    }
}

pub fn samenoun_topn(doc: &Document, window: ContextWindow, query: &Sentence, n: usize, rng_seed: u64) -> Result<Vec<Candidate>> {
    let r = Retriever::with_heuristic_nouns(doc, window, Bm25Params::default())?;
    Ok(r.samenoun_topn(query.index, n, rng_seed))
}

pub fn surrounding(
    doc: &Document,
    window: ContextWindow,
    query: &Sentence,
    n_each_side: usize,
) -> Result<(Vec<Candidate>, Vec<Candidate>)> {
    let r = Retriever::new(doc, window, Bm25Params::default(), &HeuristicNounTagger::new())?;
    Ok(r.surrounding(query.index, n_each_side))
}

pub fn pool_candidates(
    doc: &Document,
    window: ContextWindow,
    query: &Sentence,
    n: usize,
    rng_seed: u64,
    bm25_params: Bm25Params,
) -> Result<Vec<Candidate>> {
    let r = Retriever::with_heuristic_nouns(doc, window, bm25_params)?;
    Ok(r.pool(query.index, n, rng_seed))
}

/// One line of a pool dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub doc_id: String,
    pub query_index: usize,
    pub candidate_index: usize,
    pub source: Source,
    pub heuristic_score: f64,
}
