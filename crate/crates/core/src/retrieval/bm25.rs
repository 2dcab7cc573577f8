//! Okapi BM25 over the sentences of one document window.
//!
//! ```text
//! score(q, s) = Σ_{t ∈ q} IDF(t) · tf·(k1 + 1) / (tf + k1·(1 − b + b·|s|/avglen))
//! IDF(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))
//! ```
//!
//! The `1 +` inside the logarithm keeps IDF positive even for terms present
//! in every sentence. Query terms are treated as a set.

use std::collections::{BTreeSet, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{Candidate, ContextWindow, Source};
use crate::corpus::{Document, Sentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.5, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::InvalidInput(format!("bm25 k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidInput(format!("bm25 b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Lowercased tokens that carry at least one alphanumeric character.
pub fn terms<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(str::to_lowercase)
        .collect()
}

/// Inverse document frequency with the non-negative floor.
pub fn idf(n_docs: usize, doc_freq: usize) -> f64 {
    let n = n_docs as f64;
    let df = doc_freq as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Term-frequency saturation component of one term.
pub fn tf_weight(tf: f64, len: f64, avg_len: f64, params: Bm25Params) -> f64 {
    let norm = 1.0 - params.b + params.b * len / avg_len;
    tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    pub doc_id: String,
    window: Range<usize>,
    term_freqs: Vec<HashMap<String, u32>>,
    lengths: Vec<usize>,
    doc_freq: HashMap<String, usize>,
    avg_len: f64,
    params: Bm25Params,
}

impl Bm25Index {
    pub fn build(doc: &Document, window: ContextWindow, params: Bm25Params) -> Result<Self> {
        params.validate()?;
        let range = window.range(doc);
        if range.is_empty() {
            return Err(Error::InvalidInput(format!("{}: empty {window} window", doc.doc_id)));
        }
        let mut term_freqs = Vec::with_capacity(range.len());
        let mut lengths = Vec::with_capacity(range.len());
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for sentence in &doc.sentences[range.clone()] {
            let terms = terms(&sentence.tokens);
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in &terms {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for t in tf.keys() {
                *doc_freq.entry(t.clone()).or_default() += 1;
            }
            lengths.push(terms.len());
            term_freqs.push(tf);
        }
        let total: usize = lengths.iter().sum();
        // an all-punctuation window still needs a positive average
        let avg_len = (total as f64 / lengths.len() as f64).max(1.0);
        Ok(Bm25Index {
            doc_id: doc.doc_id.clone(),
            window: range,
            term_freqs,
            lengths,
            doc_freq,
            avg_len,
            params,
        })
    }

    pub fn window(&self) -> Range<usize> {
        self.window.clone()
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(self.len(), self.doc_freq(term))
    }

    /// Score of the sentence at document index `sentence` for a set of query terms.
    pub fn score(&self, query_terms: &BTreeSet<String>, sentence: usize) -> f64 {
        if !self.window.contains(&sentence) {
            return 0.0;
        }
        let slot = sentence - self.window.start;
        let tfs = &self.term_freqs[slot];
        let len = self.lengths[slot] as f64;
        query_terms
            .iter()
            .filter_map(|t| tfs.get(t).map(|&tf| (t, tf)))
            .map(|(t, tf)| self.idf(t) * tf_weight(f64::from(tf), len, self.avg_len, self.params))
            .sum()
    }

    /// The `n` best-scoring sentences of the window, excluding the query
    /// itself and anything scoring zero; ties go to the lower index.
    pub fn topn(&self, query: &Sentence, n: usize) -> Vec<Candidate> {
        let query_terms: BTreeSet<String> = terms(&query.tokens).into_iter().collect();
        let mut scored: Vec<(usize, f64)> = self
            .window
            .clone()
            .filter(|&i| i != query.index)
            .map(|i| (i, self.score(&query_terms, i)))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(n);
        scored
            .into_iter()
            .map(|(index, heuristic_score)| Candidate {
                index,
                source: Source::Bm25,
                heuristic_score,
            })
            .collect()
    }
}

pub fn build_bm25_index(doc: &Document, window: ContextWindow, k1: f64, b: f64) -> Result<Bm25Index> {
    Bm25Index::build(doc, window, Bm25Params { k1, b })
}

pub fn bm25_topn(index: &Bm25Index, query: &Sentence, n: usize) -> Vec<Candidate> {
    index.topn(query, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    fn doc(sentences: &[&str]) -> Document {
        let s = sentences
            .iter()
            .map(|s| (s.split(' ').map(String::from).collect(), None))
            .collect();
        Document::new("d", "d", s, sentences.len()).unwrap()
    }

    fn query(tokens: &str) -> Sentence {
        Sentence {
            doc_id: "d".into(),
            index: usize::MAX,
            tokens: tokens.split(' ').map(String::from).collect(),
            tags: None,
        }
    }

    #[test]
    fn ubiquitous_term_keeps_positive_idf() {
        let d = doc(&["the cat", "the dog", "the cow"]);
        let idx = Bm25Index::build(&d, ContextWindow::FullBook, Bm25Params::default()).unwrap();
        let expected = (1.0f64 + 0.5 / 3.5).ln();
        assert!((idx.idf("the") - expected).abs() < 1e-12);
        assert!(idx.idf("the") > 0.0);
    }

    #[test]
    fn identical_query_ranks_first_among_equal_lengths() {
        let d = doc(&[
            "the dog barked loudly",
            "a cat slept there",
            "the cat barked once",
            "river flows past town",
            "cat and dog play",
        ]);
        let idx = Bm25Index::build(&d, ContextWindow::FullBook, Bm25Params::default()).unwrap();
        let top = idx.topn(&query("the cat barked once"), 5);
        assert_eq!(top[0].index, 2);
        // brute force: every other sentence scores strictly less
        let q: BTreeSet<String> = terms(&["the", "cat", "barked", "once"]).into_iter().collect();
        for i in [0, 1, 3, 4] {
            assert!(idx.score(&q, i) < idx.score(&q, 2));
        }
    }

    #[test]
    fn k1_zero_is_sum_of_idf() {
        let d = doc(&["a a a b", "b c", "c d e"]);
        let idx = Bm25Index::build(&d, ContextWindow::FullBook, Bm25Params { k1: 0.0, b: 0.75 }).unwrap();
        let q: BTreeSet<String> = ["a", "b", "z"].iter().map(|s| s.to_string()).collect();
        let expected = idx.idf("a") + idx.idf("b");
        assert!((idx.score(&q, 0) - expected).abs() < 1e-12);
    }

    #[test]
    fn no_shared_term_gives_nothing() {
        let d = doc(&["a b", "c d"]);
        let idx = Bm25Index::build(&d, ContextWindow::FullBook, Bm25Params::default()).unwrap();
        assert!(idx.topn(&query("x y"), 3).is_empty());
        assert_eq!(idx.topn(&query("a c"), 10).len(), 2);
    }

    #[test]
    fn excludes_query_and_breaks_ties_by_index() {
        let d = doc(&["x y", "x y", "x y", "z"]);
        let idx = Bm25Index::build(&d, ContextWindow::FullBook, Bm25Params::default()).unwrap();
        let top = idx.topn(&d.sentences[1], 3);
        assert_eq!(top.iter().map(|c| c.index).collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn rejects_bad_params() {
        let d = doc(&["a"]);
        assert!(build_bm25_index(&d, ContextWindow::FullBook, -1.0, 0.5).is_err());
        assert!(build_bm25_index(&d, ContextWindow::FullBook, 1.2, 1.5).is_err());
    }

    #[test]
    fn monotone_in_tf() {
        let params = Bm25Params::default();
        let mut prev = 0.0;
        for tf in 1..20 {
            let w = tf_weight(tf as f64, 10.0, 8.0, params);
            assert!(w > prev);
            prev = w;
        }
    }
}
