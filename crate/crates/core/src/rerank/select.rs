//! Turning scores into the final context: top-k selection, the
//! bucket-random baseline and order-preserving assembly.

use std::collections::{BTreeMap, HashSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RelevanceScore;
use crate::error::{Error, Result};
use crate::retrieval::{Candidate, Source};
use crate::seed::SeedKey;

/// The `k` highest-scoring candidates, best first. Equal scores go to the
/// lower sentence index.
pub fn rank_topk(candidates: &[Candidate], scores: &[RelevanceScore], k: usize) -> Result<Vec<Candidate>> {
    if candidates.len() != scores.len() {
        return Err(Error::Contract(format!(
            "{} candidates but {} scores",
            candidates.len(),
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .value()
            .total_cmp(&scores[a].value())
            .then(candidates[a].index.cmp(&candidates[b].index))
    });
    Ok(order.into_iter().take(k).map(|i| candidates[i].clone()).collect())
}

/// Random selection balanced over heuristics: `k / 4` candidates from each
/// source bucket, one extra from each of the first `k % 4` buckets (in
/// bm25, samenoun, before, after order), and any shortfall from short
/// buckets backfilled uniformly from the remaining pool. Returned in
/// sentence order.
pub fn bucket_random_topk(pool: &[Candidate], k: usize, seed: u64) -> Vec<Candidate> {
    let mut rng = SeedKey::new(seed).str("bucket_random").rng();
    let mut buckets: BTreeMap<Source, Vec<usize>> = BTreeMap::new();
    for (i, c) in pool.iter().enumerate() {
        buckets.entry(c.source).or_default().push(i);
    }
    let mut chosen: HashSet<usize> = HashSet::new();
    let mut shortfall = 0;
    for (b, source) in Source::ALL.iter().enumerate() {
        let quota = k / 4 + usize::from(b < k % 4);
        let members = buckets.get(source).map(Vec::as_slice).unwrap_or(&[]);
        let picked: Vec<usize> = members.choose_multiple(&mut rng, quota).copied().collect();
        shortfall += quota - picked.len();
        chosen.extend(picked);
    }
    let mut remainder: Vec<usize> = (0..pool.len()).filter(|i| !chosen.contains(i)).collect();
    for _ in 0..shortfall.min(remainder.len()) {
        let j = rng.random_range(0..remainder.len());
        chosen.insert(remainder.swap_remove(j));
    }
    let mut out: Vec<Candidate> = chosen.into_iter().map(|i| pool[i].clone()).collect();
    out.sort_by_key(|c| c.index);
    out
}

/// The query sentence plus its selected contexts, in document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembledContext {
    pub sentences: Vec<usize>,
    pub query_position: usize,
}

impl AssembledContext {
    pub fn query_index(&self) -> usize {
        self.sentences[self.query_position]
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

pub fn assemble_context(query: usize, selected: &[Candidate]) -> Result<AssembledContext> {
    let mut sentences = Vec::with_capacity(selected.len() + 1);
    sentences.push(query);
    let mut seen = HashSet::from([query]);
    for c in selected {
        if !seen.insert(c.index) {
            return Err(Error::Contract(format!(
                "sentence {} selected twice or equal to the query",
                c.index
            )));
        }
        sentences.push(c.index);
    }
    sentences.sort_unstable();
    let query_position = sentences.binary_search(&query).expect("query present");
    Ok(AssembledContext {
        sentences,
        query_position,
    })
}
