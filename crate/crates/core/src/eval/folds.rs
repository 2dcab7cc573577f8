//! Document-level k-fold assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::seed::SeedKey;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub fold_count: usize,
    pub assignment: BTreeMap<String, usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// Documents of fold `f`, sorted by id.
    pub fn fold(&self, f: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &fold)| fold == f)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.fold_count).map(|f| self.fold(f).len()).collect()
    }
}

pub fn make_folds(docs: &[Document], fold_count: usize, seed: u64) -> Result<FoldPlan> {
    let ids: Vec<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
    make_folds_for_ids(&ids, fold_count, seed)
}

/// Seeded shuffle of the sorted ids, then round-robin: the first
/// `len % fold_count` folds get one extra document.
pub fn make_folds_for_ids(ids: &[&str], fold_count: usize, seed: u64) -> Result<FoldPlan> {
    if fold_count == 0 || fold_count > ids.len() {
        return Err(Error::InvalidInput(format!(
            "cannot split {} documents into {fold_count} folds",
            ids.len()
        )));
    }
    let mut order: Vec<&str> = ids.to_vec();
    order.sort_unstable();
    if order.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("duplicate document id in fold split".into()));
    }
    order.shuffle(&mut SeedKey::new(seed).str("folds").rng());
    let assignment = order
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id.to_string(), i % fold_count))
        .collect();
    Ok(FoldPlan {
        fold_count,
        assignment,
        seed,
    })
}
