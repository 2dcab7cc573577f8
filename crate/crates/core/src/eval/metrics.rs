//! Entity-level precision, recall and F1 with exact span matching.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{decode_spans, EntityClass, Span, Tag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCounts {
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl EntityCounts {
    pub fn add(&mut self, other: EntityCounts) {
        self.true_positives += other.true_positives;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }

    pub fn prf(&self) -> Prf {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.true_positives, self.predicted);
        let recall = ratio(self.true_positives, self.gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
            precision_undefined: self.predicted == 0,
            recall_undefined: self.gold == 0,
        }
    }
}

impl std::iter::Sum for EntityCounts {
    fn sum<I: Iterator<Item = EntityCounts>>(iter: I) -> Self {
        let mut total = EntityCounts::default();
        iter.for_each(|c| total.add(c));
        total
    }
}

/// Scores in `[0, 1]`. A zero denominator yields 0 and raises the matching
/// `*_undefined` flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

fn check_shapes(gold: &[Vec<Tag>], pred: &[Vec<Tag>]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::InvalidInput(format!(
                "sentence {i}: {} gold tags but {} predicted",
                g.len(),
                p.len()
            )));
        }
    }
    Ok(())
}

fn counts_where(gold: &[Vec<Tag>], pred: &[Vec<Tag>], keep: impl Fn(&Span) -> bool) -> EntityCounts {
    let mut total = EntityCounts::default();
    for (g, p) in gold.iter().zip(pred) {
        let g: HashSet<Span> = decode_spans(g).into_iter().filter(&keep).collect();
        let p: HashSet<Span> = decode_spans(p).into_iter().filter(&keep).collect();
        total.add(EntityCounts {
            true_positives: g.intersection(&p).count(),
            predicted: p.len(),
            gold: g.len(),
        });
    }
    total
}

pub fn entity_counts(gold: &[Vec<Tag>], pred: &[Vec<Tag>]) -> Result<EntityCounts> {
    check_shapes(gold, pred)?;
    Ok(counts_where(gold, pred, |_| true))
}

/// Micro-averaged over all sentences.
pub fn entity_prf(gold: &[Vec<Tag>], pred: &[Vec<Tag>]) -> Result<Prf> {
    Ok(entity_counts(gold, pred)?.prf())
}

pub fn class_counts(gold: &[Vec<Tag>], pred: &[Vec<Tag>]) -> Result<BTreeMap<EntityClass, EntityCounts>> {
    check_shapes(gold, pred)?;
    Ok(EntityClass::ALL
        .iter()
        .map(|&c| (c, counts_where(gold, pred, |s| s.class == c)))
        .collect())
}
