//! NER corpus: documents made of sentences, with gold BIO tags on the
//! annotated first chapter and raw, segmented text for the rest of the book.

mod bio;
mod load;
mod segment;

use std::collections::{BTreeMap, BTreeSet};

pub use bio::{decode_spans, encode_spans, EntityClass, Span, Tag};
pub use load::{
    load_ner_corpus, parse_annotated, write_annotated, AnnotatedSentence, Manifest, ManifestBook,
};
pub use segment::{
    detokenize, first_sentence, segment_sentences, sentence_token_ranges, token_spans, tokenize,
    TokenSpan,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub doc_id: String,
    pub index: usize,
    pub tokens: Vec<String>,
    /// Gold tags, present on every token of an annotated sentence and absent otherwise.
    pub tags: Option<Vec<Tag>>,
}

impl Sentence {
    pub fn annotated(&self) -> bool {
        self.tags.is_some()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        detokenize(&self.tokens)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub sentences: Vec<Sentence>,
    /// Exclusive end of chapter 1, as a sentence index.
    pub first_chapter_end: usize,
}

impl Document {
    /// Builds a document, assigning sentence indices and checking the
    /// structural invariants.
    pub fn new(
        doc_id: impl Into<String>,
        title: impl Into<String>,
        sentences: Vec<(Vec<String>, Option<Vec<Tag>>)>,
        first_chapter_end: usize,
    ) -> Result<Self> {
        let doc_id = doc_id.into();
        let sentences: Vec<Sentence> = sentences
            .into_iter()
            .enumerate()
            .map(|(index, (tokens, tags))| Sentence {
                doc_id: doc_id.clone(),
                index,
                tokens,
                tags,
            })
            .collect();
        let doc = Document {
            doc_id,
            title: title.into(),
            sentences,
            first_chapter_end,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Corpus(format!("{}: {msg}", self.doc_id)));
        if self.first_chapter_end == 0 || self.first_chapter_end > self.sentences.len() {
            return err(format!(
                "first chapter end {} outside 1..={}",
                self.first_chapter_end,
                self.sentences.len()
            ));
        }
        for (i, s) in self.sentences.iter().enumerate() {
            if s.index != i || s.doc_id != self.doc_id {
                return err(format!("sentence {i} has index {} in {}", s.index, s.doc_id));
            }
            if s.tokens.is_empty() {
                return err(format!("sentence {i} is empty"));
            }
            if let Some(t) = s.tokens.iter().find(|t| t.is_empty() || t.contains(['\n', '\r', '\t'])) {
                return err(format!("sentence {i} has invalid token {t:?}"));
            }
            if let Some(tags) = &s.tags {
                if tags.len() != s.tokens.len() {
                    return err(format!("sentence {i} has {} tags for {} tokens", tags.len(), s.tokens.len()));
                }
                if i >= self.first_chapter_end {
                    return err(format!("annotated sentence {i} lies outside the first chapter"));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn annotated_sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.sentences.iter().filter(|s| s.annotated())
    }
}

/// A typed entity occurrence inside one sentence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mention {
    pub entity_class: EntityClass,
    pub start: usize,
    pub end: usize,
    /// Space-joined texts of the spanned tokens.
    pub surface: String,
}

/// Decodes the gold tags of an annotated sentence into mentions, ordered by start.
pub fn extract_mentions(sentence: &Sentence) -> Result<Vec<Mention>> {
    let tags = sentence.tags.as_ref().ok_or_else(|| {
        Error::Contract(format!(
            "extract_mentions on unannotated sentence {} of {}",
            sentence.index, sentence.doc_id
        ))
    })?;
    Ok(decode_spans(tags)
        .into_iter()
        .map(|span| Mention {
            entity_class: span.class,
            start: span.start,
            end: span.end,
            surface: sentence.tokens[span.start..span.end].join(" "),
        })
        .collect())
}

/// Every distinct (case-sensitive) surface string per entity class.
pub fn unique_entity_strings(docs: &[Document]) -> BTreeMap<EntityClass, BTreeSet<String>> {
    let mut out: BTreeMap<EntityClass, BTreeSet<String>> = BTreeMap::new();
    for sentence in docs.iter().flat_map(|d| d.annotated_sentences()) {
        for mention in extract_mentions(sentence).expect("annotated") {
            out.entry(mention.entity_class).or_default().insert(mention.surface);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    fn tags(s: &str) -> Option<Vec<Tag>> {
        Some(s.split(' ').map(|t| t.parse().unwrap()).collect())
    }

    fn doc(id: &str, sentences: &[(&str, &str)]) -> Document {
        let s = sentences.iter().map(|(t, g)| (toks(t), tags(g))).collect();
        Document::new(id, id, s, sentences.len()).unwrap()
    }

    #[test]
    fn mention_surface_joins_tokens() {
        let d = doc("d", &[("Frodo Baggins .", "B-PER I-PER O")]);
        let m = extract_mentions(&d.sentences[0]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].surface, "Frodo Baggins");
        assert_eq!(m[0].entity_class, EntityClass::Per);
        assert_eq!((m[0].start, m[0].end), (0, 2));
    }

    #[test]
    fn all_o_and_repeated_b() {
        let d = doc("d", &[("a b .", "O O O"), ("Sam Sam", "B-PER B-PER")]);
        assert!(extract_mentions(&d.sentences[0]).unwrap().is_empty());
        let m = extract_mentions(&d.sentences[1]).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.iter().all(|m| m.surface == "Sam" && m.end - m.start == 1));
    }

    #[test]
    fn unannotated_sentence_is_a_contract_violation() {
        let d = Document::new("d", "d", vec![(toks("a ."), tags("O O")), (toks("b ."), None)], 1).unwrap();
        assert!(matches!(extract_mentions(&d.sentences[1]), Err(Error::Contract(_))));
    }

    #[test]
    fn unique_strings_per_class() {
        let a = doc("a", &[("Frodo ran .", "B-PER O O"), ("Frodo hid .", "B-PER O O"), ("to Paris", "O B-LOC")]);
        let b = doc("b", &[("Paris smiled", "B-PER O"), ("frodo", "B-PER")]);
        let docs = [a, b];
        let got = unique_entity_strings(&docs);

        // brute-force scan over every token window
        let mut expected: BTreeMap<EntityClass, BTreeSet<String>> = BTreeMap::new();
        for s in docs.iter().flat_map(|d| d.sentences.iter()) {
            let t = s.tags.as_ref().unwrap();
            for i in 0..t.len() {
                if let Tag::B(c) = t[i] {
                    let mut j = i + 1;
                    while j < t.len() && t[j] == Tag::I(c) {
                        j += 1;
                    }
                    expected.entry(c).or_default().insert(s.tokens[i..j].join(" "));
                }
            }
        }
        assert_eq!(got, expected);
        assert_eq!(got[&EntityClass::Per].len(), 3);
        assert!(got[&EntityClass::Loc].contains("Paris"));
        assert!(got[&EntityClass::Per].contains("Paris"));
        assert!(unique_entity_strings(&[]).is_empty());
    }

    #[test]
    fn document_invariants() {
        let ok = || vec![(toks("a"), tags("O")), (toks("b"), None)];
        assert!(Document::new("d", "t", ok(), 0).is_err());
        assert!(Document::new("d", "t", ok(), 3).is_err());
        // annotated sentence after the chapter boundary
        assert!(Document::new("d", "t", vec![(toks("a"), None), (toks("b"), tags("O"))], 1).is_err());
        assert!(Document::new("d", "t", vec![(toks("a b"), tags("O"))], 1).is_err());
        let d = Document::new("d", "t", ok(), 1).unwrap();
        assert_eq!(d.sentences.iter().map(|s| s.index).collect::<Vec<_>>(), vec![0, 1]);
    }
}
