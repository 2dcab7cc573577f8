//! BIO tags and span decoding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityClass {
    #[serde(rename = "PER")]
    Per,
    #[serde(rename = "LOC")]
    Loc,
    #[serde(rename = "ORG")]
    Org,
}

impl EntityClass {
    pub const ALL: [EntityClass; 3] = [EntityClass::Per, EntityClass::Loc, EntityClass::Org];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityClass::Per => "PER",
            EntityClass::Loc => "LOC",
            EntityClass::Org => "ORG",
        }
    }
}

impl fmt::Display for EntityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "PER" => Ok(EntityClass::Per),
            "LOC" => Ok(EntityClass::Loc),
            "ORG" => Ok(EntityClass::Org),
            other => Err(Error::InvalidInput(format!("unknown entity class {other:?}"))),
        }
    }
}

/// A token label following `O | (B|I)-(PER|LOC|ORG)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    O,
    B(EntityClass),
    I(EntityClass),
}

impl Tag {
    pub fn class(self) -> Option<EntityClass> {
        match self {
            Tag::O => None,
            Tag::B(c) | Tag::I(c) => Some(c),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::B(c) => write!(f, "B-{c}"),
            Tag::I(c) => write!(f, "I-{c}"),
        }
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Tag::O);
        }
        let bad = || Error::InvalidInput(format!("malformed tag {s:?}"));
        let (prefix, class) = s.split_once('-').ok_or_else(bad)?;
        let class: EntityClass = class.parse().map_err(|_| bad())?;
        match prefix {
            "B" => Ok(Tag::B(class)),
            "I" => Ok(Tag::I(class)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Tag {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A typed `[start, end)` token span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub class: EntityClass,
}

/// Lenient BIO decoding: an `I-X` that does not continue an open `X` entity
/// starts a new one, and `B-X` always starts a new one.
pub fn decode_spans(tags: &[Tag]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<Span> = None;
    for (i, tag) in tags.iter().enumerate() {
        match *tag {
            Tag::O => {
                spans.extend(open.take());
            }
            Tag::B(class) => {
                spans.extend(open.take());
                open = Some(Span { start: i, end: i + 1, class });
            }
            Tag::I(class) => match open.as_mut() {
                Some(span) if span.class == class => span.end = i + 1,
                _ => {
                    spans.extend(open.take());
                    open = Some(Span { start: i, end: i + 1, class });
                }
            },
        }
    }
    spans.extend(open);
    spans
}

/// Writes spans back as canonical BIO over `len` tokens.
pub fn encode_spans(len: usize, spans: &[Span]) -> Vec<Tag> {
    let mut tags = vec![Tag::O; len];
    for span in spans {
        tags[span.start] = Tag::B(span.class);
        for tag in &mut tags[span.start + 1..span.end] {
            *tag = Tag::I(span.class);
        }
    }
    tags
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use EntityClass::*;

    #[test]
    fn tag_grammar() {
        for s in ["O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG"] {
            let tag: Tag = s.parse().unwrap();
            assert_eq!(tag.to_string(), s);
        }
        for s in ["B-GPE", "b-PER", "B_PER", "", "I-", "X-LOC", "O-PER", "B-PER-X"] {
            assert!(s.parse::<Tag>().is_err(), "{s} should be rejected");
        }
    }

    #[test]
    fn decodes_basic_runs() {
        let tags = [Tag::B(Per), Tag::I(Per), Tag::O];
        assert_eq!(decode_spans(&tags), vec![Span { start: 0, end: 2, class: Per }]);
        assert!(decode_spans(&[Tag::O, Tag::O]).is_empty());
    }

    // Independent oracle for two-token sequences: a second token continues the
    // first entity only when it is I- of the same class as an open entity.
    #[test]
    fn two_token_pairs_match_lenient_oracle() {
        let all: Vec<Tag> = std::iter::once(Tag::O)
            .chain(EntityClass::ALL.iter().flat_map(|&c| [Tag::B(c), Tag::I(c)]))
            .collect();
        for &a in &all {
            for &b in &all {
                let expected: Vec<Span> = match (a.class(), b) {
                    (None, Tag::O) => vec![],
                    (None, t) => vec![Span { start: 1, end: 2, class: t.class().unwrap() }],
                    (Some(ca), Tag::O) => vec![Span { start: 0, end: 1, class: ca }],
                    (Some(ca), Tag::I(cb)) if ca == cb => vec![Span { start: 0, end: 2, class: ca }],
                    (Some(ca), t) => vec![
                        Span { start: 0, end: 1, class: ca },
                        Span { start: 1, end: 2, class: t.class().unwrap() },
                    ],
                };
                assert_eq!(decode_spans(&[a, b]), expected, "{a} {b}");
            }
        }
        assert_eq!(decode_spans(&[Tag::B(Per), Tag::B(Per)]).len(), 2);
    }

    fn well_formed() -> impl Strategy<Value = Vec<Tag>> {
        prop::collection::vec((0u8..3, 0usize..3), 0..30).prop_map(|raw| {
            let mut out: Vec<Tag> = Vec::with_capacity(raw.len());
            for (kind, c) in raw {
                let class = EntityClass::ALL[c];
                let tag = match kind {
                    0 => Tag::O,
                    1 => Tag::B(class),
                    _ => match out.last().and_then(|t| t.class()) {
                        Some(prev) => Tag::I(prev),
                        None => Tag::O,
                    },
                };
                out.push(tag);
            }
            out
        })
    }

    proptest! {
        #[test]
        fn decode_encode_round_trips(tags in well_formed()) {
            let spans = decode_spans(&tags);
            prop_assert_eq!(encode_spans(tags.len(), &spans), tags);
        }

        #[test]
        fn spans_are_ordered_and_disjoint(raw in prop::collection::vec(0usize..7, 0..30)) {
            let all = [Tag::O, Tag::B(Per), Tag::I(Per), Tag::B(Loc), Tag::I(Loc), Tag::B(Org), Tag::I(Org)];
            let tags: Vec<Tag> = raw.into_iter().map(|i| all[i]).collect();
            let spans = decode_spans(&tags);
            for w in spans.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
            for s in &spans {
                prop_assert!(s.start < s.end && s.end <= tags.len());
            }
        }
    }
}
