//! Corpus files on disk.
//!
//! A corpus directory holds, per book, an annotated first chapter
//! (`<token>\t<tag>` per line, blank line between sentences) and the full
//! text as `<doc_id>.txt`. An optional `manifest.toml` maps each doc_id to a
//! title and explicit file names; without it, every `*.conll` file is a book
//! titled by its doc_id.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::segment::segment_sentences;
use super::{Document, Tag};
use crate::error::{Error, Result};

pub type AnnotatedSentence = (Vec<String>, Vec<Tag>);

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "book", default)]
    pub books: Vec<ManifestBook>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestBook {
    pub id: String,
    #[serde(default)]
    pub title: Option<String>,
    pub annotated: PathBuf,
    pub full_text: PathBuf,
}

pub fn parse_annotated(text: &str, path: &Path) -> Result<Vec<AnnotatedSentence>> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            if !tokens.is_empty() {
                sentences.push((std::mem::take(&mut tokens), std::mem::take(&mut tags)));
            }
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let (token, tag) = line
            .rsplit_once('\t')
            .ok_or_else(|| parse_err(format!("expected `<token>\\t<tag>`, got {line:?}")))?;
        if token.is_empty() || token.contains('\t') {
            return Err(parse_err(format!("invalid token {token:?}")));
        }
        let tag: Tag = tag.parse().map_err(|e: Error| parse_err(e.to_string()))?;
        tokens.push(token.to_string());
        tags.push(tag);
    }
    if !tokens.is_empty() {
        sentences.push((tokens, tags));
    }
    Ok(sentences)
}

/// Canonical form: one `token\ttag` line per token, one blank line between
/// sentences, newline after the last token.
pub fn write_annotated(sentences: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for (i, (tokens, tags)) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (token, tag) in tokens.iter().zip(tags) {
            out.push_str(token);
            out.push('\t');
            out.push_str(&tag.to_string());
            out.push('\n');
        }
    }
    out
}

fn normalized(tokens: &[String]) -> String {
    tokens
        .iter()
        .flat_map(|t| t.chars())
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Aligns the segmented full text with the annotated chapter and returns the
/// sentences that follow it.
fn remainder_after_chapter(annotated: &[AnnotatedSentence], full: Vec<Vec<String>>) -> Vec<Vec<String>> {
    let Some((last, _)) = annotated.last() else {
        return full;
    };
    let target = normalized(last);
    let expected_at = annotated.len() - 1;
    let found = full
        .iter()
        .enumerate()
        .filter(|(_, s)| normalized(s) == target)
        .min_by_key(|(i, _)| i.abs_diff(expected_at))
        .map(|(i, _)| i);
    let skip = match found {
        Some(i) => i + 1,
        None => {
            log::warn!("chapter end not found in full text; assuming {} sentences", annotated.len());
            annotated.len()
        }
    };
    full.into_iter().skip(skip).collect()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn discover(dir: &Path) -> Result<Manifest> {
    let mut books = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "conll") {
            let id = path.file_stem().unwrap().to_string_lossy().into_owned();
            books.push(ManifestBook {
                title: None,
                annotated: path.file_name().unwrap().into(),
                full_text: format!("{id}.txt").into(),
                id,
            });
        }
    }
    books.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Manifest { books })
}

/// Loads every book of a corpus directory.
pub fn load_ner_corpus(dir: impl AsRef<Path>) -> Result<Vec<Document>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::Corpus(format!("{} is not a directory", dir.display())));
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = if manifest_path.exists() {
        toml::from_str::<Manifest>(&read(&manifest_path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", manifest_path.display())))?
    } else {
        discover(dir)?
    };
    if manifest.books.is_empty() {
        return Err(Error::Corpus(format!("no documents found in {}", dir.display())));
    }

    let mut seen = BTreeSet::new();
    let dupes: Vec<&str> = manifest
        .books
        .iter()
        .filter(|b| !seen.insert(b.id.as_str()))
        .map(|b| b.id.as_str())
        .collect();
    if !dupes.is_empty() {
        return Err(Error::Corpus(format!("duplicate doc_id: {}", dupes.join(", "))));
    }
    let missing: Vec<&str> = manifest
        .books
        .iter()
        .filter(|b| !dir.join(&b.full_text).is_file())
        .map(|b| b.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Corpus(format!("missing full-text file for: {}", missing.join(", "))));
    }

    manifest
        .books
        .iter()
        .map(|book| {
            let ann_path = dir.join(&book.annotated);
            let annotated = parse_annotated(&read(&ann_path)?, &ann_path)?;
            if annotated.is_empty() {
                return Err(Error::Corpus(format!("{}: no annotated sentences", book.id)));
            }
            let full = segment_sentences(&read(&dir.join(&book.full_text))?);
            let rest = remainder_after_chapter(&annotated, full);
            let chapter_end = annotated.len();
            let sentences = annotated
                .into_iter()
                .map(|(tokens, tags)| (tokens, Some(tags)))
                .chain(rest.into_iter().map(|tokens| (tokens, None)))
                .collect();
            let title = book.title.clone().unwrap_or_else(|| book.id.clone());
            Document::new(book.id.clone(), title, sentences, chapter_end)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EntityClass;

    const SAMPLE: &str = "Frodo\tB-PER\nran\tO\n.\tO\n\nHe\tO\nhid\tO\n.\tO\n";

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn canonical_round_trip() {
        let parsed = parse_annotated(SAMPLE, Path::new("x")).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].1[0], Tag::B(EntityClass::Per));
        assert_eq!(write_annotated(&parsed), SAMPLE);
    }

    #[test]
    fn malformed_tag_names_line() {
        let err = parse_annotated("a\tO\nb\tB-GPE\n", Path::new("book.conll")).unwrap_err();
        match err {
            Error::Parse { path, line, .. } => {
                assert_eq!(path, Path::new("book.conll"));
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_annotated("no-tab-here\n", Path::new("x")).is_err());
    }

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_ner_corpus(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no documents found"), "{err}");
    }

    #[test]
    fn missing_full_text_lists_book() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "lotr.conll", SAMPLE);
        let err = load_ner_corpus(dir.path()).unwrap_err();
        assert!(err.to_string().contains("lotr"), "{err}");
    }

    #[test]
    fn duplicate_ids_in_manifest() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.conll", SAMPLE);
        write(dir.path(), "a.txt", "Frodo ran. He hid.");
        write(
            dir.path(),
            MANIFEST_FILE,
            "[[book]]\nid='a'\nannotated='a.conll'\nfull_text='a.txt'\n[[book]]\nid='a'\nannotated='a.conll'\nfull_text='a.txt'\n",
        );
        let err = load_ner_corpus(dir.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate doc_id: a"), "{err}");
    }

    #[test]
    fn aligns_full_text_after_chapter() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.conll", SAMPLE);
        write(dir.path(), "a.txt", "Frodo ran. He hid. Sam followed him. The end.");
        let docs = load_ner_corpus(dir.path()).unwrap();
        assert_eq!(docs.len(), 1);
        let d = &docs[0];
        assert_eq!(d.first_chapter_end, 2);
        assert_eq!(d.len(), 4);
        assert_eq!(d.sentences[2].tokens, vec!["Sam", "followed", "him", "."]);
        assert!(!d.sentences[2].annotated());
        assert_eq!(d.title, "a");
    }

    #[test]
    fn unaligned_full_text_skips_chapter_length() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.conll", SAMPLE);
        write(dir.path(), "a.txt", "Frodo sprinted. She hid. Sam followed him.");
        let d = &load_ner_corpus(dir.path()).unwrap()[0];
        assert_eq!(d.first_chapter_end, 2);
        assert_eq!(d.len(), 3);
        assert_eq!(d.sentences[2].tokens[0], "Sam");
    }
}
