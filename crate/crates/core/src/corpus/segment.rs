//! Rule-based sentence segmentation and word tokenization.
//!
//! Sentences end at a run of `.`, `!` or `?` followed by whitespace and an
//! uppercase letter or a quote, or at a paragraph break (blank line). A fixed
//! list of abbreviations keeps their period attached so they never end a
//! sentence. Tokens are whitespace-separated chunks with leading and trailing
//! punctuation split off; no character other than whitespace is ever dropped.

use std::ops::Range;

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "st", "mt", "ft", "jr", "sr", "prof", "rev", "gen", "col", "capt",
    "lt", "sgt", "maj", "cpt", "gov", "hon", "messrs", "mme", "mlle", "esq", "etc", "vs", "vol", "ch", "chap", "fig", "inc", "co", "ltd", "e.g", "i.e", "cf", "viz", "jan", "feb",
    "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '“' | '”' | '‘' | '’' | '«' | '»' | '`')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | '”' | '’' | '»' | ')' | ']' | '}')
}

fn is_dash(c: char) -> bool {
    matches!(c, '\u{2014}' | '\u{2013}')
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// A token located in its source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSpan {
    pub range: Range<usize>,
    /// Whitespace separates this token from the previous one.
    pub space_before: bool,
    /// A blank line separates this token from the previous one.
    pub paragraph_before: bool,
}

fn is_abbreviation(word: &str) -> bool {
    let lower = word.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // initials such as "J" or dotted forms such as "U.S"
    let mut chars = lower.chars();
    match (chars.next(), chars.next()) {
        // "I." is far more often the pronoun than an initial
        (Some(c), None) => c.is_alphabetic() && word.chars().all(char::is_uppercase) && word != "I",
        _ => {
            !lower.is_empty()
                && lower
                    .split('.')
                    .all(|part| part.chars().count() == 1 && part.chars().all(char::is_alphabetic))
        }
    }
}

/// Splits one whitespace-free chunk starting at byte `base` into token ranges.
fn split_chunk(chunk: &str, base: usize, out: &mut Vec<Range<usize>>) {
    // dashes always stand alone, grouped when repeated ("--" or two em dashes)
    let mut piece_start = 0;
    let mut iter = chunk.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        let dash = is_dash(c) || (c == '-' && chunk[i + 1..].starts_with('-'));
        if dash {
            split_piece(&chunk[piece_start..i], base + piece_start, out);
            let mut end = i + c.len_utf8();
            while let Some(&(j, d)) = iter.peek() {
                if is_dash(d) || d == '-' {
                    end = j + d.len_utf8();
                    iter.next();
                } else {
                    break;
                }
            }
            out.push(base + i..base + end);
            piece_start = end;
        }
    }
    split_piece(&chunk[piece_start..], base + piece_start, out);
}

fn split_piece(piece: &str, base: usize, out: &mut Vec<Range<usize>>) {
    if piece.is_empty() {
        return;
    }
    let chars: Vec<(usize, char)> = piece.char_indices().collect();
    let core_start = chars.iter().position(|&(_, c)| !is_punct(c));
    let Some(core_start) = core_start else {
        push_punct_run(piece, base, out);
        return;
    };
    let core_end = chars.iter().rposition(|&(_, c)| !is_punct(c)).unwrap() + 1;

    for &(i, c) in &chars[..core_start] {
        out.push(base + i..base + i + c.len_utf8());
    }

    let word_start = chars[core_start].0;
    let mut word_end = chars.get(core_end).map_or(piece.len(), |&(i, _)| i);
    if piece[word_end..].starts_with('.') && is_abbreviation(&piece[word_start..word_end]) {
        word_end += 1;
    }
    out.push(base + word_start..base + word_end);
    push_punct_run(&piece[word_end..], base + word_end, out);
}

/// Terminator characters group into one token ("...", "?!"); other
/// punctuation marks become single-character tokens.
fn push_punct_run(run: &str, base: usize, out: &mut Vec<Range<usize>>) {
    let mut iter = run.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        let mut end = i + c.len_utf8();
        if is_terminator(c) {
            while let Some(&(j, d)) = iter.peek() {
                if is_terminator(d) {
                    end = j + d.len_utf8();
                    iter.next();
                } else {
                    break;
                }
            }
        }
        out.push(base + i..base + end);
    }
}

/// Tokenizes `text`, keeping byte offsets and the whitespace layout between tokens.
pub fn token_spans(text: &str) -> Vec<TokenSpan> {
    let mut spans = Vec::new();
    let mut ranges = Vec::new();
    let mut gap_start = 0;
    let mut pos = 0;
    for chunk in text.split_whitespace_indices() {
        let (start, word) = chunk;
        let gap = &text[gap_start..start];
        ranges.clear();
        split_chunk(word, start, &mut ranges);
        for (n, range) in ranges.drain(..).enumerate() {
            let first = n == 0;
            spans.push(TokenSpan {
                range,
                space_before: first && pos > 0 && !gap.is_empty(),
                paragraph_before: first && pos > 0 && gap.matches('\n').count() >= 2,
            });
            pos += 1;
        }
        gap_start = start + word.len();
    }
    spans
}

trait SplitWhitespaceIndices {
    fn split_whitespace_indices(&self) -> Vec<(usize, &str)>;
}

impl SplitWhitespaceIndices for str {
    fn split_whitespace_indices(&self) -> Vec<(usize, &str)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, c) in self.char_indices() {
            match (c.is_whitespace(), start) {
                (true, Some(s)) => {
                    out.push((s, &self[s..i]));
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, &self[s..]));
        }
        out
    }
}

/// Word tokenization without sentence splitting.
pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text)
        .into_iter()
        .map(|t| text[t.range].to_string())
        .collect()
}

/// Groups token spans into sentences, returned as ranges over the token list.
pub fn sentence_token_ranges(text: &str, tokens: &[TokenSpan]) -> Vec<Range<usize>> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < tokens.len() {
        if i > start && tokens[i].paragraph_before {
            sentences.push(start..i);
            start = i;
        }
        let tok = &text[tokens[i].range.clone()];
        if tok.chars().all(is_terminator) {
            // closing quotes and brackets glued to the terminator stay with it
            let mut end = i + 1;
            while end < tokens.len()
                && !tokens[end].space_before
                && text[tokens[end].range.clone()].chars().all(is_closing)
            {
                end += 1;
            }
            let breaks = match tokens.get(end) {
                None => true,
                Some(next) => {
                    let first = text[next.range.clone()].chars().next().unwrap();
                    next.paragraph_before
                        || (next.space_before && (first.is_uppercase() || is_quote(first)))
                }
            };
            if breaks {
                sentences.push(start..end);
                start = end;
            }
            i = end;
            continue;
        }
        i += 1;
    }
    if start < tokens.len() {
        sentences.push(start..tokens.len());
    }
    sentences
}

/// Splits raw text into sentences of tokens. Empty input yields no sentences.
pub fn segment_sentences(raw_text: &str) -> Vec<Vec<String>> {
    let tokens = token_spans(raw_text);
    sentence_token_ranges(raw_text, &tokens)
        .into_iter()
        .map(|r| {
            tokens[r]
                .iter()
                .map(|t| raw_text[t.range.clone()].to_string())
                .collect()
        })
        .collect()
}

/// The first sentence of `text` as a slice of the original string.
pub fn first_sentence(text: &str) -> Option<&str> {
    let tokens = token_spans(text);
    let first = sentence_token_ranges(text, &tokens).into_iter().next()?;
    let start = tokens[first.start].range.start;
    let end = tokens[first.end - 1].range.end;
    Some(&text[start..end])
}

/// Joins tokens into readable text: no space before closing punctuation and
/// none after opening brackets.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut prev_opens = false;
    for (i, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        let attaches = tok
            .chars()
            .all(|c| matches!(c, ',' | '.' | ';' | ':' | '!' | '?' | ')' | ']' | '}' | '…'));
        if i > 0 && !attaches && !prev_opens {
            out.push(' ');
        }
        out.push_str(tok);
        prev_opens = matches!(tok, "(" | "[" | "{");
    }
    out
}
