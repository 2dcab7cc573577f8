//! Noun identification for the same-noun heuristic.

use std::collections::{BTreeSet, HashSet};

use crate::corpus::Document;

/// Anything able to pick the nouns of a tokenized sentence. Nouns are
/// returned lowercased.
pub trait NounTagger: Send + Sync {
    fn nouns(&self, tokens: &[String]) -> BTreeSet<String>;
}

const NOUN_SUFFIXES: &[&str] = &["tion", "ment", "ness", "ity", "er", "or"];

// Closed-class words, plus common non-nouns that happen to carry a noun suffix.
const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "ah", "all", "also", "although", "am",
    "among", "an", "and", "another", "any", "are", "as", "at", "be", "because", "been", "before",
    "behind", "being", "below", "beneath", "beside", "besides", "between", "beyond", "both", "but",
    "by", "can", "cannot", "could", "did", "do", "does", "doing", "down", "during", "each",
    "either", "else", "enough", "ere", "even", "ever", "every", "few", "for", "from", "further",
    "had", "has", "have", "having", "he", "hence", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "however", "i", "if", "in", "inside", "into", "is", "it", "its",
    "itself", "just", "last", "latter", "former", "least", "less", "lest", "like", "may", "me",
    "might", "mine", "more", "most", "much", "must", "my", "myself", "neither", "never",
    "nevertheless", "no", "nor", "not", "now", "o", "of", "off", "oh", "on", "once", "one", "only",
    "onto", "or", "other", "otherwise", "ought", "our", "ours", "ourselves", "out", "outside",
    "over", "per", "perhaps", "quite", "rather", "same", "shall", "she", "should", "since", "so",
    "some", "such", "than", "that", "the", "thee", "their", "theirs", "them", "themselves", "then",
    "there", "therefore", "these", "they", "thine", "this", "those", "thou", "though", "through",
    "thus", "thy", "till", "to", "together", "too", "toward", "towards", "under", "unless", "until",
    "up", "upon", "us", "very", "was", "we", "were", "what", "whatever", "when", "whenever",
    "where", "wherever", "whether", "which", "while", "whither", "who", "whoever", "whom",
    "whose", "why", "will", "with", "within", "without", "would", "ye", "yes", "yet", "you",
    "your", "yours", "yourself", "yourselves", "later", "sooner", "further", "hither", "thither",
    "whither", "forever", "whosoever", "nowhere", "somewhere", "anywhere", "everywhere",
];

pub(crate) fn is_stopword(lower: &str) -> bool {
    STOPWORDS.contains(&lower)
}

fn is_word(token: &str) -> bool {
    token.chars().any(char::is_alphabetic)
        && token.chars().all(|c| c.is_alphabetic() || matches!(c, '\'' | '-' | '’'))
}

pub(crate) fn is_capitalized(token: &str) -> bool {
    is_word(token) && token.chars().next().is_some_and(char::is_uppercase)
}

fn has_noun_suffix(lower: &str) -> bool {
    lower.chars().count() >= 4
        && lower.chars().all(|c| c.is_lowercase() || c == '-')
        && NOUN_SUFFIXES.iter().any(|s| lower.ends_with(s))
}

/// Position of the first word token; leading quotes and brackets do not count.
fn initial_word(tokens: &[String]) -> Option<usize> {
    tokens.iter().position(|t| is_word(t))
}

/// Rule-based noun finder.
///
/// A token counts as a noun when it is a capitalized word that is not the
/// first word of its sentence, or a lowercase word with a noun-like suffix
/// (-tion, -ment, -ness, -ity, -er, -or). A capitalized sentence-initial
/// word only counts if the same word also appears capitalized in the middle
/// of some sentence of the document. Closed-class words never count.
#[derive(Debug, Clone, Default)]
pub struct HeuristicNounTagger {
    corroborated: HashSet<String>,
}

impl HeuristicNounTagger {
    /// A tagger with no corpus knowledge: sentence-initial words never count.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn for_document(doc: &Document) -> Self {
        Self::from_sentences(doc.sentences.iter().map(|s| s.tokens.as_slice()))
    }

    /// Corroborates capitalized words seen away from sentence starts in any
    /// of `sentences`.
    pub fn from_sentences<'a>(sentences: impl IntoIterator<Item = &'a [String]>) -> Self {
        let mut corroborated = HashSet::new();
        for tokens in sentences {
            let first = initial_word(tokens);
            for (i, t) in tokens.iter().enumerate() {
                if Some(i) != first && is_capitalized(t) {
                    corroborated.insert(t.clone());
                }
            }
        }
        HeuristicNounTagger { corroborated }
    }
}

impl NounTagger for HeuristicNounTagger {
    fn nouns(&self, tokens: &[String]) -> BTreeSet<String> {
        let first = initial_word(tokens);
        let mut out = BTreeSet::new();
        for (i, token) in tokens.iter().enumerate() {
            if !is_word(token) {
                continue;
            }
            let lower = token.to_lowercase();
            if is_stopword(&lower) {
                continue;
            }
            let noun = if is_capitalized(token) {
                Some(i) != first || self.corroborated.contains(token)
            } else {
                has_noun_suffix(&lower)
            };
            if noun {
                out.insert(lower);
            }
        }
        out
    }
}

pub fn noun_set(tagger: &dyn NounTagger, tokens: &[String]) -> BTreeSet<String> {
    tagger.nouns(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn capitalized_mid_sentence_words() {
        let tagger = HeuristicNounTagger::new();
        assert_eq!(tagger.nouns(&toks("The Black Company marched")), set(&["black", "company"]));
    }

    #[test]
    fn stopwords_only() {
        let tagger = HeuristicNounTagger::new();
        assert!(tagger.nouns(&toks("and then there were none of them")).is_empty());
        assert!(tagger.nouns(&toks("I never saw her after")).is_empty());
    }

    #[test]
    fn suffix_rule() {
        let tagger = HeuristicNounTagger::new();
        assert_eq!(
            tagger.nouns(&toks("his position caused great sadness in the city")),
            set(&["position", "sadness", "city"])
        );
    }

    #[test]
    fn sentence_initial_needs_corroboration() {
        let alone = crate::corpus::Document::new(
            "d",
            "d",
            vec![(toks("Croaker was whistling"), None), (toks("the men were tired"), None)],
            2,
        )
        .unwrap();
        let tagger = HeuristicNounTagger::for_document(&alone);
        assert!(tagger.nouns(&alone.sentences[0].tokens).is_empty());

        let corroborated = crate::corpus::Document::new(
            "d",
            "d",
            vec![(toks("Croaker was whistling"), None), (toks("they followed Croaker home"), None)],
            2,
        )
        .unwrap();
        let tagger = HeuristicNounTagger::for_document(&corroborated);
        assert_eq!(tagger.nouns(&corroborated.sentences[0].tokens), set(&["croaker"]));
    }

    #[test]
    fn leading_quote_does_not_hide_initial_word() {
        let tagger = HeuristicNounTagger::new();
        assert_eq!(tagger.nouns(&toks("\" It's my stomach , Croaker")), set(&["croaker"]));
    }
}
