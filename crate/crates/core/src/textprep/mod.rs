//! Text cleaning and the optional token-level ablations (stop-word removal,
//! named-entity removal, stemming).
//!
//! Pipeline order is fixed: line breaks, emoticons, non-alphanumeric
//! characters, tokenization, stop-words, named entities, stemming.

mod stem;
mod tagger;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use unicode_categories::UnicodeCategories;

pub use stem::{SuffixStemmer, DEFAULT_SUFFIXES};
pub use tagger::{EntitySpan, LexiconTagger, NeTagger, TaggerError, DEFAULT_NE_LEXICON};

pub const DEFAULT_STOPWORDS: &str = include_str!("../../resources/stopwords_hi.txt");
pub const DEFAULT_EMOTICONS: &str = include_str!("../../resources/emoticons.txt");

#[derive(Debug, thiserror::Error)]
pub enum PrepError {
    #[error("post {post_id}: named-entity tagging failed: {source}")]
    Tagger {
        post_id: String,
        #[source]
        source: TaggerError,
    },
    #[error("cannot read resource {path}: {source}")]
    Resource {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub strip_non_alphanumeric: bool,
    pub strip_emoticons: bool,
    pub strip_line_breaks: bool,
    pub remove_stopwords: bool,
    pub remove_named_entities: bool,
    pub apply_stemming: bool,
}

impl PrepConfig {
    /// The standard cleaning steps, no ablations.
    pub fn standard() -> PrepConfig {
        PrepConfig {
            strip_non_alphanumeric: true,
            strip_emoticons: true,
            strip_line_breaks: true,
            ..PrepConfig::default()
        }
    }

    pub fn all() -> PrepConfig {
        PrepConfig {
            strip_non_alphanumeric: true,
            strip_emoticons: true,
            strip_line_breaks: true,
            remove_stopwords: true,
            remove_named_entities: true,
            apply_stemming: true,
        }
    }

    fn any_character_step(&self) -> bool {
        self.strip_non_alphanumeric || self.strip_emoticons || self.strip_line_breaks
    }

    fn any_token_step(&self) -> bool {
        self.remove_stopwords || self.remove_named_entities || self.apply_stemming
    }
}

/// Parses a resource list: one entry per line, `#` comments and blank lines
/// ignored, surrounding whitespace trimmed.
pub fn parse_list(resource: &str) -> Vec<String> {
    resource
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub fn load_list(path: &std::path::Path) -> Result<Vec<String>, PrepError> {
    std::fs::read_to_string(path)
        .map(|s| parse_list(&s))
        .map_err(|source| PrepError::Resource {
            path: path.display().to_string(),
            source,
        })
}

/// Characters that survive non-alphanumeric stripping: letters and digits of
/// any script, combining marks (Devanagari vowel signs, virama, nukta), and
/// the zero-width joiners used in Indic conjuncts.
pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c.is_mark() || c == '\u{200C}' || c == '\u{200D}'
}

/// Emoticon patterns, longest first.
#[derive(Clone, Debug)]
pub struct EmoticonSet {
    patterns: Vec<String>,
}

impl EmoticonSet {
    pub fn new(patterns: impl IntoIterator<Item = String>) -> EmoticonSet {
        let mut patterns: Vec<String> = patterns.into_iter().filter(|p| !p.is_empty()).collect();
        patterns.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        patterns.dedup();
        EmoticonSet { patterns }
    }

    pub fn shipped() -> EmoticonSet {
        EmoticonSet::new(parse_list(DEFAULT_EMOTICONS))
    }

    /// One left-to-right pass replacing each emoticon with a space. A match
    /// must be followed by whitespace or the end of the text (so `://` in a
    /// URL is left alone); patterns containing letters (`:D`, `xD`) must also
    /// not follow a word character.
    fn strip_once(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        let mut prev: Option<char> = None;
        'outer: while i < text.len() {
            let rest = &text[i..];
            for p in &self.patterns {
                if !rest.starts_with(p.as_str()) {
                    continue;
                }
                let next = rest[p.len()..].chars().next();
                if next.is_some_and(|c| !c.is_whitespace()) {
                    continue;
                }
                if p.chars().any(is_word_char) && prev.is_some_and(is_word_char) {
                    continue;
                }
                out.push(' ');
                prev = Some(' ');
                i += p.len();
                continue 'outer;
            }
            let c = rest.chars().next().expect("non-empty");
            out.push(c);
            prev = Some(c);
            i += c.len_utf8();
        }
        out
    }

    pub fn strip(&self, text: &str) -> String {
        let mut current = text.to_string();
        loop {
            let next = self.strip_once(&current);
            if next == current {
                return current;
            }
            current = next;
        }
    }
}

fn collapse_spaces(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Character-level cleaning with the shipped emoticon list.
pub fn clean(text: &str, config: &PrepConfig) -> String {
    clean_with(text, config, &EmoticonSet::shipped())
}

pub fn clean_with(text: &str, config: &PrepConfig, emoticons: &EmoticonSet) -> String {
    if !config.any_character_step() {
        return text.to_string();
    }
    let mut s = if config.strip_line_breaks {
        text.chars()
            .map(|c| if is_line_break(c) { ' ' } else { c })
            .collect()
    } else {
        text.to_string()
    };
    if config.strip_emoticons {
        s = emoticons.strip(&s);
    }
    if config.strip_non_alphanumeric {
        s.retain(|c| is_word_char(c) || c.is_whitespace());
    }
    if config.strip_line_breaks {
        collapse_spaces(&s)
    } else {
        // keep line structure, normalize spacing within each line
        s.split('\n')
            .map(collapse_spaces)
            .collect::<Vec<_>>()
            .join("\n")
            .trim_matches('\n')
            .to_string()
    }
}

fn is_line_break(c: char) -> bool {
    matches!(
        c,
        '\n' | '\r' | '\u{0B}' | '\u{0C}' | '\u{85}' | '\u{2028}' | '\u{2029}'
    )
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

pub fn remove_stopwords(tokens: &[String], stoplist: &HashSet<String>) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !stoplist.contains(t.as_str()))
        .cloned()
        .collect()
}

/// Deletes every tagged span and re-spaces the remainder.
pub fn remove_named_entities(text: &str, tagger: &dyn NeTagger) -> Result<String, TaggerError> {
    let spans = tagger.tag(text)?;
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for span in &spans {
        out.push_str(&text[cursor..span.start]);
        out.push(' ');
        cursor = span.end;
    }
    out.push_str(&text[cursor..]);
    Ok(collapse_spaces(&out))
}

pub fn stem(tokens: &[String], stemmer: &SuffixStemmer) -> Vec<String> {
    tokens.iter().map(|t| stemmer.stem(t)).collect()
}

/// A configured preprocessing pipeline with its resources loaded.
pub struct Preprocessor {
    config: PrepConfig,
    emoticons: EmoticonSet,
    stopwords: HashSet<String>,
    tagger: Box<dyn NeTagger>,
    stemmer: SuffixStemmer,
}

impl Preprocessor {
    /// Pipeline backed by the shipped resource files.
    pub fn new(config: PrepConfig) -> Preprocessor {
        Preprocessor {
            config,
            emoticons: EmoticonSet::shipped(),
            stopwords: parse_list(DEFAULT_STOPWORDS).into_iter().collect(),
            tagger: Box::new(LexiconTagger::shipped()),
            stemmer: SuffixStemmer::shipped(),
        }
    }

    pub fn with_tagger(mut self, tagger: Box<dyn NeTagger>) -> Self {
        self.tagger = tagger;
        self
    }

    pub fn with_stopwords(mut self, stopwords: HashSet<String>) -> Self {
        self.stopwords = stopwords;
        self
    }

    pub fn config(&self) -> &PrepConfig {
        &self.config
    }

    pub fn tagger(&self) -> &dyn NeTagger {
        self.tagger.as_ref()
    }

    /// Runs the whole pipeline on one post's text. The token-level stages
    /// repeat until stable so that a stem which lands on a stop-word or a
    /// lexicon entry is removed too; this keeps the pipeline idempotent.
    pub fn apply(&self, post_id: &str, text: &str) -> Result<String, PrepError> {
        let cleaned = clean_with(text, &self.config, &self.emoticons);
        if !self.config.any_token_step() {
            return Ok(cleaned);
        }
        let mut current = tokenize(&cleaned).join(" ");
        loop {
            let next = self.token_stages(post_id, &current)?;
            if next == current {
                return Ok(next);
            }
            current = next;
        }
    }

    fn token_stages(&self, post_id: &str, text: &str) -> Result<String, PrepError> {
        let mut tokens = tokenize(text);
        if self.config.remove_stopwords {
            tokens = remove_stopwords(&tokens, &self.stopwords);
        }
        if self.config.remove_named_entities {
            let joined = tokens.join(" ");
            let stripped =
                remove_named_entities(&joined, self.tagger.as_ref()).map_err(|source| {
                    PrepError::Tagger {
                        post_id: post_id.to_string(),
                        source,
                    }
                })?;
            tokens = tokenize(&stripped);
        }
        if self.config.apply_stemming {
            tokens = stem(&tokens, &self.stemmer);
        }
        Ok(tokens.join(" "))
    }
}
