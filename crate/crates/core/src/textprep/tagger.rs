use std::collections::HashMap;

use super::{is_word_char, parse_list};

pub const DEFAULT_NE_LEXICON: &str = include_str!("../../resources/ne_lexicon.txt");

#[derive(Debug, thiserror::Error)]
pub enum TaggerError {
    #[error("tagger backend: {0}")]
    Backend(String),
}

/// A tagged entity: byte span into the tagged text plus its surface form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl EntitySpan {
    /// Counting key: Latin case-folded, other scripts verbatim.
    pub fn key(&self) -> String {
        self.surface.to_lowercase()
    }
}

/// Named-entity tagger. Returned spans are sorted, non-overlapping and lie on
/// character boundaries of the input.
pub trait NeTagger: Send + Sync {
    fn tag(&self, text: &str) -> Result<Vec<EntitySpan>, TaggerError>;
}

/// Greedy longest-match tagger over a word-sequence lexicon.
#[derive(Clone, Debug, Default)]
pub struct LexiconTagger {
    // first word -> candidate entries (as folded word sequences), longest first
    entries: HashMap<String, Vec<Vec<String>>>,
}

fn fold(word: &str) -> String {
    word.to_lowercase()
}

/// Maximal runs of word characters with their byte spans.
fn words(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (is_word_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, text.len()));
    }
    out
}

impl LexiconTagger {
    pub fn from_entries<I, S>(entries: I) -> LexiconTagger
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tagger = LexiconTagger::default();
        tagger.extend(entries);
        tagger
    }

    pub fn shipped() -> LexiconTagger {
        LexiconTagger::from_entries(parse_list(DEFAULT_NE_LEXICON))
    }

    /// Adds user entries (e.g. from an extension file).
    pub fn extend<I, S>(&mut self, entries: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for e in entries {
            let e = e.as_ref();
            let seq: Vec<String> = words(e).into_iter().map(|(s, t)| fold(&e[s..t])).collect();
            if seq.is_empty() {
                continue;
            }
            let bucket = self.entries.entry(seq[0].clone()).or_default();
            if !bucket.contains(&seq) {
                bucket.push(seq);
                bucket.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl NeTagger for LexiconTagger {
    fn tag(&self, text: &str) -> Result<Vec<EntitySpan>, TaggerError> {
        let spans = words(text);
        let folded: Vec<String> = spans.iter().map(|&(s, e)| fold(&text[s..e])).collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < spans.len() {
            let matched = self.entries.get(&folded[i]).and_then(|cands| {
                cands.iter().find(|seq| {
                    i + seq.len() <= folded.len()
                        && seq.iter().zip(&folded[i..]).all(|(a, b)| a == b)
                })
            });
            match matched {
                Some(seq) => {
                    let start = spans[i].0;
                    let end = spans[i + seq.len() - 1].1;
                    out.push(EntitySpan {
                        start,
                        end,
                        surface: text[start..end].to_string(),
                    });
                    i += seq.len();
                }
                None => i += 1,
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_entry_wins() {
        let t = LexiconTagger::from_entries(["Rahul", "Rahul Gandhi"]);
        let spans = t.tag("rahul gandhi said; Rahul left").unwrap();
        let surfaces: Vec<_> = spans.iter().map(|s| s.surface.as_str()).collect();
        assert_eq!(surfaces, ["rahul gandhi", "Rahul"]);
    }

    #[test]
    fn matches_only_whole_words() {
        let t = LexiconTagger::from_entries(["Ram"]);
        assert!(t.tag("Ramesh program").unwrap().is_empty());
        assert_eq!(t.tag("#Ram!").unwrap()[0].surface, "Ram");
    }

    #[test]
    fn devanagari_entries_match_exactly() {
        let t = LexiconTagger::shipped();
        let spans = t.tag("राहुल गांधी – Maa मैं").unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].surface, "राहुल गांधी");
    }

    #[test]
    fn spans_are_ordered_and_in_bounds() {
        let t = LexiconTagger::shipped();
        let text = "Modi और India, मोदी दिल्ली में";
        let spans = t.tag(text).unwrap();
        assert_eq!(spans.len(), 4);
        for w in spans.windows(2) {
            assert!(w[0].end <= w[1].start);
        }
        assert!(spans.iter().all(|s| s.end <= text.len()));
    }
}
