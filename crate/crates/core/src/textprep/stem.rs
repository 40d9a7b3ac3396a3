use super::parse_list;

pub const DEFAULT_SUFFIXES: &str = include_str!("../../resources/hindi_suffixes.txt");

/// Minimum stem length, in characters, left behind by a strip.
const MIN_STEM_CHARS: usize = 2;

/// Light Hindi stemmer: repeatedly strips the longest table suffix that
/// leaves at least [`MIN_STEM_CHARS`] characters.
#[derive(Clone, Debug)]
pub struct SuffixStemmer {
    suffixes: Vec<String>,
}

impl SuffixStemmer {
    pub fn new(suffixes: impl IntoIterator<Item = String>) -> SuffixStemmer {
        let mut suffixes: Vec<String> = suffixes.into_iter().filter(|s| !s.is_empty()).collect();
        suffixes.sort_by(|a, b| {
            b.chars()
                .count()
                .cmp(&a.chars().count())
                .then_with(|| a.cmp(b))
        });
        suffixes.dedup();
        SuffixStemmer { suffixes }
    }

    pub fn shipped() -> SuffixStemmer {
        SuffixStemmer::new(parse_list(DEFAULT_SUFFIXES))
    }

    fn strip_once<'a>(&self, token: &'a str) -> Option<&'a str> {
        let len = token.chars().count();
        self.suffixes.iter().find_map(|suf| {
            let stem = token.strip_suffix(suf.as_str())?;
            (len - suf.chars().count() >= MIN_STEM_CHARS).then_some(stem)
        })
    }

    pub fn stem(&self, token: &str) -> String {
        let mut current = token;
        while let Some(shorter) = self.strip_once(current) {
            current = shorter;
        }
        current.to_string()
    }
}
