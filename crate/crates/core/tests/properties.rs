use proptest::prelude::*;

use hostility_core::corpus::{
    parse_corpus, write_corpus, Corpus, CorpusFormat, FineLabel, FineSet, LabelSet, Post, Split,
};
use hostility_core::textprep::{clean, PrepConfig, Preprocessor};

/// Mixed Hindi, Latin, digits, punctuation, emoticons and whitespace.
fn post_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            "[\u{0900}-\u{097F}]{1,6}",
            "[a-zA-Z0-9]{1,6}",
            "[ \t\n\r]{1,3}",
            "[!?.,#@:;()\\-_/\\\\\"']{1,3}",
            Just(":)".to_string()),
            Just(":-(".to_string()),
            Just("\u{200D}".to_string()),
            any::<char>().prop_map(String::from),
        ],
        0..24,
    )
    .prop_map(|parts| parts.concat())
}

fn character_configs() -> impl Strategy<Value = PrepConfig> {
    (any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(a, e, l)| PrepConfig {
        strip_non_alphanumeric: a,
        strip_emoticons: e,
        strip_line_breaks: l,
        ..PrepConfig::default()
    })
}

fn is_devanagari_letter(c: char) -> bool {
    matches!(c, '\u{0904}'..='\u{0939}' | '\u{0958}'..='\u{0961}' | '\u{0966}'..='\u{096F}')
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn cleaning_is_idempotent(text in post_text(), config in character_configs()) {
        let once = clean(&text, &config);
        prop_assert_eq!(clean(&once, &config), once.clone());
    }

    #[test]
    fn full_pipeline_is_idempotent(text in post_text()) {
        let prep = Preprocessor::new(PrepConfig::all());
        let once = prep.apply("p", &text).unwrap();
        prop_assert_eq!(prep.apply("p", &once).unwrap(), once.clone());
    }

    #[test]
    fn identity_config_leaves_text_unchanged(text in post_text()) {
        let prep = Preprocessor::new(PrepConfig::default());
        prop_assert_eq!(prep.apply("p", &text).unwrap(), text);
    }

    #[test]
    fn standard_cleaning_keeps_devanagari_letters_in_order(text in post_text()) {
        let kept: String = clean(&text, &PrepConfig::standard())
            .chars()
            .filter(|&c| is_devanagari_letter(c))
            .collect();
        let expected: String = text.chars().filter(|&c| is_devanagari_letter(c)).collect();
        prop_assert_eq!(kept, expected);
    }
}

fn label_set() -> impl Strategy<Value = LabelSet> {
    (0u8..16).prop_map(|bits| {
        let fine = FineSet::from_labels(
            FineLabel::ALL
                .into_iter()
                .filter(|l| bits & (1 << l.index()) != 0),
        );
        LabelSet::hostile(fine).unwrap_or_else(LabelSet::non_hostile)
    })
}

fn corpus_strategy() -> impl Strategy<Value = Corpus> {
    prop::collection::vec((post_text(), label_set()), 1..20).prop_filter_map(
        "texts need visible content",
        |rows| {
            let posts: Vec<Post> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (text, labels))| Post {
                    id: format!("p{i}"),
                    text: format!("x{text}y"),
                    labels,
                    split: Split::Dev,
                })
                .collect();
            Corpus::new(posts).ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn corpus_round_trips_through_both_formats(corpus in corpus_strategy()) {
        for format in [CorpusFormat::Tsv, CorpusFormat::Csv] {
            let mut bytes = Vec::new();
            write_corpus(&corpus, &mut bytes, format).unwrap();
            let back = parse_corpus(bytes.as_slice(), format, Split::Dev).unwrap();
            prop_assert_eq!(back.posts(), corpus.posts());
        }
    }
}
