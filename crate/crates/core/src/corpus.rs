//! Hostility dataset ingestion, validation, statistics and binarization.
//!
//! A corpus file carries one post per row: `id`, `text`, `labels`. The label
//! field is a comma-separated list of tokens (case-insensitive); the single
//! token `non-hostile` marks a non-hostile post, anything else must be a
//! non-empty combination of the four hostile classes.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const STATS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus has no header row")]
    MissingHeader,
    #[error("{} malformed row(s): {}", .0.len(), format_rejected(.0))]
    MalformedRows(Vec<RejectedRow>),
    #[error("line {line}: unknown label token {token:?}")]
    UnknownLabel { line: u64, token: String },
    #[error("line {line}: {reason}")]
    InvalidLabelSet { line: u64, reason: String },
    #[error("duplicate post id {0:?}")]
    DuplicateId(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Write(#[from] std::io::Error),
}

/// A row the loader refused, with its 1-based line number in the source file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

fn format_rejected(rows: &[RejectedRow]) -> String {
    rows.iter()
        .map(|r| format!("line {}: {}", r.line, r.reason))
        .collect::<Vec<_>>()
        .join("; ")
}

/// The four hostile sub-classes, in the fixed output order used by every
/// multi-label head and report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineLabel {
    Fake,
    Hate,
    Defamation,
    Offensive,
}

impl FineLabel {
    pub const ALL: [FineLabel; 4] = [
        FineLabel::Fake,
        FineLabel::Hate,
        FineLabel::Defamation,
        FineLabel::Offensive,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<FineLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FineLabel::Fake => "fake",
            FineLabel::Hate => "hate",
            FineLabel::Defamation => "defamation",
            FineLabel::Offensive => "offensive",
        }
    }
}

impl fmt::Display for FineLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FineLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match LabelToken::parse(s) {
            Some(LabelToken::Fine(l)) => Ok(l),
            _ => Err(format!("not a hostile class: {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coarse {
    Hostile,
    NonHostile,
}

impl Coarse {
    pub fn as_str(self) -> &'static str {
        match self {
            Coarse::Hostile => "hostile",
            Coarse::NonHostile => "non_hostile",
        }
    }

    /// Class index used by the binary softmax heads: hostile = 0.
    pub fn index(self) -> usize {
        match self {
            Coarse::Hostile => 0,
            Coarse::NonHostile => 1,
        }
    }

    pub fn from_index(i: usize) -> Coarse {
        if i == 0 {
            Coarse::Hostile
        } else {
            Coarse::NonHostile
        }
    }
}

impl fmt::Display for Coarse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Surface forms accepted in label fields.
enum LabelToken {
    Fine(FineLabel),
    NonHostile,
}

impl LabelToken {
    fn parse(raw: &str) -> Option<LabelToken> {
        let token = raw.trim().to_lowercase();
        Some(match token.as_str() {
            "fake" => LabelToken::Fine(FineLabel::Fake),
            "hate" => LabelToken::Fine(FineLabel::Hate),
            "defame" | "defamation" => LabelToken::Fine(FineLabel::Defamation),
            "offense" | "offensive" => LabelToken::Fine(FineLabel::Offensive),
            "non-hostile" | "non_hostile" => LabelToken::NonHostile,
            _ => return None,
        })
    }
}

/// Small set over the four hostile classes.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FineSet(u8);

impl FineSet {
    pub const fn empty() -> FineSet {
        FineSet(0)
    }

    pub fn from_labels<I: IntoIterator<Item = FineLabel>>(labels: I) -> FineSet {
        let mut set = FineSet::empty();
        for l in labels {
            set.insert(l);
        }
        set
    }

    pub fn insert(&mut self, label: FineLabel) {
        self.0 |= 1 << label.index();
    }

    pub fn contains(self, label: FineLabel) -> bool {
        self.0 & (1 << label.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = FineLabel> {
        FineLabel::ALL
            .into_iter()
            .filter(move |l| self.contains(*l))
    }

    /// Multi-hot vector in `FineLabel::ALL` order.
    pub fn to_multi_hot(self) -> [bool; 4] {
        FineLabel::ALL.map(|l| self.contains(l))
    }
}

impl fmt::Debug for FineSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for FineSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for FineSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let labels = Vec::<FineLabel>::deserialize(d)?;
        Ok(FineSet::from_labels(labels))
    }
}

/// Coarse verdict plus hostile sub-labels. The constructors enforce that a
/// non-hostile post has no sub-labels and a hostile one has at least one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSet {
    coarse: Coarse,
    fine: FineSet,
}

impl LabelSet {
    pub fn non_hostile() -> LabelSet {
        LabelSet {
            coarse: Coarse::NonHostile,
            fine: FineSet::empty(),
        }
    }

    /// Returns `None` for an empty set.
    pub fn hostile(fine: FineSet) -> Option<LabelSet> {
        (!fine.is_empty()).then_some(LabelSet {
            coarse: Coarse::Hostile,
            fine,
        })
    }

    pub fn coarse(&self) -> Coarse {
        self.coarse
    }

    pub fn fine(&self) -> FineSet {
        self.fine
    }

    pub fn is_hostile(&self) -> bool {
        self.coarse == Coarse::Hostile
    }

    /// Canonical label field as written back to corpus files.
    pub fn to_field(&self) -> String {
        if self.is_hostile() {
            self.fine
                .iter()
                .map(FineLabel::as_str)
                .collect::<Vec<_>>()
                .join(",")
        } else {
            "non-hostile".to_string()
        }
    }

    /// Parses a label field. `line` is only used for error reporting.
    pub fn parse_field(field: &str, line: u64) -> Result<LabelSet, CorpusError> {
        let mut fine = FineSet::empty();
        let mut non_hostile = false;
        for raw in field.split(',') {
            match LabelToken::parse(raw) {
                Some(LabelToken::Fine(l)) => fine.insert(l),
                Some(LabelToken::NonHostile) => non_hostile = true,
                None => {
                    return Err(CorpusError::UnknownLabel {
                        line,
                        token: raw.trim().to_string(),
                    })
                }
            }
        }
        match (non_hostile, fine.is_empty()) {
            (true, true) => Ok(LabelSet::non_hostile()),
            (false, false) => Ok(LabelSet::hostile(fine).expect("non-empty")),
            (true, false) => Err(CorpusError::InvalidLabelSet {
                line,
                reason: format!("non-hostile mixed with hostile labels in {field:?}"),
            }),
            (false, true) => unreachable!("split always yields at least one token"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" | "val" | "valid" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub text: String,
    pub labels: LabelSet,
    pub split: Split,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    Tsv,
    Csv,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Tsv,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(CorpusFormat::Tsv),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

/// An immutable, id-unique collection of posts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    posts: Vec<Post>,
}

impl Corpus {
    pub fn new(posts: Vec<Post>) -> Result<Corpus, CorpusError> {
        let mut seen = HashSet::with_capacity(posts.len());
        for p in &posts {
            if !seen.insert(p.id.as_str()) {
                return Err(CorpusError::DuplicateId(p.id.clone()));
            }
        }
        Ok(Corpus { posts })
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Post> {
        self.posts.iter().find(|p| p.id == id)
    }

    /// Concatenates corpora (e.g. per-split files), rejecting id clashes.
    pub fn merge<I: IntoIterator<Item = Corpus>>(parts: I) -> Result<Corpus, CorpusError> {
        Corpus::new(parts.into_iter().flat_map(|c| c.posts).collect())
    }

    pub fn split(&self, split: Split) -> Corpus {
        Corpus {
            posts: self
                .posts
                .iter()
                .filter(|p| p.split == split)
                .cloned()
                .collect(),
        }
    }

    /// Posts with a hostile coarse label, sub-labels preserved.
    pub fn hostile_subset(&self) -> Corpus {
        Corpus {
            posts: self
                .posts
                .iter()
                .filter(|p| p.labels.is_hostile())
                .cloned()
                .collect(),
        }
    }

    pub fn into_posts(self) -> Vec<Post> {
        self.posts
    }
}

/// Free-function form of [`Corpus::hostile_subset`].
pub fn hostile_subset(corpus: &Corpus) -> Corpus {
    corpus.hostile_subset()
}

fn decode_tsv_field(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn encode_tsv_field(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn reader_builder(format: CorpusFormat) -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.has_headers(false).flexible(true);
    match format {
        CorpusFormat::Tsv => {
            b.delimiter(b'\t').quoting(false);
        }
        CorpusFormat::Csv => {
            b.delimiter(b',');
        }
    }
    b
}

/// Parses a corpus from any reader. All rows are tagged with `split`.
pub fn parse_corpus<R: Read>(
    reader: R,
    format: CorpusFormat,
    split: Split,
) -> Result<Corpus, CorpusError> {
    let mut rdr = reader_builder(format).from_reader(reader);
    let mut records = rdr.records();
    match records.next() {
        None => return Err(CorpusError::MissingHeader),
        Some(header) => {
            header?;
        }
    }

    let mut posts = Vec::new();
    let mut rejected = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0).is_some_and(|f| f.trim().is_empty()) {
            // blank line
            continue;
        }
        if record.len() != 3 {
            rejected.push(RejectedRow {
                line,
                reason: format!("expected 3 columns, found {}", record.len()),
            });
            continue;
        }
        let (id, text, labels) = match format {
            CorpusFormat::Tsv => (
                decode_tsv_field(&record[0]),
                decode_tsv_field(&record[1]),
                record[2].to_string(),
            ),
            CorpusFormat::Csv => (
                record[0].to_string(),
                record[1].to_string(),
                record[2].to_string(),
            ),
        };
        let id = id.trim().to_string();
        if id.is_empty() {
            rejected.push(RejectedRow {
                line,
                reason: "empty id".into(),
            });
            continue;
        }
        if text.trim().is_empty() {
            rejected.push(RejectedRow {
                line,
                reason: "empty text".into(),
            });
            continue;
        }
        let labels = LabelSet::parse_field(&labels, line)?;
        posts.push(Post {
            id,
            text,
            labels,
            split,
        });
    }
    if !rejected.is_empty() {
        return Err(CorpusError::MalformedRows(rejected));
    }
    Corpus::new(posts)
}

pub fn load_corpus(path: &Path, format: CorpusFormat, split: Split) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(file, format, split)
}

/// Writes posts in the loader's format with a `id, text, labels` header.
pub fn write_corpus<W: Write>(
    corpus: &Corpus,
    writer: W,
    format: CorpusFormat,
) -> Result<(), CorpusError> {
    match format {
        CorpusFormat::Tsv => {
            let mut w = std::io::BufWriter::new(writer);
            writeln!(w, "id\ttext\tlabels")?;
            for p in corpus.posts() {
                writeln!(
                    w,
                    "{}\t{}\t{}",
                    encode_tsv_field(&p.id),
                    encode_tsv_field(&p.text),
                    p.labels.to_field()
                )?;
            }
            w.flush()?;
        }
        CorpusFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            w.write_record(["id", "text", "labels"])?;
            for p in corpus.posts() {
                w.write_record([p.id.as_str(), p.text.as_str(), &p.labels.to_field()])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Per-label post counts. A multi-label post counts once under each of its
/// hostile classes, so the class columns may sum to more than `hostile`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub fake: usize,
    pub hate: usize,
    pub defamation: usize,
    pub offensive: usize,
    pub non_hostile: usize,
    pub hostile: usize,
    pub posts: usize,
}

impl LabelCounts {
    pub fn fine(&self, label: FineLabel) -> usize {
        match label {
            FineLabel::Fake => self.fake,
            FineLabel::Hate => self.hate,
            FineLabel::Defamation => self.defamation,
            FineLabel::Offensive => self.offensive,
        }
    }

    fn fine_mut(&mut self, label: FineLabel) -> &mut usize {
        match label {
            FineLabel::Fake => &mut self.fake,
            FineLabel::Hate => &mut self.hate,
            FineLabel::Defamation => &mut self.defamation,
            FineLabel::Offensive => &mut self.offensive,
        }
    }

    fn add(&mut self, other: &LabelCounts) {
        self.fake += other.fake;
        self.hate += other.hate;
        self.defamation += other.defamation;
        self.offensive += other.offensive;
        self.non_hostile += other.non_hostile;
        self.hostile += other.hostile;
        self.posts += other.posts;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub schema_version: u32,
    pub splits: BTreeMap<Split, LabelCounts>,
    pub total: LabelCounts,
}

impl CorpusStats {
    /// Plain-text table with one row per split plus a total row.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<8}{:>8}{:>8}{:>8}{:>8}{:>13}{:>8}\n",
            "split", "fake", "hate", "defame", "offense", "non-hostile", "posts"
        );
        let row = |name: &str, c: &LabelCounts| {
            format!(
                "{:<8}{:>8}{:>8}{:>8}{:>8}{:>13}{:>8}\n",
                name, c.fake, c.hate, c.defamation, c.offensive, c.non_hostile, c.posts
            )
        };
        for (split, counts) in &self.splits {
            out.push_str(&row(split.as_str(), counts));
        }
        out.push_str(&row("total", &self.total));
        out
    }
}

pub fn compute_stats(corpus: &Corpus) -> CorpusStats {
    let mut splits: BTreeMap<Split, LabelCounts> = BTreeMap::new();
    for post in corpus.posts() {
        let c = splits.entry(post.split).or_default();
        c.posts += 1;
        if post.labels.is_hostile() {
            c.hostile += 1;
            for l in post.labels.fine().iter() {
                *c.fine_mut(l) += 1;
            }
        } else {
            c.non_hostile += 1;
        }
    }
    let mut total = LabelCounts::default();
    for c in splits.values() {
        total.add(c);
    }
    CorpusStats {
        schema_version: STATS_SCHEMA_VERSION,
        splits,
        total,
    }
}

/// Yes/no relabeling of the hostile posts for one target class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryView {
    pub target: FineLabel,
    pub items: Vec<(String, bool)>,
}

impl BinaryView {
    pub fn yes_count(&self) -> usize {
        self.items.iter().filter(|(_, y)| *y).count()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub fn binarize_for_class(corpus: &Corpus, target: FineLabel) -> BinaryView {
    BinaryView {
        target,
        items: corpus
            .posts()
            .iter()
            .filter(|p| p.labels.is_hostile())
            .map(|p| (p.id.clone(), p.labels.fine().contains(target)))
            .collect(),
    }
}

/// Label keys for synthetic corpus sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKey {
    Fine(FineLabel),
    NonHostile,
}

/// Class-indicative token lists for the synthetic generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticVocab {
    pub fake: Vec<String>,
    pub hate: Vec<String>,
    pub defamation: Vec<String>,
    pub offensive: Vec<String>,
    pub non_hostile: Vec<String>,
    /// Tokens sprinkled into every post regardless of label.
    pub filler: Vec<String>,
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

impl Default for SyntheticVocab {
    fn default() -> Self {
        SyntheticVocab {
            fake: words("फर्जी अफवाह झूठा दावा वायरल खबर सच्चाई fakenews hoax rumour"),
            hate: words("नफरत दंगा भगाओ मारो जिहादी गद्दार hatred riot traitor"),
            defamation: words("बदनाम भ्रष्ट घोटाला चोर धोखेबाज scam corrupt fraud"),
            offensive: words("साले कुत्ते कमीने बेशर्म गंदा idiot stupid shameless"),
            non_hostile: words("शुभकामनाएं धन्यवाद परीक्षा मौसम त्योहार खुशी students exam festival"),
            filler: words("आज यह है और के लिए में को भी सब लोग देश today news"),
        }
    }
}

impl SyntheticVocab {
    fn for_key(&self, key: LabelKey) -> &[String] {
        match key {
            LabelKey::Fine(FineLabel::Fake) => &self.fake,
            LabelKey::Fine(FineLabel::Hate) => &self.hate,
            LabelKey::Fine(FineLabel::Defamation) => &self.defamation,
            LabelKey::Fine(FineLabel::Offensive) => &self.offensive,
            LabelKey::NonHostile => &self.non_hostile,
        }
    }
}

/// Recipe for a synthetic corpus.
///
/// `sizes` counts single-label posts; `combos` adds multi-label hostile posts.
#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub sizes: BTreeMap<LabelKey, usize>,
    pub combos: Vec<(FineSet, usize)>,
    pub vocab: SyntheticVocab,
    pub split: Split,
    pub id_prefix: String,
    /// Indicative tokens drawn per label of a post.
    pub indicative_tokens: usize,
    pub filler_tokens: usize,
}

impl SyntheticSpec {
    pub fn new(sizes: impl IntoIterator<Item = (LabelKey, usize)>) -> SyntheticSpec {
        SyntheticSpec {
            sizes: sizes.into_iter().collect(),
            combos: Vec::new(),
            vocab: SyntheticVocab::default(),
            split: Split::Train,
            id_prefix: "syn".into(),
            indicative_tokens: 3,
            filler_tokens: 4,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn with_combo(mut self, labels: FineSet, count: usize) -> Self {
        self.combos.push((labels, count));
        self
    }

    pub fn with_id_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.id_prefix = prefix.into();
        self
    }
}

/// Deterministic synthetic corpus: every post mixes a few class-indicative
/// tokens with shared filler, so trained heads can separate the classes.
pub fn generate_synthetic(seed: u64, spec: &SyntheticSpec) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut label_sets: Vec<LabelSet> = Vec::new();
    for (&key, &count) in &spec.sizes {
        let labels = match key {
            LabelKey::NonHostile => LabelSet::non_hostile(),
            LabelKey::Fine(l) => LabelSet::hostile(FineSet::from_labels([l])).expect("non-empty"),
        };
        label_sets.extend(std::iter::repeat_n(labels, count));
    }
    for &(fine, count) in &spec.combos {
        if let Some(labels) = LabelSet::hostile(fine) {
            label_sets.extend(std::iter::repeat_n(labels, count));
        }
    }
    label_sets.shuffle(&mut rng);

    let posts = label_sets
        .into_iter()
        .enumerate()
        .map(|(i, labels)| {
            let keys: Vec<LabelKey> = if labels.is_hostile() {
                labels.fine().iter().map(LabelKey::Fine).collect()
            } else {
                vec![LabelKey::NonHostile]
            };
            let mut tokens: Vec<&str> = Vec::new();
            for key in keys {
                let pool = spec.vocab.for_key(key);
                for _ in 0..spec.indicative_tokens {
                    if !pool.is_empty() {
                        tokens.push(&pool[rng.gen_range(0..pool.len())]);
                    }
                }
            }
            for _ in 0..spec.filler_tokens {
                if !spec.vocab.filler.is_empty() {
                    tokens.push(&spec.vocab.filler[rng.gen_range(0..spec.vocab.filler.len())]);
                }
            }
            tokens.shuffle(&mut rng);
            let mut text = tokens.join(" ");
            if text.is_empty() {
                text.push_str("post");
            }
            Post {
                id: format!("{}-{}-{:05}", spec.id_prefix, spec.split, i),
                text,
                labels,
                split: spec.split,
            }
        })
        .collect();
    Corpus::new(posts).expect("generated ids are unique")
}
