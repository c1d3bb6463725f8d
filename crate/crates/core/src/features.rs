//! Tokenization, vocabularies, n-gram extraction and TF-IDF vectorization.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::artifact::{self, ArtifactError};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const URL_TOKEN: &str = "<url>";
pub const USER_TOKEN: &str = "<user>";

/// Rule-based tokenizer.
///
/// Steps, in order: Unicode NFC, optional lowercasing, whitespace chunking,
/// URL folding (`http://`, `https://`, `www.` chunks become `<url>`),
/// mention folding (`@name` becomes `<user>`), then punctuation splitting:
/// runs of alphanumerics/underscore form words (an apostrophe between two
/// word characters stays inside the word) and every other character is
/// its own token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub fold_urls: bool,
    pub fold_mentions: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self {
            lowercase: true,
            fold_urls: true,
            fold_mentions: true,
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

impl Tokenizer {
    pub fn normalize(&self, text: &str) -> String {
        let nfc: String = text.nfc().collect();
        if self.lowercase {
            nfc.to_lowercase()
        } else {
            nfc
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let text = self.normalize(text);
        let mut out = Vec::new();
        for chunk in text.split_whitespace() {
            if self.fold_urls && is_url(chunk) {
                out.push(URL_TOKEN.to_string());
                continue;
            }
            let chars: Vec<char> = chunk.chars().collect();
            let mut i = 0;
            while i < chars.len() {
                let c = chars[i];
                if self.fold_mentions
                    && c == '@'
                    && chars.get(i + 1).is_some_and(|&n| is_word_char(n))
                {
                    i += 1;
                    while i < chars.len() && is_word_char(chars[i]) {
                        i += 1;
                    }
                    out.push(USER_TOKEN.to_string());
                } else if is_word_char(c) {
                    let start = i;
                    while i < chars.len()
                        && (is_word_char(chars[i])
                            || (chars[i] == '\''
                                && i + 1 < chars.len()
                                && is_word_char(chars[i + 1])))
                    {
                        i += 1;
                    }
                    out.push(chars[start..i].iter().collect());
                } else {
                    out.push(c.to_string());
                    i += 1;
                }
            }
        }
        out
    }
}

pub fn tokenize(text: &str, tokenizer: &Tokenizer) -> Vec<String> {
    tokenizer.tokenize(text)
}

/// All contiguous character windows of lengths `n_min..=n_max`, with multiplicity.
///
/// Operates on Unicode scalar values of `text` as given; callers normalize first.
pub fn char_ngrams(text: &str, n_min: usize, n_max: usize) -> HashMap<String, usize> {
    assert!(n_min >= 1 && n_min <= n_max, "invalid n-gram range");
    let chars: Vec<char> = text.chars().collect();
    let mut out = HashMap::new();
    for n in n_min..=n_max.min(chars.len()) {
        for w in chars.windows(n) {
            *out.entry(w.iter().collect::<String>()).or_insert(0) += 1;
        }
    }
    out
}

/// Word n-grams joined by a single space.
pub fn word_ngrams(tokens: &[String], n_min: usize, n_max: usize) -> HashMap<String, usize> {
    assert!(n_min >= 1 && n_min <= n_max, "invalid n-gram range");
    let mut out = HashMap::new();
    for n in n_min..=n_max.min(tokens.len()) {
        for w in tokens.windows(n) {
            *out.entry(w.join(" ")).or_insert(0) += 1;
        }
    }
    out
}

/// Which whitespace-delimited chunks of a text a feature extractor sees.
///
/// `Plain` keeps purely alphabetic chunks, `Obfuscated` keeps chunks mixing
/// letters with digits or symbols; surrounding punctuation is ignored for
/// the decision.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenView {
    #[default]
    All,
    Plain,
    Obfuscated,
}

impl TokenView {
    pub fn apply<'t>(&self, text: &'t str) -> std::borrow::Cow<'t, str> {
        let keep = |chunk: &str| -> bool {
            let core = chunk.trim_matches(|c: char| c.is_ascii_punctuation());
            let letters = core.chars().filter(|c| c.is_alphabetic()).count();
            let total = core.chars().count();
            match self {
                TokenView::All => true,
                TokenView::Plain => total > 0 && letters == total,
                TokenView::Obfuscated => letters > 0 && letters < total,
            }
        };
        match self {
            TokenView::All => std::borrow::Cow::Borrowed(text),
            _ => std::borrow::Cow::Owned(
                text.split_whitespace()
                    .filter(|c| keep(c))
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VocabConfig {
    /// Cap on non-special tokens.
    pub max_size: usize,
    pub min_freq: usize,
    pub tokenizer: Tokenizer,
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self {
            max_size: 100_000,
            min_freq: 2,
            tokenizer: Tokenizer::default(),
        }
    }
}

/// Token ↔ id table; id 0 is padding, id 1 the unknown token.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr")]
pub struct Vocabulary {
    config: VocabConfig,
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

#[derive(Deserialize)]
struct VocabularyRepr {
    config: VocabConfig,
    tokens: Vec<String>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Self::from_parts(r.config, r.tokens)
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.tokens == other.tokens
    }
}

const VOCAB_MAGIC: &[u8; 8] = b"TXVOCAB\0";
const VOCAB_VERSION: u32 = 1;

impl Vocabulary {
    /// Builds from tokenized documents; ids follow descending frequency, ties lexicographic.
    pub fn build<'a, I>(docs: I, config: VocabConfig) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            for t in doc {
                *freq.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = freq
            .into_iter()
            .filter(|&(_, n)| n >= config.min_freq)
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(config.max_size);
        let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
        tokens.extend(ranked.into_iter().map(|(t, _)| t.to_string()));
        Self::from_parts(config, tokens)
    }

    /// Builds directly from texts with the configured tokenizer.
    pub fn build_from_texts<'a, I>(texts: I, config: VocabConfig) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let docs: Vec<Vec<String>> = texts
            .into_iter()
            .map(|t| config.tokenizer.tokenize(t))
            .collect();
        Self::build(docs.iter().map(Vec::as_slice), config)
    }

    fn from_parts(config: VocabConfig, tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            config,
            tokens,
            index,
        }
    }

    /// A vocabulary with a fixed token list (ids assigned in order from 2).
    pub fn from_tokens(config: VocabConfig, words: &[&str]) -> Self {
        let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
        tokens.extend(words.iter().map(|w| w.to_string()));
        Self::from_parts(config, tokens)
    }

    pub fn config(&self) -> &VocabConfig {
        &self.config
    }

    /// Number of ids including the two specials.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        artifact::write(
            path,
            VOCAB_MAGIC,
            VOCAB_VERSION,
            &artifact::config_hash(&self.config),
            self,
        )?;
        Ok(())
    }

    /// Loads and checks the embedded hash against the stored (and, if given, expected) config.
    pub fn load(path: &Path, expected: Option<&VocabConfig>) -> Result<Self, FeatureError> {
        let (v, hash): (Vocabulary, _) = artifact::read(path, VOCAB_MAGIC, VOCAB_VERSION)?;
        artifact::check_hash(path, &hash, &artifact::config_hash(&v.config))?;
        if let Some(cfg) = expected {
            artifact::check_hash(path, &hash, &artifact::config_hash(cfg))?;
        }
        Ok(v)
    }
}

/// Ids for the first `max_len` tokens, unknowns as 1, right-padded with 0.
pub fn encode_sequence(vocab: &Vocabulary, tokens: &[String], max_len: usize) -> Vec<u32> {
    let mut ids: Vec<u32> = tokens.iter().take(max_len).map(|t| vocab.id(t)).collect();
    ids.resize(max_len, PAD_ID);
    ids
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| dense[i as usize] * v)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analyzer {
    Word,
    Char,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TfidfConfig {
    pub analyzer: Analyzer,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub max_features: usize,
    /// Minimum document frequency.
    pub min_df: usize,
    pub sublinear_tf: bool,
    pub tokenizer: Tokenizer,
    pub view: TokenView,
}

impl TfidfConfig {
    /// Word 1–2 grams, 100k features.
    pub fn word() -> Self {
        Self {
            analyzer: Analyzer::Word,
            ngram_min: 1,
            ngram_max: 2,
            max_features: 100_000,
            min_df: 1,
            sublinear_tf: true,
            tokenizer: Tokenizer::default(),
            view: TokenView::All,
        }
    }

    /// Character 2–5 grams over lowercased text, 300k features.
    pub fn char() -> Self {
        Self {
            analyzer: Analyzer::Char,
            ngram_min: 2,
            ngram_max: 5,
            max_features: 300_000,
            ..Self::word()
        }
    }

    fn validate(&self) -> Result<(), FeatureError> {
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return Err(FeatureError::Config(format!(
                "n-gram range {}..{}",
                self.ngram_min, self.ngram_max
            )));
        }
        if self.max_features == 0 {
            return Err(FeatureError::Config("max_features = 0".into()));
        }
        Ok(())
    }

    /// Raw n-gram counts of one document under this configuration.
    pub fn analyze(&self, text: &str) -> HashMap<String, usize> {
        let text = self.view.apply(text);
        match self.analyzer {
            Analyzer::Word => {
                let tokens = self.tokenizer.tokenize(&text);
                word_ngrams(&tokens, self.ngram_min, self.ngram_max)
            }
            Analyzer::Char => {
                let norm = self.tokenizer.normalize(&text);
                let collapsed = norm.split_whitespace().collect::<Vec<_>>().join(" ");
                char_ngrams(&collapsed, self.ngram_min, self.ngram_max)
            }
        }
    }
}

const TFIDF_MAGIC: &[u8; 8] = b"TXTFIDF\0";
const TFIDF_VERSION: u32 = 1;

/// Fitted TF-IDF vectorizer. Feature indices follow lexicographic term order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TfidfRepr")]
pub struct TfidfModel {
    config: TfidfConfig,
    terms: Vec<String>,
    df: Vec<u32>,
    idf: Vec<f64>,
    n_docs: usize,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

#[derive(Deserialize)]
struct TfidfRepr {
    config: TfidfConfig,
    terms: Vec<String>,
    df: Vec<u32>,
    idf: Vec<f64>,
    n_docs: usize,
}

impl From<TfidfRepr> for TfidfModel {
    fn from(r: TfidfRepr) -> Self {
        Self::from_parts(r.config, r.terms, r.df, r.idf, r.n_docs)
    }
}

impl TfidfModel {
    pub fn fit<'a, I>(docs: I, config: TfidfConfig) -> Result<Self, FeatureError>
    where
        I: IntoParallelIterator<Item = &'a str>,
    {
        config.validate()?;
        let counts: Vec<HashMap<String, usize>> =
            docs.into_par_iter().map(|d| config.analyze(d)).collect();
        let n_docs = counts.len();
        if n_docs == 0 {
            return Err(FeatureError::Config("no training documents".into()));
        }
        let mut df: HashMap<String, u32> = HashMap::new();
        for doc in counts {
            for (term, _) in doc {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, u32)> = df
            .into_iter()
            .filter(|&(_, n)| n as usize >= config.min_df)
            .collect();
        if kept.is_empty() {
            return Err(FeatureError::Config(
                "empty vocabulary after frequency caps".into(),
            ));
        }
        if kept.len() > config.max_features {
            kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            kept.truncate(config.max_features);
        }
        kept.sort_by(|a, b| a.0.cmp(&b.0));
        let (terms, df): (Vec<String>, Vec<u32>) = kept.into_iter().unzip();
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n_docs as f64) / (1.0 + f64::from(d))).ln() + 1.0)
            .collect();
        Ok(Self::from_parts(config, terms, df, idf, n_docs))
    }

    fn from_parts(config: TfidfConfig, terms: Vec<String>, df: Vec<u32>, idf: Vec<f64>, n_docs: usize) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            config,
            terms,
            df,
            idf,
            n_docs,
            index,
        }
    }

    pub fn config(&self) -> &TfidfConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn feature_index(&self, term: &str) -> Option<usize> {
        self.index.get(term).map(|&i| i as usize)
    }

    pub fn df(&self, term: &str) -> Option<u32> {
        self.feature_index(term).map(|i| self.df[i])
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.feature_index(term).map(|i| self.idf[i])
    }

    /// L2-normalized tf·idf vector; unseen n-grams are ignored.
    pub fn transform(&self, text: &str) -> SparseVector {
        let mut entries: Vec<(u32, f64)> = self
            .config
            .analyze(text)
            .into_iter()
            .filter_map(|(term, tf)| {
                let i = *self.index.get(&term)?;
                let tf = tf as f64;
                let w = if self.config.sublinear_tf { 1.0 + tf.ln() } else { tf };
                Some((i, w * self.idf[i as usize]))
            })
            .collect();
        entries.sort_unstable_by_key(|e| e.0);
        let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        let (indices, values) = entries.into_iter().unzip();
        SparseVector {
            dim: self.dim(),
            indices,
            values,
        }
    }

    pub fn transform_many(&self, texts: &[&str]) -> Vec<SparseVector> {
        texts.par_iter().map(|t| self.transform(t)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        artifact::write(
            path,
            TFIDF_MAGIC,
            TFIDF_VERSION,
            &artifact::config_hash(&self.config),
            self,
        )?;
        Ok(())
    }

    pub fn load(path: &Path, expected: Option<&TfidfConfig>) -> Result<Self, FeatureError> {
        let (m, hash): (TfidfModel, _) = artifact::read(path, TFIDF_MAGIC, TFIDF_VERSION)?;
        artifact::check_hash(path, &hash, &artifact::config_hash(&m.config))?;
        if let Some(cfg) = expected {
            artifact::check_hash(path, &hash, &artifact::config_hash(cfg))?;
        }
        Ok(m)
    }
}

/// Fits on the train partition of `corpus`.
pub fn tfidf_fit(corpus: &crate::corpus::Corpus, config: TfidfConfig) -> Result<TfidfModel, FeatureError> {
    let train = corpus.train_view();
    TfidfModel::fit(train.texts(), config)
}

pub fn tfidf_transform(model: &TfidfModel, text: &str) -> SparseVector {
    model.transform(text)
}

/// Operator-supplied swear wordlist: one entry per line, `#` starts a comment.
/// Entries are matched against lowercased tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwearLexicon {
    words: std::collections::BTreeSet<String>,
}

impl SwearLexicon {
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        Self {
            words: words.iter().map(|w| w.as_ref().trim().to_lowercase()).filter(|w| !w.is_empty()).collect(),
        }
    }

    pub fn parse(text: &str) -> Self {
        let lines: Vec<&str> = text.lines().map(|l| l.split('#').next().unwrap_or("")).collect();
        Self::from_words(&lines)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(&token.to_lowercase())
    }

    /// Number of tokens of `text` found in the lexicon.
    pub fn hits(&self, text: &str) -> usize {
        Tokenizer::default().tokenize(text).iter().filter(|t| self.words.contains(*t)).count()
    }

    /// Byte ranges of whitespace-free lexicon matches in `text`, for highlighting.
    pub fn spans(&self, text: &str) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
            let word = c.is_alphanumeric() || c == '_' || c == '\'';
            match (word, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    if self.contains(&text[s..i]) {
                        out.push((s, i));
                    }
                    start = None;
                }
                _ => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenizer_examples() {
        let t = Tokenizer::default();
        assert!(t.tokenize("").is_empty());
        assert_eq!(
            t.tokenize("You ARE an idiot!!"),
            toks(&["you", "are", "an", "idiot", "!", "!"])
        );
        assert_eq!(t.tokenize("fucc nicca yu pose to be pullin up").len(), 8);
        assert_eq!(
            t.tokenize("@bob see https://x.org/a?b=1 you're"),
            toks(&["<user>", "see", "<url>", "you're"])
        );
        assert_eq!(t.tokenize("'quoted'"), toks(&["'", "quoted", "'"]));
        // NFC: decomposed e + combining acute equals the composed form
        assert_eq!(t.tokenize("e\u{301}"), t.tokenize("\u{e9}"));
    }

    #[test]
    fn char_ngram_examples() {
        assert_eq!(char_ngrams("ab", 2, 2), HashMap::from([("ab".into(), 1)]));
        assert_eq!(char_ngrams("aaa", 2, 2), HashMap::from([("aa".into(), 2)]));
        let got = char_ngrams("abcd", 2, 3);
        let want: HashMap<String, usize> = ["ab", "bc", "cd", "abc", "bcd"]
            .iter()
            .map(|s| (s.to_string(), 1))
            .collect();
        assert_eq!(got, want);
        assert!(char_ngrams("a", 2, 3).is_empty());
    }

    #[test]
    fn tfidf_two_documents() {
        let mut cfg = TfidfConfig::word();
        cfg.ngram_max = 1;
        let m = TfidfModel::fit(vec!["a b", "a c"], cfg.clone()).unwrap();
        assert_eq!(m.df("a"), Some(2));
        assert_eq!(m.df("b"), Some(1));
        assert_eq!(m.df("c"), Some(1));

        // idf(a) = ln(3/3) + 1 = 1, idf(b) = ln(3/2) + 1; tf = 1 so sublinear weight 1
        let idf_b = (1.5f64).ln() + 1.0;
        let norm = (1.0 + idf_b * idf_b).sqrt();
        let v = m.transform("a b");
        assert_eq!(v.indices, vec![0, 1]);
        assert!((v.values[0] - 1.0 / norm).abs() < 1e-12);
        assert!((v.values[1] - idf_b / norm).abs() < 1e-12);

        assert_eq!(m.transform("zzz").nnz(), 0);

        cfg.min_df = 3;
        assert!(matches!(
            TfidfModel::fit(vec!["a b", "a c"], cfg),
            Err(FeatureError::Config(_))
        ));
    }

    #[test]
    fn single_document_has_equal_idf() {
        let mut cfg = TfidfConfig::word();
        cfg.ngram_max = 1;
        let m = TfidfModel::fit(vec!["x y z"], cfg).unwrap();
        let idf: Vec<f64> = m.terms().iter().map(|t| m.idf(t).unwrap()).collect();
        assert!(idf.iter().all(|&v| v == idf[0] && v > 0.0));
    }

    #[test]
    fn encode_examples() {
        let v = Vocabulary::from_tokens(VocabConfig::default(), &["you"]);
        assert_eq!(v.id("you"), 2);
        assert_eq!(encode_sequence(&v, &[], 4), vec![0, 0, 0, 0]);
        assert_eq!(
            encode_sequence(&v, &toks(&["you", "zzzunseen"]), 4),
            vec![2, 1, 0, 0]
        );
        assert_eq!(encode_sequence(&v, &toks(&["you"; 9]), 4), vec![2; 4]);
    }

    #[test]
    fn vocabulary_caps_and_order() {
        let docs = [toks(&["b", "a", "a", "c"]), toks(&["b", "a", "d"])];
        let cfg = VocabConfig {
            max_size: 2,
            min_freq: 2,
            tokenizer: Tokenizer::default(),
        };
        let v = Vocabulary::build(docs.iter().map(Vec::as_slice), cfg);
        assert_eq!(v.tokens(), &toks(&["<pad>", "<unk>", "a", "b"])[..]);
    }

    #[test]
    fn artifacts_reject_config_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tfidf.bin");
        let cfg = TfidfConfig::char();
        let m = TfidfModel::fit(vec!["hello there", "general"], cfg.clone()).unwrap();
        m.save(&p).unwrap();
        let back = TfidfModel::load(&p, Some(&cfg)).unwrap();
        assert_eq!(back.transform("hello"), m.transform("hello"));
        let mut other = cfg;
        other.ngram_max = 4;
        assert!(matches!(
            TfidfModel::load(&p, Some(&other)),
            Err(FeatureError::Artifact(ArtifactError::ConfigMismatch { .. }))
        ));

        let vp = dir.path().join("vocab.bin");
        let v = Vocabulary::build_from_texts(["a a b b c"], VocabConfig::default());
        v.save(&vp).unwrap();
        let back = Vocabulary::load(&vp, None).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.id("b"), v.id("b"));
    }

    #[test]
    fn token_views() {
        let t = "you 1d10t, what an idiot! h3llo";
        assert_eq!(TokenView::Plain.apply(t), "you what an idiot!");
        assert_eq!(TokenView::Obfuscated.apply(t), "1d10t, h3llo");
    }

    proptest! {
        #[test]
        fn ngram_count_identity(s in "\\PC{0,40}", n in 1usize..6) {
            let len = s.chars().count();
            let got: usize = char_ngrams(&s, n, n).values().sum();
            prop_assert_eq!(got, len.saturating_sub(n - 1));
        }

        #[test]
        fn tokens_never_empty(s in "\\PC{0,60}") {
            let t = Tokenizer::default();
            let a = t.tokenize(&s);
            prop_assert!(a.iter().all(|x| !x.is_empty()));
            prop_assert_eq!(a, t.tokenize(&s));
        }

        #[test]
        fn tfidf_output_sorted_and_normalized(s in "[a-e ]{0,30}") {
            let m = TfidfModel::fit(vec!["a b c", "b c d", "e a"], TfidfConfig::char()).unwrap();
            let v = m.transform(&s);
            prop_assert!(v.indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(v.indices.iter().all(|&i| (i as usize) < m.dim()));
            if v.nnz() > 0 {
                prop_assert!((v.norm() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn encode_length_is_fixed(words in proptest::collection::vec("[a-z]{1,4}", 0..20), max_len in 1usize..12) {
            let v = Vocabulary::from_tokens(VocabConfig::default(), &["ab", "c"]);
            prop_assert_eq!(encode_sequence(&v, &words, max_len).len(), max_len);
        }
    }

    #[test]
    fn swear_lexicon() {
        let lex = SwearLexicon::parse("# list\nIdiot\nmoron  # trailing\n\n");
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.hits("You IDIOT, you moron. idiots"), 2);
        let t = "hey Moron!";
        assert_eq!(lex.spans(t), vec![(4, 9)]);
        assert_eq!(SwearLexicon::default().hits(t), 0);
    }
}
