//! Word embeddings: subword skip-gram training, text-format loading and lookup.
//!
//! A trained table keeps one row per in-vocabulary word plus a bank of hashed
//! character n-gram rows. A word's vector is the mean of its own row and the
//! rows of its framed n-grams (`<word>` with boundary markers); an unknown
//! word falls back to the mean of its n-gram rows alone.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{self, ArtifactError};
use crate::rng;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipgramConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub negative: usize,
    /// Initial learning rate, decayed linearly to zero over all epochs.
    pub lr: f64,
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: usize,
    pub min_count: usize,
    pub seed: u64,
    /// 1 = deterministic single-threaded training; more threads apply
    /// unsynchronized updates to shared rows.
    pub threads: usize,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            window: 5,
            epochs: 5,
            negative: 5,
            lr: 0.05,
            min_n: 3,
            max_n: 6,
            buckets: 1 << 21,
            min_count: 5,
            seed: 0,
            threads: 1,
        }
    }
}

impl SkipgramConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let bad = |m: &str| Err(EmbeddingError::Config(m.to_string()));
        if self.window < 1 {
            return bad("window must be >= 1");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if self.dim < 1 {
            return bad("dimension must be >= 1");
        }
        if !self.buckets.is_power_of_two() {
            return bad("bucket count must be a power of two");
        }
        if self.min_n < 1 || self.min_n > self.max_n {
            return bad("invalid subword n-gram range");
        }
        if self.threads < 1 {
            return bad("threads must be >= 1");
        }
        if !(self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubwordTable {
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: usize,
    rows: Vec<f32>,
}

impl SubwordTable {
    pub fn row(&self, bucket: usize, dim: usize) -> &[f32] {
        &self.rows[bucket * dim..(bucket + 1) * dim]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMetadata {
    pub source: String,
    pub window: Option<usize>,
    pub epochs: Option<usize>,
    /// Mean negative-sampling loss per epoch (trained tables only).
    pub epoch_loss: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "TableRepr")]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<f32>,
    subwords: Option<SubwordTable>,
    pub metadata: EmbeddingMetadata,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct TableRepr {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<f32>,
    subwords: Option<SubwordTable>,
    metadata: EmbeddingMetadata,
}

impl From<TableRepr> for EmbeddingTable {
    fn from(r: TableRepr) -> Self {
        Self::from_parts(r.dim, r.words, r.vectors, r.subwords, r.metadata)
    }
}

impl PartialEq for EmbeddingTable {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.words == other.words
            && self.vectors == other.vectors
            && self.subwords == other.subwords
            && self.metadata == other.metadata
    }
}

/// 32-bit FNV-1a over UTF-8 bytes.
pub fn fnv1a(bytes: &[u8]) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for &b in bytes {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

/// Character n-grams of `<word>` with lengths in `min_n..=max_n`.
pub fn framed_ngrams(word: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let framed: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    for n in min_n..=max_n.min(framed.len()) {
        for w in framed.windows(n) {
            out.push(w.iter().collect());
        }
    }
    out
}

pub fn bucket_of(ngram: &str, buckets: usize) -> usize {
    fnv1a(ngram.as_bytes()) as usize & (buckets - 1)
}

/// Positive (center, context) position pairs within `window` of each other.
pub fn context_pairs(len: usize, window: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..len {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(len.saturating_sub(1));
        for j in lo..=hi {
            if j != i {
                out.push((i, j));
            }
        }
    }
    out
}

/// f32 matrix shared across training threads; each cell is read and written
/// with relaxed atomics so concurrent updates may interleave.
struct SharedMatrix {
    cols: usize,
    cells: Vec<AtomicU32>,
}

impl SharedMatrix {
    fn new(rows: usize, cols: usize, init: impl FnMut() -> f32) -> Self {
        let mut init = init;
        Self {
            cols,
            cells: (0..rows * cols).map(|_| AtomicU32::new(init().to_bits())).collect(),
        }
    }

    fn read_row(&self, r: usize, out: &mut [f32]) {
        let row = &self.cells[r * self.cols..(r + 1) * self.cols];
        for (o, c) in out.iter_mut().zip(row) {
            *o = f32::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn add_to_row(&self, r: usize, delta: &[f32], scale: f32) {
        let row = &self.cells[r * self.cols..(r + 1) * self.cols];
        for (c, d) in row.iter().zip(delta) {
            let v = f32::from_bits(c.load(Ordering::Relaxed)) + scale * d;
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_vec(self) -> Vec<f32> {
        self.cells
            .into_iter()
            .map(|c| f32::from_bits(c.into_inner()))
            .collect()
    }
}

fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Trainer<'a> {
    cfg: &'a SkipgramConfig,
    input: SharedMatrix,
    output: SharedMatrix,
    subword_ids: Vec<Vec<usize>>,
    noise_cdf: Vec<f64>,
    total_steps: f64,
    processed: AtomicU64,
}

impl Trainer<'_> {
    fn sample_negative(&self, r: &mut rng::Rng) -> usize {
        let total = *self.noise_cdf.last().unwrap();
        let u = r.random::<f64>() * total;
        self.noise_cdf.partition_point(|&c| c <= u).min(self.noise_cdf.len() - 1)
    }

    /// One pass over `sentences`; returns (loss sum, pair count).
    fn run(&self, sentences: &[Vec<usize>], r: &mut rng::Rng) -> (f64, u64) {
        let dim = self.cfg.dim;
        let mut hidden = vec![0f32; dim];
        let mut grad = vec![0f32; dim];
        let mut row = vec![0f32; dim];
        let mut out_row = vec![0f32; dim];
        let mut loss = 0.0f64;
        let mut pairs = 0u64;
        for sent in sentences {
            for (center, ctx) in context_pairs(sent.len(), self.cfg.window) {
                let done = self.processed.fetch_add(1, Ordering::Relaxed) as f64;
                let lr = (self.cfg.lr * (1.0 - done / self.total_steps)).max(self.cfg.lr * 1e-4) as f32;
                let inputs = &self.subword_ids[sent[center]];
                hidden.iter_mut().for_each(|h| *h = 0.0);
                for &i in inputs {
                    self.input.read_row(i, &mut row);
                    hidden.iter_mut().zip(&row).for_each(|(h, v)| *h += v);
                }
                let inv = 1.0 / inputs.len() as f32;
                hidden.iter_mut().for_each(|h| *h *= inv);
                grad.iter_mut().for_each(|g| *g = 0.0);

                let target = sent[ctx];
                for k in 0..=self.cfg.negative {
                    let (word, label) = if k == 0 {
                        (target, 1.0f32)
                    } else {
                        let mut w = self.sample_negative(r);
                        let mut tries = 0;
                        while w == target && tries < 16 {
                            w = self.sample_negative(r);
                            tries += 1;
                        }
                        if w == target {
                            continue;
                        }
                        (w, 0.0f32)
                    };
                    self.output.read_row(word, &mut out_row);
                    let score: f32 = hidden.iter().zip(&out_row).map(|(a, b)| a * b).sum();
                    let p = sigmoid(score);
                    loss -= if label > 0.5 {
                        f64::from(p.max(1e-7)).ln()
                    } else {
                        f64::from((1.0 - p).max(1e-7)).ln()
                    };
                    let g = lr * (label - p);
                    grad.iter_mut().zip(&out_row).for_each(|(a, b)| *a += g * b);
                    self.output.add_to_row(word, &hidden, g);
                }
                for &i in inputs {
                    self.input.add_to_row(i, &grad, inv);
                }
                pairs += 1;
            }
        }
        (loss, pairs)
    }
}

/// Trains hashed-subword skip-gram embeddings with negative sampling.
pub fn train_skipgram<S: AsRef<[String]>>(
    sentences: &[S],
    config: &SkipgramConfig,
) -> Result<EmbeddingTable, EmbeddingError> {
    config.validate()?;
    if sentences.is_empty() {
        return Err(EmbeddingError::Config("empty training stream".into()));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for w in s.as_ref() {
            *counts.entry(w.as_str()).or_insert(0) += 1;
        }
    }
    let mut vocab: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c as usize >= config.min_count)
        .collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    if vocab.is_empty() {
        return Err(EmbeddingError::Config(
            "no word reaches the minimum count".into(),
        ));
    }
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, (w, _))| (*w, i)).collect();
    let n_words = vocab.len();

    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.as_ref().iter().filter_map(|w| index.get(w.as_str()).copied()).collect())
        .collect();
    let subword_ids: Vec<Vec<usize>> = vocab
        .iter()
        .enumerate()
        .map(|(i, (w, _))| {
            let mut ids = vec![i];
            ids.extend(
                framed_ngrams(w, config.min_n, config.max_n)
                    .iter()
                    .map(|g| n_words + bucket_of(g, config.buckets)),
            );
            ids
        })
        .collect();
    let mut noise_cdf = Vec::with_capacity(n_words);
    let mut acc = 0.0;
    for &(_, c) in &vocab {
        acc += (c as f64).powf(0.75);
        noise_cdf.push(acc);
    }

    let pairs_per_epoch: usize = encoded
        .iter()
        .map(|s| context_pairs(s.len(), config.window).len())
        .sum();
    let mut init_rng = rng::derive(config.seed, "skipgram-init", &[]);
    let bound = 1.0 / config.dim as f32;
    let trainer = Trainer {
        cfg: config,
        input: SharedMatrix::new(n_words + config.buckets, config.dim, || {
            init_rng.random_range(-bound..bound)
        }),
        output: SharedMatrix::new(n_words, config.dim, || 0.0),
        subword_ids,
        noise_cdf,
        total_steps: (pairs_per_epoch * config.epochs).max(1) as f64,
        processed: AtomicU64::new(0),
    };

    let mut epoch_loss = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, pairs) = if config.threads == 1 {
            let mut r = rng::derive(config.seed, "skipgram", &[epoch as u64, 0]);
            trainer.run(&encoded, &mut r)
        } else {
            let chunk = encoded.len().div_ceil(config.threads);
            std::thread::scope(|scope| {
                let handles: Vec<_> = encoded
                    .chunks(chunk.max(1))
                    .enumerate()
                    .map(|(t, part)| {
                        let trainer = &trainer;
                        scope.spawn(move || {
                            let mut r = rng::derive(config.seed, "skipgram", &[epoch as u64, t as u64]);
                            trainer.run(part, &mut r)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training thread panicked"))
                    .fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
            })
        };
        epoch_loss.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
    }

    let Trainer {
        input, subword_ids, ..
    } = trainer;
    let input = input.into_vec();
    let dim = config.dim;
    let mut vectors = vec![0f32; n_words * dim];
    for (w, ids) in subword_ids.iter().enumerate() {
        let out = &mut vectors[w * dim..(w + 1) * dim];
        for &i in ids {
            out.iter_mut().zip(&input[i * dim..(i + 1) * dim]).for_each(|(o, v)| *o += v);
        }
        let inv = 1.0 / ids.len() as f32;
        out.iter_mut().for_each(|o| *o *= inv);
    }
    let words: Vec<String> = vocab.iter().map(|(w, _)| w.to_string()).collect();
    Ok(EmbeddingTable::from_parts(
        dim,
        words,
        vectors,
        Some(SubwordTable {
            min_n: config.min_n,
            max_n: config.max_n,
            buckets: config.buckets,
            rows: input[n_words * dim..].to_vec(),
        }),
        EmbeddingMetadata {
            source: "skipgram".into(),
            window: Some(config.window),
            epochs: Some(config.epochs),
            epoch_loss,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadReport {
    pub rows: usize,
    /// Words seen more than once; the last occurrence wins.
    pub duplicates: usize,
}

const EMB_MAGIC: &[u8; 8] = b"TXEMBED\0";
const EMB_VERSION: u32 = 1;

impl EmbeddingTable {
    fn from_parts(
        dim: usize,
        words: Vec<String>,
        vectors: Vec<f32>,
        subwords: Option<SubwordTable>,
        metadata: EmbeddingMetadata,
    ) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self {
            dim,
            words,
            vectors,
            subwords,
            metadata,
            index,
        }
    }

    /// A table from explicit rows (no subword buckets).
    pub fn from_rows(dim: usize, rows: Vec<(String, Vec<f32>)>) -> Result<Self, EmbeddingError> {
        let mut words = Vec::with_capacity(rows.len());
        let mut vectors = Vec::with_capacity(rows.len() * dim);
        for (w, v) in rows {
            if v.len() != dim {
                return Err(EmbeddingError::Config(format!("row `{w}` has {} values", v.len())));
            }
            words.push(w);
            vectors.extend(v);
        }
        Ok(Self::from_parts(
            dim,
            words,
            vectors,
            None,
            EmbeddingMetadata {
                source: "rows".into(),
                window: None,
                epochs: None,
                epoch_loss: Vec::new(),
            },
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn subwords(&self) -> Option<&SubwordTable> {
        self.subwords.as_ref()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index
            .get(word)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Total lookup: stored vector, else subword mean, else zeros.
    pub fn lookup(&self, word: &str) -> Vec<f32> {
        if let Some(v) = self.get(word) {
            return v.to_vec();
        }
        let mut out = vec![0f32; self.dim];
        if let Some(sub) = &self.subwords {
            let grams = framed_ngrams(word, sub.min_n, sub.max_n);
            if !grams.is_empty() {
                for g in &grams {
                    let row = sub.row(bucket_of(g, sub.buckets), self.dim);
                    out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
                }
                let inv = 1.0 / grams.len() as f32;
                out.iter_mut().for_each(|o| *o *= inv);
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.vectors.iter().all(|v| v.is_finite())
            && self
                .subwords
                .as_ref()
                .is_none_or(|s| s.rows.iter().all(|v| v.is_finite()))
    }

    /// Parses the text word-vector format (`word v1 .. vd` per line, optional
    /// `count dim` header line).
    pub fn load_text(path: &Path) -> Result<(Self, LoadReport), EmbeddingError> {
        let p = path.display().to_string();
        let file = File::open(path).map_err(|source| EmbeddingError::Io {
            path: p.clone(),
            source,
        })?;
        let mut lines = BufReader::new(file).lines().enumerate().peekable();
        let parse_err = |line: usize, message: String| EmbeddingError::Parse {
            path: p.clone(),
            line,
            message,
        };

        let mut dim: Option<usize> = None;
        let mut rows: Vec<(String, Vec<f32>)> = Vec::new();
        let mut at: HashMap<String, usize> = HashMap::new();
        let mut report = LoadReport::default();
        let mut first = true;
        while let Some((i, line)) = lines.next() {
            let lineno = i + 1;
            let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if first {
                first = false;
                if let [a, b] = fields[..] {
                    if let (Ok(_), Ok(d)) = (a.parse::<usize>(), b.parse::<usize>()) {
                        let next_width = lines
                            .peek()
                            .and_then(|(_, l)| l.as_ref().ok())
                            .map(|l| l.split_whitespace().count());
                        if next_width.is_none_or(|w| w == d + 1) {
                            dim = Some(d);
                            continue;
                        }
                    }
                }
            }
            let word = fields[0].to_string();
            let values = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<f32>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| parse_err(lineno, format!("bad value `{f}`")))
                })
                .collect::<Result<Vec<f32>, _>>()?;
            match dim {
                None if values.is_empty() => {
                    return Err(parse_err(lineno, "row without values".into()))
                }
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(parse_err(
                        lineno,
                        format!("ragged row: {} values, expected {d}", values.len()),
                    ))
                }
                Some(_) => {}
            }
            if let Some(&slot) = at.get(&word) {
                report.duplicates += 1;
                rows[slot].1 = values;
            } else {
                at.insert(word.clone(), rows.len());
                rows.push((word, values));
            }
        }
        if rows.is_empty() {
            return Err(parse_err(0, "no embedding rows".into()));
        }
        report.rows = rows.len();
        let dim = dim.expect("dimension known once a row is read");
        let mut table = Self::from_rows(dim, rows)?;
        table.metadata.source = p;
        Ok((table, report))
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        artifact::write(
            path,
            EMB_MAGIC,
            EMB_VERSION,
            &artifact::config_hash(&self.metadata),
            self,
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let (t, hash): (EmbeddingTable, _) = artifact::read(path, EMB_MAGIC, EMB_VERSION)?;
        artifact::check_hash(path, &hash, &artifact::config_hash(&t.metadata))?;
        Ok(t)
    }
}

pub fn load_pretrained(path: &Path) -> Result<(EmbeddingTable, LoadReport), EmbeddingError> {
    EmbeddingTable::load_text(path)
}

pub fn lookup(table: &EmbeddingTable, word: &str) -> Vec<f32> {
    table.lookup(word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn small_config() -> SkipgramConfig {
        SkipgramConfig {
            dim: 8,
            epochs: 5,
            buckets: 1 << 8,
            min_count: 1,
            seed: 11,
            ..SkipgramConfig::default()
        }
    }

    fn sentences(text: &str, times: usize) -> Vec<Vec<String>> {
        let s: Vec<String> = text.split(' ').map(String::from).collect();
        vec![s; times]
    }

    #[test]
    fn config_validation() {
        assert!(SkipgramConfig { window: 0, ..small_config() }.validate().is_err());
        assert!(SkipgramConfig { epochs: 0, ..small_config() }.validate().is_err());
        assert!(SkipgramConfig { buckets: 100, ..small_config() }.validate().is_err());
        let empty: Vec<Vec<String>> = Vec::new();
        assert!(matches!(
            train_skipgram(&empty, &small_config()),
            Err(EmbeddingError::Config(_))
        ));
    }

    #[test]
    fn pair_generator_matches_window_enumeration() {
        for len in 0..9 {
            for window in 1..6 {
                let got: BTreeSet<_> = context_pairs(len, window).into_iter().collect();
                let mut want = BTreeSet::new();
                for i in 0..len {
                    for j in 0..len {
                        if i != j && i.abs_diff(j) <= window {
                            want.insert((i, j));
                        }
                    }
                }
                assert_eq!(got, want, "len {len} window {window}");
                assert_eq!(context_pairs(len, window).len(), want.len());
            }
        }
        // "x y z" with window 5: every unordered pair appears.
        let pairs: BTreeSet<_> = context_pairs(3, 5).into_iter().collect();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            assert!(pairs.contains(&(a, b)) && pairs.contains(&(b, a)));
        }
    }

    #[test]
    fn loss_decreases_per_epoch() {
        let t = train_skipgram(&sentences("a b", 1000), &small_config()).unwrap();
        let loss = &t.metadata.epoch_loss;
        assert_eq!(loss.len(), 5);
        assert!(loss.windows(2).all(|w| w[1] < w[0]), "{loss:?}");
        assert!(t.all_finite());
    }

    #[test]
    fn deterministic_single_threaded() {
        let s = sentences("x y z w", 50);
        let a = train_skipgram(&s, &small_config()).unwrap();
        let b = train_skipgram(&s, &small_config()).unwrap();
        assert_eq!(a, b);
        let par = train_skipgram(&s, &SkipgramConfig { threads: 3, ..small_config() }).unwrap();
        assert!(par.all_finite());
        assert_eq!(par.len(), a.len());
    }

    #[test]
    fn composed_vector_is_mean_of_rows() {
        let t = train_skipgram(&sentences("ab cd", 20), &small_config()).unwrap();
        let sub = t.subwords().unwrap();
        // unknown word: mean of framed trigram buckets
        let grams = framed_ngrams("ab", 3, 3);
        assert_eq!(grams, vec!["<ab".to_string(), "ab>".to_string()]);
        let cfg = SkipgramConfig { min_n: 3, max_n: 3, ..small_config() };
        let t3 = train_skipgram(&sentences("xy zw", 20), &cfg).unwrap();
        let s3 = t3.subwords().unwrap();
        let r0 = s3.row(bucket_of("<ab", s3.buckets), 8);
        let r1 = s3.row(bucket_of("ab>", s3.buckets), 8);
        let want: Vec<f32> = r0.iter().zip(r1).map(|(a, b)| (a + b) / 2.0).collect();
        assert_eq!(t3.lookup("ab"), want);
        assert_eq!(t.lookup("cd"), t.get("cd").unwrap().to_vec());
        assert_eq!(sub.buckets, 256);
    }

    #[test]
    fn lookup_without_subwords_is_zero() {
        let t = EmbeddingTable::from_rows(2, vec![("a".into(), vec![1.0, 0.0])]).unwrap();
        assert_eq!(t.lookup("a"), vec![1.0, 0.0]);
        assert_eq!(t.lookup("nope"), vec![0.0, 0.0]);
    }

    #[test]
    fn fnv1a_reference_values() {
        assert_eq!(fnv1a(b""), 0x811c9dc5);
        assert_eq!(fnv1a(b"a"), 0xe40c292c);
        assert_eq!(fnv1a(b"foobar"), 0xbf9cf968);
    }

    fn write(contents: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn text_format() {
        let f = write("a 1 0\nb 0 1\n");
        let (t, r) = load_pretrained(f.path()).unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.lookup("a"), vec![1.0, 0.0]);
        assert_eq!(r.duplicates, 0);

        let h = write("2 2\na 1 0\nb 0 1\n");
        let (th, _) = load_pretrained(h.path()).unwrap();
        assert_eq!(th.words(), t.words());
        assert_eq!(th.lookup("b"), t.lookup("b"));

        assert!(matches!(load_pretrained(write("").path()), Err(EmbeddingError::Parse { .. })));
        assert!(matches!(
            load_pretrained(write("a 1 0\nb 0 1 2\n").path()),
            Err(EmbeddingError::Parse { line: 2, .. })
        ));
        let (d, r) = load_pretrained(write("a 1 0\na 5 5\n").path()).unwrap();
        assert_eq!(r.duplicates, 1);
        assert_eq!(d.lookup("a"), vec![5.0, 5.0]);
    }

    #[test]
    fn native_round_trip() {
        let t = train_skipgram(&sentences("p q r", 10), &small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.bin");
        t.save(&p).unwrap();
        let back = EmbeddingTable::load(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.lookup("pq"), t.lookup("pq"));
    }
}
