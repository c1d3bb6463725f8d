//! Labeled comment collections: ingestion, validation, splits and folds.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {message}")]
    Row {
        path: String,
        row: u64,
        message: String,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("invalid label schema: {0}")]
    Schema(String),
    #[error("duplicate comment id `{0}`")]
    DuplicateId(String),
    #[error("comment `{id}`: {message}")]
    Labels { id: String, message: String },
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaKind {
    MultiLabel,
    MultiClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub name: String,
    pub kind: SchemaKind,
    pub classes: Vec<String>,
}

impl LabelSchema {
    pub fn new(
        name: impl Into<String>,
        kind: SchemaKind,
        classes: Vec<String>,
    ) -> Result<Self, CorpusError> {
        if classes.is_empty() {
            return Err(CorpusError::Schema("no classes".into()));
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if c.is_empty() {
                return Err(CorpusError::Schema("empty class name".into()));
            }
            if !seen.insert(c.as_str()) {
                return Err(CorpusError::Schema(format!("duplicate class `{c}`")));
            }
        }
        Ok(Self {
            name: name.into(),
            kind,
            classes,
        })
    }

    /// The six-label Wikipedia talk page schema.
    pub fn jigsaw() -> Self {
        Self::new(
            "wikipedia",
            SchemaKind::MultiLabel,
            [
                "toxic",
                "severe_toxic",
                "obscene",
                "threat",
                "insult",
                "identity_hate",
            ]
            .map(String::from)
            .to_vec(),
        )
        .unwrap()
    }

    /// The three-class Twitter schema; class order matches the `class` column codes.
    pub fn davidson() -> Self {
        Self::new(
            "twitter",
            SchemaKind::MultiClass,
            ["hate", "offensive", "neither"].map(String::from).to_vec(),
        )
        .unwrap()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub text: String,
    pub labels: Vec<bool>,
}

impl Comment {
    pub fn is_clean(&self) -> bool {
        !self.labels.iter().any(|&b| b)
    }

    /// Index of the single set bit (multi-class samples).
    pub fn class(&self) -> Option<usize> {
        self.labels.iter().position(|&b| b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    schema: LabelSchema,
    samples: Vec<Comment>,
    split: Option<Vec<Partition>>,
}

impl Corpus {
    pub fn new(
        schema: LabelSchema,
        samples: Vec<Comment>,
        split: Option<Vec<Partition>>,
    ) -> Result<Self, CorpusError> {
        let mut ids = HashSet::with_capacity(samples.len());
        for s in &samples {
            if !ids.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
            validate_labels(&schema, s)?;
        }
        if let Some(split) = &split {
            if split.len() != samples.len() {
                return Err(CorpusError::Argument(format!(
                    "split covers {} samples, corpus has {}",
                    split.len(),
                    samples.len()
                )));
            }
        }
        Ok(Self {
            schema,
            samples,
            split,
        })
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn samples(&self) -> &[Comment] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self) -> Option<&[Partition]> {
        self.split.as_deref()
    }

    pub fn with_split(mut self, split: Vec<Partition>) -> Result<Self, CorpusError> {
        if split.len() != self.samples.len() {
            return Err(CorpusError::Argument("split length mismatch".into()));
        }
        self.split = Some(split);
        Ok(self)
    }

    /// Indices of the train partition; the whole corpus when no split is set.
    pub fn train_indices(&self) -> Vec<usize> {
        self.partition_indices(Partition::Train)
    }

    /// Indices of the test partition; empty when no split is set.
    pub fn test_indices(&self) -> Vec<usize> {
        self.partition_indices(Partition::Test)
    }

    fn partition_indices(&self, which: Partition) -> Vec<usize> {
        match &self.split {
            None if which == Partition::Train => (0..self.samples.len()).collect(),
            None => Vec::new(),
            Some(split) => split
                .iter()
                .enumerate()
                .filter(|(_, p)| **p == which)
                .map(|(i, _)| i)
                .collect(),
        }
    }

    pub fn view(&self, indices: &[usize]) -> View<'_> {
        View {
            schema: &self.schema,
            samples: indices.iter().map(|&i| &self.samples[i]).collect(),
        }
    }

    pub fn all(&self) -> View<'_> {
        View {
            schema: &self.schema,
            samples: self.samples.iter().collect(),
        }
    }

    pub fn train_view(&self) -> View<'_> {
        self.view(&self.train_indices())
    }

    pub fn test_view(&self) -> View<'_> {
        self.view(&self.test_indices())
    }

    /// Concatenates two corpora over the same schema; `other`'s split entries are appended.
    pub fn concat(self, other: Corpus) -> Result<Corpus, CorpusError> {
        if self.schema != other.schema {
            return Err(CorpusError::Argument("schema mismatch in concat".into()));
        }
        let split = match (self.split, other.split) {
            (None, None) => None,
            (a, b) => {
                let mut a = a.unwrap_or_else(|| vec![Partition::Train; self.samples.len()]);
                a.extend(b.unwrap_or_else(|| vec![Partition::Train; other.samples.len()]));
                Some(a)
            }
        };
        let mut samples = self.samples;
        samples.extend(other.samples);
        Corpus::new(self.schema, samples, split)
    }
}

fn validate_labels(schema: &LabelSchema, s: &Comment) -> Result<(), CorpusError> {
    if s.labels.len() != schema.num_classes() {
        return Err(CorpusError::Labels {
            id: s.id.clone(),
            message: format!(
                "{} label bits for {} classes",
                s.labels.len(),
                schema.num_classes()
            ),
        });
    }
    if schema.kind == SchemaKind::MultiClass && s.labels.iter().filter(|&&b| b).count() != 1 {
        return Err(CorpusError::Labels {
            id: s.id.clone(),
            message: "multi-class sample must carry exactly one class".into(),
        });
    }
    Ok(())
}

/// An ordered subset of a corpus.
#[derive(Debug, Clone)]
pub struct View<'a> {
    pub schema: &'a LabelSchema,
    samples: Vec<&'a Comment>,
}

impl<'a> View<'a> {
    pub fn from_samples(schema: &'a LabelSchema, samples: Vec<&'a Comment>) -> Self {
        Self { schema, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[&'a Comment] {
        &self.samples
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a Comment> + '_ {
        self.samples.iter().copied()
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|c| c.id.clone()).collect()
    }

    pub fn texts(&self) -> Vec<&'a str> {
        self.samples.iter().map(|c| c.text.as_str()).collect()
    }

    /// Label column `class` as a boolean vector.
    pub fn gold(&self, class: usize) -> Vec<bool> {
        self.samples.iter().map(|c| c.labels[class]).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> View<'a> {
        View {
            schema: self.schema,
            samples: indices.iter().map(|&i| self.samples[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    JigsawCsv,
    DavidsonCsv,
}

/// Loads a CSV dataset. Jigsaw rows whose labels are all `-1` are dropped.
pub fn load_dataset(
    path: &Path,
    schema: &LabelSchema,
    format: DatasetFormat,
) -> Result<Corpus, CorpusError> {
    let samples = match format {
        DatasetFormat::JigsawCsv => read_jigsaw(path, schema)?,
        DatasetFormat::DavidsonCsv => read_davidson(path, schema)?,
    };
    Corpus::new(schema.clone(), samples, None)
}

/// Builds the Wikipedia corpus from the Kaggle release: the train file plus the
/// test comments joined with their post-competition labels. Unscored test rows
/// (all labels `-1`) are dropped; the split records the Kaggle partition.
pub fn load_jigsaw_release(
    train: &Path,
    test: &Path,
    test_labels: &Path,
) -> Result<Corpus, CorpusError> {
    let schema = LabelSchema::jigsaw();
    let train_samples = read_jigsaw(train, &schema)?;

    let mut texts: BTreeMap<String, String> = BTreeMap::new();
    let mut order = Vec::new();
    let p = test.display().to_string();
    let mut rdr = csv_reader(test)?;
    let headers = rdr
        .byte_headers()
        .map_err(|e| csv_err(&p, 0, e))?
        .clone();
    let id_col = column(&headers, "id", &p)?;
    let text_col = column(&headers, "comment_text", &p)?;
    for (row, rec) in rdr.byte_records().enumerate() {
        let row = row as u64 + 1;
        let rec = rec.map_err(|e| csv_err(&p, row, e))?;
        let id = utf8_field(&rec, id_col, &p, row)?;
        let text = utf8_field(&rec, text_col, &p, row)?;
        order.push(id.clone());
        texts.insert(id, text);
    }

    let labelled = read_jigsaw_labels(test_labels, &schema)?;
    let mut test_samples = Vec::new();
    for id in order {
        if let Some(labels) = labelled.get(&id) {
            test_samples.push(Comment {
                text: texts.remove(&id).unwrap_or_default(),
                id,
                labels: labels.clone(),
            });
        }
    }
    let mut split = vec![Partition::Train; train_samples.len()];
    split.extend(std::iter::repeat_n(Partition::Test, test_samples.len()));
    let mut samples = train_samples;
    samples.extend(test_samples);
    Corpus::new(schema, samples, Some(split))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(file))
}

fn csv_err(path: &str, row: u64, e: csv::Error) -> CorpusError {
    CorpusError::Row {
        path: path.to_string(),
        row,
        message: e.to_string(),
    }
}

fn column(headers: &csv::ByteRecord, name: &str, path: &str) -> Result<usize, CorpusError> {
    headers
        .iter()
        .position(|h| h == name.as_bytes())
        .ok_or_else(|| CorpusError::MissingColumn {
            path: path.to_string(),
            column: name.to_string(),
        })
}

fn utf8_field(rec: &csv::ByteRecord, col: usize, path: &str, row: u64) -> Result<String, CorpusError> {
    let raw = rec.get(col).ok_or_else(|| CorpusError::Row {
        path: path.to_string(),
        row,
        message: format!("missing field {col}"),
    })?;
    String::from_utf8(raw.to_vec()).map_err(|_| CorpusError::Row {
        path: path.to_string(),
        row,
        message: format!("field {col} is not valid UTF-8"),
    })
}

/// Parses the label columns of one jigsaw row. `None` means the unscored sentinel.
fn jigsaw_labels(
    rec: &csv::ByteRecord,
    cols: &[usize],
    path: &str,
    row: u64,
) -> Result<Option<Vec<bool>>, CorpusError> {
    let mut labels = Vec::with_capacity(cols.len());
    let mut sentinels = 0;
    for &c in cols {
        let v = utf8_field(rec, c, path, row)?;
        match v.trim() {
            "0" => labels.push(false),
            "1" => labels.push(true),
            "-1" => {
                sentinels += 1;
                labels.push(false);
            }
            other => {
                return Err(CorpusError::Row {
                    path: path.to_string(),
                    row,
                    message: format!("label `{other}` outside {{-1,0,1}}"),
                })
            }
        }
    }
    match sentinels {
        0 => Ok(Some(labels)),
        n if n == cols.len() => Ok(None),
        _ => Err(CorpusError::Row {
            path: path.to_string(),
            row,
            message: "partial -1 sentinel".into(),
        }),
    }
}

fn check_width(rec: &csv::ByteRecord, width: usize, path: &str, row: u64) -> Result<(), CorpusError> {
    if rec.len() != width {
        return Err(CorpusError::Row {
            path: path.to_string(),
            row,
            message: format!("expected {width} columns, found {}", rec.len()),
        });
    }
    Ok(())
}

fn read_jigsaw(path: &Path, schema: &LabelSchema) -> Result<Vec<Comment>, CorpusError> {
    let p = path.display().to_string();
    let mut rdr = csv_reader(path)?;
    let headers = rdr.byte_headers().map_err(|e| csv_err(&p, 0, e))?.clone();
    let id_col = column(&headers, "id", &p)?;
    let text_col = column(&headers, "comment_text", &p)?;
    let label_cols = schema
        .classes
        .iter()
        .map(|c| column(&headers, c, &p))
        .collect::<Result<Vec<_>, _>>()?;
    let width = headers.len();
    let mut out = Vec::new();
    for (row, rec) in rdr.byte_records().enumerate() {
        let row = row as u64 + 1;
        let rec = rec.map_err(|e| csv_err(&p, row, e))?;
        check_width(&rec, width, &p, row)?;
        let id = utf8_field(&rec, id_col, &p, row)?;
        let text = utf8_field(&rec, text_col, &p, row)?;
        if let Some(labels) = jigsaw_labels(&rec, &label_cols, &p, row)? {
            out.push(Comment { id, text, labels });
        }
    }
    Ok(out)
}

fn read_jigsaw_labels(
    path: &Path,
    schema: &LabelSchema,
) -> Result<BTreeMap<String, Vec<bool>>, CorpusError> {
    let p = path.display().to_string();
    let mut rdr = csv_reader(path)?;
    let headers = rdr.byte_headers().map_err(|e| csv_err(&p, 0, e))?.clone();
    let id_col = column(&headers, "id", &p)?;
    let label_cols = schema
        .classes
        .iter()
        .map(|c| column(&headers, c, &p))
        .collect::<Result<Vec<_>, _>>()?;
    let width = headers.len();
    let mut out = BTreeMap::new();
    for (row, rec) in rdr.byte_records().enumerate() {
        let row = row as u64 + 1;
        let rec = rec.map_err(|e| csv_err(&p, row, e))?;
        check_width(&rec, width, &p, row)?;
        let id = utf8_field(&rec, id_col, &p, row)?;
        if let Some(labels) = jigsaw_labels(&rec, &label_cols, &p, row)? {
            out.insert(id, labels);
        }
    }
    Ok(out)
}

fn read_davidson(path: &Path, schema: &LabelSchema) -> Result<Vec<Comment>, CorpusError> {
    let p = path.display().to_string();
    let mut rdr = csv_reader(path)?;
    let headers = rdr.byte_headers().map_err(|e| csv_err(&p, 0, e))?.clone();
    let tweet_col = column(&headers, "tweet", &p)?;
    let class_col = column(&headers, "class", &p)?;
    // The published file carries an unnamed pandas index as its first column.
    let id_col = headers
        .iter()
        .position(|h| h == b"id")
        .or_else(|| headers.iter().position(|h| h.is_empty()));
    let width = headers.len();
    let n = schema.num_classes();
    let mut out = Vec::new();
    for (row, rec) in rdr.byte_records().enumerate() {
        let row = row as u64 + 1;
        let rec = rec.map_err(|e| csv_err(&p, row, e))?;
        check_width(&rec, width, &p, row)?;
        let id = match id_col {
            Some(c) => utf8_field(&rec, c, &p, row)?,
            None => (row - 1).to_string(),
        };
        let text = utf8_field(&rec, tweet_col, &p, row)?;
        let class = utf8_field(&rec, class_col, &p, row)?;
        let class: usize = match class.trim().parse() {
            Ok(c) if c < n => c,
            _ => {
                return Err(CorpusError::Row {
                    path: p,
                    row,
                    message: format!("class `{}` outside {{0..{}}}", class.trim(), n - 1),
                })
            }
        };
        let mut labels = vec![false; n];
        labels[class] = true;
        out.push(Comment { id, text, labels });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    text: String,
    labels: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Partition>,
}

/// Path of the schema sidecar for a canonical corpus file.
pub fn schema_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".schema.json");
    PathBuf::from(s)
}

/// Writes the canonical newline-delimited JSON form plus its schema sidecar.
pub fn write_ndjson(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for (i, c) in corpus.samples.iter().enumerate() {
        let rec = Record {
            id: c.id.clone(),
            text: c.text.clone(),
            labels: c.labels.iter().map(|&b| u8::from(b)).collect(),
            split: corpus.split.as_ref().map(|s| s[i]),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)?;
    let sidecar = schema_sidecar(path);
    let json = serde_json::to_vec_pretty(&corpus.schema).expect("schema serializes");
    std::fs::write(&sidecar, json).map_err(|source| CorpusError::Io {
        path: sidecar.display().to_string(),
        source,
    })
}

pub fn read_ndjson(path: &Path) -> Result<Corpus, CorpusError> {
    let sidecar = schema_sidecar(path);
    let raw = std::fs::read(&sidecar).map_err(|source| CorpusError::Io {
        path: sidecar.display().to_string(),
        source,
    })?;
    let schema: LabelSchema = serde_json::from_slice(&raw).map_err(|e| CorpusError::Schema(e.to_string()))?;
    let schema = LabelSchema::new(schema.name, schema.kind, schema.classes)?;
    let p = path.display().to_string();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: p.clone(),
        source,
    })?;
    let mut samples = Vec::new();
    let mut split = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let row = i as u64 + 1;
        let line = line.map_err(|e| CorpusError::Row {
            path: p.clone(),
            row,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Row {
            path: p.clone(),
            row,
            message: e.to_string(),
        })?;
        let labels = rec
            .labels
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(CorpusError::Row {
                    path: p.clone(),
                    row,
                    message: format!("label {b} outside {{0,1}}"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        split.push(rec.split);
        samples.push(Comment {
            id: rec.id,
            text: rec.text,
            labels,
        });
    }
    let split = if split.iter().all(Option::is_none) {
        None
    } else if split.iter().all(Option::is_some) {
        Some(split.into_iter().map(Option::unwrap).collect())
    } else {
        return Err(CorpusError::Argument(format!(
            "{p}: split recorded for some rows only"
        )));
    };
    Corpus::new(schema, samples, split)
}

/// Per-class sample counts; `clean` is set for multi-label schemas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: Vec<(String, usize)>,
    pub clean: Option<usize>,
    pub total: usize,
}

impl ClassDistribution {
    pub fn count(&self, class: &str) -> Option<usize> {
        self.counts.iter().find(|(c, _)| c == class).map(|(_, n)| *n)
    }
}

pub fn class_distribution(corpus: &Corpus) -> ClassDistribution {
    distribution_of(&corpus.all())
}

pub fn distribution_of(view: &View<'_>) -> ClassDistribution {
    let mut counts = vec![0usize; view.schema.num_classes()];
    let mut clean = 0;
    for c in view.iter() {
        for (k, &b) in c.labels.iter().enumerate() {
            counts[k] += usize::from(b);
        }
        clean += usize::from(c.is_clean());
    }
    ClassDistribution {
        counts: view.schema.classes.iter().cloned().zip(counts).collect(),
        clean: (view.schema.kind == SchemaKind::MultiLabel).then_some(clean),
        total: view.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratum of each sample: its class for multi-class schemas; for
/// multi-label schemas its rarest positive class, with clean samples last.
fn strata(view: &View<'_>) -> Vec<Vec<usize>> {
    let n_classes = view.schema.num_classes();
    match view.schema.kind {
        SchemaKind::MultiClass => {
            let mut groups = vec![Vec::new(); n_classes];
            for (i, c) in view.iter().enumerate() {
                groups[c.class().expect("multi-class sample has a class")].push(i);
            }
            groups
        }
        SchemaKind::MultiLabel => {
            let dist = distribution_of(view);
            let mut rarity: Vec<usize> = (0..n_classes).collect();
            rarity.sort_by_key(|&k| (dist.counts[k].1, k));
            let mut rank = vec![0; n_classes];
            for (r, &k) in rarity.iter().enumerate() {
                rank[k] = r;
            }
            let mut groups = vec![Vec::new(); n_classes + 1];
            for (i, c) in view.iter().enumerate() {
                let g = c
                    .labels
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(k, _)| rank[k])
                    .min()
                    .unwrap_or(n_classes);
                groups[g].push(i);
            }
            groups
        }
    }
}

/// Stratified k-fold assignment over the train partition.
///
/// Each stratum is shuffled with its own derived stream and dealt round-robin,
/// with the dealing position carried across strata so that both per-stratum
/// and overall fold sizes differ by at most one.
pub fn split_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldAssignment, CorpusError> {
    split_folds_view(&corpus.train_view(), k, seed)
}

pub fn split_folds_view(view: &View<'_>, k: usize, seed: u64) -> Result<FoldAssignment, CorpusError> {
    if k < 2 {
        return Err(CorpusError::Argument(format!("k = {k}; need k >= 2")));
    }
    if view.len() < k {
        return Err(CorpusError::Argument(format!(
            "k = {k} exceeds {} train samples",
            view.len()
        )));
    }
    let mut assignment = BTreeMap::new();
    let mut next = 0usize;
    for (g, mut members) in strata(view).into_iter().enumerate() {
        members.shuffle(&mut rng::derive(seed, "folds", &[g as u64]));
        for i in members {
            assignment.insert(view.samples()[i].id.clone(), next % k);
            next += 1;
        }
    }
    Ok(FoldAssignment { k, seed, assignment })
}

/// Seeded stratified holdout: marks `test_fraction` of each stratum as test.
pub fn stratified_holdout(
    corpus: Corpus,
    test_fraction: f64,
    seed: u64,
) -> Result<Corpus, CorpusError> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(CorpusError::Argument(format!(
            "test fraction {test_fraction} outside [0,1)"
        )));
    }
    let mut split = vec![Partition::Train; corpus.len()];
    for (g, mut members) in strata(&corpus.all()).into_iter().enumerate() {
        members.shuffle(&mut rng::derive(seed, "holdout", &[g as u64]));
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        for &i in &members[..n_test] {
            split[i] = Partition::Test;
        }
    }
    corpus.with_split(split)
}
