//! Out-of-fold stacking with a gradient-boosted tree meta-learner.
//!
//! Base classifiers are refit once per fold; every train row is scored by the
//! model that held its fold out, and each fold model also scores the test
//! split. One stacker per fold is then trained on the other folds' rows and
//! applied to that fold model's test features; the final test scores are the
//! mean over stackers.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{self, ArtifactError};
use crate::corpus::{Comment, Corpus, FoldAssignment, LabelSchema, Partition, SchemaKind, View};
use crate::embeddings::EmbeddingTable;
use crate::features::{SwearLexicon, TfidfConfig, Tokenizer, TokenView};
use crate::models::{self, ClassifierSpec, Family, ModelError};
use crate::predictions::{Head, PredictionError, PredictionMatrix};
use crate::rng;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("base model `{spec}` failed on fold {fold}: {source}")]
    Fit {
        spec: String,
        fold: usize,
        #[source]
        source: ModelError,
    },
    #[error("base model `{spec}`: {source}")]
    Load {
        spec: String,
        #[source]
        source: ModelError,
    },
    #[error("leak: row `{id}` in fold {fold} was scored by the model holding out fold {held_out}")]
    Leak { id: String, fold: usize, held_out: usize },
    #[error("{0}")]
    Config(String),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
}

pub const META_TOKENS: &str = "meta:tokens";
pub const META_SWEAR: &str = "meta:swear_hits";

/// Row-major stacker input with per-row provenance.
///
/// For train rows `provenance[i]` is the fold held out by the model that
/// produced the row; for test rows it is the index of the fold model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedFeatures {
    pub ids: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<f64>,
    pub provenance: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    columns: Vec<String>,
    rows: Vec<ProvenanceRow>,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceRow {
    id: String,
    fold: usize,
}

pub fn base_column(model: &str, class: &str) -> String {
    format!("{model}:{class}")
}

impl StackedFeatures {
    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.width();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some((0..self.rows()).map(|i| self.row(i)[j]).collect())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            columns: self.columns.clone(),
            values: rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            provenance: rows.iter().map(|&i| self.provenance[i]).collect(),
        }
    }

    /// Copy without the `meta:` columns.
    pub fn without_meta(&self) -> Self {
        let keep: Vec<usize> = (0..self.width()).filter(|&j| !self.columns[j].starts_with("meta:")).collect();
        Self {
            ids: self.ids.clone(),
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            values: (0..self.rows()).flat_map(|i| keep.iter().map(move |&j| self.row(i)[j])).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Every row must come from the model that held its own fold out.
    pub fn audit(&self, folds: &FoldAssignment) -> Result<(), EnsembleError> {
        for (id, &held_out) in self.ids.iter().zip(&self.provenance) {
            let fold = folds
                .fold_of(id)
                .ok_or_else(|| EnsembleError::Config(format!("row `{id}` has no fold")))?;
            if fold != held_out {
                return Err(EnsembleError::Leak {
                    id: id.clone(),
                    fold,
                    held_out,
                });
            }
        }
        Ok(())
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".provenance.json");
        PathBuf::from(s)
    }

    /// `id,<columns>` CSV plus a `<path>.provenance.json` sidecar.
    pub fn write_csv(&self, path: &Path) -> Result<(), EnsembleError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.rows() {
            let mut rec = vec![self.ids[i].clone()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| EnsembleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let sidecar = Sidecar {
            columns: self.columns.clone(),
            rows: self
                .ids
                .iter()
                .zip(&self.provenance)
                .map(|(id, &fold)| ProvenanceRow { id: id.clone(), fold })
                .collect(),
        };
        let sp = Self::sidecar_path(path);
        std::fs::write(&sp, serde_json::to_string_pretty(&sidecar).expect("sidecar serializes")).map_err(|source| {
            EnsembleError::Io {
                path: sp.display().to_string(),
                source,
            }
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self, EnsembleError> {
        let sp = Self::sidecar_path(path);
        let text = std::fs::read_to_string(&sp).map_err(|source| EnsembleError::Io {
            path: sp.display().to_string(),
            source,
        })?;
        let bad = |message: String| EnsembleError::Format {
            path: path.display().to_string(),
            message,
        };
        let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| EnsembleError::Format {
            path: sp.display().to_string(),
            message: e.to_string(),
        })?;
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header.first().map(String::as_str) != Some("id") || header[1..] != sidecar.columns[..] {
            return Err(bad("header does not match the provenance sidecar".into()));
        }
        let mut out = Self {
            ids: Vec::new(),
            columns: sidecar.columns,
            values: Vec::new(),
            provenance: Vec::new(),
        };
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let p = sidecar
                .rows
                .get(row)
                .ok_or_else(|| bad(format!("row {} missing from sidecar", row + 1)))?;
            if rec.get(0) != Some(p.id.as_str()) {
                return Err(bad(format!("row {} id differs from sidecar", row + 1)));
            }
            for v in rec.iter().skip(1) {
                out.values
                    .push(v.parse().map_err(|_| bad(format!("row {}: bad number `{v}`", row + 1)))?);
            }
            out.ids.push(p.id.clone());
            out.provenance.push(p.fold);
        }
        if out.ids.len() != sidecar.rows.len() {
            return Err(bad("sidecar lists more rows than the CSV".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OofConfig {
    /// Share of each fold model's training rows held back for early stopping
    /// (neural families only).
    pub valid_fraction: f64,
    pub meta_features: bool,
}

impl Default for OofConfig {
    fn default() -> Self {
        Self {
            valid_fraction: 0.1,
            meta_features: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OofOutput {
    pub train: StackedFeatures,
    /// One feature set per fold model, over the test split.
    pub test: Vec<StackedFeatures>,
    /// Out-of-fold scores per spec, in train order.
    pub oof_base: Vec<PredictionMatrix>,
    /// Test scores indexed `[spec][fold]`.
    pub test_base: Vec<Vec<PredictionMatrix>>,
}

impl OofOutput {
    /// Fold-averaged test scores of one base model.
    pub fn base_test_mean(&self, spec: usize) -> PredictionMatrix {
        let parts = &self.test_base[spec];
        PredictionMatrix::mean(parts, parts[0].producer().to_string()).expect("fold predictions share ids")
    }
}

fn meta_values(c: &Comment, lexicon: Option<&SwearLexicon>, tok: &Tokenizer) -> Vec<f64> {
    let mut v = vec![tok.tokenize(&c.text).len() as f64];
    if let Some(lex) = lexicon {
        v.push(lex.hits(&c.text) as f64);
    }
    v
}

fn assemble(
    ids: Vec<String>,
    columns: &[String],
    rows: Vec<Vec<f64>>,
    provenance: Vec<usize>,
) -> StackedFeatures {
    debug_assert!(rows.iter().all(|r| r.len() == columns.len()));
    StackedFeatures {
        ids,
        columns: columns.to_vec(),
        values: rows.into_iter().flatten().collect(),
        provenance,
    }
}

/// Fits every `(spec, fold)` pair in parallel and collects out-of-fold train
/// features and per-fold test features. The provenance audit runs before
/// returning.
pub fn oof_predictions(
    specs: &[ClassifierSpec],
    corpus: &Corpus,
    folds: &FoldAssignment,
    config: &OofConfig,
    lexicon: Option<&SwearLexicon>,
) -> Result<OofOutput, EnsembleError> {
    if specs.is_empty() {
        return Err(EnsembleError::Config("no base models".into()));
    }
    let mut names = std::collections::BTreeSet::new();
    for s in specs {
        if !names.insert(s.name.as_str()) {
            return Err(EnsembleError::Config(format!("duplicate model name `{}`", s.name)));
        }
    }
    if !(0.0..1.0).contains(&config.valid_fraction) {
        return Err(EnsembleError::Config(format!(
            "valid_fraction {} outside [0,1)",
            config.valid_fraction
        )));
    }
    let train = corpus.train_view();
    let test = corpus.test_view();
    let mut fold_of = Vec::with_capacity(train.len());
    for c in train.iter() {
        match folds.fold_of(&c.id) {
            Some(f) if f < folds.k => fold_of.push(f),
            _ => return Err(EnsembleError::Config(format!("folds do not cover train sample `{}`", c.id))),
        }
    }

    let tables: Vec<Option<EmbeddingTable>> = specs
        .iter()
        .map(|s| {
            if s.family.is_linear() {
                Ok(None)
            } else {
                s.embedding.load().map_err(|source| EnsembleError::Load {
                    spec: s.name.clone(),
                    source,
                })
            }
        })
        .collect::<Result<_, _>>()?;

    let k = folds.k;
    let jobs: Vec<(usize, usize)> = (0..specs.len()).flat_map(|s| (0..k).map(move |f| (s, f))).collect();
    let results: Vec<Result<(PredictionMatrix, PredictionMatrix), EnsembleError>> = jobs
        .par_iter()
        .map(|&(s, f)| {
            let spec = &specs[s];
            let mut fit_rows: Vec<usize> = (0..train.len()).filter(|&i| fold_of[i] != f).collect();
            let held: Vec<usize> = (0..train.len()).filter(|&i| fold_of[i] == f).collect();
            let mut valid_rows = Vec::new();
            if !spec.family.is_linear() && config.valid_fraction > 0.0 {
                let mut shuffled = fit_rows.clone();
                shuffled.shuffle(&mut rng::derive(folds.seed, "carve", &[f as u64]));
                let n_valid = ((shuffled.len() as f64) * config.valid_fraction).ceil() as usize;
                if n_valid < shuffled.len() {
                    valid_rows = shuffled[..n_valid].to_vec();
                    valid_rows.sort_unstable();
                    fit_rows = shuffled[n_valid..].to_vec();
                    fit_rows.sort_unstable();
                }
            }
            let fail = |source| EnsembleError::Fit {
                spec: spec.name.clone(),
                fold: f,
                source,
            };
            let model = models::fit_with(
                spec,
                &train.subset(&fit_rows),
                &train.subset(&valid_rows),
                tables[s].as_ref(),
            )
            .map_err(fail)?;
            Ok((models::predict(&model, &train.subset(&held)), models::predict(&model, &test)))
        })
        .collect();

    let mut held_scores: Vec<HashMap<String, (usize, Vec<f64>)>> = vec![HashMap::new(); specs.len()];
    let mut test_base: Vec<Vec<PredictionMatrix>> = vec![Vec::new(); specs.len()];
    for (&(s, f), r) in jobs.iter().zip(results) {
        let (held, t) = r?;
        for (i, id) in held.ids().iter().enumerate() {
            held_scores[s].insert(id.clone(), (f, held.row(i).to_vec()));
        }
        test_base[s].push(t);
    }

    let classes = &train.schema.classes;
    let mut columns: Vec<String> = specs
        .iter()
        .flat_map(|s| classes.iter().map(move |c| base_column(&s.name, c)))
        .collect();
    if config.meta_features {
        columns.push(META_TOKENS.into());
        if lexicon.is_some() {
            columns.push(META_SWEAR.into());
        }
    }
    let tok = Tokenizer::default();
    let meta = |c: &Comment| -> Vec<f64> {
        if config.meta_features {
            meta_values(c, lexicon, &tok)
        } else {
            Vec::new()
        }
    };

    let mut oof_base = Vec::with_capacity(specs.len());
    for (s, spec) in specs.iter().enumerate() {
        let mut scores = Vec::with_capacity(train.len() * classes.len());
        for c in train.iter() {
            scores.extend_from_slice(&held_scores[s][&c.id].1);
        }
        oof_base.push(PredictionMatrix::new(train.ids(), classes.clone(), scores, spec.head, spec.name.clone())?);
    }

    let mut rows = Vec::with_capacity(train.len());
    let mut provenance = Vec::with_capacity(train.len());
    for (i, c) in train.iter().enumerate() {
        let mut row = Vec::with_capacity(columns.len());
        let mut producer = None;
        for scores in &held_scores {
            let (f, v) = &scores[&c.id];
            if producer.is_some_and(|p| p != *f) {
                return Err(EnsembleError::Config(format!("row `{}` scored by mixed folds", c.id)));
            }
            producer = Some(*f);
            row.extend_from_slice(v);
        }
        row.extend(meta(c));
        rows.push(row);
        provenance.push(producer.unwrap_or(fold_of[i]));
    }
    let train_features = assemble(train.ids(), &columns, rows, provenance);
    train_features.audit(folds)?;

    let test_meta: Vec<Vec<f64>> = test.iter().map(&meta).collect();
    let test_features = (0..k)
        .map(|f| {
            let rows = (0..test.len())
                .map(|i| {
                    let mut row: Vec<f64> = test_base.iter().flat_map(|per_fold| per_fold[f].row(i).to_vec()).collect();
                    row.extend_from_slice(&test_meta[i]);
                    row
                })
                .collect();
            assemble(test.ids(), &columns, rows, vec![f; test.len()])
        })
        .collect();

    Ok(OofOutput {
        train: train_features,
        test: test_features,
        oof_base,
        test_base,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub rounds: usize,
    pub depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Recorded for provenance; growth itself is deterministic.
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            depth: 3,
            learning_rate: 0.1,
            min_leaf: 20,
            lambda: 1.0,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.depth == 0 || self.min_leaf == 0 {
            return Err(EnsembleError::Config("gbdt depth and min_leaf must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(EnsembleError::Config("gbdt learning_rate must lie in (0,1]".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(EnsembleError::Config("gbdt lambda must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => n = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &Tree, n: usize) -> usize {
            match &t.nodes[n] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    fn scale(&mut self, s: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= s;
            }
        }
    }
}

/// Boosted trees for one class. Leaf values already include shrinkage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub class: String,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Mean training log-loss before the first round and after each round.
    pub loss: Vec<f64>,
    /// The class had a single label value; only the base score is used.
    pub constant: bool,
}

impl Booster {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub columns: Vec<String>,
    pub config: GbdtConfig,
    pub boosters: Vec<Booster>,
}

const GBDT_MAGIC: &[u8; 8] = b"TXGBDT\0\0";
const GBDT_VERSION: u32 = 1;
/// Floor and ceiling applied to the base rate.
pub const BASE_RATE_EPS: f64 = 1e-6;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss for margins `f` and 0/1 targets `y`.
fn log_loss(f: &[f64], y: &[f64]) -> f64 {
    let total: f64 = f
        .iter()
        .zip(y)
        .map(|(&z, &t)| {
            // log(1 + e^z) - t z, computed stably
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - t * z
        })
        .sum();
    total / f.len() as f64
}

struct Grower<'a> {
    x: &'a [f64],
    d: usize,
    g: &'a [f64],
    h: &'a [f64],
    cfg: &'a GbdtConfig,
}

/// Gains closer than this count as tied; the earlier candidate (lower
/// feature, then lower threshold) is kept.
const TIE_EPS: f64 = 1e-12;

/// Best split of one node, if any has positive gain.
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

impl Grower<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let g: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.h[i]).sum();
        -g / (h + self.cfg.lambda)
    }

    fn best_split(&self, idx: &[usize]) -> Option<SplitChoice> {
        let lambda = self.cfg.lambda;
        let m = idx.len();
        let min_leaf = self.cfg.min_leaf;
        if m < 2 * min_leaf {
            return None;
        }
        let g_all: f64 = idx.iter().map(|&i| self.g[i]).sum();
        let h_all: f64 = idx.iter().map(|&i| self.h[i]).sum();
        let parent = g_all * g_all / (h_all + lambda);
        let mut best: Option<SplitChoice> = None;
        let mut order = idx.to_vec();
        for j in 0..self.d {
            let val = |i: usize| self.x[i * self.d + j];
            order.sort_by(|&a, &b| val(a).total_cmp(&val(b)).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for pos in 1..m {
                let prev = order[pos - 1];
                gl += self.g[prev];
                hl += self.h[prev];
                let (lo, hi) = (val(prev), val(order[pos]));
                if !(lo < hi) || pos < min_leaf || m - pos < min_leaf {
                    continue;
                }
                let t = lo + (hi - lo) / 2.0;
                if !(lo < t && t < hi) {
                    continue;
                }
                let (gr, hr) = (g_all - gl, h_all - hl);
                let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                if gain > best.as_ref().map_or(0.0, |b| b.gain) + TIE_EPS {
                    best = Some(SplitChoice {
                        feature: j,
                        threshold: t,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&self, nodes: &mut Vec<Node>, idx: Vec<usize>, depth_left: usize) -> usize {
        let me = nodes.len();
        nodes.push(Node::Leaf {
            value: self.leaf_value(&idx),
        });
        if depth_left == 0 {
            return me;
        }
        let Some(split) = self.best_split(&idx) else {
            return me;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i * self.d + split.feature] <= split.threshold);
        let left = self.grow(nodes, l, depth_left - 1);
        let right = self.grow(nodes, r, depth_left - 1);
        nodes[me] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        me
    }
}

/// Newton-boosted logistic trees for one binary target.
///
/// Each round fits a tree to the gradient and hessian of the log-loss, scales
/// it by the learning rate and halves that step until the training loss does
/// not increase. A round whose step shrinks to nothing ends boosting.
fn fit_booster(x: &[f64], d: usize, y: &[f64], class: &str, cfg: &GbdtConfig) -> Booster {
    let n = y.len();
    let pos: f64 = y.iter().sum();
    let rate = (pos / n as f64).clamp(BASE_RATE_EPS, 1.0 - BASE_RATE_EPS);
    let base_score = (rate / (1.0 - rate)).ln();
    let mut f = vec![base_score; n];
    let mut loss = vec![log_loss(&f, y)];
    let constant = pos == 0.0 || pos == n as f64;
    let mut trees = Vec::new();
    if !constant {
        for _ in 0..cfg.rounds {
            let p: Vec<f64> = f.iter().map(|&z| sigmoid(z)).collect();
            let g: Vec<f64> = p.iter().zip(y).map(|(p, y)| p - y).collect();
            let h: Vec<f64> = p.iter().map(|p| (p * (1.0 - p)).max(1e-16)).collect();
            let grower = Grower { x, d, g: &g, h: &h, cfg };
            let mut nodes = Vec::new();
            grower.grow(&mut nodes, (0..n).collect(), cfg.depth);
            let mut tree = Tree { nodes };
            let delta: Vec<f64> = (0..n).map(|i| tree.predict(&x[i * d..(i + 1) * d])).collect();
            let prev = *loss.last().expect("initial loss recorded");
            let mut step = cfg.learning_rate;
            let mut accepted = None;
            for _ in 0..40 {
                let cand: Vec<f64> = f.iter().zip(&delta).map(|(a, b)| a + step * b).collect();
                let l = log_loss(&cand, y);
                if l <= prev {
                    accepted = Some((cand, l));
                    break;
                }
                step /= 2.0;
            }
            let Some((cand, l)) = accepted else { break };
            if delta.iter().all(|v| *v == 0.0) {
                break;
            }
            tree.scale(step);
            trees.push(tree);
            f = cand;
            loss.push(l);
        }
    }
    Booster {
        class: class.to_string(),
        base_score,
        trees,
        loss,
        constant,
    }
}

/// One boosted binary stacker per class, fitted in parallel across classes.
pub fn gbdt_fit(
    features: &StackedFeatures,
    gold: &[Vec<bool>],
    classes: &[String],
    config: &GbdtConfig,
) -> Result<GbdtModel, EnsembleError> {
    config.validate()?;
    if gold.len() != features.rows() {
        return Err(EnsembleError::Config(format!(
            "{} gold rows for {} feature rows",
            gold.len(),
            features.rows()
        )));
    }
    if features.rows() < 2 {
        return Err(EnsembleError::Config("gbdt needs at least 2 rows".into()));
    }
    if gold.iter().any(|g| g.len() != classes.len()) {
        return Err(EnsembleError::Config("gold rows do not match the class list".into()));
    }
    if features.values.iter().any(|v| !v.is_finite()) {
        return Err(EnsembleError::Config("non-finite stacker feature".into()));
    }
    let boosters = classes
        .par_iter()
        .enumerate()
        .map(|(c, name)| {
            let y: Vec<f64> = gold.iter().map(|g| f64::from(u8::from(g[c]))).collect();
            fit_booster(&features.values, features.width(), &y, name, config)
        })
        .collect();
    Ok(GbdtModel {
        columns: features.columns.clone(),
        config: config.clone(),
        boosters,
    })
}

impl GbdtModel {
    pub fn classes(&self) -> Vec<String> {
        self.boosters.iter().map(|b| b.class.clone()).collect()
    }

    pub fn predict_row(&self, x: &[f64]) -> Vec<f64> {
        self.boosters.iter().map(|b| sigmoid(b.margin(x))).collect()
    }

    /// Per-class probabilities; multi-class schemas decide by argmax.
    pub fn predict(&self, features: &StackedFeatures, producer: &str) -> Result<PredictionMatrix, EnsembleError> {
        if features.columns != self.columns {
            return Err(EnsembleError::Config("feature columns differ from the stacker's".into()));
        }
        let scores = (0..features.rows()).flat_map(|i| self.predict_row(features.row(i))).collect();
        Ok(PredictionMatrix::new(
            features.ids.clone(),
            self.classes(),
            scores,
            Head::SigmoidPerClass,
            producer,
        )?)
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for b in &self.boosters {
            let _ = writeln!(
                out,
                "class {} base_score {:.6} trees {}{}",
                b.class,
                b.base_score,
                b.trees.len(),
                if b.constant { " (constant labels)" } else { "" }
            );
            for (t, tree) in b.trees.iter().enumerate() {
                let _ = writeln!(out, "  tree {t}");
                self.dump_node(&mut out, tree, 0, 2);
            }
        }
        out
    }

    fn dump_node(&self, out: &mut String, tree: &Tree, n: usize, indent: usize) {
        let pad = " ".repeat(indent * 2);
        match &tree.nodes[n] {
            Node::Leaf { value } => {
                let _ = writeln!(out, "{pad}leaf {value:.6}");
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let _ = writeln!(out, "{pad}if {} <= {threshold:.6}", self.columns[*feature]);
                self.dump_node(out, tree, *left, indent + 1);
                let _ = writeln!(out, "{pad}else");
                self.dump_node(out, tree, *right, indent + 1);
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), EnsembleError> {
        Ok(artifact::write(path, GBDT_MAGIC, GBDT_VERSION, &artifact::config_hash(&self.config), self)?)
    }

    pub fn load(path: &Path) -> Result<Self, EnsembleError> {
        let (m, hash) = artifact::read::<GbdtModel>(path, GBDT_MAGIC, GBDT_VERSION)?;
        artifact::check_hash(path, &hash, &artifact::config_hash(&m.config))?;
        Ok(m)
    }
}

/// Gold label rows of a view, in view order.
pub fn gold_rows(view: &View<'_>) -> Vec<Vec<bool>> {
    view.iter().map(|c| c.labels.clone()).collect()
}

/// Trains stacker `f` on the train rows outside fold `f`, for every fold.
pub fn fit_stackers(
    train: &StackedFeatures,
    gold: &[Vec<bool>],
    classes: &[String],
    folds: &FoldAssignment,
    config: &GbdtConfig,
) -> Result<Vec<GbdtModel>, EnsembleError> {
    let fold_of: Vec<usize> = train
        .ids
        .iter()
        .map(|id| folds.fold_of(id).ok_or_else(|| EnsembleError::Config(format!("row `{id}` has no fold"))))
        .collect::<Result<_, _>>()?;
    (0..folds.k)
        .map(|f| {
            let rows: Vec<usize> = (0..train.rows()).filter(|&i| fold_of[i] != f).collect();
            let g: Vec<Vec<bool>> = rows.iter().map(|&i| gold[i].clone()).collect();
            gbdt_fit(&train.select_rows(&rows), &g, classes, config)
        })
        .collect()
}

/// Train-row stacker scores, each row from the stacker that did not see its fold.
pub fn stacker_oof(
    stackers: &[GbdtModel],
    train: &StackedFeatures,
    folds: &FoldAssignment,
    producer: &str,
) -> Result<PredictionMatrix, EnsembleError> {
    let mut scores = Vec::new();
    for (i, id) in train.ids.iter().enumerate() {
        let f = folds
            .fold_of(id)
            .ok_or_else(|| EnsembleError::Config(format!("row `{id}` has no fold")))?;
        let s = stackers
            .get(f)
            .ok_or_else(|| EnsembleError::Config(format!("no stacker for fold {f}")))?;
        scores.extend(s.predict_row(train.row(i)));
    }
    let classes = stackers.first().map(GbdtModel::classes).unwrap_or_default();
    Ok(PredictionMatrix::new(train.ids.clone(), classes, scores, Head::SigmoidPerClass, producer)?)
}

/// Mean over stackers, each applied to the test features of its own fold model.
pub fn ensemble_predict(
    stackers: &[GbdtModel],
    test: &[StackedFeatures],
    producer: &str,
) -> Result<PredictionMatrix, EnsembleError> {
    if stackers.is_empty() || stackers.len() != test.len() {
        return Err(EnsembleError::Config(format!(
            "{} stackers for {} test feature sets",
            stackers.len(),
            test.len()
        )));
    }
    let parts: Vec<PredictionMatrix> = stackers
        .iter()
        .zip(test)
        .map(|(s, t)| s.predict(t, producer))
        .collect::<Result<_, _>>()?;
    Ok(PredictionMatrix::mean(&parts, producer)?)
}

const INSULTS: [&str; 4] = ["idiot", "moron", "stupid", "loser"];
const THREATS: [&str; 4] = ["kill", "hurt", "destroy", "attack"];
const FILLER: [&str; 24] = [
    "the", "page", "edit", "article", "source", "please", "talk", "about", "this", "section", "thanks", "for",
    "your", "change", "reference", "note", "history", "vote", "later", "today", "image", "link", "draft", "review",
];

fn obfuscate(word: &str, r: &mut rng::Rng) -> String {
    use rand::Rng as _;
    let sub = |c: char| match c {
        'a' => Some('4'),
        'e' => Some('3'),
        'i' => Some('1'),
        'o' => Some('0'),
        's' => Some('5'),
        't' => Some('7'),
        _ => None,
    };
    let chars: Vec<char> = word.chars().collect();
    let slots: Vec<usize> = (0..chars.len()).filter(|&i| sub(chars[i]).is_some()).collect();
    assert!(!slots.is_empty(), "word `{word}` has no substitutable letter");
    let forced = slots[r.random_range(0..slots.len())];
    chars
        .iter()
        .enumerate()
        .map(|(i, &c)| match sub(c) {
            Some(s) if i == forced || r.random_bool(0.3) => s,
            _ => c,
        })
        .collect()
}

/// Two-class multi-label corpus whose labels come from two disjoint signal
/// families: clean keywords and digit-obfuscated spellings of the same
/// keywords. Texts also carry obfuscated filler so neither family is
/// identifiable by obfuscation alone. A `test_fraction` of rows is marked test.
pub fn complementarity_corpus(n: usize, test_fraction: f64, seed: u64) -> Corpus {
    use rand::Rng as _;
    let mut r = rng::derive(seed, "complementarity", &[]);
    let schema = LabelSchema::new(
        "complementarity",
        SchemaKind::MultiLabel,
        vec!["insult".into(), "threat".into()],
    )
    .expect("valid schema");
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let mut words: Vec<String> = (0..r.random_range(5..9))
            .map(|_| FILLER[r.random_range(0..FILLER.len())].to_string())
            .collect();
        for _ in 0..r.random_range(0..3) {
            let w = FILLER[r.random_range(0..FILLER.len())];
            if w.chars().any(|c| "aeiost".contains(c)) {
                let j = r.random_range(0..words.len());
                words[j] = obfuscate(w, &mut r);
            }
        }
        let mut labels = vec![false; 2];
        for (c, keys) in [INSULTS, THREATS].iter().enumerate() {
            if r.random_bool(0.3) {
                labels[c] = true;
                let key = keys[r.random_range(0..keys.len())];
                let token = if r.random_bool(0.5) { key.to_string() } else { obfuscate(key, &mut r) };
                let at = r.random_range(0..=words.len());
                words.insert(at, token);
            }
        }
        samples.push(Comment {
            id: format!("c{i:05}"),
            text: words.join(" "),
            labels,
        });
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    let split = (0..n)
        .map(|i| if i >= n - n_test { Partition::Test } else { Partition::Train })
        .collect();
    Corpus::new(schema, samples, Some(split)).expect("valid corpus")
}

/// The two blind base learners for [`complementarity_corpus`]: word n-grams
/// over purely alphabetic chunks and character n-grams over obfuscated chunks.
pub fn complementarity_specs() -> Vec<ClassifierSpec> {
    let mut word = ClassifierSpec::new("lr_word_plain", Family::LrWord, Head::SigmoidPerClass);
    word.tfidf = TfidfConfig {
        view: TokenView::Plain,
        ..TfidfConfig::word()
    };
    let mut chars = ClassifierSpec::new("lr_char_obfuscated", Family::LrChar, Head::SigmoidPerClass);
    chars.tfidf = TfidfConfig {
        view: TokenView::Obfuscated,
        ..TfidfConfig::char()
    };
    vec![word, chars]
}

/// Per-model macro-F1 on the test split: base models use thresholds tuned on
/// their out-of-fold train scores and fold-averaged test scores; the ensemble
/// uses thresholds tuned on stacker out-of-fold scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingSummary {
    pub base: BTreeMap<String, f64>,
    pub ensemble: f64,
}

pub fn stacking_summary(
    corpus: &Corpus,
    folds: &FoldAssignment,
    oof: &OofOutput,
    stackers: &[GbdtModel],
) -> Result<StackingSummary, EnsembleError> {
    use crate::metrics::{evaluate, search_thresholds, Decision};
    let train_gold = gold_rows(&corpus.train_view());
    let test_gold = gold_rows(&corpus.test_view());
    let multi_class = corpus.schema().kind == SchemaKind::MultiClass;
    let m = |e: crate::metrics::MetricsError| EnsembleError::Config(e.to_string());
    let score = |train_scores: &PredictionMatrix, test_scores: &PredictionMatrix| -> Result<f64, EnsembleError> {
        let decision = if multi_class {
            Decision::Argmax
        } else {
            Decision::Thresholds(search_thresholds(train_scores, &train_gold).map_err(m)?)
        };
        Ok(evaluate(test_scores, &test_gold, &decision).map_err(m)?.macro_f1)
    };
    let mut base = BTreeMap::new();
    for (s, oof_scores) in oof.oof_base.iter().enumerate() {
        base.insert(oof_scores.producer().to_string(), score(oof_scores, &oof.base_test_mean(s))?);
    }
    let ens_train = stacker_oof(stackers, &oof.train, folds, "ensemble")?;
    let ens_test = ensemble_predict(stackers, &oof.test, "ensemble")?;
    Ok(StackingSummary {
        base,
        ensemble: score(&ens_train, &ens_test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::split_folds;
    use crate::models::tests::corpus as toy;
    use proptest::prelude::*;

    fn lr_spec(name: &str) -> ClassifierSpec {
        let mut s = ClassifierSpec::new(name, Family::LrWord, Head::SigmoidPerClass);
        s.tfidf.min_df = 1;
        s
    }

    #[test]
    fn refit_oracle_four_samples() {
        let c = toy(
            SchemaKind::MultiLabel,
            &["t"],
            &[
                ("you idiot", vec![true]),
                ("nice work", vec![false]),
                ("idiot again", vec![true]),
                ("good work", vec![false]),
            ],
        );
        let folds = split_folds(&c, 2, 9).unwrap();
        let spec = lr_spec("lr");
        let cfg = OofConfig {
            meta_features: false,
            ..OofConfig::default()
        };
        let out = oof_predictions(std::slice::from_ref(&spec), &c, &folds, &cfg, None).unwrap();
        assert_eq!(out.train.columns, vec!["lr:t"]);
        for (i, s) in c.samples().iter().enumerate() {
            let f = folds.fold_of(&s.id).unwrap();
            let others: Vec<usize> = (0..4).filter(|&j| folds.fold_of(&c.samples()[j].id).unwrap() != f).collect();
            assert_eq!(others.len(), 2);
            let m = models::fit(&spec, &c.view(&others), &c.view(&[])).unwrap();
            let expect = models::predict(&m, &c.view(&[i])).get(0, 0);
            assert_eq!(out.train.row(i)[0], expect);
            assert_eq!(out.train.provenance[i], f);
        }
    }

    #[test]
    fn leak_is_detected() {
        let folds = FoldAssignment {
            k: 2,
            seed: 0,
            assignment: [("a".to_string(), 0), ("b".to_string(), 1)].into_iter().collect(),
        };
        let mut f = StackedFeatures {
            ids: vec!["a".into(), "b".into()],
            columns: vec!["x".into()],
            values: vec![0.1, 0.2],
            provenance: vec![0, 1],
        };
        f.audit(&folds).unwrap();
        f.provenance[1] = 0;
        assert!(matches!(f.audit(&folds), Err(EnsembleError::Leak { held_out: 0, fold: 1, .. })));
    }

    #[test]
    fn failed_base_fit_names_spec_and_fold() {
        let c = toy(
            SchemaKind::MultiLabel,
            &["t"],
            &[("a", vec![true]), ("b", vec![false]), ("c", vec![true]), ("d", vec![false])],
        );
        let folds = split_folds(&c, 2, 1).unwrap();
        let mut bad = lr_spec("broken");
        bad.l2_c = -1.0;
        let err = oof_predictions(&[lr_spec("ok"), bad], &c, &folds, &OofConfig::default(), None).unwrap_err();
        assert!(matches!(err, EnsembleError::Fit { ref spec, fold: 0, .. } if spec == "broken"), "{err}");
    }

    #[test]
    fn meta_columns_and_csv_round_trip() {
        let c = toy(
            SchemaKind::MultiLabel,
            &["t"],
            &[
                ("you idiot", vec![true]),
                ("nice work", vec![false]),
                ("idiot again idiot", vec![true]),
                ("good work today", vec![false]),
            ],
        );
        let folds = split_folds(&c, 2, 3).unwrap();
        let lex = SwearLexicon::from_words(&["idiot"]);
        let out = oof_predictions(&[lr_spec("lr")], &c, &folds, &OofConfig::default(), Some(&lex)).unwrap();
        assert_eq!(out.train.columns, vec!["lr:t", META_TOKENS, META_SWEAR]);
        assert_eq!(out.train.column(META_TOKENS).unwrap(), vec![2.0, 2.0, 3.0, 3.0]);
        assert_eq!(out.train.column(META_SWEAR).unwrap(), vec![1.0, 0.0, 2.0, 0.0]);
        assert_eq!(out.train.without_meta().columns, vec!["lr:t"]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.csv");
        out.train.write_csv(&p).unwrap();
        assert!(StackedFeatures::sidecar_path(&p).exists());
        assert_eq!(StackedFeatures::read_csv(&p).unwrap(), out.train);
    }

    fn features(cols: usize, rows: &[Vec<f64>]) -> StackedFeatures {
        StackedFeatures {
            ids: (0..rows.len()).map(|i| format!("r{i}")).collect(),
            columns: (0..cols).map(|j| format!("f{j}")).collect(),
            values: rows.iter().flatten().copied().collect(),
            provenance: vec![0; rows.len()],
        }
    }

    fn small_cfg() -> GbdtConfig {
        GbdtConfig {
            min_leaf: 1,
            ..GbdtConfig::default()
        }
    }

    #[test]
    fn constant_labels_give_base_score() {
        let x = features(1, &[vec![0.1], vec![0.5], vec![0.9]]);
        let m = gbdt_fit(&x, &[vec![false], vec![false], vec![false]], &["c".into()], &small_cfg()).unwrap();
        assert!(m.boosters[0].constant && m.boosters[0].trees.is_empty());
        for i in 0..3 {
            assert!((m.predict_row(x.row(i))[0] - BASE_RATE_EPS).abs() < 1e-15);
        }
    }

    #[test]
    fn stump_separates() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i * 7 % 3) as f64, i as f64]).collect();
        let gold: Vec<Vec<bool>> = (0..20).map(|i| vec![i >= 12]).collect();
        let cfg = GbdtConfig {
            depth: 1,
            rounds: 50,
            learning_rate: 0.5,
            ..small_cfg()
        };
        let x = features(2, &rows);
        let m = gbdt_fit(&x, &gold, &["c".into()], &cfg).unwrap();
        for i in 0..20 {
            assert_eq!(m.predict_row(x.row(i))[0] >= 0.5, gold[i][0]);
        }
        let Node::Split { feature, threshold, .. } = m.boosters[0].trees[0].nodes[0] else { panic!() };
        assert_eq!((feature, threshold), (1, 11.5));
    }

    /// Exhaustive stump search with gains recomputed from scratch per partition.
    fn brute_force_stump(x: &StackedFeatures, y: &[f64], base: f64, lambda: f64) -> (usize, f64) {
        let p = sigmoid(base);
        let g: Vec<f64> = y.iter().map(|y| p - y).collect();
        let h = p * (1.0 - p);
        let score = |set: &[usize]| {
            let gs: f64 = set.iter().map(|&i| g[i]).sum();
            gs * gs / (h * set.len() as f64 + lambda)
        };
        let all: Vec<usize> = (0..x.rows()).collect();
        let mut best = (usize::MAX, f64::NAN, 0.0);
        for j in 0..x.width() {
            let mut vals: Vec<f64> = (0..x.rows()).map(|i| x.row(i)[j]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x.row(i)[j] <= t);
                let gain = score(&l) + score(&r) - score(&all);
                if gain > best.2 + 1e-12 {
                    best = (j, t, gain);
                }
            }
        }
        (best.0, best.1)
    }

    #[test]
    fn stump_matches_brute_force() {
        use rand::Rng as _;
        for seed in 0..30u64 {
            let mut r = rng::from_seed(seed);
            let n = r.random_range(4..12);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| f64::from(r.random_range(0..6u8)) / 5.0).collect())
                .collect();
            let mut gold: Vec<Vec<bool>> = (0..n).map(|_| vec![r.random_bool(0.5)]).collect();
            gold[0][0] = true;
            gold[1][0] = false;
            let x = features(3, &rows);
            let cfg = GbdtConfig {
                depth: 1,
                rounds: 1,
                learning_rate: 1.0,
                ..small_cfg()
            };
            let m = gbdt_fit(&x, &gold, &["c".into()], &cfg).unwrap();
            let y: Vec<f64> = gold.iter().map(|g| f64::from(u8::from(g[0]))).collect();
            let (j, t) = brute_force_stump(&x, &y, m.boosters[0].base_score, cfg.lambda);
            match m.boosters[0].trees.first().map(|t| &t.nodes[0]) {
                Some(Node::Split { feature, threshold, .. }) => {
                    assert_eq!(*feature, j, "seed {seed}");
                    assert!((threshold - t).abs() < 1e-12, "seed {seed}");
                }
                _ => assert_eq!(j, usize::MAX, "seed {seed}"),
            }
        }
    }

    #[test]
    fn ensemble_predict_is_mean() {
        let x = features(1, &[vec![0.0], vec![1.0]]);
        let stump = |v: f64| GbdtModel {
            columns: x.columns.clone(),
            config: GbdtConfig::default(),
            boosters: vec![Booster {
                class: "c".into(),
                base_score: v,
                trees: vec![],
                loss: vec![],
                constant: false,
            }],
        };
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let a = stump(logit(0.2));
        let b = stump(logit(0.6));
        let p = ensemble_predict(&[a.clone(), b], &[x.clone(), x.clone()], "e").unwrap();
        for i in 0..2 {
            assert!((p.get(i, 0) - 0.4).abs() < 1e-12);
        }
        let five = vec![a.clone(); 5];
        let p5 = ensemble_predict(&five, &vec![x.clone(); 5], "e").unwrap();
        let p1 = a.predict(&x, "e").unwrap();
        for i in 0..2 {
            assert!((p5.get(i, 0) - p1.get(i, 0)).abs() < 1e-15);
        }
        let outs = [0.0, 0.25, 0.5, 0.75, 1.0];
        let clamp = |p: f64| p.clamp(1e-300, 1.0 - 1e-16);
        let models: Vec<GbdtModel> = outs.iter().map(|&p| stump(logit(clamp(p)))).collect();
        let p = ensemble_predict(&models, &vec![x.clone(); 5], "e").unwrap();
        assert!((p.get(0, 0) - 0.5).abs() < 1e-12);
        assert!(ensemble_predict(&models, &[x], "e").is_err());
    }

    #[test]
    fn gbdt_artifact_and_dump() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 4) as f64]).collect();
        let gold: Vec<Vec<bool>> = (0..30).map(|i| vec![i % 3 == 0, i > 14]).collect();
        let x = features(2, &rows);
        let m = gbdt_fit(&x, &gold, &["a".into(), "b".into()], &GbdtConfig { min_leaf: 3, ..GbdtConfig::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.bin");
        m.save(&p).unwrap();
        assert_eq!(GbdtModel::load(&p).unwrap(), m);
        let dump = m.dump();
        assert!(dump.contains("class a") && dump.contains("if f0 <= "));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn loss_non_increasing_and_thresholds_between_values(
            data in prop::collection::vec((0u8..8, 0u8..8, any::<bool>()), 6..40),
            depth in 1usize..4,
            min_leaf in 1usize..4,
        ) {
            let rows: Vec<Vec<f64>> = data.iter().map(|(a, b, _)| vec![f64::from(*a), f64::from(*b) * 0.37]).collect();
            let gold: Vec<Vec<bool>> = data.iter().map(|(_, _, y)| vec![*y]).collect();
            let x = features(2, &rows);
            let cfg = GbdtConfig { rounds: 15, depth, min_leaf, learning_rate: 0.3, ..GbdtConfig::default() };
            let m = gbdt_fit(&x, &gold, &["c".into()], &cfg).unwrap();
            let b = &m.boosters[0];
            for w in b.loss.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            for t in &b.trees {
                prop_assert!(t.depth() <= depth);
                for n in &t.nodes {
                    if let Node::Split { feature, threshold, .. } = n {
                        let vals: Vec<f64> = rows.iter().map(|r| r[*feature]).collect();
                        prop_assert!(vals.iter().any(|v| v < threshold));
                        prop_assert!(vals.iter().any(|v| v > threshold));
                    }
                }
            }
        }
    }

    #[test]
    fn complementarity_beats_both_bases() {
        let c = complementarity_corpus(700, 0.3, 4);
        let folds = split_folds(&c, 5, 4).unwrap();
        let out = oof_predictions(&complementarity_specs(), &c, &folds, &OofConfig::default(), None).unwrap();
        assert_eq!(out.train.width(), 2 * 2 + 1);
        let classes = c.schema().classes.clone();
        let stackers = fit_stackers(&out.train, &gold_rows(&c.train_view()), &classes, &folds, &GbdtConfig::default()).unwrap();
        let s = stacking_summary(&c, &folds, &out, &stackers).unwrap();
        for (name, f1) in &s.base {
            assert!(s.ensemble > *f1, "{name}: base {f1} vs ensemble {}", s.ensemble);
        }
    }
}
