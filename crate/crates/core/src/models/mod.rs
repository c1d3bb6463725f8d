//! Classifier families behind one fit/predict contract.
//!
//! `lr_word` and `lr_char` are logistic regressions over TF-IDF n-grams; the
//! remaining families are word-sequence networks trained with Adam in `f32`.
//! [`gradient_check`] certifies every backward pass in `f64`.

pub mod linear;
pub mod nn;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{self, ArtifactError};
use crate::corpus::{SchemaKind, View};
use crate::embeddings::{load_pretrained, EmbeddingError, EmbeddingTable};
use crate::features::{FeatureError, SparseVector, TfidfConfig, TfidfModel, VocabConfig, Vocabulary, PAD_ID};
use crate::metrics::roc_auc;
use crate::predictions::{Head, PredictionError, PredictionMatrix};
use crate::rng;

use linear::{LbfgsConfig, LinearLog, LinearWeights};
use nn::{loss_and_grad, probabilities, Adam, AdamConfig, Arch, Dropout, Grads, NetShape, Network};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LrWord,
    LrChar,
    Cnn,
    Lstm,
    Bilstm,
    Bigru,
    BigruAttention,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::LrWord,
        Family::LrChar,
        Family::Cnn,
        Family::Lstm,
        Family::Bilstm,
        Family::Bigru,
        Family::BigruAttention,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::LrWord => "lr_word",
            Family::LrChar => "lr_char",
            Family::Cnn => "cnn",
            Family::Lstm => "lstm",
            Family::Bilstm => "bilstm",
            Family::Bigru => "bigru",
            Family::BigruAttention => "bigru_attention",
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(self, Family::LrWord | Family::LrChar)
    }

    fn arch(self) -> Option<Arch> {
        match self {
            Family::LrWord | Family::LrChar => None,
            Family::Cnn => Some(Arch::Cnn),
            Family::Lstm => Some(Arch::Lstm),
            Family::Bilstm => Some(Arch::BiLstm),
            Family::Bigru => Some(Arch::BiGru),
            Family::BigruAttention => Some(Arch::BiGruAttention),
        }
    }

    /// Recurrent units (per direction for bidirectional models).
    pub fn default_units(self) -> usize {
        match self {
            Family::Lstm => 128,
            _ => 64,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown model family `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// Native table written by skip-gram training (with subword buckets).
    TrainedSubword { path: PathBuf },
    /// Text word-vector file.
    PretrainedFile { path: PathBuf },
    LearnedFromScratch,
}

impl EmbeddingSource {
    pub fn load(&self) -> Result<Option<EmbeddingTable>, ModelError> {
        let missing = |p: &Path| ModelError::Config(format!("embedding file {} not found", p.display()));
        match self {
            EmbeddingSource::LearnedFromScratch => Ok(None),
            EmbeddingSource::TrainedSubword { path } => {
                if !path.exists() {
                    return Err(missing(path));
                }
                Ok(Some(EmbeddingTable::load(path)?))
            }
            EmbeddingSource::PretrainedFile { path } => {
                if !path.exists() {
                    return Err(missing(path));
                }
                Ok(Some(load_pretrained(path)?.0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub name: String,
    pub family: Family,
    pub embedding: EmbeddingSource,
    pub head: Head,
    pub units: usize,
    /// Used only for embeddings learned from scratch.
    pub embedding_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filter_maps: usize,
    pub word_dropout: f64,
    pub dropout: f64,
    pub optimizer: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub max_len: usize,
    pub vocab: VocabConfig,
    pub tfidf: TfidfConfig,
    /// Inverse L2 strength for logistic regression.
    pub l2_c: f64,
    pub lbfgs: LbfgsConfig,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(name: impl Into<String>, family: Family, head: Head) -> Self {
        Self {
            name: name.into(),
            family,
            embedding: EmbeddingSource::LearnedFromScratch,
            head,
            units: family.default_units(),
            embedding_dim: 100,
            filter_widths: vec![3, 4, 5],
            filter_maps: 100,
            word_dropout: 0.1,
            dropout: 0.1,
            optimizer: AdamConfig::default(),
            epochs: 4,
            batch_size: 128,
            patience: 1,
            max_len: 200,
            vocab: VocabConfig::default(),
            tfidf: if family == Family::LrChar {
                TfidfConfig::char()
            } else {
                TfidfConfig::word()
            },
            l2_c: 1.0,
            lbfgs: LbfgsConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self, kind: SchemaKind) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(format!("model `{}`: {m}", self.name)));
        if Head::for_kind(kind) != self.head {
            return bad(format!("head {:?} does not match a {kind:?} schema", self.head));
        }
        if self.family.is_linear() {
            if !(self.l2_c > 0.0) {
                return bad("l2_c must be positive".into());
            }
            return Ok(());
        }
        if self.units == 0 || self.max_len == 0 || self.batch_size == 0 || self.epochs == 0 {
            return bad("units, max_len, batch_size and epochs must be positive".into());
        }
        if !(0.0..1.0).contains(&self.word_dropout) || !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout rates must lie in [0,1)".into());
        }
        if self.family == Family::Cnn && (self.filter_widths.is_empty() || self.filter_maps == 0 || self.filter_widths.contains(&0)) {
            return bad("invalid filter specification".into());
        }
        if self.embedding == EmbeddingSource::LearnedFromScratch && self.embedding_dim == 0 {
            return bad("embedding_dim must be positive".into());
        }
        Ok(())
    }

    pub fn hash(&self) -> [u8; 32] {
        artifact::config_hash(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
    pub linear: Option<LinearLog>,
    pub val_auc: Option<f64>,
    /// Embedding rows copied from a pretrained table (and frozen).
    pub pretrained_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelBody {
    Linear { tfidf: TfidfModel, weights: LinearWeights },
    Neural { vocab: Vocabulary, net: Network<f32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub classes: Vec<String>,
    pub body: ModelBody,
    pub log: TrainLog,
}

const MODEL_MAGIC: &[u8; 8] = b"TXMODEL\0";
const MODEL_VERSION: u32 = 1;

impl TrainedModel {
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        artifact::write(path, MODEL_MAGIC, MODEL_VERSION, &self.spec.hash(), self)?;
        Ok(())
    }

    pub fn load(path: &Path, expected: Option<&ClassifierSpec>) -> Result<Self, ModelError> {
        let (m, hash): (TrainedModel, _) = artifact::read(path, MODEL_MAGIC, MODEL_VERSION)?;
        artifact::check_hash(path, &hash, &m.spec.hash())?;
        if let Some(spec) = expected {
            artifact::check_hash(path, &hash, &spec.hash())?;
        }
        Ok(m)
    }

    pub fn all_finite(&self) -> bool {
        match &self.body {
            ModelBody::Linear { weights, .. } => weights
                .weights
                .iter()
                .flatten()
                .chain(&weights.bias)
                .all(|v| v.is_finite()),
            ModelBody::Neural { net, .. } => net.all_finite(),
        }
    }
}

fn gold_rows(view: &View<'_>) -> Vec<Vec<bool>> {
    view.iter().map(|c| c.labels.clone()).collect()
}

fn encode(vocab: &Vocabulary, text: &str, max_len: usize) -> Vec<u32> {
    vocab
        .config()
        .tokenizer
        .tokenize(text)
        .iter()
        .take(max_len)
        .map(|t| vocab.id(t))
        .collect()
}

/// Mean per-class AUC over classes where it is defined.
fn macro_auc(scores: &PredictionMatrix, gold: &[Vec<bool>]) -> Option<f64> {
    let aucs: Vec<f64> = (0..scores.num_classes())
        .filter_map(|c| {
            let g: Vec<bool> = gold.iter().map(|r| r[c]).collect();
            roc_auc(&scores.column(c), &g).ok()
        })
        .collect();
    (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
}

fn mean_loss(head: Head, scores: &PredictionMatrix, gold: &[Vec<bool>]) -> f64 {
    if scores.rows() == 0 {
        return 0.0;
    }
    let eps = 1e-12;
    let total: f64 = (0..scores.rows())
        .map(|i| {
            let row = scores.row(i);
            match head {
                Head::SigmoidPerClass => {
                    row.iter()
                        .zip(&gold[i])
                        .map(|(p, y)| -if *y { p.max(eps).ln() } else { (1.0 - p).max(eps).ln() })
                        .sum::<f64>()
                        / row.len() as f64
                }
                Head::Softmax => {
                    let t = gold[i].iter().position(|g| *g).unwrap_or(0);
                    -row[t].max(eps).ln()
                }
            }
        })
        .sum();
    total / scores.rows() as f64
}

/// Loads the spec's embedding table (if any) and trains.
pub fn fit(spec: &ClassifierSpec, train: &View<'_>, valid: &View<'_>) -> Result<TrainedModel, ModelError> {
    let table = if spec.family.is_linear() { None } else { spec.embedding.load()? };
    fit_with(spec, train, valid, table.as_ref())
}

/// Trains with an already-loaded embedding table.
pub fn fit_with(
    spec: &ClassifierSpec,
    train: &View<'_>,
    valid: &View<'_>,
    table: Option<&EmbeddingTable>,
) -> Result<TrainedModel, ModelError> {
    spec.validate(train.schema.kind)?;
    if train.is_empty() {
        return Err(ModelError::Config("empty training view".into()));
    }
    if spec.family.is_linear() {
        fit_linear(spec, train, valid)
    } else {
        if spec.embedding != EmbeddingSource::LearnedFromScratch && table.is_none() {
            return Err(ModelError::Config(format!(
                "model `{}` needs an embedding table",
                spec.name
            )));
        }
        fit_neural(spec, train, valid, table)
    }
}

fn fit_linear(spec: &ClassifierSpec, train: &View<'_>, valid: &View<'_>) -> Result<TrainedModel, ModelError> {
    let texts = train.texts();
    let tfidf = TfidfModel::fit(texts.par_iter().copied(), spec.tfidf.clone())?;
    let xs: Vec<SparseVector> = tfidf.transform_many(&texts);
    let gold = gold_rows(train);
    let k = train.schema.num_classes();
    let (weights, llog) = match spec.head {
        Head::SigmoidPerClass => linear::fit_one_vs_rest(&xs, &gold, k, tfidf.dim(), spec.l2_c, &spec.lbfgs),
        Head::Softmax => {
            let y: Vec<usize> = gold.iter().map(|g| g.iter().position(|b| *b).unwrap_or(0)).collect();
            linear::fit_multinomial(&xs, &y, k, tfidf.dim(), spec.l2_c, &spec.lbfgs)
        }
    };
    let mut model = TrainedModel {
        spec: spec.clone(),
        classes: train.schema.classes.clone(),
        body: ModelBody::Linear { tfidf, weights },
        log: TrainLog {
            linear: Some(llog),
            ..TrainLog::default()
        },
    };
    if !valid.is_empty() {
        model.log.val_auc = macro_auc(&predict(&model, valid), &gold_rows(valid));
    }
    Ok(model)
}

fn init_embeddings(net: &mut Network<f32>, vocab: &Vocabulary, table: &EmbeddingTable) -> usize {
    let d = net.shape.dim;
    let mut copied = 0;
    for id in 2..vocab.len() {
        let word = vocab.token(id as u32).expect("dense ids");
        let row = if let Some(v) = table.get(word) {
            net.frozen[id] = true;
            copied += 1;
            v.to_vec()
        } else if table.subwords().is_some() {
            table.lookup(word)
        } else {
            continue;
        };
        net.tensors[0].data[id * d..(id + 1) * d].copy_from_slice(&row);
    }
    copied
}

const CHUNK: usize = 8;

fn fit_neural(
    spec: &ClassifierSpec,
    train: &View<'_>,
    valid: &View<'_>,
    table: Option<&EmbeddingTable>,
) -> Result<TrainedModel, ModelError> {
    let texts = train.texts();
    let tokens: Vec<Vec<String>> = texts.par_iter().map(|t| spec.vocab.tokenizer.tokenize(t)).collect();
    let vocab = Vocabulary::build(tokens.iter().map(Vec::as_slice), spec.vocab.clone());
    let ids: Vec<Vec<u32>> = tokens
        .iter()
        .map(|t| t.iter().take(spec.max_len).map(|w| vocab.id(w)).collect())
        .collect();
    let gold = gold_rows(train);
    let shape = NetShape {
        arch: spec.family.arch().expect("neural family"),
        vocab: vocab.len(),
        dim: table.map_or(spec.embedding_dim, EmbeddingTable::dim),
        hidden: spec.units,
        widths: spec.filter_widths.clone(),
        maps: spec.filter_maps,
        classes: train.schema.num_classes(),
        head: spec.head,
    };
    let mut net: Network<f32> = Network::init(shape, &mut rng::derive(spec.seed, "init", &[]));
    let pretrained_rows = table.map_or(0, |t| init_embeddings(&mut net, &vocab, t));
    let mut adam = Adam::new(&net, spec.optimizer);
    let valid_gold = gold_rows(valid);

    let mut log = TrainLog {
        pretrained_rows,
        ..TrainLog::default()
    };
    let mut best: Option<(f64, Network<f32>)> = None;
    let mut bad_epochs = 0;
    let n = ids.len();
    for epoch in 0..spec.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng::derive(spec.seed, "shuffle", &[epoch as u64]));
        let mut epoch_loss = 0.0f64;
        for (b, batch) in order.chunks(spec.batch_size).enumerate() {
            let parts: Vec<(Grads<f32>, f64)> = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut g = Grads::zeros(&net);
                    let mut loss = 0.0f64;
                    for &i in chunk {
                        let mut r = rng::derive(spec.seed, "dropout", &[epoch as u64, i as u64]);
                        let pass = net.forward(
                            &ids[i],
                            Some(Dropout {
                                rng: &mut r,
                                word_rate: spec.word_dropout,
                                rate: spec.dropout,
                            }),
                        );
                        let (l, dl) = loss_and_grad(spec.head, &pass.logits, &gold[i]);
                        loss += f64::from(l);
                        net.backward(&pass, &dl, &mut g);
                    }
                    (g, loss)
                })
                .collect();
            let mut iter = parts.into_iter();
            let (mut g, mut loss) = iter.next().expect("non-empty batch");
            for (pg, pl) in iter {
                g.add(&pg);
                loss += pl;
            }
            if !loss.is_finite() {
                return Err(ModelError::Diverged {
                    epoch: epoch + 1,
                    batch: b + 1,
                });
            }
            epoch_loss += loss;
            g.scale(1.0 / batch.len() as f32);
            adam.step(&mut net, &g);
        }
        let (val_auc, val_loss, monitor) = if valid.is_empty() {
            (None, 0.0, -(epoch_loss / n as f64))
        } else {
            let scores = predict_neural(&net, &vocab, spec, valid);
            let auc = macro_auc(&scores, &valid_gold);
            let vl = mean_loss(spec.head, &scores, &valid_gold);
            (auc, vl, auc.unwrap_or(-vl))
        };
        log.epochs.push(EpochLog {
            epoch: epoch + 1,
            train_loss: epoch_loss / n as f64,
            val_auc,
            val_loss,
        });
        if best.as_ref().is_none_or(|(m, _)| monitor > *m) {
            best = Some((monitor, net.clone()));
            log.best_epoch = Some(epoch + 1);
            log.val_auc = val_auc;
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= spec.patience.max(1) {
                break;
            }
        }
    }
    let net = best.map(|(_, n)| n).expect("at least one epoch");
    Ok(TrainedModel {
        spec: spec.clone(),
        classes: train.schema.classes.clone(),
        body: ModelBody::Neural { vocab, net },
        log,
    })
}

fn predict_neural(net: &Network<f32>, vocab: &Vocabulary, spec: &ClassifierSpec, view: &View<'_>) -> PredictionMatrix {
    let texts = view.texts();
    let scores: Vec<f64> = texts
        .par_iter()
        .flat_map_iter(|t| {
            let ids = encode(vocab, t, spec.max_len);
            probabilities(spec.head, &net.forward(&ids, None).logits)
        })
        .collect();
    PredictionMatrix::new(view.ids(), view.schema.classes.clone(), scores, spec.head, spec.name.clone())
        .expect("probabilities form a valid matrix")
}

/// Scores for every sample of `view`, in view order.
pub fn predict(model: &TrainedModel, view: &View<'_>) -> PredictionMatrix {
    match &model.body {
        ModelBody::Linear { tfidf, weights } => {
            let texts = view.texts();
            let scores: Vec<f64> = texts
                .par_iter()
                .flat_map_iter(|t| weights.scores(&tfidf.transform(t)))
                .collect();
            PredictionMatrix::new(view.ids(), model.classes.clone(), scores, model.spec.head, model.spec.name.clone())
                .expect("probabilities form a valid matrix")
        }
        ModelBody::Neural { vocab, net } => predict_neural(net, vocab, &model.spec, view),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub family: Family,
    /// Relative error `‖a − n‖ / (‖a‖ + ‖n‖)` per parameter tensor.
    pub per_tensor: Vec<(String, f64)>,
    pub max_relative_error: f64,
}

fn rel_error(a: &[f64], n: &[f64]) -> f64 {
    let diff = a.iter().zip(n).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + n.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

const FD_STEP: f64 = 1e-5;

fn report(family: Family, per_tensor: Vec<(String, f64)>) -> GradientReport {
    let max_relative_error = per_tensor.iter().map(|p| p.1).fold(0.0, f64::max);
    GradientReport {
        family,
        per_tensor,
        max_relative_error,
    }
}

/// Compares analytic gradients of the training loss against central finite
/// differences on `batch`, in `f64`, with dropout disabled and all parameters
/// randomized. Build the spec at miniature sizes (small dims, short max_len).
pub fn gradient_check(spec: &ClassifierSpec, batch: &View<'_>) -> Result<GradientReport, ModelError> {
    spec.validate(batch.schema.kind)?;
    if batch.is_empty() {
        return Err(ModelError::Config("empty gradient-check batch".into()));
    }
    let mut r = rng::derive(spec.seed, "gradient-check", &[]);
    let gold = gold_rows(batch);
    let k = batch.schema.num_classes();
    if spec.family.is_linear() {
        let cfg = TfidfConfig { min_df: 1, ..spec.tfidf.clone() };
        let texts = batch.texts();
        let tfidf = TfidfModel::fit(texts.par_iter().copied(), cfg)?;
        let xs = tfidf.transform_many(&texts);
        let dim = tfidf.dim();
        let mut per_tensor = Vec::new();
        let objective: Box<dyn Fn(&[f64], usize) -> (f64, Vec<f64>)> = match spec.head {
            Head::SigmoidPerClass => Box::new(|t: &[f64], c: usize| {
                let y: Vec<bool> = gold.iter().map(|g| g[c]).collect();
                linear::binary_objective(&xs, &y, dim, spec.l2_c, t)
            }),
            Head::Softmax => Box::new(|t: &[f64], _| {
                let y: Vec<usize> = gold.iter().map(|g| g.iter().position(|b| *b).unwrap_or(0)).collect();
                linear::multinomial_objective(&xs, &y, k, dim, spec.l2_c, t)
            }),
        };
        let (problems, width) = match spec.head {
            Head::SigmoidPerClass => (k, dim + 1),
            Head::Softmax => (1, k * (dim + 1)),
        };
        let bias_start = match spec.head {
            Head::SigmoidPerClass => dim,
            Head::Softmax => k * dim,
        };
        let (mut aw, mut nw, mut ab, mut nb) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for c in 0..problems {
            let theta: Vec<f64> = (0..width).map(|_| r.random_range(-1.0..1.0)).collect();
            let (_, g) = objective(&theta, c);
            for i in 0..width {
                let mut p = theta.clone();
                p[i] += FD_STEP;
                let fp = objective(&p, c).0;
                p[i] -= 2.0 * FD_STEP;
                let fm = objective(&p, c).0;
                let num = (fp - fm) / (2.0 * FD_STEP);
                if i < bias_start {
                    aw.push(g[i]);
                    nw.push(num);
                } else {
                    ab.push(g[i]);
                    nb.push(num);
                }
            }
        }
        per_tensor.push(("weights".into(), rel_error(&aw, &nw)));
        per_tensor.push(("bias".into(), rel_error(&ab, &nb)));
        return Ok(report(spec.family, per_tensor));
    }

    let vocab_cfg = VocabConfig { min_freq: 1, ..spec.vocab.clone() };
    let vocab = Vocabulary::build_from_texts(batch.texts(), vocab_cfg);
    let ids: Vec<Vec<u32>> = batch.texts().iter().map(|t| encode(&vocab, t, spec.max_len)).collect();
    let shape = NetShape {
        arch: spec.family.arch().expect("neural family"),
        vocab: vocab.len(),
        dim: spec.embedding_dim,
        hidden: spec.units,
        widths: spec.filter_widths.clone(),
        maps: spec.filter_maps,
        classes: k,
        head: spec.head,
    };
    let mut net: Network<f64> = Network::init(shape, &mut r);
    let d = net.shape.dim;
    for t in &mut net.tensors {
        t.data.iter_mut().for_each(|v| *v = r.random_range(-0.5..0.5));
    }
    net.tensors[0].data[..d].iter_mut().for_each(|v| *v = 0.0);

    let loss = |net: &Network<f64>| -> f64 {
        ids.iter()
            .zip(&gold)
            .map(|(x, g)| loss_and_grad(spec.head, &net.forward(x, None).logits, g).0)
            .sum::<f64>()
            / ids.len() as f64
    };
    let mut g = Grads::zeros(&net);
    for (x, y) in ids.iter().zip(&gold) {
        let pass = net.forward(x, None);
        let (_, dl) = loss_and_grad(spec.head, &pass.logits, y);
        net.backward(&pass, &dl, &mut g);
    }
    g.scale(1.0 / ids.len() as f64);
    let mut emb = vec![0.0; net.tensors[0].data.len()];
    for (&row, v) in &g.emb {
        emb[row as usize * d..(row as usize + 1) * d].copy_from_slice(v);
    }
    g.dense[0] = emb;

    let mut per_tensor = Vec::new();
    for ti in 0..net.tensors.len() {
        let mut numeric = Vec::with_capacity(net.tensors[ti].data.len());
        for j in 0..net.tensors[ti].data.len() {
            if ti == 0 && j / d == PAD_ID as usize {
                numeric.push(0.0);
                continue;
            }
            let orig = net.tensors[ti].data[j];
            net.tensors[ti].data[j] = orig + FD_STEP;
            let fp = loss(&net);
            net.tensors[ti].data[j] = orig - FD_STEP;
            let fm = loss(&net);
            net.tensors[ti].data[j] = orig;
            numeric.push((fp - fm) / (2.0 * FD_STEP));
        }
        per_tensor.push((net.tensors[ti].name.clone(), rel_error(&g.dense[ti], &numeric)));
    }
    Ok(report(spec.family, per_tensor))
}
