//! Strict INI configuration.
//!
//! Every section and key is checked against a fixed schema; anything unknown
//! is an error naming the offender, so a typo never falls back to a default.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use serde::Serialize;

use toxens_core::embeddings::SkipgramConfig;
use toxens_core::ensemble::{GbdtConfig, OofConfig};
use toxens_core::features::{TokenView, Tokenizer};
use toxens_core::models::{ClassifierSpec, EmbeddingSource, Family};
use toxens_core::predictions::Head;
use toxens_core::triage::ErrorKind;

use crate::CliError;

pub const DATA_DIR_ENV: &str = "TOXENS_DATA_DIR";

const DATASET_KEYS: &[&str] = &["format", "train", "test", "test_labels", "holdout", "seed"];
const FEATURES_KEYS: &[&str] = &["lowercase", "min_df", "sublinear_tf", "vocab_max_size", "vocab_min_freq", "max_len"];
const EMBEDDINGS_KEYS: &[&str] = &[
    "dim", "window", "epochs", "negative", "lr", "min_n", "max_n", "buckets", "min_count", "seed", "threads", "corpus",
    "output",
];
const MODEL_KEYS: &[&str] = &[
    "family",
    "embedding",
    "units",
    "embedding_dim",
    "filter_widths",
    "filter_maps",
    "word_dropout",
    "dropout",
    "lr",
    "epochs",
    "batch_size",
    "patience",
    "max_len",
    "ngram_min",
    "ngram_max",
    "max_features",
    "min_df",
    "view",
    "l2_c",
    "max_iter",
    "seed",
];
const ENSEMBLE_KEYS: &[&str] = &[
    "models",
    "folds",
    "seed",
    "valid_fraction",
    "meta_features",
    "lexicon",
    "rounds",
    "depth",
    "learning_rate",
    "min_leaf",
    "lambda",
];
const METRICS_KEYS: &[&str] = &["decision", "threshold", "pairs"];
const TRIAGE_KEYS: &[&str] = &["class", "kind", "n", "seed", "predictions", "lexicon", "session", "port"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    JigsawCsv,
    /// Kaggle train file plus test comments and test labels.
    JigsawRelease,
    DavidsonCsv,
    Ndjson,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetSection {
    pub format: DatasetFormat,
    pub train: PathBuf,
    pub test: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// Stratified test share when the files carry no partition.
    pub holdout: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingsSection {
    pub skipgram: SkipgramConfig,
    /// One sentence per line; the dataset's train texts when absent.
    pub corpus: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Per-class thresholds searched on train predictions.
    Tuned,
    Fixed,
    Argmax,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsSection {
    pub decision: Option<DecisionRule>,
    pub threshold: f64,
    pub pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSection {
    /// Base models by name; all configured models when empty.
    pub models: Vec<String>,
    pub folds: usize,
    pub seed: u64,
    pub oof: OofConfig,
    pub lexicon: Option<PathBuf>,
    pub gbdt: GbdtConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct TriageSection {
    pub class: Option<String>,
    pub kind: ErrorKind,
    pub n: usize,
    pub seed: u64,
    pub predictions: String,
    pub lexicon: Option<PathBuf>,
    pub session: Option<PathBuf>,
    pub port: u16,
}

#[derive(Debug, Clone, Serialize)]
pub struct Config {
    pub path: PathBuf,
    pub hash: String,
    pub dataset: DatasetSection,
    pub embeddings: EmbeddingsSection,
    /// Model specs in file order. The head is fixed once the schema is known.
    pub models: Vec<ClassifierSpec>,
    pub ensemble: EnsembleSection,
    pub metrics: MetricsSection,
    pub triage: TriageSection,
}

/// Key-value pairs of one section, consumed as they are read.
struct Section<'a> {
    name: String,
    values: BTreeMap<&'a str, &'a str>,
    base: &'a Path,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl<'a> Section<'a> {
    fn new(name: &str, props: Option<&'a ini::Properties>, allowed: &[&str], base: &'a Path) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if let Some(props) = props {
            for (k, v) in props.iter() {
                if !allowed.contains(&k) {
                    return Err(invalid(format!(
                        "unknown key `{k}` in [{name}]; allowed: {}",
                        allowed.join(", ")
                    )));
                }
                if values.insert(k, v).is_some() {
                    return Err(invalid(format!("duplicate key `{k}` in [{name}]")));
                }
            }
        }
        Ok(Self {
            name: name.to_string(),
            values,
            base,
        })
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.values.get(key).copied()
    }

    fn parse<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.trim().parse().map(Some).map_err(|_| {
                invalid(format!("[{}] {key} = `{v}` is not {what}", self.name))
            }),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.parse(key, "a non-negative integer")?.unwrap_or(default))
    }

    fn u64(&self, key: &str, default: u64) -> Result<u64, CliError> {
        Ok(self.parse(key, "a non-negative integer")?.unwrap_or(default))
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v: f64 = self.parse(key, "a number")?.unwrap_or(default);
        if !v.is_finite() {
            return Err(invalid(format!("[{}] {key} must be finite", self.name)));
        }
        Ok(v)
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.raw(key).map(|v| v.trim().to_ascii_lowercase()) {
            None => Ok(default),
            Some(v) if matches!(v.as_str(), "true" | "yes" | "on" | "1") => Ok(true),
            Some(v) if matches!(v.as_str(), "false" | "no" | "off" | "0") => Ok(false),
            Some(v) => Err(invalid(format!("[{}] {key} = `{v}` is not a boolean", self.name))),
        }
    }

    fn string(&self, key: &str) -> Option<String> {
        self.raw(key).map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.raw(key)
            .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.string(key).map(|p| resolve(self.base, &p))
    }
}

/// Relative paths resolve against the config file's directory; when nothing
/// exists there and `TOXENS_DATA_DIR` is set, against that directory.
pub fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = PathBuf::from(p);
    if path.is_absolute() {
        return path;
    }
    let local = base.join(&path);
    if !local.exists() {
        if let Some(root) = std::env::var_os(DATA_DIR_ENV) {
            let candidate = PathBuf::from(root).join(&path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    local
}

fn parse_family(s: &str) -> Result<Family, CliError> {
    s.parse().map_err(|_| {
        invalid(format!(
            "unknown model family `{s}`; expected one of {}",
            Family::ALL.iter().map(|f| f.name()).collect::<Vec<_>>().join(", ")
        ))
    })
}

fn parse_view(s: &str) -> Result<TokenView, CliError> {
    match s {
        "all" => Ok(TokenView::All),
        "plain" => Ok(TokenView::Plain),
        "obfuscated" => Ok(TokenView::Obfuscated),
        _ => Err(invalid(format!("unknown view `{s}`; expected all, plain or obfuscated"))),
    }
}

fn parse_embedding(s: &str, base: &Path, default_subword: &Path) -> Result<EmbeddingSource, CliError> {
    let (kind, rest) = s.split_once(':').map_or((s, None), |(k, r)| (k, Some(r)));
    match (kind, rest) {
        ("scratch", None) => Ok(EmbeddingSource::LearnedFromScratch),
        ("subword", None) => Ok(EmbeddingSource::TrainedSubword {
            path: default_subword.to_path_buf(),
        }),
        ("subword", Some(p)) => Ok(EmbeddingSource::TrainedSubword { path: resolve(base, p) }),
        ("pretrained" | "glove", Some(p)) => Ok(EmbeddingSource::PretrainedFile { path: resolve(base, p) }),
        _ => Err(invalid(format!(
            "embedding `{s}`; expected scratch, subword, subword:PATH or pretrained:PATH"
        ))),
    }
}

fn model_spec(
    name: &str,
    sec: &Section<'_>,
    features: &Section<'_>,
    base: &Path,
    default_subword: &Path,
) -> Result<ClassifierSpec, CliError> {
    let family = parse_family(
        &sec.string("family")
            .ok_or_else(|| invalid(format!("[model.{name}] needs a `family` key")))?,
    )?;
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(invalid(format!("model name `{name}` must be non-empty and use [A-Za-z0-9_-]")));
    }
    let mut s = ClassifierSpec::new(name, family, Head::SigmoidPerClass);
    let tokenizer = Tokenizer {
        lowercase: features.bool("lowercase", true)?,
        ..Tokenizer::default()
    };
    s.vocab.tokenizer = tokenizer.clone();
    s.vocab.max_size = features.usize("vocab_max_size", s.vocab.max_size)?;
    s.vocab.min_freq = features.usize("vocab_min_freq", s.vocab.min_freq)?;
    s.max_len = features.usize("max_len", s.max_len)?;
    s.tfidf.tokenizer = tokenizer;
    s.tfidf.min_df = features.usize("min_df", s.tfidf.min_df)?;
    s.tfidf.sublinear_tf = features.bool("sublinear_tf", s.tfidf.sublinear_tf)?;

    if let Some(e) = sec.string("embedding") {
        s.embedding = parse_embedding(&e, base, default_subword)?;
    }
    s.units = sec.usize("units", s.units)?;
    s.embedding_dim = sec.usize("embedding_dim", s.embedding_dim)?;
    if sec.raw("filter_widths").is_some() {
        s.filter_widths = sec
            .list("filter_widths")
            .iter()
            .map(|w| w.parse().map_err(|_| invalid(format!("[model.{name}] filter width `{w}` is not an integer"))))
            .collect::<Result<_, _>>()?;
    }
    s.filter_maps = sec.usize("filter_maps", s.filter_maps)?;
    s.word_dropout = sec.f64("word_dropout", s.word_dropout)?;
    s.dropout = sec.f64("dropout", s.dropout)?;
    s.optimizer.lr = sec.f64("lr", s.optimizer.lr)?;
    s.epochs = sec.usize("epochs", s.epochs)?;
    s.batch_size = sec.usize("batch_size", s.batch_size)?;
    s.patience = sec.usize("patience", s.patience)?;
    s.max_len = sec.usize("max_len", s.max_len)?;
    s.tfidf.ngram_min = sec.usize("ngram_min", s.tfidf.ngram_min)?;
    s.tfidf.ngram_max = sec.usize("ngram_max", s.tfidf.ngram_max)?;
    s.tfidf.max_features = sec.usize("max_features", s.tfidf.max_features)?;
    s.tfidf.min_df = sec.usize("min_df", s.tfidf.min_df)?;
    if let Some(v) = sec.string("view") {
        s.tfidf.view = parse_view(&v)?;
    }
    s.l2_c = sec.f64("l2_c", s.l2_c)?;
    s.lbfgs.max_iter = sec.usize("max_iter", s.lbfgs.max_iter)?;
    s.seed = sec.u64("seed", 0)?;
    if s.tfidf.ngram_min == 0 || s.tfidf.ngram_min > s.tfidf.ngram_max {
        return Err(invalid(format!("[model.{name}] needs 1 <= ngram_min <= ngram_max")));
    }
    Ok(s)
}

/// Drops `;` or `#` comments that follow whitespace on a line.
fn strip_inline_comments(text: &str) -> String {
    text.lines()
        .map(|line| {
            let cut = line
                .char_indices()
                .find(|&(i, c)| (c == ';' || c == '#') && i > 0 && line[..i].ends_with(char::is_whitespace))
                .map_or(line.len(), |(i, _)| i);
            line[..cut].trim_end()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// `path` anchors relative paths and is recorded in manifests.
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let opt = ini::ParseOption {
            enabled_escape: false,
            ..ini::ParseOption::default()
        };
        let ini = Ini::load_from_str_opt(&strip_inline_comments(text), opt)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };

        let mut sections: BTreeMap<String, &ini::Properties> = BTreeMap::new();
        let mut model_order = Vec::new();
        for (name, props) in ini.iter() {
            match name {
                None => {
                    if let Some((k, _)) = props.iter().next() {
                        return Err(invalid(format!("key `{k}` appears before any section")));
                    }
                }
                Some(n) => {
                    let known = ["dataset", "features", "embeddings", "ensemble", "metrics", "triage"].contains(&n)
                        || n.starts_with("model.");
                    if !known {
                        return Err(invalid(format!(
                            "unknown section [{n}]; expected [dataset], [features], [embeddings], [model.NAME], [ensemble], [metrics] or [triage]"
                        )));
                    }
                    if sections.insert(n.to_string(), props).is_some() {
                        return Err(invalid(format!("duplicate section [{n}]")));
                    }
                    if let Some(m) = n.strip_prefix("model.") {
                        model_order.push(m.to_string());
                    }
                }
            }
        }
        let sec = |name: &str, keys: &[&str]| Section::new(name, sections.get(name).copied(), keys, &base);

        let d = sec("dataset", DATASET_KEYS)?;
        if !sections.contains_key("dataset") {
            return Err(invalid("missing [dataset] section"));
        }
        let format = match d.string("format").as_deref() {
            Some("jigsaw_csv") => DatasetFormat::JigsawCsv,
            Some("jigsaw_release") => DatasetFormat::JigsawRelease,
            Some("davidson_csv") => DatasetFormat::DavidsonCsv,
            Some("ndjson") => DatasetFormat::Ndjson,
            Some(f) => {
                return Err(invalid(format!(
                    "[dataset] format `{f}`; expected jigsaw_csv, jigsaw_release, davidson_csv or ndjson"
                )))
            }
            None => return Err(invalid("[dataset] needs a `format` key")),
        };
        let dataset = DatasetSection {
            format,
            train: d.path("train").ok_or_else(|| invalid("[dataset] needs a `train` key"))?,
            test: d.path("test"),
            test_labels: d.path("test_labels"),
            holdout: d.f64("holdout", 0.2)?,
            seed: d.u64("seed", 0)?,
        };
        if format == DatasetFormat::JigsawRelease && (dataset.test.is_none() || dataset.test_labels.is_none()) {
            return Err(invalid("[dataset] format jigsaw_release needs `test` and `test_labels`"));
        }
        if !(0.0..1.0).contains(&dataset.holdout) {
            return Err(invalid("[dataset] holdout must lie in [0,1)"));
        }

        let e = sec("embeddings", EMBEDDINGS_KEYS)?;
        let dflt = SkipgramConfig::default();
        let skipgram = SkipgramConfig {
            dim: e.usize("dim", dflt.dim)?,
            window: e.usize("window", dflt.window)?,
            epochs: e.usize("epochs", dflt.epochs)?,
            negative: e.usize("negative", dflt.negative)?,
            lr: e.f64("lr", dflt.lr)?,
            min_n: e.usize("min_n", dflt.min_n)?,
            max_n: e.usize("max_n", dflt.max_n)?,
            buckets: e.usize("buckets", dflt.buckets)?,
            min_count: e.usize("min_count", dflt.min_count)?,
            seed: e.u64("seed", dflt.seed)?,
            threads: e.usize("threads", dflt.threads)?,
        };
        skipgram.validate().map_err(|err| invalid(format!("[embeddings] {err}")))?;
        let embeddings = EmbeddingsSection {
            skipgram,
            corpus: e.path("corpus"),
            output: e.path("output"),
        };

        let f = sec("features", FEATURES_KEYS)?;
        let default_subword = embeddings
            .output
            .clone()
            .unwrap_or_else(|| PathBuf::from(crate::layout::DEFAULT_SUBWORD));
        let mut models = Vec::new();
        for name in &model_order {
            let key = format!("model.{name}");
            let s = sec(&key, MODEL_KEYS)?;
            models.push(model_spec(name, &s, &f, &base, &default_subword)?);
        }

        let en = sec("ensemble", ENSEMBLE_KEYS)?;
        let gd = GbdtConfig::default();
        let ensemble = EnsembleSection {
            models: en.list("models"),
            folds: en.usize("folds", 5)?,
            seed: en.u64("seed", 0)?,
            oof: OofConfig {
                valid_fraction: en.f64("valid_fraction", OofConfig::default().valid_fraction)?,
                meta_features: en.bool("meta_features", true)?,
            },
            lexicon: en.path("lexicon"),
            gbdt: GbdtConfig {
                rounds: en.usize("rounds", gd.rounds)?,
                depth: en.usize("depth", gd.depth)?,
                learning_rate: en.f64("learning_rate", gd.learning_rate)?,
                min_leaf: en.usize("min_leaf", gd.min_leaf)?,
                lambda: en.f64("lambda", gd.lambda)?,
                seed: en.u64("seed", 0)?,
            },
        };
        if ensemble.folds < 2 {
            return Err(invalid("[ensemble] folds must be at least 2"));
        }
        ensemble.gbdt.validate().map_err(|err| invalid(format!("[ensemble] {err}")))?;
        let names: BTreeSet<&str> = models.iter().map(|m| m.name.as_str()).collect();
        if let Some(m) = ensemble.models.iter().find(|m| !names.contains(m.as_str())) {
            return Err(invalid(format!("[ensemble] models lists undefined model `{m}`")));
        }

        let m = sec("metrics", METRICS_KEYS)?;
        let decision = match m.string("decision").as_deref() {
            None => None,
            Some("tuned") => Some(DecisionRule::Tuned),
            Some("fixed") => Some(DecisionRule::Fixed),
            Some("argmax") => Some(DecisionRule::Argmax),
            Some(v) => return Err(invalid(format!("[metrics] decision `{v}`; expected tuned, fixed or argmax"))),
        };
        let threshold = m.f64("threshold", 0.5)?;
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(invalid("[metrics] threshold must lie in (0,1)"));
        }
        let pairs = m
            .list("pairs")
            .iter()
            .map(|p| {
                p.split_once(':')
                    .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                    .filter(|(a, b)| !a.is_empty() && !b.is_empty())
                    .ok_or_else(|| invalid(format!("[metrics] pair `{p}` is not of the form a:b")))
            })
            .collect::<Result<_, _>>()?;
        let metrics = MetricsSection {
            decision,
            threshold,
            pairs,
        };

        let t = sec("triage", TRIAGE_KEYS)?;
        let triage = TriageSection {
            class: t.string("class"),
            kind: match t.string("kind") {
                None => ErrorKind::Fn,
                Some(k) => k.parse().map_err(|e: toxens_core::triage::TriageError| invalid(format!("[triage] {e}")))?,
            },
            n: t.usize("n", 200)?,
            seed: t.u64("seed", 0)?,
            predictions: t.string("predictions").unwrap_or_else(|| "ensemble".into()),
            lexicon: t.path("lexicon"),
            session: t.path("session"),
            port: t.parse("port", "a port number")?.unwrap_or(8080),
        };

        Ok(Self {
            path: path.to_path_buf(),
            hash: toxens_core::artifact::hex(&sha256(text.as_bytes())),
            dataset,
            embeddings,
            models,
            ensemble,
            metrics,
            triage,
        })
    }

    /// Replaces every seed with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.dataset.seed = seed;
        self.embeddings.skipgram.seed = seed;
        for m in &mut self.models {
            m.seed = seed;
        }
        self.ensemble.seed = seed;
        self.ensemble.gbdt.seed = seed;
        self.triage.seed = seed;
    }

    pub fn seeds(&self) -> BTreeMap<String, u64> {
        let mut s = BTreeMap::new();
        s.insert("dataset".into(), self.dataset.seed);
        s.insert("embeddings".into(), self.embeddings.skipgram.seed);
        for m in &self.models {
            s.insert(format!("model.{}", m.name), m.seed);
        }
        s.insert("ensemble".into(), self.ensemble.seed);
        s.insert("triage".into(), self.triage.seed);
        s
    }

    pub fn model(&self, name: &str) -> Result<&ClassifierSpec, CliError> {
        self.models
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| invalid(format!("no [model.{name}] section")))
    }
}

fn sha256(bytes: &[u8]) -> [u8; 32] {
    use sha2::Digest;
    sha2::Sha256::digest(bytes).into()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config, CliError> {
        Config::parse(text, Path::new("/tmp/toxens.ini"))
    }

    const BASE: &str = "[dataset]\nformat = jigsaw_csv\ntrain = train.csv\n";

    #[test]
    fn minimal_config() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.dataset.train, PathBuf::from("/tmp/train.csv"));
        assert_eq!(c.ensemble.folds, 5);
        assert_eq!(c.ensemble.gbdt, GbdtConfig::default());
        assert_eq!(c.triage.n, 200);
        assert!(c.models.is_empty());
    }

    #[test]
    fn inline_comments_are_ignored() {
        let c = parse(&format!("{BASE}[model.m]\nfamily = lr_char   ; char n-grams\nview = plain # tokens\n")).unwrap();
        assert_eq!(c.models[0].family, Family::LrChar);
        assert_eq!(strip_inline_comments("a = x;y\n; whole line\nb = C:\\dir"), "a = x;y\n; whole line\nb = C:\\dir");
    }

    #[test]
    fn misspelled_key_is_named() {
        let err = parse(&format!("{BASE}[model.lstm]\nfamily = lstm\nepochz = 3\n")).unwrap_err();
        assert!(matches!(err, CliError::Validation(ref m) if m.contains("`epochz`") && m.contains("[model.lstm]")), "{err}");
        let err = parse(&format!("{BASE}[ensembel]\nfolds = 5\n")).unwrap_err();
        assert!(err.to_string().contains("[ensembel]"));
    }

    #[test]
    fn models_and_overrides() {
        let text = format!(
            "{BASE}[features]\nmin_df = 3\n[model.lr_char]\nfamily = lr_char\nngram_max = 4\nview = obfuscated\n\
             [model.bigru]\nfamily = bigru_attention\nembedding = pretrained:glove.txt\nfilter_widths = 2, 3\nseed = 7\n\
             [metrics]\npairs = lr_char:bigru\n"
        );
        let mut c = parse(&text).unwrap();
        assert_eq!(c.models.len(), 2);
        assert_eq!(c.models[0].tfidf.ngram_max, 4);
        assert_eq!(c.models[0].tfidf.min_df, 3);
        assert_eq!(c.models[0].tfidf.view, TokenView::Obfuscated);
        assert_eq!(c.models[1].units, 64);
        assert_eq!(
            c.models[1].embedding,
            EmbeddingSource::PretrainedFile {
                path: "/tmp/glove.txt".into()
            }
        );
        assert_eq!(c.metrics.pairs, vec![("lr_char".to_string(), "bigru".to_string())]);
        c.override_seed(99);
        assert!(c.seeds().values().all(|&s| s == 99));
    }

    #[test]
    fn bad_values() {
        for text in [
            format!("{BASE}[model.x]\nfamily = lstm\nepochs = three\n"),
            format!("{BASE}[model.x]\nfamily = transformer\n"),
            format!("{BASE}[model.x]\nunits = 3\n"),
            format!("{BASE}[ensemble]\nmodels = nope\n"),
            format!("{BASE}[ensemble]\nmeta_features = maybe\n"),
            format!("{BASE}[triage]\nkind = fx\n"),
            format!("{BASE}[dataset]\nseed = 1\n"),
            "[dataset]\ntrain = a.csv\n".to_string(),
            "stray = 1\n[dataset]\nformat = ndjson\ntrain = a\n".to_string(),
        ] {
            assert!(matches!(parse(&text), Err(CliError::Validation(_))), "{text}");
        }
    }
}
