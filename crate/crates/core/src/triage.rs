//! Error triage: sample misclassified comments for one class, record binary
//! error-class annotations, and report tag frequencies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::View;
use crate::predictions::PredictionMatrix;
use crate::rng;

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("report error: {0}")]
    Report(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    /// Gold positive, predicted negative.
    Fn,
    /// Gold negative, predicted positive.
    Fp,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Fn => "fn",
            ErrorKind::Fp => "fp",
        })
    }
}

impl FromStr for ErrorKind {
    type Err = TriageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fn" => Ok(ErrorKind::Fn),
            "fp" => Ok(ErrorKind::Fp),
            _ => Err(TriageError::Validation(format!("unknown error kind `{s}` (expected fn or fp)"))),
        }
    }
}

pub const DOUBTFUL_LABEL: &str = "doubtful_label";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tag {
    pub id: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTaxonomy {
    pub fn_tags: Vec<Tag>,
    pub fp_tags: Vec<Tag>,
}

fn tag(id: &str, description: &str) -> Tag {
    Tag {
        id: id.into(),
        description: description.into(),
    }
}

impl Default for ErrorTaxonomy {
    fn default() -> Self {
        let doubtful = || tag(DOUBTFUL_LABEL, "The gold label is disputable under the class definition.");
        let rare = || tag("rare_words", "Idiosyncratic, misspelled or rare words carry the meaning.");
        Self {
            fn_tags: vec![
                doubtful(),
                tag("no_swear_words", "Toxic without any swear word."),
                tag("rhetorical_question", "Toxicity phrased as a rhetorical question."),
                tag("metaphor_comparison", "Toxicity expressed through a metaphor or comparison."),
                rare(),
                tag("sarcasm_irony", "Sarcastic or ironic toxicity."),
            ],
            fp_tags: vec![
                doubtful(),
                tag("swear_word_usage", "Swear words used without toxic intent."),
                tag("quotation_reference", "Quotes or refers to someone else's toxic words."),
                rare(),
            ],
        }
    }
}

impl ErrorTaxonomy {
    pub fn tags(&self, kind: ErrorKind) -> &[Tag] {
        match kind {
            ErrorKind::Fn => &self.fn_tags,
            ErrorKind::Fp => &self.fp_tags,
        }
    }

    pub fn contains(&self, kind: ErrorKind, id: &str) -> bool {
        self.tags(kind).iter().any(|t| t.id == id)
    }

    /// Adds a tag to one kind's set.
    pub fn extend(&mut self, kind: ErrorKind, tag: Tag) -> Result<(), TriageError> {
        if tag.id.trim().is_empty() || self.contains(kind, &tag.id) {
            return Err(TriageError::Validation(format!("tag `{}` is empty or already defined", tag.id)));
        }
        match kind {
            ErrorKind::Fn => self.fn_tags.push(tag),
            ErrorKind::Fp => self.fp_tags.push(tag),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), TriageError> {
        for kind in [ErrorKind::Fn, ErrorKind::Fp] {
            let mut seen = BTreeSet::new();
            for t in self.tags(kind) {
                if !seen.insert(t.id.as_str()) {
                    return Err(TriageError::Validation(format!("duplicate {kind} tag `{}`", t.id)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageItem {
    pub id: String,
    pub text: String,
    /// Gold classes of the comment.
    pub gold: Vec<String>,
    /// Model score for the focal class.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub item: String,
    pub tags: Vec<String>,
    /// Tags stored before this write; `None` when the item was unannotated.
    pub previous: Option<Vec<String>>,
    pub unix_time: u64,
}

/// Annotation state of one item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Annotation<'a> {
    Unannotated,
    /// Reviewed; no error class applies.
    Empty,
    Tagged(&'a BTreeSet<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageSession {
    pub session_id: String,
    pub focal_class: String,
    pub kind: ErrorKind,
    pub producer: String,
    pub seed: u64,
    pub population: usize,
    pub requested: usize,
    pub taxonomy: ErrorTaxonomy,
    pub items: Vec<TriageItem>,
    /// Absent key: unannotated. Present with an empty set: annotated-empty.
    pub annotations: BTreeMap<String, BTreeSet<String>>,
    pub audit: Vec<AuditEntry>,
}

/// Uniform sample without replacement of the focal class's false negatives
/// or false positives.
pub fn sample_errors(
    view: &View<'_>,
    scores: &PredictionMatrix,
    pred: &[Vec<bool>],
    focal_class: &str,
    kind: ErrorKind,
    n: usize,
    seed: u64,
) -> Result<TriageSession, TriageError> {
    let c = view
        .schema
        .class_index(focal_class)
        .ok_or_else(|| TriageError::Validation(format!("unknown class `{focal_class}`")))?;
    if scores.rows() != view.len() || pred.len() != view.len() {
        return Err(TriageError::Validation(format!(
            "{} samples, {} score rows, {} prediction rows",
            view.len(),
            scores.rows(),
            pred.len()
        )));
    }
    if scores.classes() != view.schema.classes.as_slice() {
        return Err(TriageError::Validation("score classes differ from the schema".into()));
    }
    for (i, s) in view.iter().enumerate() {
        if scores.ids()[i] != s.id {
            return Err(TriageError::Validation(format!("row {i}: score id `{}` is not `{}`", scores.ids()[i], s.id)));
        }
        if pred[i].len() != view.schema.num_classes() {
            return Err(TriageError::Validation(format!("row {i}: prediction width mismatch")));
        }
    }
    let mut population: Vec<usize> = view
        .iter()
        .enumerate()
        .filter(|(i, s)| match kind {
            ErrorKind::Fn => s.labels[c] && !pred[*i][c],
            ErrorKind::Fp => !s.labels[c] && pred[*i][c],
        })
        .map(|(i, _)| i)
        .collect();
    let size = population.len();
    population.shuffle(&mut rng::derive(seed, "triage", &[c as u64, kind as u64]));
    population.truncate(n);
    population.sort_unstable();
    let items = population
        .iter()
        .map(|&i| {
            let s = view.samples()[i];
            TriageItem {
                id: s.id.clone(),
                text: s.text.clone(),
                gold: view
                    .schema
                    .classes
                    .iter()
                    .zip(&s.labels)
                    .filter(|(_, b)| **b)
                    .map(|(name, _)| name.clone())
                    .collect(),
                score: scores.get(i, c),
            }
        })
        .collect();
    Ok(TriageSession {
        session_id: format!("{focal_class}-{kind}-{seed}"),
        focal_class: focal_class.to_string(),
        kind,
        producer: scores.producer().to_string(),
        seed,
        population: size,
        requested: n,
        taxonomy: ErrorTaxonomy::default(),
        items,
        annotations: BTreeMap::new(),
        audit: Vec::new(),
    })
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl TriageSession {
    pub fn item(&self, id: &str) -> Option<&TriageItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn annotation(&self, id: &str) -> Annotation<'_> {
        match self.annotations.get(id) {
            None => Annotation::Unannotated,
            Some(t) if t.is_empty() => Annotation::Empty,
            Some(t) => Annotation::Tagged(t),
        }
    }

    /// `(annotated, total)`.
    pub fn progress(&self) -> (usize, usize) {
        (self.annotations.len(), self.items.len())
    }

    /// Stores `tags` for `item` (last write wins) and appends to the audit log.
    pub fn record_annotation<S: AsRef<str>>(&mut self, item: &str, tags: &[S]) -> Result<(), TriageError> {
        self.record_annotation_at(item, tags, now_unix())
    }

    pub fn record_annotation_at<S: AsRef<str>>(&mut self, item: &str, tags: &[S], unix_time: u64) -> Result<(), TriageError> {
        if self.item(item).is_none() {
            return Err(TriageError::Validation(format!("unknown item `{item}`")));
        }
        let mut set = BTreeSet::new();
        for t in tags {
            let t = t.as_ref();
            if !self.taxonomy.contains(self.kind, t) {
                return Err(TriageError::Validation(format!(
                    "tag `{t}` is not defined for {} sessions",
                    self.kind
                )));
            }
            set.insert(t.to_string());
        }
        let previous = self.annotations.insert(item.to_string(), set.clone());
        self.audit.push(AuditEntry {
            seq: self.audit.len() as u64,
            item: item.to_string(),
            tags: set.into_iter().collect(),
            previous: previous.map(|p| p.into_iter().collect()),
            unix_time,
        });
        Ok(())
    }

    pub fn validate(&self) -> Result<(), TriageError> {
        self.taxonomy.validate()?;
        let mut ids = BTreeSet::new();
        for i in &self.items {
            if !ids.insert(i.id.as_str()) {
                return Err(TriageError::Validation(format!("duplicate item `{}`", i.id)));
            }
        }
        if self.items.len() != self.requested.min(self.population) {
            return Err(TriageError::Validation(format!(
                "{} items for min({}, {})",
                self.items.len(),
                self.requested,
                self.population
            )));
        }
        for (item, tags) in &self.annotations {
            if !ids.contains(item.as_str()) {
                return Err(TriageError::Validation(format!("annotation for unknown item `{item}`")));
            }
            if let Some(t) = tags.iter().find(|t| !self.taxonomy.contains(self.kind, t)) {
                return Err(TriageError::Validation(format!("item `{item}` carries undefined tag `{t}`")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), TriageError> {
        let json = serde_json::to_string_pretty(self).expect("session serializes");
        std::fs::write(path, json).map_err(|source| TriageError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TriageError> {
        let text = std::fs::read_to_string(path).map_err(|source| TriageError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let s: Self = serde_json::from_str(&text).map_err(|e| TriageError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagFrequency {
    pub tag: String,
    pub count: usize,
    pub denominator: usize,
    /// `None` when the denominator is zero.
    pub percent: Option<f64>,
}

impl TagFrequency {
    fn new(tag: &str, count: usize, denominator: usize) -> Self {
        Self {
            tag: tag.to_string(),
            count,
            denominator,
            percent: (denominator > 0).then(|| 100.0 * count as f64 / denominator as f64),
        }
    }
}

/// Doubtful-label share over all annotated items; every other tag over the
/// annotated items whose label is not doubtful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub session_id: String,
    pub focal_class: String,
    pub kind: ErrorKind,
    pub annotated: usize,
    pub total: usize,
    pub doubtful: TagFrequency,
    pub undoubtful: usize,
    pub tags: Vec<TagFrequency>,
}

pub fn frequency_report(session: &TriageSession) -> Result<FrequencyReport, TriageError> {
    let annotated = session.annotations.len();
    if annotated == 0 {
        return Err(TriageError::Report("no annotated items".into()));
    }
    let doubtful = session.annotations.values().filter(|t| t.contains(DOUBTFUL_LABEL)).count();
    let clean: Vec<&BTreeSet<String>> = session.annotations.values().filter(|t| !t.contains(DOUBTFUL_LABEL)).collect();
    let tags = session
        .taxonomy
        .tags(session.kind)
        .iter()
        .filter(|t| t.id != DOUBTFUL_LABEL)
        .map(|t| TagFrequency::new(&t.id, clean.iter().filter(|s| s.contains(&t.id)).count(), clean.len()))
        .collect();
    Ok(FrequencyReport {
        session_id: session.session_id.clone(),
        focal_class: session.focal_class.clone(),
        kind: session.kind,
        annotated,
        total: session.items.len(),
        doubtful: TagFrequency::new(DOUBTFUL_LABEL, doubtful, annotated),
        undoubtful: clean.len(),
        tags,
    })
}

fn pct(p: Option<f64>) -> String {
    p.map_or_else(|| "NA".into(), |v| format!("{v:.1}%"))
}

impl FrequencyReport {
    /// Plain-text tables.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "session {} ({} {}): {}/{} annotated",
            self.session_id, self.focal_class, self.kind, self.annotated, self.total
        );
        let _ = writeln!(out, "\nover all annotated items");
        let _ = writeln!(out, "{:<24} {:>6} {:>6} {:>8}", "tag", "count", "of", "percent");
        let d = &self.doubtful;
        let _ = writeln!(out, "{:<24} {:>6} {:>6} {:>8}", d.tag, d.count, d.denominator, pct(d.percent));
        let _ = writeln!(out, "\nover items with undoubtful labels ({})", self.undoubtful);
        let _ = writeln!(out, "{:<24} {:>6} {:>6} {:>8}", "tag", "count", "of", "percent");
        for t in &self.tags {
            let _ = writeln!(out, "{:<24} {:>6} {:>6} {:>8}", t.tag, t.count, t.denominator, pct(t.percent));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SchemaKind;
    use crate::models::tests::corpus as toy;
    use crate::predictions::Head;
    use proptest::prelude::*;

    fn session(kind: ErrorKind, n: usize) -> TriageSession {
        TriageSession {
            session_id: "s".into(),
            focal_class: "toxic".into(),
            kind,
            producer: "m".into(),
            seed: 0,
            population: n,
            requested: n,
            taxonomy: ErrorTaxonomy::default(),
            items: (0..n)
                .map(|i| TriageItem {
                    id: format!("i{i}"),
                    text: format!("text {i}"),
                    gold: vec!["toxic".into()],
                    score: 0.1,
                })
                .collect(),
            annotations: BTreeMap::new(),
            audit: Vec::new(),
        }
    }

    #[test]
    fn paper_arithmetic() {
        let mut s = session(ErrorKind::Fn, 200);
        for i in 0..200 {
            let tags: Vec<&str> = if i < 46 {
                vec![DOUBTFUL_LABEL]
            } else if (i - 46) % 2 == 0 {
                vec!["no_swear_words"]
            } else {
                vec![]
            };
            s.record_annotation(&format!("i{i}"), &tags).unwrap();
        }
        let r = frequency_report(&s).unwrap();
        assert_eq!(r.doubtful.percent, Some(23.0));
        assert_eq!(r.undoubtful, 154);
        let nsw = r.tags.iter().find(|t| t.tag == "no_swear_words").unwrap();
        assert_eq!((nsw.count, nsw.percent), (77, Some(50.0)));
    }

    #[test]
    fn tri_state_and_audit() {
        let mut s = session(ErrorKind::Fn, 3);
        assert_eq!(s.annotation("i0"), Annotation::Unannotated);
        s.record_annotation::<&str>("i0", &[]).unwrap();
        assert_eq!(s.annotation("i0"), Annotation::Empty);
        s.record_annotation("i0", &["sarcasm_irony"]).unwrap();
        assert!(matches!(s.annotation("i0"), Annotation::Tagged(t) if t.contains("sarcasm_irony")));
        assert_eq!(s.audit.len(), 2);
        assert_eq!(s.audit[1].previous, Some(vec![]));
        assert_eq!(s.progress(), (1, 3));

        let r = frequency_report(&s).unwrap();
        assert_eq!(r.annotated, 1);
        for t in &r.tags {
            let expect = if t.tag == "sarcasm_irony" { 100.0 } else { 0.0 };
            assert_eq!(t.percent, Some(expect));
        }
        assert_eq!(r.doubtful.percent, Some(0.0));
    }

    #[test]
    fn validation_errors() {
        let mut s = session(ErrorKind::Fn, 2);
        assert!(matches!(s.record_annotation("i0", &["quotation_reference"]), Err(TriageError::Validation(_))));
        assert!(matches!(s.record_annotation("nope", &["sarcasm_irony"]), Err(TriageError::Validation(_))));
        assert!(s.audit.is_empty());
        assert!(matches!(frequency_report(&s), Err(TriageError::Report(_))));
        s.taxonomy
            .extend(ErrorKind::Fn, tag("dialect", "Dialect-specific phrasing."))
            .unwrap();
        s.record_annotation("i1", &["dialect"]).unwrap();
        assert!(s.taxonomy.extend(ErrorKind::Fn, tag("dialect", "")).is_err());
    }

    #[test]
    fn session_file_round_trip() {
        let mut s = session(ErrorKind::Fp, 4);
        s.record_annotation("i2", &["swear_word_usage", DOUBTFUL_LABEL]).unwrap();
        s.record_annotation::<&str>("i3", &[]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        s.save(&p).unwrap();
        assert_eq!(TriageSession::load(&p).unwrap(), s);
    }

    fn scored(n: usize) -> (crate::corpus::Corpus, PredictionMatrix, Vec<Vec<bool>>) {
        let rows: Vec<(String, Vec<bool>)> = (0..n).map(|i| (format!("t{i}"), vec![i % 3 != 0])).collect();
        let rows: Vec<(&str, Vec<bool>)> = rows.iter().map(|(t, l)| (t.as_str(), l.clone())).collect();
        let c = toy(SchemaKind::MultiLabel, &["toxic"], &rows);
        let scores: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.9 } else { 0.1 }).collect();
        let pm = PredictionMatrix::new(c.all().ids(), vec!["toxic".into()], scores, Head::SigmoidPerClass, "m").unwrap();
        let pred = (0..n).map(|i| vec![pm.get(i, 0) >= 0.5]).collect();
        (c, pm, pred)
    }

    #[test]
    fn sampling_sizes() {
        let (c, pm, pred) = scored(30);
        let fn_pop = (0..30).filter(|i| i % 3 != 0 && i % 2 == 1).count();
        let s = sample_errors(&c.all(), &pm, &pred, "toxic", ErrorKind::Fn, 200, 1).unwrap();
        assert_eq!((s.population, s.items.len()), (fn_pop, fn_pop));
        let s = sample_errors(&c.all(), &pm, &pred, "toxic", ErrorKind::Fp, 2, 1).unwrap();
        assert_eq!(s.items.len(), 2);
        for it in &s.items {
            assert!(it.gold.is_empty() && it.score >= 0.5);
        }
        let none: Vec<Vec<bool>> = c.all().iter().map(|s| s.labels.clone()).collect();
        let s = sample_errors(&c.all(), &pm, &none, "toxic", ErrorKind::Fn, 5, 1).unwrap();
        assert!(s.items.is_empty() && s.population == 0);
        assert!(sample_errors(&c.all(), &pm, &pred, "nope", ErrorKind::Fn, 5, 1).is_err());
    }

    proptest! {
        #[test]
        fn sampling_is_seeded_and_sized(n in 0usize..40, seed in any::<u64>()) {
            let (c, pm, pred) = scored(60);
            let a = sample_errors(&c.all(), &pm, &pred, "toxic", ErrorKind::Fn, n, seed).unwrap();
            let b = sample_errors(&c.all(), &pm, &pred, "toxic", ErrorKind::Fn, n, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.items.len(), n.min(a.population));
            prop_assert!(a.validate().is_ok());
        }

        #[test]
        fn denominators_ignore_unannotated(k in 1usize..20, extra in 0usize..20) {
            let mut s = session(ErrorKind::Fn, k + extra);
            for i in 0..k {
                s.record_annotation(&format!("i{i}"), &["metaphor_comparison"]).unwrap();
            }
            let r = frequency_report(&s).unwrap();
            let m = r.tags.iter().find(|t| t.tag == "metaphor_comparison").unwrap();
            prop_assert_eq!(m.percent, Some(100.0));
            prop_assert_eq!(r.annotated, k);
        }
    }
}
