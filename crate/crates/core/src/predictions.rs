//! Per-sample, per-class score matrices shared by models, stacking and metrics.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{self, ArtifactError};
use crate::corpus::SchemaKind;

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("invalid prediction matrix: {0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Csv { path: String, message: String },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    SigmoidPerClass,
    Softmax,
}

impl Head {
    pub fn for_kind(kind: SchemaKind) -> Self {
        match kind {
            SchemaKind::MultiLabel => Head::SigmoidPerClass,
            SchemaKind::MultiClass => Head::Softmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatrix {
    ids: Vec<String>,
    classes: Vec<String>,
    /// Row-major `ids.len() x classes.len()`.
    scores: Vec<f64>,
    head: Head,
    producer: String,
}

const PRED_MAGIC: &[u8; 8] = b"TXPREDS\0";
const PRED_VERSION: u32 = 1;

impl PredictionMatrix {
    pub fn new(
        ids: Vec<String>,
        classes: Vec<String>,
        scores: Vec<f64>,
        head: Head,
        producer: impl Into<String>,
    ) -> Result<Self, PredictionError> {
        let m = Self {
            ids,
            classes,
            scores,
            head,
            producer: producer.into(),
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), PredictionError> {
        let bad = |m: String| Err(PredictionError::Invalid(m));
        if self.classes.is_empty() {
            return bad("no classes".into());
        }
        if self.scores.len() != self.ids.len() * self.classes.len() {
            return bad(format!(
                "{} scores for {} rows x {} classes",
                self.scores.len(),
                self.ids.len(),
                self.classes.len()
            ));
        }
        if let Some(v) = self.scores.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return bad(format!("score {v} outside [0,1]"));
        }
        if self.head == Head::Softmax {
            for (i, row) in self.scores.chunks(self.classes.len()).enumerate() {
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-6 {
                    return bad(format!("softmax row {} sums to {s}", self.ids[i]));
                }
            }
        }
        Ok(())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn producer(&self) -> &str {
        &self.producer
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.classes.len();
        &self.scores[i * k..(i + 1) * k]
    }

    pub fn get(&self, i: usize, class: usize) -> f64 {
        self.scores[i * self.classes.len() + class]
    }

    pub fn column(&self, class: usize) -> Vec<f64> {
        self.scores
            .chunks(self.classes.len())
            .map(|r| r[class])
            .collect()
    }

    pub fn with_producer(mut self, producer: impl Into<String>) -> Self {
        self.producer = producer.into();
        self
    }

    /// Rows reordered to follow `ids`; every id must be present.
    pub fn align_to(&self, ids: &[String]) -> Result<Self, PredictionError> {
        let pos: std::collections::HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut scores = Vec::with_capacity(ids.len() * self.classes.len());
        for id in ids {
            let &i = pos
                .get(id.as_str())
                .ok_or_else(|| PredictionError::Invalid(format!("missing prediction for `{id}`")))?;
            scores.extend_from_slice(self.row(i));
        }
        Ok(Self {
            ids: ids.to_vec(),
            classes: self.classes.clone(),
            scores,
            head: self.head,
            producer: self.producer.clone(),
        })
    }

    /// Elementwise mean of matrices sharing ids, classes and head.
    pub fn mean(parts: &[PredictionMatrix], producer: impl Into<String>) -> Result<Self, PredictionError> {
        let first = parts
            .first()
            .ok_or_else(|| PredictionError::Invalid("nothing to average".into()))?;
        for p in &parts[1..] {
            if p.ids != first.ids || p.classes != first.classes || p.head != first.head {
                return Err(PredictionError::Invalid(format!(
                    "`{}` is not aligned with `{}`",
                    p.producer, first.producer
                )));
            }
        }
        let n = parts.len() as f64;
        let scores = (0..first.scores.len())
            .map(|j| parts.iter().map(|p| p.scores[j]).sum::<f64>() / n)
            .collect();
        Ok(Self {
            ids: first.ids.clone(),
            classes: first.classes.clone(),
            scores,
            head: first.head,
            producer: producer.into(),
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), PredictionError> {
        let err = |e: csv::Error| PredictionError::Csv {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        let mut header = vec!["id".to_string()];
        header.extend(self.classes.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| err(e.into()))
    }

    pub fn read_csv(path: &Path, head: Head, producer: impl Into<String>) -> Result<Self, PredictionError> {
        let p = path.display().to_string();
        let err = |m: String| PredictionError::Csv {
            path: p.clone(),
            message: m,
        };
        let mut r = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
        let header = r.headers().map_err(|e| err(e.to_string()))?.clone();
        if header.get(0) != Some("id") || header.len() < 2 {
            return Err(err("expected header `id,<classes>`".into()));
        }
        let classes: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut ids = Vec::new();
        let mut scores = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            if rec.len() != header.len() {
                return Err(err(format!("row {}: {} fields", i + 1, rec.len())));
            }
            ids.push(rec[0].to_string());
            for f in rec.iter().skip(1) {
                scores.push(
                    f.parse::<f64>()
                        .map_err(|_| err(format!("row {}: bad score `{f}`", i + 1)))?,
                );
            }
        }
        Self::new(ids, classes, scores, head, producer)
    }

    pub fn save(&self, path: &Path) -> Result<(), PredictionError> {
        artifact::write(path, PRED_MAGIC, PRED_VERSION, &[0; 32], self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PredictionError> {
        let (m, _): (Self, _) = artifact::read(path, PRED_MAGIC, PRED_VERSION)?;
        m.validate()?;
        Ok(m)
    }
}
