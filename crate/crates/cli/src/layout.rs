//! File layout under the artifact root.

use std::path::{Path, PathBuf};

/// Default embedding table location, relative to the artifact root.
pub const DEFAULT_SUBWORD: &str = "embeddings/subword.bin";

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn at(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    pub fn corpus(&self) -> PathBuf {
        self.at("corpus.ndjson")
    }

    pub fn distribution(&self) -> PathBuf {
        self.at("reports/distribution.json")
    }

    pub fn subword(&self) -> PathBuf {
        self.at(DEFAULT_SUBWORD)
    }

    pub fn model(&self, name: &str) -> PathBuf {
        self.at(format!("models/{name}.bin"))
    }

    pub fn predictions_dir(&self) -> PathBuf {
        self.at("predictions")
    }

    /// `split` is `train` or `test`.
    pub fn predictions(&self, set: &str, split: &str) -> PathBuf {
        self.at(format!("predictions/{set}.{split}.csv"))
    }

    /// Names of stored prediction sets that have test scores, sorted.
    pub fn prediction_sets(&self) -> Vec<String> {
        let mut out: Vec<String> = std::fs::read_dir(self.predictions_dir())
            .into_iter()
            .flatten()
            .flatten()
            .filter_map(|e| e.file_name().to_str()?.strip_suffix(".test.csv").map(String::from))
            .collect();
        out.sort();
        out
    }

    pub fn folds(&self) -> PathBuf {
        self.at("oof/folds.json")
    }

    pub fn oof_train(&self) -> PathBuf {
        self.at("oof/train.csv")
    }

    pub fn oof_test(&self, fold: usize) -> PathBuf {
        self.at(format!("oof/test_fold{fold}.csv"))
    }

    pub fn stacker(&self, set: &str, fold: usize) -> PathBuf {
        self.at(format!("stack/{set}_{fold}.bin"))
    }

    pub fn stacker_dump(&self, set: &str, fold: usize) -> PathBuf {
        self.at(format!("stack/{set}_{fold}.txt"))
    }

    pub fn thresholds(&self, set: &str) -> PathBuf {
        self.at(format!("thresholds/{set}.json"))
    }

    pub fn metrics(&self, set: &str, ext: &str) -> PathBuf {
        self.at(format!("reports/{set}.metrics.{ext}"))
    }

    pub fn table3(&self) -> PathBuf {
        self.at("reports/table3.txt")
    }

    pub fn correlation(&self, a: &str, b: &str, ext: &str) -> PathBuf {
        self.at(format!("reports/correlation_{a}_vs_{b}.{ext}"))
    }

    pub fn table4(&self) -> PathBuf {
        self.at("reports/table4.txt")
    }

    pub fn session(&self) -> PathBuf {
        self.at("triage/session.json")
    }

    pub fn manifests(&self) -> PathBuf {
        self.at("manifests")
    }

    pub fn index(&self) -> PathBuf {
        self.at("manifests/index.json")
    }

    /// Path relative to the root when inside it.
    pub fn relative(&self, p: &Path) -> String {
        p.strip_prefix(&self.root).unwrap_or(p).display().to_string()
    }
}
