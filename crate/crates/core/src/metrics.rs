//! Precision/recall/F1, ROC AUC, per-class threshold search and Pearson
//! disparity between classifiers.
//!
//! Conventions: a ratio whose denominator is zero is reported as 0 and the
//! class is listed in the report's `zero_division` flags. Multi-class
//! decisions take the argmax with ties resolved to the lowest class index.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predictions::PredictionMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("undefined metric: {0}")]
    Undefined(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVector {
    pub classes: Vec<String>,
    pub values: Vec<f64>,
}

impl ThresholdVector {
    pub fn new(classes: Vec<String>, values: Vec<f64>) -> Result<Self, MetricsError> {
        if classes.len() != values.len() {
            return Err(MetricsError::Shape(format!(
                "{} thresholds for {} classes",
                values.len(),
                classes.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(MetricsError::Shape(format!("threshold {v} outside (0,1)")));
        }
        Ok(Self { classes, values })
    }

    pub fn uniform(classes: &[String], t: f64) -> Self {
        Self {
            classes: classes.to_vec(),
            values: vec![t; classes.len()],
        }
    }

    pub fn get(&self, class: &str) -> Option<f64> {
        self.classes
            .iter()
            .position(|c| c == class)
            .map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Thresholds(ThresholdVector),
    Argmax,
}

/// Binary label rows from scores.
pub fn binarize(scores: &PredictionMatrix, decision: &Decision) -> Result<Vec<Vec<bool>>, MetricsError> {
    let k = scores.num_classes();
    match decision {
        Decision::Thresholds(t) => {
            if t.classes != scores.classes() {
                return Err(MetricsError::Shape(
                    "threshold classes differ from prediction classes".into(),
                ));
            }
            Ok((0..scores.rows())
                .map(|i| scores.row(i).iter().zip(&t.values).map(|(s, t)| s >= t).collect())
                .collect())
        }
        Decision::Argmax => Ok((0..scores.rows())
            .map(|i| {
                let row = scores.row(i);
                let best = argmax(row);
                (0..k).map(|c| c == best).collect()
            })
            .collect()),
    }
}

/// Index of the largest value; the first one on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True when some ratio fell back to 0 because of a zero denominator.
    pub zero_division: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn of(pred: &[bool], gold: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&p, &g) in pred.iter().zip(gold) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn prf1(&self) -> Prf1 {
        let ratio = |n: u64, d: u64| if d == 0 { None } else { Some(n as f64 / d as f64) };
        let p = ratio(self.tp, self.tp + self.fp);
        let r = ratio(self.tp, self.tp + self.fn_);
        let f = ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_);
        Prf1 {
            precision: p.unwrap_or(0.0),
            recall: r.unwrap_or(0.0),
            f1: f.unwrap_or(0.0),
            zero_division: p.is_none() || r.is_none() || f.is_none(),
        }
    }
}

pub fn prf1(pred: &[bool], gold: &[bool]) -> Result<Prf1, MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::Shape(format!(
            "{} predictions vs {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    Ok(Confusion::of(pred, gold).prf1())
}

/// Column `class` of a row-major boolean matrix.
pub fn column(rows: &[Vec<bool>], class: usize) -> Vec<bool> {
    rows.iter().map(|r| r[class]).collect()
}

/// ROC AUC as the Mann-Whitney statistic with average ranks for ties.
pub fn roc_auc(scores: &[f64], gold: &[bool]) -> Result<f64, MetricsError> {
    if scores.len() != gold.len() {
        return Err(MetricsError::Shape(format!(
            "{} scores vs {} gold labels",
            scores.len(),
            gold.len()
        )));
    }
    let pos = gold.iter().filter(|g| **g).count();
    let neg = gold.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::Undefined(
            "ROC AUC needs both classes in gold".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of (1-based, tie-averaged) ranks of the positives, doubled to stay integral.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank2 = (i + 1 + j + 1) as u128;
        let p = order[i..=j].iter().filter(|&&o| gold[o]).count() as u128;
        rank_sum2 += rank2 * p;
        i = j + 1;
    }
    let (pos, neg) = (pos as u128, neg as u128);
    let u2 = rank_sum2 - pos * (pos + 1);
    Ok(u2 as f64 / (2 * pos * neg) as f64)
}

/// Candidate thresholds: midpoints of consecutive distinct values of
/// `{0, 1} ∪ scores`, plus 0.5, sorted ascending.
pub fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = scores.iter().copied().chain([0.0, 1.0]).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mut c: Vec<f64> = v.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
    c.push(0.5);
    c.sort_by(f64::total_cmp);
    c.dedup();
    c.retain(|t| *t > 0.0 && *t < 1.0);
    c
}

/// Threshold maximizing F1 over the candidate set (lowest on ties), with its F1.
pub fn best_threshold(scores: &[f64], gold: &[bool]) -> (f64, f64) {
    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(gold.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_pos = gold.iter().filter(|g| **g).count() as u64;
    // below[i] = gold positives among the i smallest scores
    let mut below = Vec::with_capacity(pairs.len() + 1);
    below.push(0u64);
    for (_, g) in &pairs {
        below.push(below.last().unwrap() + u64::from(*g));
    }
    let n = pairs.len();
    let mut best: Option<(f64, u64, u64)> = None;
    for t in threshold_candidates(scores) {
        let idx = pairs.partition_point(|p| p.0 < t);
        let tp = total_pos - below[idx];
        let predicted = (n - idx) as u64;
        // F1 = 2tp / (predicted + total_pos), compared as exact fractions
        let den = predicted + total_pos;
        let (num, den) = if den == 0 { (0, 1) } else { (2 * tp, den) };
        let better = best.is_none_or(|(_, bn, bd)| {
            u128::from(num) * u128::from(bd) > u128::from(bn) * u128::from(den)
        });
        if better {
            best = Some((t, num, den));
        }
    }
    let (t, num, den) = best.expect("candidate set always contains 0.5");
    (t, num as f64 / den as f64)
}

/// Per-class F1-optimal thresholds.
pub fn search_thresholds(scores: &PredictionMatrix, gold: &[Vec<bool>]) -> Result<ThresholdVector, MetricsError> {
    check_gold(scores, gold)?;
    let values = (0..scores.num_classes())
        .map(|c| best_threshold(&scores.column(c), &column(gold, c)).0)
        .collect();
    ThresholdVector::new(scores.classes().to_vec(), values)
}

/// Product-moment correlation; an error when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::Shape(format!("{} vs {} values", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(MetricsError::Undefined("pearson needs at least 2 values".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(MetricsError::Undefined("zero variance".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

fn check_gold(scores: &PredictionMatrix, gold: &[Vec<bool>]) -> Result<(), MetricsError> {
    if gold.len() != scores.rows() {
        return Err(MetricsError::Shape(format!(
            "{} prediction rows vs {} gold rows",
            scores.rows(),
            gold.len()
        )));
    }
    if gold.iter().any(|g| g.len() != scores.num_classes()) {
        return Err(MetricsError::Shape("gold row width differs from class count".into()));
    }
    Ok(())
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// None when gold holds a single label value for this class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Mean over classes with a defined AUC.
    pub macro_auc: Option<f64>,
    pub decision: Decision,
    pub zero_division: Vec<String>,
    pub undefined_auc: Vec<String>,
}

pub fn evaluate(scores: &PredictionMatrix, gold: &[Vec<bool>], decision: &Decision) -> Result<MetricsReport, MetricsError> {
    check_gold(scores, gold)?;
    let pred = binarize(scores, decision)?;
    let mut per_class = Vec::new();
    let mut zero_division = Vec::new();
    let mut undefined_auc = Vec::new();
    for (c, name) in scores.classes().iter().enumerate() {
        let g = column(gold, c);
        let m = prf1(&column(&pred, c), &g)?;
        if m.zero_division {
            zero_division.push(name.clone());
        }
        let auc = match roc_auc(&scores.column(c), &g) {
            Ok(a) => Some(a),
            Err(MetricsError::Undefined(_)) => {
                undefined_auc.push(name.clone());
                None
            }
            Err(e) => return Err(e),
        };
        per_class.push(ClassMetrics {
            class: name.clone(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            auc,
        });
    }
    let aucs: Vec<f64> = per_class.iter().filter_map(|c| c.auc).collect();
    Ok(MetricsReport {
        model: scores.producer().to_string(),
        macro_precision: mean(per_class.iter().map(|c| c.precision)),
        macro_recall: mean(per_class.iter().map(|c| c.recall)),
        macro_f1: mean(per_class.iter().map(|c| c.f1)),
        macro_auc: (!aucs.is_empty()).then(|| mean(aucs.into_iter())),
        per_class,
        decision: decision.clone(),
        zero_division,
        undefined_auc,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.6}"))
}

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,class,precision,recall,f1,auc\n");
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6},{:.6},{}",
                self.model, c.class, c.precision, c.recall, c.f1, opt(c.auc)
            );
        }
        let _ = writeln!(
            s,
            "{},macro,{:.6},{:.6},{:.6},{}",
            self.model, self.macro_precision, self.macro_recall, self.macro_f1, opt(self.macro_auc)
        );
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCorrelation {
    pub class: String,
    /// None when either model's scores have zero variance.
    pub r: Option<f64>,
    pub f1_a: f64,
    pub f1_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub model_a: String,
    pub model_b: String,
    pub per_class: Vec<ClassCorrelation>,
    /// Mean over classes with a defined r; None if no class has one.
    pub mean_r: Option<f64>,
    pub mean_f1_a: f64,
    pub mean_f1_b: f64,
    pub undefined: Vec<String>,
}

pub fn correlation_report(
    a: &PredictionMatrix,
    b: &PredictionMatrix,
    gold: &[Vec<bool>],
    decision_a: &Decision,
    decision_b: &Decision,
) -> Result<CorrelationReport, MetricsError> {
    if a.ids() != b.ids() || a.classes() != b.classes() {
        return Err(MetricsError::Shape(format!(
            "`{}` and `{}` are not aligned",
            a.producer(),
            b.producer()
        )));
    }
    let ra = evaluate(a, gold, decision_a)?;
    let rb = evaluate(b, gold, decision_b)?;
    let mut per_class = Vec::new();
    let mut undefined = Vec::new();
    for (c, name) in a.classes().iter().enumerate() {
        let r = match pearson(&a.column(c), &b.column(c)) {
            Ok(r) => Some(r),
            Err(MetricsError::Undefined(_)) => {
                undefined.push(name.clone());
                None
            }
            Err(e) => return Err(e),
        };
        per_class.push(ClassCorrelation {
            class: name.clone(),
            r,
            f1_a: ra.per_class[c].f1,
            f1_b: rb.per_class[c].f1,
        });
    }
    let rs: Vec<f64> = per_class.iter().filter_map(|c| c.r).collect();
    Ok(CorrelationReport {
        model_a: a.producer().to_string(),
        model_b: b.producer().to_string(),
        mean_r: (!rs.is_empty()).then(|| mean(rs.into_iter())),
        mean_f1_a: ra.macro_f1,
        mean_f1_b: rb.macro_f1,
        per_class,
        undefined,
    })
}

impl CorrelationReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("model_a,model_b,class,f1_a,f1_b,pearson\n");
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6},{}",
                self.model_a, self.model_b, c.class, c.f1_a, c.f1_b, opt(c.r)
            );
        }
        let _ = writeln!(
            s,
            "{},{},avg,{:.6},{:.6},{}",
            self.model_a, self.model_b, self.mean_f1_a, self.mean_f1_b, opt(self.mean_r)
        );
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn short(v: f64) -> String {
    let s = format!("{v:.3}");
    s.strip_prefix('0').map(String::from).unwrap_or(s)
}

/// Model-by-metric comparison table (precision, recall, F1, AUC).
pub fn table3(reports: &[MetricsReport]) -> String {
    let width = reports.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<width$}  {:>5}  {:>5}  {:>5}  {:>5}\n", "Model", "P", "R", "F1", "AUC");
    for r in reports {
        let _ = writeln!(
            s,
            "{:<width$}  {:>5}  {:>5}  {:>5}  {:>5}",
            r.model,
            short(r.macro_precision),
            short(r.macro_recall),
            short(r.macro_f1),
            r.macro_auc.map_or_else(|| "NA".into(), short)
        );
    }
    s
}

/// Pairwise F1 and Pearson blocks, one block per model pair.
pub fn table4(reports: &[CorrelationReport], classes: Option<&[String]>) -> String {
    let mut s = format!("{:<14}  {:>12}  {:>12}  {:>7}\n", "Class", "F1", "", "Pearson");
    for r in reports {
        let _ = writeln!(s, "{:<14}  {:>12}  {:>12}", "", r.model_a, r.model_b);
        let _ = writeln!(
            s,
            "{:<14}  {:>12}  {:>12}  {:>7}",
            "avg.",
            short(r.mean_f1_a),
            short(r.mean_f1_b),
            r.mean_r.map_or_else(|| "NA".into(), short)
        );
        for c in &r.per_class {
            if classes.is_some_and(|keep| !keep.contains(&c.class)) {
                continue;
            }
            let _ = writeln!(
                s,
                "{:<14}  {:>12}  {:>12}  {:>7}",
                c.class,
                short(c.f1_a),
                short(c.f1_b),
                c.r.map_or_else(|| "NA".into(), short)
            );
        }
    }
    s
}
